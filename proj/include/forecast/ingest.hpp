#pragma once

#include <istream>
#include <string>

#include "forecast/data.hpp"

namespace forecast::data {

enum class SourceFormat { kNbaTracking, kNeutralCsv };

SourceFormat source_format_from_string(const std::string& name);

// Neutral CSV: header `t,object_id,team_id,x,y`, one row per object per
// frame, seconds and meters, rows sorted by t then object_id.
//
// NBA tracking: the public structured-text event files; per moment an array
// of (team id, player id, x, y, z) plus timestamps. Only x, y, ids and
// timestamps are consumed; x/y arrive in feet and are converted to meters.
RawGame ingest_game(std::istream& in, SourceFormat format,
                    const std::string& source_name = "<stream>");

RawGame ingest_game_file(const std::string& path, SourceFormat format);

}  // namespace forecast::data
