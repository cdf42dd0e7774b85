#include "forecast/ingest.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include <json.hpp>

#include "forecast/errors.hpp"

namespace forecast::data {

namespace {

using nlohmann::json;

// Picks the most frequent object-id set as the canonical one and flags
// every moment that deviates from it.
void finalize_object_set(RawGame& game, bool require_nba_shape) {
  std::map<std::vector<long long>, std::size_t> counts;
  for (auto& m : game.moments) {
    std::vector<long long> ids;
    ids.reserve(m.objects.size());
    for (const auto& o : m.objects) ids.push_back(o.object_id);
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
      m.valid = false;
      continue;
    }
    counts[ids]++;
  }
  if (counts.empty()) {
    throw ParseError(game.game_id + ": no usable moments");
  }
  const auto best = std::max_element(
      counts.begin(), counts.end(),
      [](const auto& a, const auto& b) { return a.second < b.second; });
  const std::vector<long long>& canonical = best->first;

  if (require_nba_shape && canonical.size() != kNbaObjects) {
    throw ParseError(game.game_id + ": expected " +
                     std::to_string(kNbaObjects) +
                     " objects per moment, most frequent set has " +
                     std::to_string(canonical.size()));
  }

  game.object_ids = canonical;
  game.team_ids.assign(canonical.size(), 0);
  bool teams_found = false;
  for (auto& m : game.moments) {
    if (!m.valid) {
      ++game.flagged_moments;
      continue;
    }
    std::vector<long long> ids;
    for (const auto& o : m.objects) ids.push_back(o.object_id);
    std::sort(ids.begin(), ids.end());
    if (ids != canonical) {
      m.valid = false;
      ++game.flagged_moments;
      continue;
    }
    // Keep objects sorted by id so tensor columns line up across moments.
    std::sort(m.objects.begin(), m.objects.end(),
              [](const MomentObject& a, const MomentObject& b) {
                return a.object_id < b.object_id;
              });
    if (!teams_found) {
      for (std::size_t i = 0; i < m.objects.size(); ++i) {
        game.team_ids[i] = m.objects[i].team_id;
      }
      teams_found = true;
    }
  }
  if (require_nba_shape && teams_found) {
    const bool has_ball =
        std::any_of(game.team_ids.begin(), game.team_ids.end(),
                    [](long long t) { return t == kBallTeamId; });
    if (!has_ball) {
      throw ParseError(game.game_id + ": canonical object set has no ball");
    }
  }
}

RawGame ingest_neutral_csv(std::istream& in, const std::string& source) {
  RawGame game;
  game.game_id = source;
  std::string line;
  std::size_t lineno = 0;

  if (!std::getline(in, line)) {
    throw ParseError(source + ": empty input");
  }
  ++lineno;
  while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) {
    line.pop_back();
  }
  if (line != "t,object_id,team_id,x,y") {
    throw ParseError(source + ":1: expected header t,object_id,team_id,x,y");
  }

  double prev_t = -std::numeric_limits<double>::infinity();
  Moment current;
  bool have_current = false;
  while (std::getline(in, line)) {
    ++lineno;
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) {
      line.pop_back();
    }
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string field;
    double t, x, y;
    long long oid, tid;
    try {
      std::getline(ls, field, ',');
      t = std::stod(field);
      std::getline(ls, field, ',');
      oid = std::stoll(field);
      std::getline(ls, field, ',');
      tid = std::stoll(field);
      std::getline(ls, field, ',');
      x = std::stod(field);
      if (!std::getline(ls, field, ',')) throw std::invalid_argument("y");
      y = std::stod(field);
    } catch (const std::exception&) {
      throw ParseError(source + ":" + std::to_string(lineno) +
                       ": malformed row '" + line + "'");
    }
    if (t < prev_t - 1e-12) {
      throw ParseError(source + ":" + std::to_string(lineno) +
                       ": rows not sorted by t");
    }
    if (!have_current || t > current.t + 1e-12) {
      if (have_current) game.moments.push_back(std::move(current));
      current = Moment{};
      current.t = t;
      have_current = true;
      prev_t = t;
    }
    current.objects.push_back({oid, tid, x, y});
  }
  if (have_current) game.moments.push_back(std::move(current));
  if (game.moments.empty()) {
    throw ParseError(source + ": no data rows");
  }
  finalize_object_set(game, /*require_nba_shape=*/false);
  return game;
}

RawGame ingest_nba_tracking(std::istream& in, const std::string& source) {
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ParseError(source + ": " + e.what());
  }

  RawGame game;
  game.court = CourtSpec::nba();
  game.game_id = doc.value("gameid", source);
  if (doc.contains("home") && doc["home"].contains("abbreviation")) {
    game.home_team = doc["home"]["abbreviation"].get<std::string>();
  }
  if (doc.contains("visitor") && doc["visitor"].contains("abbreviation")) {
    game.away_team = doc["visitor"]["abbreviation"].get<std::string>();
  }
  if (!doc.contains("events") || !doc["events"].is_array()) {
    throw ParseError(source + ": missing events array");
  }

  // Events overlap in the raw files; moments are deduplicated by timestamp.
  std::map<long long, Moment> by_ms;
  for (const auto& event : doc["events"]) {
    if (!event.contains("moments")) continue;
    for (const auto& moment : event["moments"]) {
      if (!moment.is_array() || moment.size() < 6) {
        throw ParseError(source + ": malformed moment record");
      }
      const long long ms = moment[1].get<long long>();
      if (by_ms.count(ms)) continue;
      Moment m;
      for (const auto& obj : moment[5]) {
        if (!obj.is_array() || obj.size() < 4) {
          throw ParseError(source + ": malformed object record");
        }
        MomentObject o;
        o.team_id = obj[0].get<long long>();
        o.object_id = obj[1].get<long long>();
        o.x = obj[2].get<double>() * kFeetToMeters;
        o.y = obj[3].get<double>() * kFeetToMeters;
        m.objects.push_back(o);
      }
      by_ms.emplace(ms, std::move(m));
    }
  }
  if (by_ms.empty()) {
    throw ParseError(source + ": no moments found");
  }
  const long long t0 = by_ms.begin()->first;
  for (auto& [ms, m] : by_ms) {
    m.t = static_cast<double>(ms - t0) / 1000.0;
    game.moments.push_back(std::move(m));
  }
  finalize_object_set(game, /*require_nba_shape=*/true);
  return game;
}

}  // namespace

SourceFormat source_format_from_string(const std::string& name) {
  if (name == "nba_tracking") return SourceFormat::kNbaTracking;
  if (name == "neutral_csv") return SourceFormat::kNeutralCsv;
  throw ParameterError("unknown source format: " + name);
}

RawGame ingest_game(std::istream& in, SourceFormat format,
                    const std::string& source_name) {
  switch (format) {
    case SourceFormat::kNeutralCsv:
      return ingest_neutral_csv(in, source_name);
    case SourceFormat::kNbaTracking:
      return ingest_nba_tracking(in, source_name);
  }
  throw ParameterError("unknown source format");
}

RawGame ingest_game_file(const std::string& path, SourceFormat format) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return ingest_game(in, format, path);
}

}  // namespace forecast::data
