#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "forecast/errors.hpp"
#include "forecast/ingest.hpp"

using namespace forecast;
using namespace forecast::data;

TEST_CASE("neutral csv with 3 frames and 2 objects") {
  std::istringstream in(
      "t,object_id,team_id,x,y\n"
      "0.00,1,0,0.0,0.0\n"
      "0.00,2,1,1.0,1.0\n"
      "0.04,1,0,0.1,0.0\n"
      "0.04,2,1,1.0,1.1\n"
      "0.08,1,0,0.2,0.0\n"
      "0.08,2,1,1.0,1.2\n");
  RawGame game = ingest_game(in, SourceFormat::kNeutralCsv, "toy");
  CHECK(game.moments.size() == 3);
  CHECK(game.object_ids == std::vector<long long>{1, 2});
  CHECK(game.team_ids == std::vector<long long>{0, 1});
  CHECK(game.flagged_moments == 0);
}

TEST_CASE("malformed csv row names the line") {
  std::istringstream in(
      "t,object_id,team_id,x,y\n"
      "0.00,1,0,0.0,0.0\n"
      "0.04,1,0,oops,0.0\n");
  CHECK_THROWS_WITH_AS(ingest_game(in, SourceFormat::kNeutralCsv, "toy"),
                       doctest::Contains("toy:3"), ParseError);
}

TEST_CASE("unsorted csv is rejected") {
  std::istringstream in(
      "t,object_id,team_id,x,y\n"
      "0.04,1,0,0.0,0.0\n"
      "0.00,1,0,0.0,0.0\n");
  CHECK_THROWS_AS(ingest_game(in, SourceFormat::kNeutralCsv, "toy"),
                  ParseError);
}

TEST_CASE("unknown format name is a parameter error") {
  CHECK_THROWS_AS(source_format_from_string("protobuf"), ParameterError);
  CHECK(source_format_from_string("neutral_csv") == SourceFormat::kNeutralCsv);
  CHECK(source_format_from_string("nba_tracking") ==
        SourceFormat::kNbaTracking);
}

namespace {

// Minimal synthetic NBA tracking payload: 11 objects, ball first with
// team id -1, coordinates in feet.
std::string nba_payload(bool drop_ball_in_second_moment) {
  std::string objects_full = R"([-1,100,47.0,25.0,5.0])";
  for (int p = 0; p < 10; ++p) {
    objects_full += ",[" + std::to_string(p < 5 ? 10 : 20) + "," +
                    std::to_string(p + 1) + "," +
                    std::to_string(10.0 + p) + ",20.0,0.0]";
  }
  std::string objects_no_ball;
  for (int p = 0; p < 10; ++p) {
    if (p) objects_no_ball += ",";
    objects_no_ball += "[" + std::to_string(p < 5 ? 10 : 20) + "," +
                       std::to_string(p + 1) + "," +
                       std::to_string(10.0 + p) + ",20.0,0.0]";
  }
  std::string payload = R"({"gameid":"0021500001",)"
                        R"("home":{"abbreviation":"LAL"},)"
                        R"("visitor":{"abbreviation":"BOS"},)"
                        R"("events":[{"moments":[)";
  payload += "[1,1000,720.0,24.0,null,[" + objects_full + "]],";
  if (drop_ball_in_second_moment) {
    payload += "[1,1040,719.96,24.0,null,[" + objects_no_ball + "]],";
  } else {
    payload += "[1,1040,719.96,24.0,null,[" + objects_full + "]],";
  }
  payload += "[1,1080,719.92,24.0,null,[" + objects_full + "]]";
  payload += "]}]}";
  return payload;
}

}  // namespace

TEST_CASE("nba ingestion converts feet to meters") {
  std::istringstream in(nba_payload(false));
  RawGame game = ingest_game(in, SourceFormat::kNbaTracking, "game.json");
  CHECK(game.game_id == "0021500001");
  CHECK(game.home_team == "LAL");
  CHECK(game.away_team == "BOS");
  CHECK(game.moments.size() == 3);
  CHECK(game.object_ids.size() == 11);
  // Ball row: x = 47 ft -> 14.3256 m.
  bool found = false;
  for (const auto& o : game.moments[0].objects) {
    if (o.team_id == kBallTeamId) {
      CHECK(o.x == doctest::Approx(14.3256).epsilon(1e-12));
      found = true;
    }
  }
  CHECK(found);
  // Timestamps from the millisecond clock, non-decreasing.
  CHECK(game.moments[0].t == 0.0);
  CHECK(game.moments[1].t == doctest::Approx(0.04));
}

TEST_CASE("moment missing the ball is flagged") {
  std::istringstream in(nba_payload(true));
  RawGame game = ingest_game(in, SourceFormat::kNbaTracking, "game.json");
  CHECK(game.flagged_moments == 1);
  CHECK(!game.moments[1].valid);
  CHECK(game.moments[0].valid);
  CHECK(game.moments[2].valid);
}
