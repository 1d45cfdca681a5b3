#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "fedcf/data.hpp"

using namespace fedcf;

namespace {

std::string rows(std::size_t n, double dt) {
  std::string s = "time_s,leader_speed_mps,follower_speed_mps\n";
  for (std::size_t i = 0; i < n; ++i) {
    s += std::to_string(i * dt) + ",15.0,14.5\n";
  }
  return s;
}

Trajectory random_trajectory(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> speed(0.0, 35.0);
  std::uniform_int_distribution<int> len(2, 300);
  std::uniform_real_distribution<double> step(0.01, 1.0);
  Trajectory t;
  t.dt = step(rng);
  t.source_tag = "random:" + std::to_string(len(rng));
  const int n = len(rng);
  for (int i = 0; i < n; ++i) {
    t.leader_speed.push_back(speed(rng));
    t.follower_speed.push_back(speed(rng));
  }
  return t;
}

}  // namespace

TEST_CASE("parsing a 10 Hz run") {
  const auto t = parse_trajectory_csv(rows(197, 0.1));
  CHECK(t.size() == 197);
  CHECK(t.dt == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(t.leader_speed.front() == 15.0);
  CHECK(t.follower_speed.back() == 14.5);
}

TEST_CASE("comments, source tags, CRLF and BOM") {
  const std::string text =
      "\xEF\xBB\xBF# recorded on a test track\r\n"
      "# source: waymo-segment-42\r\n"
      "time_s,leader_speed_mps,follower_speed_mps\r\n"
      "0.0,10,9\r\n"
      "# a comment between rows\r\n"
      "0.1,11,9.5\r\n";
  const auto t = parse_trajectory_csv(text, "fallback");
  CHECK(t.source_tag == "waymo-segment-42");
  CHECK(t.size() == 2);
  CHECK(parse_trajectory_csv(rows(3, 0.1), "fallback").source_tag == "fallback");
}

TEST_CASE("malformed input is reported with its line") {
  SUBCASE("empty") { CHECK_THROWS_AS(parse_trajectory_csv(""), ParseError); }
  SUBCASE("header only") { CHECK_THROWS_AS(parse_trajectory_csv(rows(0, 0.1)), ParseError); }
  SUBCASE("wrong header") {
    try {
      parse_trajectory_csv("t,lead,follow\n0,1,1\n");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 1);
    }
  }
  SUBCASE("bad number") {
    try {
      parse_trajectory_csv("time_s,leader_speed_mps,follower_speed_mps\n0,1,1\n0.1,1;5,1\n");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 3);
    }
  }
  SUBCASE("missing field") {
    CHECK_THROWS_AS(parse_trajectory_csv("time_s,leader_speed_mps,follower_speed_mps\n0,1\n"),
                    ParseError);
  }
  SUBCASE("timestamp gap") {
    std::string text = "time_s,leader_speed_mps,follower_speed_mps\n";
    text += "0.0,10,10\n0.1,10,10\n0.2,10,10\n0.4,10,10\n0.5,10,10\n";
    try {
      parse_trajectory_csv(text);
      FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
      CHECK(e.line() == 5);
      CHECK(std::string(e.what()).find("line 5") != std::string::npos);
    }
  }
  SUBCASE("non-increasing time") {
    CHECK_THROWS_AS(
        parse_trajectory_csv("time_s,leader_speed_mps,follower_speed_mps\n0.1,1,1\n0.0,1,1\n"),
        ValidationError);
  }
  SUBCASE("negative speed") {
    try {
      parse_trajectory_csv("time_s,leader_speed_mps,follower_speed_mps\n0,1,1\n0.1,-1,1\n");
      FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
      CHECK(e.line() == 3);
    }
  }
  SUBCASE("a single row cannot fix dt") {
    CHECK_THROWS_AS(parse_trajectory_csv(rows(1, 0.1)), ValidationError);
  }
}

TEST_CASE("format round-trip") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const auto t = random_trajectory(rng);
    const auto once = parse_trajectory_csv(format_trajectory_csv(t));
    CHECK(once == t);
    CHECK(format_trajectory_csv(once) == format_trajectory_csv(t));
  }

  const auto dir = std::filesystem::temp_directory_path() / "fedcf_data_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "run.csv";
  {
    std::ofstream out(path);
    out << "# source: file-tag\n" << rows(50, 0.1);
  }
  const auto a = load_trajectory_csv(path);
  save_trajectory_csv(a, dir / "copy.csv");
  CHECK(load_trajectory_csv(dir / "copy.csv") == a);
  CHECK_THROWS(load_trajectory_csv(dir / "missing.csv"));
}

TEST_CASE("prediction column") {
  const auto t = parse_trajectory_csv(rows(3, 0.1));
  const std::vector<double> pred{1.0, 2.0, 3.5};
  const auto text = format_trajectory_csv(t, std::span<const double>(pred));
  CHECK(text.find("time_s,leader_speed_mps,follower_speed_mps,predicted_speed_mps") !=
        std::string::npos);
  CHECK(text.find(",3.5\n") != std::string::npos);
  // The extended format still loads as a trajectory.
  CHECK(parse_trajectory_csv(text) == t);
  const std::vector<double> short_pred{1.0};
  CHECK_THROWS_AS(format_trajectory_csv(t, std::span<const double>(short_pred)),
                  std::invalid_argument);
}

TEST_CASE("slicing and concatenation") {
  const auto t = simulate_trajectory(generate_oscillation({}), aggressive_controller(), "osc");
  REQUIRE(t.size() == 197);
  CHECK(slice(t, {0, 197, ScenarioLabel::full_oscillation}) == t);

  const std::vector<Trajectory> parts{slice(t, {0, 50, ScenarioLabel::constant}),
                                      slice(t, {50, 197, ScenarioLabel::custom})};
  CHECK(concatenate(parts) == t);

  CHECK_THROWS_AS(slice(t, {10, 10, ScenarioLabel::custom}), std::invalid_argument);
  CHECK_THROWS_AS(slice(t, {0, 198, ScenarioLabel::custom}), std::invalid_argument);

  Trajectory other = parts[1];
  other.dt = 0.2;
  CHECK_THROWS_AS(concatenate(std::vector<Trajectory>{parts[0], other}), std::invalid_argument);

  // The deceleration phase of the generated oscillation.
  const auto b = oscillation_phase_bounds({});
  const auto decel = slice(t, {b[1], b[2], ScenarioLabel::deceleration});
  for (std::size_t i = 1; i + 2 < decel.size(); ++i) {
    CHECK(decel.leader_speed[i + 1] < decel.leader_speed[i]);
  }
}

TEST_CASE("datasets") {
  const auto t = simulate_trajectory(generate_oscillation({}), passive_controller(), "osc");
  const auto d = to_dataset(t, "passive");
  CHECK(d.size() == 197);
  CHECK(d.vehicle_id == "passive");
  CHECK(d.inputs == t.leader_speed);
  CHECK(d.outputs == t.follower_speed);

  Trajectory perfect{0.1, {1, 2, 3}, {1, 2, 3}, ""};
  const auto p = to_dataset(perfect, "p");
  CHECK(p.inputs == p.outputs);

  std::vector<std::size_t> idx(60);
  std::iota(idx.begin(), idx.end(), 40);
  CHECK(to_dataset(slice(t, {40, 100, ScenarioLabel::custom}), "passive").inputs ==
        d.subset(idx).inputs);
  CHECK(to_dataset(slice(t, {40, 100, ScenarioLabel::custom}), "passive").outputs ==
        d.subset(idx).outputs);
}

TEST_CASE("scenario labels") {
  for (auto l : {ScenarioLabel::constant, ScenarioLabel::deceleration, ScenarioLabel::acceleration,
                 ScenarioLabel::full_oscillation, ScenarioLabel::custom}) {
    CHECK(scenario_label_from_string(to_string(l)) == l);
  }
  CHECK_THROWS_AS(scenario_label_from_string("braking"), std::invalid_argument);
}
