#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "config.hpp"
#include "experiments.hpp"

using namespace beaconsim;
using namespace beaconsim::config;

namespace {

Config tiny() {
  Config c;
  set(c, "deployment.n_users", "30");
  set(c, "simulation.duration_s", "3");
  set(c, "simulation.warmup_s", "1");
  set(c, "simulation.replications", "2");
  set(c, "experiments.users", "[30]");
  set(c, "experiments.isds_m", "[24]");
  set(c, "experiments.fig6_drops", "50");
  set(c, "experiments.fig6_radii_m", "[0, 5]");
  return c;
}

std::size_t lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST_CASE("defaults resolve to a valid scenario") {
  const Config c;
  const auto s = c.resolve();
  CHECK(s.detection.threshold == doctest::Approx(9.210340371976182).epsilon(1e-12));
  CHECK(s.detection.noise_power_dbm == c.scenario.detection.noise_power_dbm);
  CHECK(s.deployment.n_users == 1500);
  CHECK(s.dimensioning.occasions_per_second == 5);
}

TEST_CASE("derived noise is kT*NF*B over one BeRB") {
  Config c;
  set(c, "detection.noise_mode", "derived");
  const auto s = c.resolve();
  CHECK(s.detection.noise_power_dbm ==
        doctest::Approx(10 * std::log10(1.38e-23 * 290 * 1.68e6 * 1e3) + 9.0).epsilon(1e-12));
}

TEST_CASE("JSON round trip") {
  Config c;
  set(c, "detection.threshold", "12.5");
  set(c, "simulation.forced_p_md", "0");
  set(c, "deployment.grouping", "individual");
  set(c, "channel.los_model", "always_los");
  set(c, "experiments.schemes", "[\"grouped\"]");
  const auto text = to_json_text(c);
  const auto back = from_json_text(text);
  CHECK(to_json_text(back) == text);
  CHECK_FALSE(back.threshold_auto);
  CHECK(back.scenario.detection.threshold == 12.5);
  CHECK(back.scenario.forced_p_md == 0.0);
  CHECK(back.scenario.deployment.grouping == mobility::Grouping::individual);
  CHECK(back.experiments.schemes == std::vector<std::string>{"grouped"});

  // resolving writes numbers that reproduce the same scenario
  Config autoc;
  const auto r = from_json_text(to_json_text(autoc.resolved()));
  CHECK(r.scenario.detection.threshold == autoc.resolve().detection.threshold);
  CHECK(to_json_text(r.resolved()) == to_json_text(autoc.resolved()));
  CHECK(to_json_text(autoc.resolved()).find("\"auto\"") == std::string::npos);
}

TEST_CASE("partial documents keep defaults") {
  const auto c = from_json_text(R"({"deployment": {"isd_m": 18}})");
  CHECK(c.scenario.deployment.isd_m == 18.0);
  CHECK(c.scenario.deployment.n_users == 1500);
  const auto layered = from_json_text(R"({"deployment": {"n_users": 600}})", c);
  CHECK(layered.scenario.deployment.isd_m == 18.0);
  CHECK(layered.scenario.deployment.n_users == 600);
}

TEST_CASE("bad configuration is rejected") {
  CHECK_THROWS_AS(from_json_text("{not json"), ParseError);
  CHECK_THROWS_AS(from_json_text(R"({"radio": {}})"), std::invalid_argument);
  CHECK_THROWS_AS(from_json_text(R"({"deployment": {"isd": 18}})"), std::invalid_argument);
  CHECK_THROWS_AS(from_json_text(R"({"deployment": {"n_users": "many"}})"), std::invalid_argument);
  CHECK_THROWS_AS(from_json_text(R"({"deployment": {"n_users": 2.5}})"), std::invalid_argument);
  CHECK_THROWS_AS(from_json_text(R"({"deployment": {"grouping": "pairs"}})"), std::invalid_argument);
  CHECK_THROWS_AS(from_json_text(R"({"detection": {"threshold": "high"}})"), std::invalid_argument);
  CHECK_THROWS_AS(from_json_text(R"({"experiments": {"schemes": ["solo"]}})"), std::invalid_argument);
  CHECK_THROWS_AS(from_json_text("[1, 2]"), std::invalid_argument);
  Config c;
  CHECK_THROWS_AS(set(c, "nodot", "1"), std::invalid_argument);
  CHECK_THROWS_AS(set(c, "deployment.speed", "1"), std::invalid_argument);
  CHECK_THROWS_AS(load_file("/nonexistent/cfg.json"), std::runtime_error);
}

TEST_CASE("set parses JSON or falls back to a string") {
  Config c;
  set(c, "simulation.seed", "42");
  CHECK(c.scenario.seed == 42);
  set(c, "deployment.grouping", "individual");
  CHECK(c.scenario.deployment.grouping == mobility::Grouping::individual);
  set(c, "simulation.forced_p_md", "null");
  CHECK_FALSE(c.scenario.forced_p_md);
  set(c, "detection.threshold", "auto");
  CHECK(c.threshold_auto);
}

TEST_CASE("presets") {
  using experiments::Preset;
  CHECK(experiments::preset_from_name("fig4") == Preset::fig4);
  CHECK_FALSE(experiments::preset_from_name("fig5"));
  CHECK(experiments::to_string(Preset::custom) == "custom");
  CHECK(experiments::format_number(0.1) == "0.1");
  CHECK(experiments::format_number(24.0) == "24");
}

TEST_CASE("CSV outputs") {
  const auto c = tiny();
  const auto rate = experiments::beacon_rate_csv(c);
  CHECK(rate.rfind("isd_m,n_users,scheme,reuse,mean_rate_hz,ci95\n", 0) == 0);
  CHECK(lines(rate) == 1 + 2 * 2);
  const auto md = experiments::miss_detection_csv(c);
  CHECK(md.rfind("isd_m,n_users,scheme,p_md,ci95\n", 0) == 0);
  CHECK(lines(md) == 1 + 2);
  const auto wc = experiments::wrong_cell_csv(c);
  CHECK(wc.rfind("group_radius_m,p_wrong_cell,mean_delta_pl_db,ci95\n", 0) == 0);
  CHECK(wc.find("\n0,0,0,0\n") != std::string::npos);
  CHECK(lines(experiments::scenario_csv(c)) == 2);
  CHECK(experiments::beacon_rate_csv(c) == rate);
}

TEST_CASE("preset files are written atomically") {
  const auto dir = std::filesystem::temp_directory_path() / "beaconsim_test_presets";
  std::filesystem::remove_all(dir);
  const auto c = tiny();
  const auto files = experiments::run_preset(c, experiments::Preset::custom, dir / "nested",
                                             (dir / "events.csv").string());
  REQUIRE(files.size() == 2);
  for (const auto& f : files) CHECK(std::filesystem::exists(f));
  for (const auto& e : std::filesystem::directory_iterator(dir / "nested"))
    CHECK(e.path().filename().string().find(".tmp") == std::string::npos);
  CHECK_THROWS_AS(experiments::run_preset(c, experiments::Preset::fig6, dir, (dir / "e.csv").string()),
                  std::invalid_argument);
  std::filesystem::remove_all(dir);
}
