#include <doctest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "fsosim/config.hpp"
#include "fsosim/errors.hpp"
#include "fsosim/runner.hpp"
#include "fsosim/stats.hpp"

using namespace fsosim;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("fsosim_runner_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("minimal falls config inherits every documented default") {
  ExperimentPlan plan = parse_config("[experiment]\nscenario = falls\nseed = 42\n");
  CHECK(plan.scenario == ScenarioKind::falls);
  CHECK(plan.base_seed == 42);
  CHECK(plan.falls.elderly == 30);
  CHECK(plan.falls.professional_carers == 6);
  CHECK(plan.falls.mobility_agents == 5);
  CHECK(plan.falls.world.max_ticks == 10000);
  CHECK(plan.falls.p_false_positive == doctest::Approx(1.0 / 500.0));
  CHECK(plan.falls.p_false_negative == doctest::Approx(0.2));
  CHECK(plan.falls.p_fall == doctest::Approx(1.0 / 600.0));
  CHECK(plan.ic_counts.size() == 9);
  // every effective value is explicit in the parsed result
  CHECK(plan.sections.at("falls").at("elderly") == "30");
  CHECK(plan.sections.at("world").at("ticks") == "10000");
}

TEST_CASE("fraction literals parse to probabilities") {
  ExperimentPlan plan = parse_config(
      "[experiment]\nscenario = falls\n[falls]\np_false_positive = 1/500\np_fall = 1/600\n");
  CHECK(plan.falls.p_false_positive == doctest::Approx(0.002));
  CHECK(plan.falls.p_fall == doctest::Approx(1.0 / 600.0));
}

TEST_CASE("negative probability fails validation") {
  CHECK_THROWS_AS(
      parse_config("[experiment]\nscenario = falls\n[falls]\np_false_positive = -0.1\n"),
      ValidationError);
}

TEST_CASE("unknown keys and sections are rejected (fail closed)") {
  CHECK_THROWS_AS(parse_config("[experiment]\nscenario = falls\nbogus = 1\n"),
                  ValidationError);
  CHECK_THROWS_AS(parse_config("[experiment]\nscenario = falls\n[falls]\nelderlyy = 30\n"),
                  ValidationError);
  CHECK_THROWS_AS(parse_config("[experiment]\nscenario = falls\n[mystery]\nx = 1\n"),
                  ValidationError);
  // a city section under a falls scenario is a mistake, not silence
  CHECK_THROWS_AS(parse_config("[experiment]\nscenario = falls\n[city]\ndoctors = 1\n"),
                  ValidationError);
}

TEST_CASE("parse errors carry line numbers") {
  try {
    parse_config("[experiment]\nscenario falls\n");
    FAIL("expected ParseError");
  } catch (const ParseError& ex) {
    CHECK(ex.line == 2);
  }
  CHECK_THROWS_AS(parse_config("key = before any section\n"), ParseError);
  CHECK_THROWS_AS(parse_config("[experiment]\nseed = 1\nseed = 2\n"), ParseError);
}

TEST_CASE("IC sweep ranges expand: 0..40 step 5 gives 9 points per device per seed") {
  ExperimentPlan plan = parse_config(
      "[experiment]\nscenario = falls\nseed = 1\nreplications = 5\n"
      "[falls]\nic_counts = 0..40 step 5\ndevice_counts = 1\n");
  CHECK(plan.ic_counts == std::vector<int>{0, 5, 10, 15, 20, 25, 30, 35, 40});
  CHECK(plan.expand().size() == 9 * 5);
}

TEST_CASE("city plan cardinality: 3 strategies x 3 thresholds x 5 populations") {
  ExperimentPlan plan = parse_config(
      "[experiment]\nscenario = city\nseed = 1\nreplications = 1\n");
  CHECK(plan.expand().size() == 3 * 3 * 5);
  ExperimentPlan two = parse_config(
      "[experiment]\nscenario = city\nseed = 1\nreplications = 2\n");
  CHECK(two.expand().size() == 2 * 3 * 3 * 5);
}

TEST_CASE("run_experiment writes sorted rows, sidecars, and a usable manifest") {
  TempDir tmp;
  std::ostringstream cfg;
  cfg << "[experiment]\nscenario = falls\nseed = 3\nreplications = 2\nout_dir = "
      << (tmp.path / "a").string() << "\n"
      << "[world]\nticks = 500\n"
      << "[falls]\nic_counts = 0,5\ndevice_counts = 1\n";
  ExperimentPlan plan = parse_config(cfg.str());
  auto artifacts = run_experiment(plan, 4);
  CHECK(artifacts.runs == 4);
  REQUIRE(artifacts.csv_files.size() == 1);
  const std::string first = slurp(artifacts.csv_files[0]);
  CHECK(first.find("S1,0,3") != std::string::npos);
  CHECK(fs::exists(fs::path(artifacts.csv_files[0]).replace_extension(".json")));

  // Rerun from the manifest into a second directory: identical bytes.
  ExperimentPlan replay = plan_from_manifest(artifacts.manifest_path);
  replay.out_dir = tmp.path / "b";
  auto second = run_experiment(replay, 1);  // different job count, same bytes
  CHECK(slurp(second.csv_files[0]) == first);
}

TEST_CASE("fire plan expands over the collaboration axis") {
  ExperimentPlan plan = parse_config(
      "[experiment]\nscenario = fire\nseed = 9\nreplications = 3\n"
      "[fire]\ncollaboration = fso,none\n");
  auto runs = plan.expand();
  CHECK(runs.size() == 6);
  int with = 0, without = 0;
  for (const auto& r : runs) {
    r.city.fso_fire_collaboration ? ++with : ++without;
    CHECK_FALSE(r.city.healthcare_enabled);
    CHECK(r.city.fire_enabled);
    CHECK(r.city.houses == 50);
    CHECK(r.city.fire_trucks == 10);
    CHECK(r.city.firefighters == 35);
  }
  CHECK(with == 3);
  CHECK(without == 3);
}

TEST_CASE("events dump writes one NDJSON per run") {
  TempDir tmp;
  std::ostringstream cfg;
  cfg << "[experiment]\nscenario = falls\nseed = 1\nreplications = 1\ndump_events = true\n"
      << "out_dir = " << (tmp.path / "ev").string() << "\n"
      << "[world]\nticks = 200\n[falls]\nic_counts = 0\ndevice_counts = 1\n";
  run_experiment(parse_config(cfg.str()), 1);
  int ndjson = 0;
  for (const auto& entry : fs::directory_iterator(tmp.path / "ev" / "events")) {
    ndjson += entry.path().extension() == ".ndjson" ? 1 : 0;
  }
  CHECK(ndjson == 1);
}

TEST_CASE("student t tail probabilities match reference values") {
  using namespace fsosim::stats;
  CHECK(student_t_sf(0.0, 19) == doctest::Approx(0.5));
  CHECK(student_t_sf(1.729, 19) == doctest::Approx(0.05).epsilon(0.01));
  CHECK(student_t_sf(2.093, 19) == doctest::Approx(0.025).epsilon(0.01));
  CHECK(student_t_sf(2.861, 19) == doctest::Approx(0.005).epsilon(0.02));
  CHECK(student_t_sf(-1.729, 19) == doctest::Approx(0.95).epsilon(0.01));
  CHECK(incomplete_beta(0.5, 0.5, 0.5) == doctest::Approx(0.5));
}

TEST_CASE("paired t-test flags an obvious improvement and not noise") {
  using namespace fsosim::stats;
  std::vector<double> worse{10, 12, 11, 13, 12, 11, 10, 12};
  std::vector<double> better{5, 6, 5, 7, 6, 5, 5, 6};
  CHECK(paired_t_pvalue_greater(worse, better) < 0.001);
  CHECK(paired_t_pvalue_greater(better, worse) > 0.99);
  std::vector<double> same_a{1, 2, 3, 4};
  std::vector<double> same_b{2, 1, 4, 3};
  CHECK(paired_t_pvalue_greater(same_a, same_b) > 0.2);
}
