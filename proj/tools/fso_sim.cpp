#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "fsosim/config.hpp"
#include "fsosim/errors.hpp"
#include "fsosim/runner.hpp"
#include "fsosim/scenario_city.hpp"
#include "fsosim/scenario_falls.hpp"

namespace {

std::string read_config_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw fsosim::IoError("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  std::string text = ss.str();
  // A manifest written by a previous run carries the canonical config.
  if (path.size() > 5 && path.substr(path.size() - 5) == ".json") {
    nlohmann::json j = nlohmann::json::parse(text);
    return j.at("config_ini").get<std::string>();
  }
  return text;
}

void apply_set(fsosim::ConfigSections& sections, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw fsosim::ValidationError("--set", "expected section.key=value");
  }
  const std::string key_path = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);
  const auto dot = key_path.find('.');
  if (dot == std::string::npos) {
    throw fsosim::ValidationError("--set", "expected section.key=value");
  }
  sections[key_path.substr(0, dot)][key_path.substr(dot + 1)] = value;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deterministic multi-agent simulator for fractal social organizations"};

  std::string config_path;
  std::string scenario;
  std::int64_t seed = -1;
  int seeds = -1;
  std::string out_dir;
  std::int64_t ticks = -1;
  std::vector<std::string> sets;
  bool list_defaults_flag = false;
  bool dump_tree = false;
  bool dump_events = false;
  int jobs = 1;

  app.add_option("--config", config_path,
                 "Experiment config (.ini style) or a manifest.json from a previous run");
  app.add_option("--scenario", scenario, "Scenario: city, falls, or fire");
  app.add_option("--seed", seed, "Base master seed");
  app.add_option("--seeds", seeds, "Number of replications (seed, seed+1, ...)");
  app.add_option("--out", out_dir, "Output directory (fallback: $FSO_SIM_OUT)");
  app.add_option("--ticks", ticks, "Simulation length in ticks");
  app.add_option("--set", sets, "Override a config value, e.g. --set falls.elderly=40")
      ->take_all();
  app.add_flag("--list-defaults", list_defaults_flag,
               "Print the fully explicit defaults for the chosen scenario and exit");
  app.add_flag("--dump-tree", dump_tree,
               "Print the community tree of the configured scenario and exit");
  app.add_flag("--events", dump_events, "Also write per-run event logs (NDJSON)");
  app.add_option("--jobs", jobs, "Worker threads for independent runs")
      ->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    fsosim::ConfigSections sections;
    if (!config_path.empty()) {
      sections = fsosim::parse_sections(read_config_text(config_path));
    }
    if (!scenario.empty()) sections["experiment"]["scenario"] = scenario;
    if (seed >= 0) sections["experiment"]["seed"] = std::to_string(seed);
    if (seeds > 0) sections["experiment"]["replications"] = std::to_string(seeds);
    if (ticks > 0) sections["world"]["ticks"] = std::to_string(ticks);
    if (!out_dir.empty()) {
      sections["experiment"]["out_dir"] = out_dir;
    } else if (!sections["experiment"].count("out_dir")) {
      if (const char* env = std::getenv("FSO_SIM_OUT")) {
        sections["experiment"]["out_dir"] = env;
      }
    }
    if (dump_events) sections["experiment"]["dump_events"] = "true";
    for (const std::string& s : sets) apply_set(sections, s);

    if (list_defaults_flag) {
      const auto kind = fsosim::scenario_from_name(
          sections["experiment"].count("scenario") ? sections["experiment"]["scenario"]
                                                   : "falls");
      std::cout << fsosim::list_defaults(kind);
      return 0;
    }

    fsosim::ExperimentPlan plan = fsosim::plan_from_sections(sections);

    if (dump_tree) {
      const auto runs = plan.expand();
      if (plan.scenario == fsosim::ScenarioKind::falls) {
        fsosim::FallsWorld w(runs.front().falls);
        w.tree().dump(std::cout);
      } else {
        fsosim::CityWorld w(runs.front().city);
        w.tree().dump(std::cout);
      }
      return 0;
    }

    const auto artifacts = fsosim::run_experiment(plan, jobs);
    std::cout << "ran " << artifacts.runs << " runs\n";
    for (const auto& f : artifacts.csv_files) std::cout << "wrote " << f.string() << "\n";
    std::cout << "wrote " << artifacts.manifest_path.string() << "\n";
    return 0;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
}
