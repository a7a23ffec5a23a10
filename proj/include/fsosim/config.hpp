#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "fsosim/metrics.hpp"
#include "fsosim/scenario_city.hpp"
#include "fsosim/scenario_falls.hpp"

namespace fsosim {

enum class ScenarioKind : std::uint8_t { city, falls, fire };
std::string_view scenario_name(ScenarioKind s);
ScenarioKind scenario_from_name(std::string_view name);  // throws ValidationError

/// Raw sectioned key-value form. The canonical serialization (sorted
/// sections and keys) is what manifests store and hash.
using ConfigSections = std::map<std::string, std::map<std::string, std::string>>;

/// INI-style parser: [section] headers, `key = value` lines, `#`/`;`
/// comments. Duplicate keys and text outside a section are errors.
ConfigSections parse_sections(const std::string& text);

std::string canonical_config(const ConfigSections& sections);
std::uint64_t config_hash(const ConfigSections& sections);

/// One concrete run of the plan.
struct RunSpec {
  ScenarioKind scenario = ScenarioKind::falls;
  std::string group;  // output grouping, e.g. "falls_S1" or "city_fso_150"
  std::string param;  // <param> slot of the file name, e.g. "ic0-40"
  FallsConfig falls;  // used when scenario == falls
  CityConfig city;    // used when scenario == city or fire
  std::uint64_t seed = 0;
};

/// Fully validated experiment: scenario, parameter sweep, seeds, output.
/// Every default is explicit in `sections` after parsing.
struct ExperimentPlan {
  ScenarioKind scenario = ScenarioKind::falls;
  std::uint64_t base_seed = 1;
  int replications = 20;
  std::filesystem::path out_dir = "out";
  bool dump_events = false;

  FallsConfig falls;
  std::vector<int> ic_counts{0, 5, 10, 15, 20, 25, 30, 35, 40};
  std::vector<int> device_counts{1, 2};

  CityConfig city;
  std::vector<Strategy> strategies{Strategy::traditional, Strategy::fso,
                                   Strategy::perfect_oracle};
  std::vector<Tick> thresholds{100, 150, 200};
  std::vector<int> individual_counts{60, 80, 100, 120, 140};
  std::vector<bool> fire_collaboration{true, false};

  ConfigSections sections;

  std::vector<std::uint64_t> seeds() const;
  std::vector<RunSpec> expand() const;
};

/// Builds a plan from config text: unknown sections or keys are errors, all
/// defaults become explicit, and every value is validated.
ExperimentPlan parse_config(const std::string& text);

/// Plan from sections that were already parsed (used for --set overrides).
ExperimentPlan plan_from_sections(ConfigSections sections);

/// The documented defaults for a scenario, as canonical config text.
std::string list_defaults(ScenarioKind scenario);

}  // namespace fsosim
