#pragma once

#include <filesystem>
#include <vector>

#include "fsosim/config.hpp"

namespace fsosim {

/// Executes one world to completion and returns its summary.
FallsSummary run_falls(const FallsConfig& cfg);
CitySummary run_city(const CityConfig& cfg);

struct ExperimentArtifacts {
  std::vector<std::filesystem::path> csv_files;
  std::filesystem::path manifest_path;
  int runs = 0;
};

/// Runs every (parameter point x seed) of the plan, writes one CSV per group
/// with a JSON sidecar, and a manifest sufficient to reproduce every output
/// byte. Independent runs may execute on `jobs` threads; output bytes do not
/// depend on the execution order. Throws on the first collected run error.
ExperimentArtifacts run_experiment(const ExperimentPlan& plan, int jobs = 1);

/// Reads the canonical config back out of a manifest written by
/// run_experiment, so an experiment can be reproduced from the manifest
/// alone.
ExperimentPlan plan_from_manifest(const std::filesystem::path& manifest_path);

}  // namespace fsosim
