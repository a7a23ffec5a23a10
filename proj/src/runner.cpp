#include "fsosim/runner.hpp"

#include <atomic>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "fsosim/errors.hpp"
#include "fsosim/scenario_city.hpp"
#include "fsosim/scenario_falls.hpp"

namespace fsosim {

namespace {
constexpr std::string_view kToolVersion = "0.1.0";

std::string run_label(const RunSpec& spec) {
  std::string label = spec.group + "_" + spec.param;
  if (spec.scenario == ScenarioKind::falls) {
    label += "_ic" + std::to_string(spec.falls.informal_carers);
  } else if (spec.scenario == ScenarioKind::city) {
    label += "_i" + std::to_string(spec.city.individuals);
  }
  return label + "_seed" + std::to_string(spec.seed);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace

FallsSummary run_falls(const FallsConfig& cfg) {
  FallsWorld w(cfg);
  w.run_to_end();
  return summarize_falls_run(w.log(), cfg);
}

CitySummary run_city(const CityConfig& cfg) {
  CityWorld w(cfg);
  w.run_to_end();
  return summarize_city_run(w.log(), cfg);
}

ExperimentArtifacts run_experiment(const ExperimentPlan& plan, int jobs) {
  const std::vector<RunSpec> runs = plan.expand();
  if (runs.empty()) throw ValidationError("experiment", "the plan expands to zero runs");
  std::filesystem::create_directories(plan.out_dir);
  if (plan.dump_events) std::filesystem::create_directories(plan.out_dir / "events");

  struct Slot {
    FallsSummary falls;
    CitySummary city;
    std::string error;
  };
  std::vector<Slot> results(runs.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= runs.size()) return;
      const RunSpec& spec = runs[i];
      try {
        if (spec.scenario == ScenarioKind::falls) {
          FallsWorld w(spec.falls);
          w.run_to_end();
          results[i].falls = summarize_falls_run(w.log(), spec.falls);
          if (plan.dump_events) {
            std::ofstream out(plan.out_dir / "events" / (run_label(spec) + ".ndjson"),
                              std::ios::binary);
            w.log().write_ndjson(out);
          }
        } else {
          CityWorld w(spec.city);
          w.run_to_end();
          results[i].city = summarize_city_run(w.log(), spec.city);
          if (plan.dump_events) {
            std::ofstream out(plan.out_dir / "events" / (run_label(spec) + ".ndjson"),
                              std::ios::binary);
            w.log().write_ndjson(out);
          }
        }
      } catch (const std::exception& ex) {
        results[i].error = run_label(spec) + ": " + ex.what();
      }
    }
  };

  const int n_threads = std::max(1, std::min<int>(jobs, static_cast<int>(runs.size())));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_threads));
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }

  for (const Slot& slot : results) {
    if (!slot.error.empty()) throw Error("run failed: " + slot.error);
  }

  // Group rows per output file; writers sort rows internally.
  std::map<std::string, std::vector<FallsSummary>> falls_rows;
  std::map<std::string, std::vector<CitySummary>> city_rows;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const std::string file = runs[i].group + "_" + runs[i].param + "_" +
                             std::to_string(plan.base_seed) + ".csv";
    if (runs[i].scenario == ScenarioKind::falls) {
      falls_rows[file].push_back(results[i].falls);
    } else {
      city_rows[file].push_back(results[i].city);
    }
  }

  ExperimentArtifacts artifacts;
  artifacts.runs = static_cast<int>(runs.size());
  const std::string canon = canonical_config(plan.sections);
  auto sidecar = [&](const std::filesystem::path& csv, std::size_t rows) {
    nlohmann::json j;
    j["config_ini"] = canon;
    j["rows"] = rows;
    j["seeds"] = plan.seeds();
    j["scenario"] = scenario_name(plan.scenario);
    write_text(std::filesystem::path(csv).replace_extension(".json"), j.dump(2) + "\n");
  };
  for (const auto& [file, rows] : falls_rows) {
    const auto path = plan.out_dir / file;
    write_falls_csv(path, rows);
    sidecar(path, rows.size());
    artifacts.csv_files.push_back(path);
  }
  for (const auto& [file, rows] : city_rows) {
    const auto path = plan.out_dir / file;
    write_city_csv(path, rows);
    sidecar(path, rows.size());
    artifacts.csv_files.push_back(path);
  }

  nlohmann::json manifest;
  manifest["format"] = 1;
  manifest["tool"] = "fso_sim";
  manifest["version"] = kToolVersion;
  manifest["config_ini"] = canon;
  char hash_hex[17];
  std::snprintf(hash_hex, sizeof(hash_hex), "%016llx",
                static_cast<unsigned long long>(config_hash(plan.sections)));
  manifest["config_hash"] = hash_hex;
  manifest["seeds"] = plan.seeds();
  manifest["runs"] = runs.size();
  std::vector<std::string> names;
  for (const auto& p : artifacts.csv_files) names.push_back(p.filename().string());
  manifest["files"] = names;
  artifacts.manifest_path = plan.out_dir / "manifest.json";
  write_text(artifacts.manifest_path, manifest.dump(2) + "\n");
  return artifacts;
}

ExperimentPlan plan_from_manifest(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw IoError("cannot read " + manifest_path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError(0, std::string("manifest: ") + ex.what());
  }
  if (!j.contains("config_ini")) {
    throw ValidationError("manifest", "missing config_ini field");
  }
  return parse_config(j["config_ini"].get<std::string>());
}

}  // namespace fsosim
