#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fsosim/events.hpp"
#include "fsosim/scenario_falls.hpp"

namespace fsosim {

struct CityConfig;  // scenario_city.hpp

/// Per-run metric row for the falls model; the column set mirrors the
/// scenario's reporting table, plus the run tags and the count of alarms
/// still open when the run ended (those are excluded from every average).
struct FallsSummary {
  std::string scenario;  // "S1" (one device) or "S2" (two devices)
  int ic_count = 0;
  std::uint64_t seed = 0;

  std::int64_t fp = 0;
  std::int64_t fn = 0;
  std::int64_t tp = 0;
  std::int64_t tn = 0;
  double avg_fp_per_tick = 0.0;
  double avg_fn_per_tick = 0.0;
  std::optional<double> fp_ratio;     // fp / reqs_handled
  std::optional<double> fn_ratio;     // fn / (fn + tn)
  std::optional<double> sensitivity;  // tp / (tp + fn)
  std::optional<double> specificity;  // tn / (tn + fp)
  std::int64_t csc_ambulances = 0;
  std::int64_t csc_volunteers = 0;
  std::int64_t cwt = 0;
  std::int64_t reqs_handled = 0;
  std::int64_t ic_verifications = 0;
  std::int64_t ma_verifications = 0;
  std::int64_t ma_interventions = 0;
  std::optional<double> avg_ma_cost;  // csc_ambulances / reqs_handled
  std::optional<double> avg_wt;       // cwt / reqs_handled
  std::int64_t open_alarms = 0;

  Tick max_ticks = 0;
};

enum class Strategy : std::uint8_t { traditional, fso, perfect_oracle };
std::string_view strategy_name(Strategy s);
Strategy strategy_from_name(std::string_view name);  // throws ValidationError

/// Per-run metric row for the city model (healthcare and fire experiments).
struct CitySummary {
  Strategy strategy = Strategy::fso;
  Tick threshold = 0;
  int individuals = 0;
  std::uint64_t seed = 0;

  std::int64_t requests_resolved = 0;  // treated + died
  std::int64_t treated = 0;
  std::int64_t died = 0;
  std::optional<double> avg_querying_time;
  std::int64_t son_inter_community_count = 0;
  std::int64_t traditional_failure_count = 0;
  std::int64_t transport_on_foot = 0;
  std::int64_t transport_own_car = 0;
  std::int64_t transport_taxi = 0;
  std::int64_t fully_burned_houses = 0;
};

/// Computes a falls summary purely from the event log; re-summarizing a saved
/// log reproduces the summary exactly. Throws IncompleteRunError when the log
/// lacks the run terminator.
FallsSummary summarize_falls_run(const EventLog& log, const FallsConfig& cfg);

CitySummary summarize_city_run(const EventLog& log, const CityConfig& cfg);

/// Shortest round-trip decimal form; NaN/inf are never emitted.
std::string format_double(double v);

/// CSV writers: stable column order, RFC-4180 quoting, rows sorted by the
/// run key so output bytes do not depend on execution order. Missing
/// averages (empty denominators) are written as empty fields, never zeros.
void write_falls_csv(const std::filesystem::path& path, std::span<const FallsSummary> rows);
void write_city_csv(const std::filesystem::path& path, std::span<const CitySummary> rows);

std::vector<std::string> falls_csv_header();
std::vector<std::string> city_csv_header();

}  // namespace fsosim
