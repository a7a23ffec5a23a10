#include "fsosim/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>

#include "fsosim/errors.hpp"
#include "fsosim/scenario_city.hpp"

namespace fsosim {

std::string_view strategy_name(Strategy s) {
  switch (s) {
    case Strategy::traditional: return "traditional";
    case Strategy::fso: return "fso";
    case Strategy::perfect_oracle: return "perfect_oracle";
  }
  return "fso";
}

Strategy strategy_from_name(std::string_view name) {
  if (name == "traditional") return Strategy::traditional;
  if (name == "fso") return Strategy::fso;
  if (name == "perfect_oracle") return Strategy::perfect_oracle;
  throw ValidationError("strategy", "unknown strategy: " + std::string(name));
}

namespace {

std::optional<double> ratio(std::int64_t num, std::int64_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

void require_complete(const EventLog& log) {
  if (!log.complete()) {
    throw IncompleteRunError("event log has no run terminator; summarize after run_to_end()");
  }
}

}  // namespace

FallsSummary summarize_falls_run(const EventLog& log, const FallsConfig& cfg) {
  require_complete(log);
  FallsSummary s;
  s.scenario = cfg.scenario_tag();
  s.ic_count = cfg.informal_carers;
  s.seed = cfg.world.master_seed;
  s.max_ticks = cfg.world.max_ticks;

  std::int64_t monitorable = 0;
  for (const Event& e : log.records()) {
    switch (e.kind) {
      case EventKind::alarm_raised:
        e.b ? ++s.tp : ++s.fp;
        break;
      case EventKind::fall_missed:
        ++s.fn;
        break;
      case EventKind::alarm_verified:
        ++s.reqs_handled;
        s.cwt += e.d;
        if (e.c == 2 && e.b == 0) ++s.ma_verifications;
        break;
      case EventKind::ic_verification:
        ++s.ic_verifications;
        break;
      case EventKind::ma_intervention:
        ++s.ma_interventions;
        break;
      case EventKind::cost_accrued:
        (e.b == 1 ? s.csc_ambulances : s.csc_volunteers) += e.a;
        break;
      case EventKind::alarm_open_at_end:
        ++s.open_alarms;
        break;
      case EventKind::run_totals:
        monitorable = e.a;
        break;
      default:
        break;
    }
  }
  s.tn = monitorable - s.tp - s.fp - s.fn;
  s.avg_fp_per_tick = static_cast<double>(s.fp) / static_cast<double>(s.max_ticks);
  s.avg_fn_per_tick = static_cast<double>(s.fn) / static_cast<double>(s.max_ticks);
  s.fp_ratio = ratio(s.fp, s.reqs_handled);
  s.fn_ratio = ratio(s.fn, s.fn + s.tn);
  s.sensitivity = ratio(s.tp, s.tp + s.fn);
  s.specificity = ratio(s.tn, s.tn + s.fp);
  s.avg_ma_cost = ratio(s.csc_ambulances, s.reqs_handled);
  s.avg_wt = ratio(s.cwt, s.reqs_handled);
  return s;
}

CitySummary summarize_city_run(const EventLog& log, const CityConfig& cfg) {
  require_complete(log);
  CitySummary s;
  s.strategy = cfg.strategy;
  s.threshold = cfg.threshold;
  s.individuals = cfg.individuals;
  s.seed = cfg.world.master_seed;

  std::int64_t querying_sum = 0;
  for (const Event& e : log.records()) {
    switch (e.kind) {
      case EventKind::healthcare_treated:
        ++s.treated;
        querying_sum += e.b;
        break;
      case EventKind::patient_died:
        ++s.died;
        break;
      case EventKind::hospital_rejected:
        ++s.traditional_failure_count;
        break;
      case EventKind::son_formed:
        if (e.b >= 2) ++s.son_inter_community_count;
        break;
      case EventKind::transport_mode:
        if (e.a == 0) ++s.transport_on_foot;
        else if (e.a == 1) ++s.transport_own_car;
        else ++s.transport_taxi;
        break;
      case EventKind::house_burned:
        ++s.fully_burned_houses;
        break;
      default:
        break;
    }
  }
  s.requests_resolved = s.treated + s.died;
  s.avg_querying_time = s.treated ? ratio(querying_sum, s.treated) : std::nullopt;
  return s;
}

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) throw IoError("double formatting failed");
  return std::string(buf, end);
}

namespace {

std::string csv_quote(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string cell(std::int64_t v) { return std::to_string(v); }
std::string cell(std::uint64_t v) { return std::to_string(v); }
std::string cell(int v) { return std::to_string(v); }
std::string cell(double v) { return format_double(v); }
std::string cell(const std::optional<double>& v) { return v ? format_double(*v) : ""; }
std::string cell(const std::string& v) { return csv_quote(v); }

class CsvWriter {
 public:
  explicit CsvWriter(const std::filesystem::path& path) : out_(path, std::ios::binary) {
    if (!out_) throw IoError("cannot open " + path.string() + " for writing");
    path_ = path;
  }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
  }

  void close() {
    out_.flush();
    if (!out_) throw IoError("write failed for " + path_.string());
  }

 private:
  std::ofstream out_;
  std::filesystem::path path_;
};

}  // namespace

std::vector<std::string> falls_csv_header() {
  return {"scenario",        "ic_count",        "seed",
          "fp",              "fn",              "tp",
          "tn",              "avg_fp_per_tick", "avg_fn_per_tick",
          "fp_ratio",        "fn_ratio",        "sensitivity",
          "specificity",     "csc_ambulances",  "csc_volunteers",
          "cwt",             "reqs_handled",    "ic_verifications",
          "ma_verifications","ma_interventions","avg_ma_cost",
          "avg_wt",          "open_alarms"};
}

std::vector<std::string> city_csv_header() {
  return {"strategy",  "threshold",          "individuals",
          "seed",      "requests_resolved",  "treated",
          "died",      "avg_querying_time",  "son_inter_community_count",
          "traditional_failure_count",       "transport_on_foot",
          "transport_own_car",               "transport_taxi",
          "fully_burned_houses"};
}

void write_falls_csv(const std::filesystem::path& path, std::span<const FallsSummary> rows) {
  std::vector<FallsSummary> sorted(rows.begin(), rows.end());
  std::sort(sorted.begin(), sorted.end(), [](const FallsSummary& a, const FallsSummary& b) {
    return std::tie(a.scenario, a.ic_count, a.seed) < std::tie(b.scenario, b.ic_count, b.seed);
  });
  CsvWriter w(path);
  w.row(falls_csv_header());
  for (const FallsSummary& r : sorted) {
    w.row({cell(r.scenario), cell(r.ic_count), cell(r.seed), cell(r.fp), cell(r.fn), cell(r.tp),
           cell(r.tn), cell(r.avg_fp_per_tick), cell(r.avg_fn_per_tick), cell(r.fp_ratio),
           cell(r.fn_ratio), cell(r.sensitivity), cell(r.specificity), cell(r.csc_ambulances),
           cell(r.csc_volunteers), cell(r.cwt), cell(r.reqs_handled), cell(r.ic_verifications),
           cell(r.ma_verifications), cell(r.ma_interventions), cell(r.avg_ma_cost),
           cell(r.avg_wt), cell(r.open_alarms)});
  }
  w.close();
}

void write_city_csv(const std::filesystem::path& path, std::span<const CitySummary> rows) {
  std::vector<CitySummary> sorted(rows.begin(), rows.end());
  std::sort(sorted.begin(), sorted.end(), [](const CitySummary& a, const CitySummary& b) {
    return std::tie(a.strategy, a.threshold, a.individuals, a.seed) <
           std::tie(b.strategy, b.threshold, b.individuals, b.seed);
  });
  CsvWriter w(path);
  w.row(city_csv_header());
  for (const CitySummary& r : sorted) {
    w.row({std::string(strategy_name(r.strategy)), cell(r.threshold), cell(r.individuals),
           cell(r.seed), cell(r.requests_resolved), cell(r.treated), cell(r.died),
           cell(r.avg_querying_time), cell(r.son_inter_community_count),
           cell(r.traditional_failure_count), cell(r.transport_on_foot),
           cell(r.transport_own_car), cell(r.transport_taxi), cell(r.fully_burned_houses)});
  }
  w.close();
}

}  // namespace fsosim
