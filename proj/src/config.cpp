#include "fsosim/config.hpp"

#include <algorithm>
#include <charconv>
#include <set>
#include <sstream>

#include "fsosim/errors.hpp"

namespace fsosim {

std::string_view scenario_name(ScenarioKind s) {
  switch (s) {
    case ScenarioKind::city: return "city";
    case ScenarioKind::falls: return "falls";
    case ScenarioKind::fire: return "fire";
  }
  return "falls";
}

ScenarioKind scenario_from_name(std::string_view name) {
  if (name == "city") return ScenarioKind::city;
  if (name == "falls") return ScenarioKind::falls;
  if (name == "fire") return ScenarioKind::fire;
  throw ValidationError("experiment.scenario", "unknown scenario: " + std::string(name));
}

namespace {

std::string trim(std::string_view sv) {
  const auto begin = sv.find_first_not_of(" \t\r");
  if (begin == std::string_view::npos) return "";
  const auto end = sv.find_last_not_of(" \t\r");
  return std::string(sv.substr(begin, end - begin + 1));
}

}  // namespace

ConfigSections parse_sections(const std::string& text) {
  ConfigSections sections;
  std::istringstream in(text);
  std::string line;
  std::string current;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto comment = line.find_first_of("#;");
    if (comment != std::string::npos) line.erase(comment);
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t.front() == '[') {
      if (t.back() != ']') throw ParseError(line_no, "unterminated section header");
      current = trim(t.substr(1, t.size() - 2));
      if (current.empty()) throw ParseError(line_no, "empty section name");
      sections[current];
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ParseError(line_no, "expected key = value");
    if (current.empty()) throw ParseError(line_no, "key outside of any section");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty()) throw ParseError(line_no, "empty key");
    if (sections[current].count(key)) throw ParseError(line_no, "duplicate key " + key);
    sections[current][key] = value;
  }
  return sections;
}

std::string canonical_config(const ConfigSections& sections) {
  std::string out;
  for (const auto& [section, keys] : sections) {
    out += "[" + section + "]\n";
    for (const auto& [key, value] : keys) out += key + " = " + value + "\n";
    out += "\n";
  }
  return out;
}

std::uint64_t config_hash(const ConfigSections& sections) {
  const std::string canon = canonical_config(sections);
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : canon) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

namespace {

// Tracks which keys were consumed so leftovers can be rejected (fail-closed).
class SectionReader {
 public:
  SectionReader(const ConfigSections& sections, std::string name)
      : name_(std::move(name)) {
    auto it = sections.find(name_);
    if (it != sections.end()) keys_ = &it->second;
  }

  std::string field(const std::string& key) const { return name_ + "." + key; }

  const std::string* raw(const std::string& key) {
    if (!keys_) return nullptr;
    auto it = keys_->find(key);
    if (it == keys_->end()) return nullptr;
    seen_.insert(key);
    return &it->second;
  }

  std::int64_t integer(const std::string& key, std::int64_t fallback) {
    const std::string* v = raw(key);
    if (!v) return fallback;
    std::int64_t out{};
    const auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
    if (ec != std::errc{} || ptr != v->data() + v->size()) {
      throw ValidationError(field(key), "expected an integer, got '" + *v + "'");
    }
    return out;
  }

  double number(const std::string& key, double fallback) {
    const std::string* v = raw(key);
    if (!v) return fallback;
    return parse_number(key, *v);
  }

  bool boolean(const std::string& key, bool fallback) {
    const std::string* v = raw(key);
    if (!v) return fallback;
    if (*v == "true") return true;
    if (*v == "false") return false;
    throw ValidationError(field(key), "expected true or false, got '" + *v + "'");
  }

  std::string text(const std::string& key, std::string fallback) {
    const std::string* v = raw(key);
    return v ? *v : std::move(fallback);
  }

  /// Comma list and `lo..hi step s` ranges of integers.
  std::vector<std::int64_t> integer_list(const std::string& key,
                                         std::vector<std::int64_t> fallback) {
    const std::string* v = raw(key);
    if (!v) return fallback;
    const auto dots = v->find("..");
    if (dots != std::string::npos) {
      const std::string lo_s = trim(v->substr(0, dots));
      std::string rest = trim(v->substr(dots + 2));
      std::int64_t step = 1;
      const auto step_pos = rest.find("step");
      if (step_pos != std::string::npos) {
        step = parse_int(key, trim(rest.substr(step_pos + 4)));
        rest = trim(rest.substr(0, step_pos));
      }
      const std::int64_t lo = parse_int(key, lo_s);
      const std::int64_t hi = parse_int(key, rest);
      if (step < 1) throw ValidationError(field(key), "range step must be >= 1");
      if (hi < lo) throw ValidationError(field(key), "range end below start");
      std::vector<std::int64_t> out;
      for (std::int64_t x = lo; x <= hi; x += step) out.push_back(x);
      return out;
    }
    std::vector<std::int64_t> out;
    for (const std::string& item : split_list(*v)) out.push_back(parse_int(key, item));
    if (out.empty()) throw ValidationError(field(key), "empty list");
    return out;
  }

  std::vector<std::string> text_list(const std::string& key,
                                     std::vector<std::string> fallback) {
    const std::string* v = raw(key);
    if (!v) return fallback;
    auto out = split_list(*v);
    if (out.empty()) throw ValidationError(field(key), "empty list");
    return out;
  }

  void finish() const {
    if (!keys_) return;
    for (const auto& [key, value] : *keys_) {
      (void)value;
      if (!seen_.count(key)) {
        throw ValidationError(field(key), "unknown key");
      }
    }
  }

 private:
  std::int64_t parse_int(const std::string& key, const std::string& v) {
    std::int64_t out{};
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size()) {
      throw ValidationError(field(key), "expected an integer, got '" + v + "'");
    }
    return out;
  }

  double parse_number(const std::string& key, const std::string& v) {
    const auto slash = v.find('/');
    if (slash != std::string::npos) {  // fraction literal such as 1/500
      const double num = parse_number(key, trim(v.substr(0, slash)));
      const double den = parse_number(key, trim(v.substr(slash + 1)));
      if (den == 0.0) throw ValidationError(field(key), "division by zero");
      return num / den;
    }
    try {
      std::size_t used = 0;
      const double out = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return out;
    } catch (const std::exception&) {
      throw ValidationError(field(key), "expected a number, got '" + v + "'");
    }
  }

  static std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(v);
    while (std::getline(in, item, ',')) {
      const std::string t = trim(item);
      if (!t.empty()) out.push_back(t);
    }
    return out;
  }

  std::string name_;
  const std::map<std::string, std::string>* keys_ = nullptr;
  std::set<std::string> seen_;
};

std::string join_ints(const std::vector<std::int64_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(v[i]);
  }
  return out;
}

template <typename T>
std::vector<std::int64_t> widen(const std::vector<T>& v) {
  return std::vector<std::int64_t>(v.begin(), v.end());
}

WorldConfig default_world(ScenarioKind scenario) {
  WorldConfig w;
  if (scenario == ScenarioKind::falls) {
    w.width = w.height = 81;
    w.max_ticks = 10000;
  } else {
    w.width = w.height = 41;
    w.max_ticks = 3000;
  }
  return w;
}

}  // namespace

std::vector<std::uint64_t> ExperimentPlan::seeds() const {
  std::vector<std::uint64_t> out;
  for (int i = 0; i < replications; ++i) out.push_back(base_seed + static_cast<unsigned>(i));
  return out;
}

std::vector<RunSpec> ExperimentPlan::expand() const {
  std::vector<RunSpec> runs;
  const auto all_seeds = seeds();
  switch (scenario) {
    case ScenarioKind::falls: {
      const auto [lo, hi] = std::minmax_element(ic_counts.begin(), ic_counts.end());
      const std::string param = "ic" + std::to_string(*lo) + "-" + std::to_string(*hi);
      for (int devices : device_counts) {
        for (int ics : ic_counts) {
          for (std::uint64_t seed : all_seeds) {
            RunSpec r;
            r.scenario = scenario;
            r.falls = falls;
            r.falls.device_count = devices;
            r.falls.informal_carers = ics;
            r.falls.world.master_seed = seed;
            r.seed = seed;
            r.group = "falls_" + r.falls.scenario_tag();
            r.param = param;
            runs.push_back(std::move(r));
          }
        }
      }
      break;
    }
    case ScenarioKind::city: {
      for (Strategy st : strategies) {
        for (Tick threshold : thresholds) {
          for (int inds : individual_counts) {
            for (std::uint64_t seed : all_seeds) {
              RunSpec r;
              r.scenario = scenario;
              r.city = city;
              r.city.strategy = st;
              r.city.threshold = threshold;
              r.city.individuals = inds;
              r.city.world.master_seed = seed;
              r.seed = seed;
              r.group = "city_" + std::string(strategy_name(st));
              r.param = std::to_string(threshold);
              runs.push_back(std::move(r));
            }
          }
        }
      }
      break;
    }
    case ScenarioKind::fire: {
      for (bool collab : fire_collaboration) {
        for (std::uint64_t seed : all_seeds) {
          RunSpec r;
          r.scenario = scenario;
          r.city = city;
          r.city.fso_fire_collaboration = collab;
          r.city.world.master_seed = seed;
          r.seed = seed;
          r.group = collab ? "fire_fso" : "fire_nofso";
          r.param = "h" + std::to_string(city.houses);
          runs.push_back(std::move(r));
        }
      }
      break;
    }
  }
  return runs;
}

ExperimentPlan plan_from_sections(ConfigSections sections) {
  ExperimentPlan plan;

  SectionReader experiment(sections, "experiment");
  plan.scenario = scenario_from_name(experiment.text("scenario", "falls"));
  const std::int64_t seed = experiment.integer("seed", 1);
  if (seed < 0) throw ValidationError("experiment.seed", "must be >= 0");
  plan.base_seed = static_cast<std::uint64_t>(seed);
  plan.replications = static_cast<int>(experiment.integer("replications", 20));
  if (plan.replications < 1) {
    throw ValidationError("experiment.replications", "must be >= 1");
  }
  plan.out_dir = experiment.text("out_dir", "out");
  plan.dump_events = experiment.boolean("dump_events", false);
  experiment.finish();

  WorldConfig world = default_world(plan.scenario);
  SectionReader world_r(sections, "world");
  world.width = static_cast<int>(world_r.integer("width", world.width));
  world.height = static_cast<int>(world_r.integer("height", world.height));
  world.max_ticks = world_r.integer("ticks", world.max_ticks);
  world_r.finish();
  world.validate();

  for (const auto& [section, keys] : sections) {
    (void)keys;
    static const std::set<std::string> known{"experiment", "world", "city", "falls", "fire"};
    if (!known.count(section)) {
      throw ValidationError(section, "unknown section");
    }
    if (section == "city" && plan.scenario != ScenarioKind::city) {
      throw ValidationError(section, "section does not apply to this scenario");
    }
    if (section == "falls" && plan.scenario != ScenarioKind::falls) {
      throw ValidationError(section, "section does not apply to this scenario");
    }
    if (section == "fire" && plan.scenario != ScenarioKind::fire) {
      throw ValidationError(section, "section does not apply to this scenario");
    }
  }

  if (plan.scenario == ScenarioKind::falls) {
    SectionReader falls(sections, "falls");
    plan.falls.world = world;
    plan.falls.elderly = static_cast<int>(falls.integer("elderly", plan.falls.elderly));
    plan.falls.professional_carers = static_cast<int>(
        falls.integer("professional_carers", plan.falls.professional_carers));
    plan.falls.mobility_agents =
        static_cast<int>(falls.integer("mobility_agents", plan.falls.mobility_agents));
    plan.falls.p_fall = falls.number("p_fall", plan.falls.p_fall);
    plan.falls.p_false_positive =
        falls.number("p_false_positive", plan.falls.p_false_positive);
    plan.falls.p_false_negative =
        falls.number("p_false_negative", plan.falls.p_false_negative);
    plan.falls.walk_speed = falls.number("walk_speed", plan.falls.walk_speed);
    plan.falls.vehicle_speed = falls.number("vehicle_speed", plan.falls.vehicle_speed);
    plan.falls.treatment_min = falls.integer("treatment_min", plan.falls.treatment_min);
    plan.falls.treatment_max = falls.integer("treatment_max", plan.falls.treatment_max);
    const auto ics = falls.integer_list("ic_counts", widen(plan.ic_counts));
    plan.ic_counts.assign(ics.begin(), ics.end());
    const auto devs = falls.integer_list("device_counts", widen(plan.device_counts));
    plan.device_counts.assign(devs.begin(), devs.end());
    falls.finish();
    for (int ic : plan.ic_counts) {
      if (ic < 0) throw ValidationError("falls.ic_counts", "counts must be >= 0");
    }
    FallsConfig probe = plan.falls;
    for (int devices : plan.device_counts) {
      probe.device_count = devices;
      probe.informal_carers = plan.ic_counts.front();
      probe.validate();
    }
  } else {
    plan.city.world = world;
    if (plan.scenario == ScenarioKind::city) {
      SectionReader city(sections, "city");
      plan.city.hospitals = static_cast<int>(city.integer("hospitals", plan.city.hospitals));
      plan.city.doctors = static_cast<int>(city.integer("doctors", plan.city.doctors));
      plan.city.ambulances =
          static_cast<int>(city.integer("ambulances", plan.city.ambulances));
      plan.city.appliances =
          static_cast<int>(city.integer("appliances", plan.city.appliances));
      plan.city.taxis = static_cast<int>(city.integer("taxis", plan.city.taxis));
      plan.city.offices = static_cast<int>(city.integer("offices", plan.city.offices));
      plan.city.car_ownership = city.number("car_ownership", plan.city.car_ownership);
      plan.city.treatment_min = city.integer("treatment_min", plan.city.treatment_min);
      plan.city.treatment_max = city.integer("treatment_max", plan.city.treatment_max);
      plan.city.talk_duration = city.integer("talk_duration", plan.city.talk_duration);
      plan.city.market_duration =
          city.integer("market_duration", plan.city.market_duration);
      plan.city.walk_dwell = city.integer("walk_dwell", plan.city.walk_dwell);
      plan.city.carshare_dwell = city.integer("carshare_dwell", plan.city.carshare_dwell);
      plan.city.office_dwell = city.integer("office_dwell", plan.city.office_dwell);
      plan.city.wants_company_p = city.number("wants_company_p", plan.city.wants_company_p);
      plan.city.vicinity_radius = city.number("vicinity_radius", plan.city.vicinity_radius);
      plan.city.invalidation_threshold =
          city.integer("invalidation_threshold", plan.city.invalidation_threshold);
      plan.city.office_deadline = city.integer("office_deadline", plan.city.office_deadline);
      plan.city.walk_speed = city.number("walk_speed", plan.city.walk_speed);
      plan.city.vehicle_speed = city.number("vehicle_speed", plan.city.vehicle_speed);
      plan.city.p_activity = city.number("p_activity", plan.city.p_activity);
      plan.city.p_healthcare = city.number("p_healthcare", plan.city.p_healthcare);
      std::vector<std::string> strategy_names;
      for (Strategy st : plan.strategies) strategy_names.emplace_back(strategy_name(st));
      plan.strategies.clear();
      for (const std::string& name : city.text_list("strategies", strategy_names)) {
        plan.strategies.push_back(strategy_from_name(name));
      }
      const auto thr = city.integer_list("thresholds", widen(plan.thresholds));
      plan.thresholds.assign(thr.begin(), thr.end());
      const auto inds = city.integer_list("individuals", widen(plan.individual_counts));
      plan.individual_counts.assign(inds.begin(), inds.end());
      city.finish();
      CityConfig probe = plan.city;
      probe.strategy = plan.strategies.front();
      probe.threshold = plan.thresholds.front();
      probe.individuals = plan.individual_counts.front();
      probe.validate();
    } else {
      // Fire experiment: bystander collaboration with or without the
      // firefighter escalation; healthcare is out of the picture.
      plan.city.healthcare_enabled = false;
      plan.city.hospitals = plan.city.doctors = 0;
      plan.city.ambulances = plan.city.appliances = 0;
      plan.city.fire_enabled = true;
      plan.city.individuals = 50;
      plan.city.houses = 50;
      plan.city.fire_trucks = 10;
      plan.city.firefighters = 35;
      SectionReader fire(sections, "fire");
      plan.city.houses = static_cast<int>(fire.integer("houses", plan.city.houses));
      plan.city.individuals =
          static_cast<int>(fire.integer("individuals", plan.city.individuals));
      plan.city.fire_trucks =
          static_cast<int>(fire.integer("fire_trucks", plan.city.fire_trucks));
      plan.city.firefighters =
          static_cast<int>(fire.integer("firefighters", plan.city.firefighters));
      plan.city.fire_wave_period =
          fire.integer("fire_wave_period", plan.city.fire_wave_period);
      plan.city.fires_per_wave =
          static_cast<int>(fire.integer("fires_per_wave", plan.city.fires_per_wave));
      plan.city.observe_radius = fire.number("observe_radius", plan.city.observe_radius);
      plan.city.escalate_below_health =
          fire.number("escalate_below_health", plan.city.escalate_below_health);
      plan.fire_collaboration.clear();
      for (const std::string& v : fire.text_list("collaboration", {"fso", "none"})) {
        if (v == "fso") plan.fire_collaboration.push_back(true);
        else if (v == "none") plan.fire_collaboration.push_back(false);
        else throw ValidationError("fire.collaboration", "expected fso or none");
      }
      fire.finish();
      CityConfig probe = plan.city;
      probe.validate();
    }
  }

  // Make every effective value explicit for the manifest and --list-defaults.
  ConfigSections out;
  out["experiment"]["scenario"] = std::string(scenario_name(plan.scenario));
  out["experiment"]["seed"] = std::to_string(plan.base_seed);
  out["experiment"]["replications"] = std::to_string(plan.replications);
  out["experiment"]["out_dir"] = plan.out_dir.string();
  out["experiment"]["dump_events"] = plan.dump_events ? "true" : "false";
  out["world"]["width"] = std::to_string(world.width);
  out["world"]["height"] = std::to_string(world.height);
  out["world"]["ticks"] = std::to_string(world.max_ticks);
  if (plan.scenario == ScenarioKind::falls) {
    auto& f = out["falls"];
    f["elderly"] = std::to_string(plan.falls.elderly);
    f["professional_carers"] = std::to_string(plan.falls.professional_carers);
    f["mobility_agents"] = std::to_string(plan.falls.mobility_agents);
    f["p_fall"] = format_double(plan.falls.p_fall);
    f["p_false_positive"] = format_double(plan.falls.p_false_positive);
    f["p_false_negative"] = format_double(plan.falls.p_false_negative);
    f["walk_speed"] = format_double(plan.falls.walk_speed);
    f["vehicle_speed"] = format_double(plan.falls.vehicle_speed);
    f["treatment_min"] = std::to_string(plan.falls.treatment_min);
    f["treatment_max"] = std::to_string(plan.falls.treatment_max);
    f["ic_counts"] = join_ints(widen(plan.ic_counts));
    f["device_counts"] = join_ints(widen(plan.device_counts));
  } else if (plan.scenario == ScenarioKind::city) {
    auto& c = out["city"];
    c["hospitals"] = std::to_string(plan.city.hospitals);
    c["doctors"] = std::to_string(plan.city.doctors);
    c["ambulances"] = std::to_string(plan.city.ambulances);
    c["appliances"] = std::to_string(plan.city.appliances);
    c["taxis"] = std::to_string(plan.city.taxis);
    c["offices"] = std::to_string(plan.city.offices);
    c["car_ownership"] = format_double(plan.city.car_ownership);
    c["treatment_min"] = std::to_string(plan.city.treatment_min);
    c["treatment_max"] = std::to_string(plan.city.treatment_max);
    c["talk_duration"] = std::to_string(plan.city.talk_duration);
    c["market_duration"] = std::to_string(plan.city.market_duration);
    c["walk_dwell"] = std::to_string(plan.city.walk_dwell);
    c["carshare_dwell"] = std::to_string(plan.city.carshare_dwell);
    c["office_dwell"] = std::to_string(plan.city.office_dwell);
    c["wants_company_p"] = format_double(plan.city.wants_company_p);
    c["vicinity_radius"] = format_double(plan.city.vicinity_radius);
    c["invalidation_threshold"] = std::to_string(plan.city.invalidation_threshold);
    c["office_deadline"] = std::to_string(plan.city.office_deadline);
    c["walk_speed"] = format_double(plan.city.walk_speed);
    c["vehicle_speed"] = format_double(plan.city.vehicle_speed);
    c["p_activity"] = format_double(plan.city.p_activity);
    c["p_healthcare"] = format_double(plan.city.p_healthcare);
    std::string strategies_s;
    for (std::size_t i = 0; i < plan.strategies.size(); ++i) {
      if (i) strategies_s += ",";
      strategies_s += std::string(strategy_name(plan.strategies[i]));
    }
    c["strategies"] = strategies_s;
    c["thresholds"] = join_ints(widen(plan.thresholds));
    c["individuals"] = join_ints(widen(plan.individual_counts));
  } else {
    auto& f = out["fire"];
    f["houses"] = std::to_string(plan.city.houses);
    f["individuals"] = std::to_string(plan.city.individuals);
    f["fire_trucks"] = std::to_string(plan.city.fire_trucks);
    f["firefighters"] = std::to_string(plan.city.firefighters);
    f["fire_wave_period"] = std::to_string(plan.city.fire_wave_period);
    f["fires_per_wave"] = std::to_string(plan.city.fires_per_wave);
    f["observe_radius"] = format_double(plan.city.observe_radius);
    f["escalate_below_health"] = format_double(plan.city.escalate_below_health);
    std::string collab;
    for (std::size_t i = 0; i < plan.fire_collaboration.size(); ++i) {
      if (i) collab += ",";
      collab += plan.fire_collaboration[i] ? "fso" : "none";
    }
    f["collaboration"] = collab;
  }
  plan.sections = std::move(out);
  return plan;
}

ExperimentPlan parse_config(const std::string& text) {
  return plan_from_sections(parse_sections(text));
}

std::string list_defaults(ScenarioKind scenario) {
  ConfigSections minimal;
  minimal["experiment"]["scenario"] = std::string(scenario_name(scenario));
  return canonical_config(plan_from_sections(std::move(minimal)).sections);
}

}  // namespace fsosim
