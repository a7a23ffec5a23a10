#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "fsosim/config.hpp"
#include "fsosim/errors.hpp"
#include "fsosim/metrics.hpp"
#include "fsosim/mutualism.hpp"
#include "fsosim/runner.hpp"
#include "fsosim/scenario_city.hpp"
#include "fsosim/scenario_falls.hpp"

namespace py = pybind11;
using namespace fsosim;

namespace {

py::dict falls_to_dict(const FallsSummary& s) {
  py::dict d;
  d["scenario"] = s.scenario;
  d["ic_count"] = s.ic_count;
  d["seed"] = s.seed;
  d["fp"] = s.fp;
  d["fn"] = s.fn;
  d["tp"] = s.tp;
  d["tn"] = s.tn;
  d["avg_fp_per_tick"] = s.avg_fp_per_tick;
  d["avg_fn_per_tick"] = s.avg_fn_per_tick;
  d["fp_ratio"] = s.fp_ratio;
  d["fn_ratio"] = s.fn_ratio;
  d["sensitivity"] = s.sensitivity;
  d["specificity"] = s.specificity;
  d["csc_ambulances"] = s.csc_ambulances;
  d["csc_volunteers"] = s.csc_volunteers;
  d["cwt"] = s.cwt;
  d["reqs_handled"] = s.reqs_handled;
  d["ic_verifications"] = s.ic_verifications;
  d["ma_verifications"] = s.ma_verifications;
  d["ma_interventions"] = s.ma_interventions;
  d["avg_ma_cost"] = s.avg_ma_cost;
  d["avg_wt"] = s.avg_wt;
  d["open_alarms"] = s.open_alarms;
  d["max_ticks"] = s.max_ticks;
  return d;
}

py::dict city_to_dict(const CitySummary& s) {
  py::dict d;
  d["strategy"] = std::string(strategy_name(s.strategy));
  d["threshold"] = s.threshold;
  d["individuals"] = s.individuals;
  d["seed"] = s.seed;
  d["requests_resolved"] = s.requests_resolved;
  d["treated"] = s.treated;
  d["died"] = s.died;
  d["avg_querying_time"] = s.avg_querying_time;
  d["son_inter_community_count"] = s.son_inter_community_count;
  d["traditional_failure_count"] = s.traditional_failure_count;
  d["transport_on_foot"] = s.transport_on_foot;
  d["transport_own_car"] = s.transport_own_car;
  d["transport_taxi"] = s.transport_taxi;
  d["fully_burned_houses"] = s.fully_burned_houses;
  return d;
}

mutualism::DomainEval eval_from_dict(const py::dict& d) {
  mutualism::DomainEval out;
  for (auto item : d) {
    out.eval[item.first.cast<std::string>()] =
        static_cast<mutualism::Significance>(item.second.cast<int>());
  }
  return out;
}

mutualism::ActionMap map_from_dict(const py::dict& d) {
  mutualism::ActionMap out;
  for (auto item : d) {
    out.add(item.first.cast<std::string>(), item.second.cast<std::string>());
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_fsosim, m) {
  m.doc() = "Deterministic multi-agent simulator for fractal social organizations";
  m.attr("__version__") = "0.1.0";

  py::register_exception<fsosim::Error>(m, "FsosimError");

  m.def(
      "distance",
      [](std::pair<double, double> a, std::pair<double, double> b) {
        return distance({a.first, a.second}, {b.first, b.second});
      },
      py::arg("a"), py::arg("b"), "Euclidean distance between two (x, y) cells");

  m.def(
      "move_toward",
      [](std::pair<double, double> current, std::pair<double, double> target, double speed,
         int width, int height) {
        WorldConfig arena;
        arena.width = width;
        arena.height = height;
        auto r = move_toward({current.first, current.second}, {target.first, target.second},
                             speed, arena);
        return py::make_tuple(py::make_tuple(r.pos.x, r.pos.y), r.arrived);
      },
      py::arg("current"), py::arg("target"), py::arg("speed"), py::arg("width") = 41,
      py::arg("height") = 41,
      "Advance `speed` cells toward the target; returns ((x, y), arrived)");

  // Mutualistic-relationship calculus: significances are -1/0/1.
  m.def(
      "check_mutualistic_precondition",
      [](const py::dict& x, const py::dict& y, const py::dict& action_map) {
        return mutualism::check_mutualistic_precondition(eval_from_dict(x), eval_from_dict(y),
                                                         map_from_dict(action_map));
      },
      py::arg("x"), py::arg("y"), py::arg("action_map"));
  m.def(
      "check_extended_precondition",
      [](const py::dict& x, const py::dict& y, const py::dict& action_map) {
        return mutualism::check_extended_precondition(eval_from_dict(x), eval_from_dict(y),
                                                      map_from_dict(action_map));
      },
      py::arg("x"), py::arg("y"), py::arg("action_map"));
  m.def(
      "merge_group_activity",
      [](const std::vector<std::tuple<std::int64_t, std::string, bool>>& candidates) {
        std::vector<mutualism::GroupCandidate> cs;
        for (const auto& [agent, kind, company] : candidates) {
          cs.push_back({agent, kind, company});
        }
        py::list out;
        for (const auto& g : mutualism::merge_group_activity(cs, 0)) {
          out.append(py::make_tuple(g.activity_kind, g.members));
        }
        return out;
      },
      py::arg("candidates"),
      "Greedy earliest-first grouping of (agent, kind, wants_company) candidates");

  m.def(
      "run_falls",
      [](std::uint64_t seed, Tick ticks, int width, int height, int elderly, int device_count,
         int informal_carers, int professional_carers, int mobility_agents, double p_fall,
         double p_false_positive, double p_false_negative, double walk_speed,
         double vehicle_speed, Tick treatment_min, Tick treatment_max) {
        FallsConfig cfg;
        cfg.world.master_seed = seed;
        cfg.world.max_ticks = ticks;
        cfg.world.width = width;
        cfg.world.height = height;
        cfg.elderly = elderly;
        cfg.device_count = device_count;
        cfg.informal_carers = informal_carers;
        cfg.professional_carers = professional_carers;
        cfg.mobility_agents = mobility_agents;
        cfg.p_fall = p_fall;
        cfg.p_false_positive = p_false_positive;
        cfg.p_false_negative = p_false_negative;
        cfg.walk_speed = walk_speed;
        cfg.vehicle_speed = vehicle_speed;
        cfg.treatment_min = treatment_min;
        cfg.treatment_max = treatment_max;
        FallsSummary s;
        {
          py::gil_scoped_release release;
          s = run_falls(cfg);
        }
        return falls_to_dict(s);
      },
      py::arg("seed") = 1, py::arg("ticks") = 10000, py::arg("width") = 81,
      py::arg("height") = 81, py::arg("elderly") = 30, py::arg("device_count") = 1,
      py::arg("informal_carers") = 0, py::arg("professional_carers") = 6,
      py::arg("mobility_agents") = 5, py::arg("p_fall") = 1.0 / 600.0,
      py::arg("p_false_positive") = 1.0 / 500.0, py::arg("p_false_negative") = 0.2,
      py::arg("walk_speed") = 0.25, py::arg("vehicle_speed") = 1.0,
      py::arg("treatment_min") = 50, py::arg("treatment_max") = 150,
      "Run one falls-model simulation and return its summary row as a dict");

  m.def(
      "run_city",
      [](std::uint64_t seed, Tick ticks, int width, int height, const std::string& strategy,
         Tick threshold, int individuals, int hospitals, int doctors, int ambulances,
         int appliances, int taxis, int offices, double car_ownership, Tick treatment_min,
         Tick treatment_max) {
        CityConfig cfg;
        cfg.world.master_seed = seed;
        cfg.world.max_ticks = ticks;
        cfg.world.width = width;
        cfg.world.height = height;
        cfg.strategy = strategy_from_name(strategy);
        cfg.threshold = threshold;
        cfg.individuals = individuals;
        cfg.hospitals = hospitals;
        cfg.doctors = doctors;
        cfg.ambulances = ambulances;
        cfg.appliances = appliances;
        cfg.taxis = taxis;
        cfg.offices = offices;
        cfg.car_ownership = car_ownership;
        cfg.treatment_min = treatment_min;
        cfg.treatment_max = treatment_max;
        CitySummary s;
        {
          py::gil_scoped_release release;
          s = run_city(cfg);
        }
        return city_to_dict(s);
      },
      py::arg("seed") = 1, py::arg("ticks") = 3000, py::arg("width") = 41,
      py::arg("height") = 41, py::arg("strategy") = "fso", py::arg("threshold") = 150,
      py::arg("individuals") = 140, py::arg("hospitals") = 4, py::arg("doctors") = 15,
      py::arg("ambulances") = 8, py::arg("appliances") = 70, py::arg("taxis") = 10,
      py::arg("offices") = 4, py::arg("car_ownership") = 0.25, py::arg("treatment_min") = 50,
      py::arg("treatment_max") = 200,
      "Run one healthcare city simulation and return its summary row as a dict");

  m.def(
      "run_fire",
      [](std::uint64_t seed, Tick ticks, bool collaboration, int houses, int individuals,
         int fire_trucks, int firefighters) {
        CityConfig cfg;
        cfg.world.master_seed = seed;
        cfg.world.max_ticks = ticks;
        cfg.healthcare_enabled = false;
        cfg.hospitals = cfg.doctors = cfg.ambulances = cfg.appliances = 0;
        cfg.fire_enabled = true;
        cfg.fso_fire_collaboration = collaboration;
        cfg.houses = houses;
        cfg.individuals = individuals;
        cfg.fire_trucks = fire_trucks;
        cfg.firefighters = firefighters;
        CitySummary s;
        {
          py::gil_scoped_release release;
          s = run_city(cfg);
        }
        return city_to_dict(s);
      },
      py::arg("seed") = 1, py::arg("ticks") = 3000, py::arg("collaboration") = true,
      py::arg("houses") = 50, py::arg("individuals") = 50, py::arg("fire_trucks") = 10,
      py::arg("firefighters") = 35,
      "Run one houses-on-fire simulation and return its summary row as a dict");

  m.def("list_defaults",
        [](const std::string& scenario) { return list_defaults(scenario_from_name(scenario)); },
        py::arg("scenario") = "falls",
        "The fully explicit defaults for a scenario, as config text");

  m.def(
      "run_experiment",
      [](const std::string& config_text, const std::string& out_dir, int jobs) {
        ExperimentPlan plan = parse_config(config_text);
        if (!out_dir.empty()) plan.out_dir = out_dir;
        ExperimentArtifacts artifacts;
        {
          py::gil_scoped_release release;
          artifacts = run_experiment(plan, jobs);
        }
        py::dict d;
        std::vector<std::string> files;
        for (const auto& f : artifacts.csv_files) files.push_back(f.string());
        d["csv_files"] = files;
        d["manifest"] = artifacts.manifest_path.string();
        d["runs"] = artifacts.runs;
        return d;
      },
      py::arg("config_text"), py::arg("out_dir") = "", py::arg("jobs") = 1,
      "Run a full experiment plan from config text; returns the written artifacts");
}
