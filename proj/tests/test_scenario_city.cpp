#include <doctest.h>

#include <functional>
#include <map>
#include <set>

#include "fsosim/errors.hpp"
#include "fsosim/metrics.hpp"
#include "fsosim/scenario_city.hpp"

using namespace fsosim;

namespace {

CityConfig base_cfg(std::uint64_t seed) {
  CityConfig cfg;
  cfg.world.master_seed = seed;
  cfg.world.max_ticks = 600;
  cfg.individuals = 30;
  cfg.auto_activities = false;  // scripted scenarios drive the agents
  return cfg;
}

CityConfig fire_cfg(std::uint64_t seed, bool fso) {
  CityConfig cfg;
  cfg.world.master_seed = seed;
  cfg.world.max_ticks = 1200;
  cfg.individuals = 50;
  cfg.healthcare_enabled = false;
  cfg.hospitals = cfg.doctors = cfg.ambulances = cfg.appliances = 0;
  cfg.fire_enabled = true;
  cfg.fso_fire_collaboration = fso;
  cfg.houses = 50;
  cfg.fire_trucks = 10;
  cfg.firefighters = 35;
  return cfg;
}

// Looks for a seed whose generated world satisfies a structural predicate.
std::uint64_t find_seed(const CityConfig& tmpl, const std::function<bool(CityWorld&)>& pred,
                        std::uint64_t limit = 400) {
  for (std::uint64_t seed = 1; seed <= limit; ++seed) {
    CityConfig cfg = tmpl;
    cfg.world.master_seed = seed;
    CityWorld w(cfg);
    if (pred(w)) return seed;
  }
  REQUIRE_MESSAGE(false, "no seed with the wanted composition found");
  return 0;
}

int count_kind(const EventLog& log, EventKind k) {
  int n = 0;
  for (const Event& e : log.records()) n += e.kind == k ? 1 : 0;
  return n;
}

}  // namespace

TEST_CASE("trigger_activity: the draw covers all kinds with the documented probabilities") {
  // 5 * 0.18 + 0.09 + 0.01 == 1.00
  CHECK(5.0 * 0.18 + 0.09 + 0.01 == doctest::Approx(1.0));
  RngStream rng(77, "activity");
  std::map<int, int> counts;
  int none = 0;
  const int n = 1000000;
  for (int i = 0; i < n; ++i) {
    auto kind = trigger_activity(rng, 0.18, 0.09);
    kind ? ++counts[static_cast<int>(*kind)] : ++none;
  }
  CHECK(std::abs(counts[static_cast<int>(ActivityKind::health_care)] / double(n) - 0.09) <
        0.001);
  for (int k = 0; k < 5; ++k) {
    CHECK(std::abs(counts[k] / double(n) - 0.18) < 0.0015);
  }
  CHECK(std::abs(none / double(n) - 0.01) < 0.0005);
}

TEST_CASE("plan_office_trip: walk when time allows, else car, else taxi") {
  CHECK(plan_office_trip(5.0, 0.25, 40, false) == TransportMode::on_foot);  // 20 <= 40
  CHECK(plan_office_trip(5.0, 0.25, 10, true) == TransportMode::own_car);   // 20 > 10
  CHECK(plan_office_trip(5.0, 0.25, 10, false) == TransportMode::taxi);
}

TEST_CASE("required_appliances follows the ceil rule") {
  CHECK(required_appliances(1) == 1);
  CHECK(required_appliances(3) == 1);
  CHECK(required_appliances(4) == 2);
  CHECK(required_appliances(8) == 3);
  CHECK(required_appliances(9) == 3);
  CHECK(required_appliances(10) == 4);
}

TEST_CASE("walk matching: two company-seeking walkers form a pair, three a trio") {
  CityConfig cfg = base_cfg(5);
  cfg.world.max_ticks = 50;
  CityWorld w(cfg);
  const auto& inds = w.individuals();
  w.begin_walk(inds[0].id, true);
  w.begin_walk(inds[1].id, true);
  w.advance_tick();
  CHECK(count_kind(w.log(), EventKind::group_formed) == 1);
  CHECK(count_kind(w.log(), EventKind::mutualistic_relationship) == 1);

  // A third compatible walker joins the existing group.
  w.begin_walk(inds[2].id, true);
  w.advance_tick();
  CHECK(count_kind(w.log(), EventKind::group_formed) == 1);
  CHECK(count_kind(w.log(), EventKind::mutualistic_relationship) == 2);
}

TEST_CASE("walk matching: a solo walker never joins a group") {
  CityConfig cfg = base_cfg(6);
  cfg.world.max_ticks = 30;
  CityWorld w(cfg);
  const auto& inds = w.individuals();
  w.begin_walk(inds[0].id, true);
  w.begin_walk(inds[1].id, false);
  for (int i = 0; i < 10; ++i) w.advance_tick();
  CHECK(count_kind(w.log(), EventKind::group_formed) == 0);
}

TEST_CASE("car sharing: nearby destinations pair, distant ones never do") {
  CityConfig cfg = base_cfg(1);
  cfg.world.max_ticks = 200;
  const std::uint64_t seed = find_seed(cfg, [](CityWorld& w) {
    return w.individuals()[0].owns_car && !w.individuals()[1].owns_car &&
           !w.individuals()[2].owns_car;
  });
  cfg.world.master_seed = seed;

  {
    CityWorld w(cfg);
    const auto& inds = w.individuals();
    w.begin_car_share(inds[1].id, {20, 20});  // requester first, no car
    w.begin_car_share(inds[0].id, {21, 20});  // owner departing, 1 cell apart
    w.advance_tick();
    CHECK(count_kind(w.log(), EventKind::carshare_paired) == 1);
    CHECK(count_kind(w.log(), EventKind::mutualistic_relationship) == 1);
  }
  {
    CityWorld w(cfg);
    const auto& inds = w.individuals();
    w.begin_car_share(inds[1].id, {20, 20});
    w.begin_car_share(inds[0].id, {1, 38});  // ~25 cells away, outside the radius
    for (int i = 0; i < 60; ++i) w.advance_tick();
    CHECK(count_kind(w.log(), EventKind::carshare_paired) == 0);
    CHECK(count_kind(w.log(), EventKind::activity_canceled) == 1);  // invalidation
  }
}

TEST_CASE("car sharing: unpaired requests are canceled after the invalidation threshold") {
  CityConfig cfg = base_cfg(1);
  cfg.world.max_ticks = 120;
  const std::uint64_t seed =
      find_seed(cfg, [](CityWorld& w) { return !w.individuals()[0].owns_car; });
  cfg.world.master_seed = seed;
  CityWorld w(cfg);
  w.begin_car_share(w.individuals()[0].id, {20, 20});
  Tick canceled_at = -1;
  while (!w.finished() && canceled_at < 0) {
    w.advance_tick();
    for (const Event& e : w.log().records()) {
      if (e.kind == EventKind::activity_canceled) canceled_at = e.tick;
    }
  }
  REQUIRE(canceled_at >= 0);
  CHECK(canceled_at == w.city_config().invalidation_threshold);
}

TEST_CASE("office trip by taxi: allocation logs a mutualistic relationship") {
  CityConfig cfg = base_cfg(1);
  cfg.world.max_ticks = 400;
  cfg.office_deadline = 10;  // walking can never make it; carless agents need a taxi
  const std::uint64_t seed = find_seed(cfg, [](CityWorld& w) {
    const auto& ind = w.individuals()[0];
    return !ind.owns_car &&
           distance(ind.pos, w.individuals()[0].pos) == 0.0;  // structural no-op guard
  });
  cfg.world.master_seed = seed;
  CityWorld w(cfg);
  const auto& ind = w.individuals()[0];
  w.begin_office_trip(ind.id);
  CHECK(count_kind(w.log(), EventKind::exception_raised) == 1);
  while (!w.finished() && count_kind(w.log(), EventKind::transport_mode) == 0) {
    w.advance_tick();
  }
  CHECK(count_kind(w.log(), EventKind::taxi_assigned) == 1);
  CHECK(count_kind(w.log(), EventKind::mutualistic_relationship) == 1);
  bool taxi_mode = false;
  for (const Event& e : w.log().records()) {
    if (e.kind == EventKind::transport_mode) {
      taxi_mode = e.a == static_cast<std::int64_t>(TransportMode::taxi);
    }
  }
  CHECK(taxi_mode);
}

TEST_CASE("fire waves: 10 ignitions on cycle, none off-cycle, clamped to supply") {
  CityConfig cfg = fire_cfg(3, true);
  CityWorld w(cfg);
  std::map<Tick, int> ignitions_by_tick;
  for (int i = 0; i < 150; ++i) w.advance_tick();
  for (const Event& e : w.log().records()) {
    if (e.kind == EventKind::fire_ignited) ++ignitions_by_tick[e.tick];
  }
  CHECK(ignitions_by_tick[100] == 10);
  CHECK(ignitions_by_tick.size() == 1);  // nothing at 1..99 or 101..150

  CityConfig small = fire_cfg(3, true);
  small.houses = 3;
  small.world.max_ticks = 150;
  CityWorld w2(small);
  w2.run_to_end();
  CHECK(count_kind(w2.log(), EventKind::fire_ignited) == 3);
}

TEST_CASE("fire dynamics: damage, suppression, and truck arithmetic") {
  // firelevel 3, no helpers, growth suppressed: health 100 -> 97
  auto r1 = fire_dynamics_step(3.0, 100.0, false, 0, 0);
  CHECK(r1.firelevel == doctest::Approx(3.0));
  CHECK(r1.health == doctest::Approx(97.0));
  CHECK_FALSE(r1.extinguished);

  // firelevel 1, two helpers (-1.0), no growth: net 0, fire dies, no damage
  auto r2 = fire_dynamics_step(1.0, 100.0, false, 2, 0);
  CHECK(r2.extinguished);
  CHECK(r2.health == doctest::Approx(100.0));

  // firelevel 5, truck with 4 firefighters (-5), no growth: extinguished
  auto r3 = fire_dynamics_step(5.0, 80.0, false, 0, 4);
  CHECK(r3.extinguished);

  // growth pushes the level up by one before suppression applies
  auto r4 = fire_dynamics_step(3.0, 100.0, true, 0, 0);
  CHECK(r4.firelevel == doctest::Approx(4.0));
  CHECK(r4.health == doctest::Approx(96.0));

  // a destroyed house reports destruction exactly at health <= 0
  auto r5 = fire_dynamics_step(5.0, 4.0, false, 0, 0);
  CHECK(r5.destroyed);
  CHECK(r5.health == doctest::Approx(0.0));
}

TEST_CASE("fire response: escalation only with the collaboration enabled") {
  CityConfig cfg = fire_cfg(7, true);
  CityWorld with_fso(cfg);
  with_fso.run_to_end();
  CHECK(count_kind(with_fso.log(), EventKind::truck_dispatched) > 0);
  CHECK(count_kind(with_fso.log(), EventKind::son_formed) > 0);

  CityConfig off = fire_cfg(7, false);
  CityWorld without(off);
  without.run_to_end();
  CHECK(count_kind(without.log(), EventKind::truck_dispatched) == 0);
  CHECK(count_kind(without.log(), EventKind::exception_resolved) == 0);
  // individuals still help on their own
  CHECK(count_kind(without.log(), EventKind::helper_joined) > 0);
}

TEST_CASE("fire response: helpers only join within the observing radius") {
  CityConfig cfg = fire_cfg(11, true);
  CityWorld w(cfg);
  std::map<AgentId, Position> house_pos;
  for (const auto& h : w.houses()) house_pos[h.id] = h.pos;
  std::set<AgentId> helping;
  while (!w.finished()) {
    std::map<AgentId, Position> before;
    for (const auto& ind : w.individuals()) before[ind.id] = ind.pos;
    w.advance_tick();
    for (const Event& e : w.log().records()) {
      if (e.tick == w.tick() && e.kind == EventKind::helper_joined && !helping.count(e.agent)) {
        REQUIRE(distance(before.at(e.agent), house_pos.at(e.a)) <=
                w.city_config().observe_radius + 1e-9);
      }
    }
    helping.clear();
    for (const auto& ind : w.individuals()) {
      if (ind.helping_house != -1) helping.insert(ind.id);
    }
  }
}

TEST_CASE("houses never reignite after burning down") {
  CityConfig cfg = fire_cfg(13, false);
  cfg.world.max_ticks = 2500;
  CityWorld w(cfg);
  w.run_to_end();
  std::set<AgentId> burned;
  std::map<AgentId, int> ignitions;
  for (const Event& e : w.log().records()) {
    if (e.kind == EventKind::house_burned) burned.insert(e.agent);
    if (e.kind == EventKind::fire_ignited) {
      REQUIRE(!burned.count(e.agent));
      ++ignitions[e.agent];
    }
  }
  for (const auto& [house, n] : ignitions) {
    (void)house;
    REQUIRE(n == 1);  // a house ignites at most once
  }
  CHECK(!burned.empty());
}

TEST_CASE("healthcare: minor illness under FSO is treated without an ambulance") {
  CityConfig cfg = base_cfg(1);
  cfg.world.max_ticks = 400;
  cfg.strategy = Strategy::fso;
  const std::uint64_t seed = find_seed(cfg, [](CityWorld& w) {
    (void)w;
    return true;
  });
  cfg.world.master_seed = seed;
  CityWorld w(cfg);
  w.begin_healthcare(w.individuals()[0].id, 2);
  while (!w.finished() && count_kind(w.log(), EventKind::treatment_finished) == 0) {
    w.advance_tick();
  }
  CHECK(count_kind(w.log(), EventKind::healthcare_treated) == 1);
  for (const auto& amb : w.ambulances()) {
    CHECK(amb.state == CityWorld::Ambulance::State::at_base);
  }
}

TEST_CASE("healthcare: missing appliances are borrowed from a sibling hospital") {
  CityConfig cfg = base_cfg(1);
  cfg.world.max_ticks = 500;
  cfg.strategy = Strategy::fso;
  // Composition: some severe class with an expert doctor somewhere, whose
  // appliance demand cannot be met by the expert's own hospital but can be
  // met tree-wide.
  int severity_pick = -1;
  const std::uint64_t seed = find_seed(cfg, [&](CityWorld& w) {
    for (int sev = 7; sev <= 9; ++sev) {
      const int need = required_appliances(sev);
      int total = 0;
      for (const auto& a : w.appliances()) total += a.type == sev ? 1 : 0;
      if (total < need) continue;
      for (const auto& d : w.doctors()) {
        if (!CityWorld::doctor_covers(d, sev)) continue;
        int local = 0;
        for (const auto& a : w.appliances()) {
          if (a.hospital == d.hospital && a.type == sev) ++local;
        }
        int experts_elsewhere = 0;
        for (const auto& d2 : w.doctors()) {
          if (d2.hospital != d.hospital && CityWorld::doctor_covers(d2, sev)) {
            ++experts_elsewhere;
          }
        }
        if (local < need && experts_elsewhere == 0) {
          severity_pick = sev;
          return true;
        }
      }
    }
    return false;
  });
  cfg.world.master_seed = seed;
  CityWorld w(cfg);
  w.begin_healthcare(w.individuals()[0].id, severity_pick);
  while (!w.finished() && count_kind(w.log(), EventKind::healthcare_treated) == 0) {
    w.advance_tick();
  }
  REQUIRE(count_kind(w.log(), EventKind::healthcare_treated) == 1);
  bool inter_community = false;
  for (const Event& e : w.log().records()) {
    if (e.kind == EventKind::son_formed && e.b >= 2) inter_community = true;
  }
  CHECK(inter_community);
  CHECK(w.sons().inter_community_count() >= 1);
}

TEST_CASE("healthcare: traditional starvation misses the deadline and the patient dies") {
  CityConfig cfg = base_cfg(1);
  cfg.world.max_ticks = 400;
  cfg.strategy = Strategy::traditional;
  cfg.threshold = 150;
  // A severity whose appliance demand no single hospital can meet: polling
  // visits every hospital and the request starves.
  int severity_pick = -1;
  const std::uint64_t seed = find_seed(cfg, [&](CityWorld& w) {
    for (int sev = 9; sev <= 10; ++sev) {
      const int need = required_appliances(sev);
      bool any_hospital = false;
      for (int h = 0; h < w.city_config().hospitals; ++h) {
        int local = 0;
        for (const auto& a : w.appliances()) {
          if (a.hospital == h && a.type == sev) ++local;
        }
        if (local >= need) any_hospital = true;
      }
      if (!any_hospital) {
        severity_pick = sev;
        return true;
      }
    }
    return false;
  });
  cfg.world.master_seed = seed;
  CityWorld w(cfg);
  const AgentId patient = w.individuals()[0].id;
  w.begin_healthcare(patient, severity_pick);
  w.run_to_end();
  CHECK(count_kind(w.log(), EventKind::healthcare_treated) == 0);
  Tick died_at = -1;
  for (const Event& e : w.log().records()) {
    if (e.kind == EventKind::patient_died && e.agent == patient) died_at = e.tick;
  }
  CHECK(died_at == cfg.threshold);  // issued at tick 0, killed exactly at the deadline
  CHECK_FALSE(w.individuals()[0].alive);

  // All-or-nothing on-arrival checks: nothing stays reserved after the run.
  for (const auto& hosp : w.hospitals()) {
    const auto& reg = w.tree().node(hosp.community).registry;
    for (const auto& [agent, rec] : reg.agents()) {
      (void)agent;
      REQUIRE(rec.availability == Availability::available);
    }
  }
}

TEST_CASE("healthcare invariants: terminality, deadline law, strategy isolation") {
  for (Strategy st : {Strategy::traditional, Strategy::fso, Strategy::perfect_oracle}) {
    CityConfig cfg = base_cfg(21);
    cfg.world.max_ticks = 1500;
    cfg.individuals = 60;
    cfg.strategy = st;
    CityWorld w(cfg);
    w.run_to_end();
    CitySummary s = summarize_city_run(w.log(), cfg);

    std::int64_t unresolved = 0;
    for (const auto& r : w.requests()) {
      if (r.allocated_at < 0 && r.state != CityWorld::HcRequest::State::done) ++unresolved;
    }
    CHECK(s.treated + s.died + unresolved == static_cast<std::int64_t>(w.requests().size()));

    std::map<std::int64_t, Tick> issued;
    for (const Event& e : w.log().records()) {
      if (e.kind == EventKind::healthcare_issued) issued[e.a] = e.tick;
      if (e.kind == EventKind::patient_died) {
        REQUIRE(e.tick - issued.at(e.a) == cfg.threshold);
      }
      if (e.kind == EventKind::healthcare_treated) {
        REQUIRE(e.b <= cfg.threshold);  // querying never exceeds the deadline
      }
    }
    if (st != Strategy::fso) {
      CHECK(count_kind(w.log(), EventKind::son_formed) == 0);
      CHECK(s.son_inter_community_count == 0);
    } else {
      CHECK(count_kind(w.log(), EventKind::hospital_rejected) == 0);
    }

    // Transport accounting: every office arrival records exactly one mode.
    const int started = [&] {
      int n = 0;
      for (const Event& e : w.log().records()) {
        n += e.kind == EventKind::activity_started &&
                     e.a == static_cast<std::int64_t>(ActivityKind::go_to_office)
                 ? 1
                 : 0;
      }
      return n;
    }();
    const int modes = s.transport_on_foot + s.transport_own_car + s.transport_taxi;
    CHECK(modes <= started);
  }
}

TEST_CASE("city runs are deterministic per (config, master_seed)") {
  CityConfig cfg = base_cfg(33);
  cfg.auto_activities = true;
  cfg.world.max_ticks = 1000;
  CityWorld a(cfg), b(cfg);
  a.run_to_end();
  b.run_to_end();
  CHECK(a.log() == b.log());
}

TEST_CASE("single-draw trace oracle: the first activity comes from the activity stream") {
  // Recompute the expected first draw with an independent stream replica and
  // check the world logs exactly that activity at tick 1.
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    CityConfig cfg;
    cfg.world.master_seed = seed;
    cfg.world.max_ticks = 2;
    cfg.individuals = 1;
    cfg.auto_activities = true;
    RngStream replica(seed, "activity");
    auto expected = trigger_activity(replica, cfg.p_activity, cfg.p_healthcare);

    CityWorld w(cfg);
    w.advance_tick();
    std::vector<const Event*> starts;
    for (const Event& e : w.log().records()) {
      if (e.kind == EventKind::activity_started) starts.push_back(&e);
    }
    if (!expected) {
      CHECK(starts.empty());
    } else {
      REQUIRE(starts.size() == 1);
      CHECK(starts[0]->tick == 1);
      CHECK(starts[0]->a == static_cast<std::int64_t>(*expected));
    }
  }
}

TEST_CASE("a non-idle individual never draws a new activity") {
  CityConfig cfg = base_cfg(2);
  cfg.auto_activities = true;  // everyone else may draw; the scripted one is busy
  cfg.world.max_ticks = 60;
  CityWorld w(cfg);
  const AgentId busy = w.individuals()[0].id;
  w.begin_talk(busy);
  for (int i = 0; i < 50; ++i) w.advance_tick();  // talk lasts longer than 50 ticks
  int starts_for_busy = 0;
  for (const Event& e : w.log().records()) {
    if (e.kind == EventKind::activity_started && e.agent == busy) ++starts_for_busy;
  }
  CHECK(starts_for_busy == 1);
}

TEST_CASE("trucks are requested only once a house drops below the escalation health") {
  CityConfig cfg = fire_cfg(19, true);
  cfg.world.max_ticks = 1500;
  CityWorld w(cfg);
  w.run_to_end();
  std::set<AgentId> escalated;
  for (const Event& e : w.log().records()) {
    if (e.kind == EventKind::exception_raised && e.b == 2) escalated.insert(e.agent);
    if (e.kind == EventKind::truck_dispatched) {
      REQUIRE(escalated.count(e.a));  // dispatch always follows the escalation
    }
  }
  CHECK(!escalated.empty());
}

TEST_CASE("city config validation") {
  CityConfig cfg;
  cfg.p_activity = 0.25;  // 5 * 0.25 > 1
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = CityConfig{};
  cfg.car_ownership = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = CityConfig{};
  cfg.fire_enabled = true;
  cfg.houses = 0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
}
