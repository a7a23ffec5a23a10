#include "fsosim/scenario_city.hpp"

#include <algorithm>
#include <cmath>

#include "fsosim/errors.hpp"
#include "fsosim/mutualism.hpp"

namespace fsosim {

namespace {
constexpr double kTau = 6.283185307179586;

// exception_raised payload codes (event field b)
constexpr std::int64_t kCtxCarShare = 0;
constexpr std::int64_t kCtxTaxi = 1;
constexpr std::int64_t kCtxFire = 2;
constexpr std::int64_t kCtxHealthcare = 3;
}  // namespace

void CityConfig::validate() const {
  world.validate();
  if (individuals < 1) throw ValidationError("city.individuals", "must be >= 1");
  if (car_ownership < 0.0 || car_ownership > 1.0) {
    throw ValidationError("city.car_ownership", "must be in [0, 1]");
  }
  if (offices < 1) throw ValidationError("city.offices", "must be >= 1");
  if (taxis < 0) throw ValidationError("city.taxis", "must be >= 0");
  if (threshold < 1) throw ValidationError("city.threshold", "must be >= 1");
  if (healthcare_enabled) {
    if (hospitals < 1) throw ValidationError("city.hospitals", "must be >= 1");
    if (doctors < 1) throw ValidationError("city.doctors", "must be >= 1");
    if (ambulances < 0) throw ValidationError("city.ambulances", "must be >= 0");
    if (appliances < 0) throw ValidationError("city.appliances", "must be >= 0");
  }
  if (fire_enabled) {
    if (houses < 1) throw ValidationError("city.houses", "must be >= 1");
    if (fire_wave_period < 1) throw ValidationError("city.fire_wave_period", "must be >= 1");
    if (fires_per_wave < 1) throw ValidationError("city.fires_per_wave", "must be >= 1");
    if (fire_trucks < 0) throw ValidationError("city.fire_trucks", "must be >= 0");
    if (fso_fire_collaboration && fire_trucks > 0 && firefighters < fire_trucks) {
      throw ValidationError("city.firefighters", "need at least one firefighter per truck");
    }
  }
  if (treatment_min < 1 || treatment_max < treatment_min) {
    throw ValidationError("city.treatment", "need 1 <= treatment_min <= treatment_max");
  }
  if (walk_speed <= 0.0 || vehicle_speed <= 0.0) {
    throw ValidationError("city.speed", "speeds must be > 0");
  }
  if (p_activity < 0.0 || p_healthcare < 0.0 || 5.0 * p_activity + p_healthcare > 1.0) {
    throw ValidationError("city.activity_probabilities",
                          "need 5*p_activity + p_healthcare <= 1");
  }
  if (wants_company_p < 0.0 || wants_company_p > 1.0) {
    throw ValidationError("city.wants_company_p", "must be in [0, 1]");
  }
}

std::optional<ActivityKind> trigger_activity(RngStream& rng, double p_activity,
                                             double p_healthcare) {
  const double u = rng.next_double();
  if (u < 5.0 * p_activity) {
    return static_cast<ActivityKind>(static_cast<int>(u / p_activity));
  }
  if (u < 5.0 * p_activity + p_healthcare) return ActivityKind::health_care;
  return std::nullopt;
}

TransportMode plan_office_trip(double dist, double walk_speed, Tick deadline_ticks,
                               bool owns_car) {
  if (dist / walk_speed <= static_cast<double>(deadline_ticks)) return TransportMode::on_foot;
  return owns_car ? TransportMode::own_car : TransportMode::taxi;
}

int required_appliances(int severity) { return (severity + 2) / 3; }

RoleKind doctor_role(int condition) { return "doctor:" + std::to_string(condition); }
RoleKind appliance_role(int condition) { return "appliance:" + std::to_string(condition); }

bool CityWorld::doctor_covers(const Doctor& d, int severity) {
  return severity <= 3 || d.expert.count(severity) != 0;
}

CityWorld::CityWorld(const CityConfig& cfg) : World(cfg.world), cfg_city_(cfg) {
  cfg.validate();
  AgentId next_id = 0;
  const AgentId root_coord = next_id++;
  const AgentId residents_coord = next_id++;
  const AgentId firefighters_coord = next_id++;

  root_ = tree_.add_community("emergency_response", 2, root_coord);
  residents_ = tree_.add_community("local_residents", 1, residents_coord, root_);
  if (cfg.fire_enabled && cfg.fso_fire_collaboration && cfg.fire_trucks > 0) {
    firefighters_ = tree_.add_community("firefighters", 1, firefighters_coord, root_);
  }

  RngStream& place = rng("placement");
  auto random_cell = [&] {
    return Position{place.uniform_double(0, cfg_.width), place.uniform_double(0, cfg_.height)};
  };

  park_ = random_cell();
  for (int i = 0; i < cfg.offices; ++i) offices_.push_back(random_cell());

  if (cfg.healthcare_enabled) {
    for (int h = 0; h < cfg.hospitals; ++h) {
      Hospital hosp;
      hosp.id = next_id++;
      hosp.pos = random_cell();
      hosp.community =
          tree_.add_community("hospital_" + std::to_string(h), 1, hosp.id, root_);
      hospitals_.push_back(hosp);
    }
  }

  for (int i = 0; i < cfg.individuals; ++i) {
    Individual ind;
    ind.id = next_id++;
    ind.pos = random_cell();
    ind.owns_car = place.bernoulli(cfg.car_ownership);
    ind.office = static_cast<int>(place.uniform_int(0, cfg.offices - 1));
    individuals_.push_back(ind);
    tree_.add_member(residents_, ind.id);
  }

  for (int i = 0; i < cfg.taxis; ++i) {
    Taxi t;
    t.id = next_id++;
    t.pos = random_cell();
    taxis_.push_back(t);
    tree_.add_member(residents_, t.id);
    Notification offer;
    offer.origin = t.id;
    offer.kind = Notification::Kind::service_offer;
    offer.role = "taxi";
    offer.position = t.pos;
    publish_notification(tree_, residents_, offer);
  }

  if (cfg.fire_enabled) {
    for (int i = 0; i < cfg.houses; ++i) {
      House h;
      h.id = next_id++;
      h.pos = random_cell();
      houses_.push_back(h);
      tree_.add_member(residents_, h.id);
    }
    next_id += cfg.houses;  // one fire detector per house
    if (firefighters_ != -1) {
      for (int i = 0; i < cfg.fire_trucks; ++i) {
        FireTruck t;
        t.id = next_id++;
        t.base = random_cell();
        t.pos = t.base;
        // Crew assigned round robin; every truck carries 1..4 firefighters.
        const int base_crew = cfg.firefighters / cfg.fire_trucks;
        const int extra = i < cfg.firefighters % cfg.fire_trucks ? 1 : 0;
        t.crew = std::clamp(base_crew + extra, 1, 4);
        trucks_.push_back(t);
        tree_.add_member(firefighters_, t.id);
        Notification offer;
        offer.origin = t.id;
        offer.kind = Notification::Kind::service_offer;
        offer.role = "firetruck";
        offer.position = t.pos;
        publish_notification(tree_, firefighters_, offer);
      }
      next_id += cfg.firefighters;  // crew members ride their truck
    }
  }

  if (cfg.healthcare_enabled) {
    for (int i = 0; i < cfg.doctors; ++i) {
      Doctor d;
      d.id = next_id++;
      d.hospital = static_cast<int>(place.uniform_int(0, cfg.hospitals - 1));
      while (static_cast<int>(d.expert.size()) < 3) {
        d.expert.insert(static_cast<int>(place.uniform_int(4, 10)));
      }
      doctors_.push_back(d);
      Hospital& hosp = hospitals_[static_cast<std::size_t>(d.hospital)];
      hosp.doctor_ids.push_back(d.id);
      tree_.add_member(hosp.community, d.id);
      for (int c = 1; c <= 10; ++c) {
        if (!doctor_covers(d, c)) continue;
        Notification offer;
        offer.origin = d.id;
        offer.kind = Notification::Kind::service_offer;
        offer.role = doctor_role(c);
        offer.position = hosp.pos;
        publish_notification(tree_, hosp.community, offer);
      }
    }
    for (int i = 0; i < cfg.ambulances; ++i) {
      Ambulance a;
      a.id = next_id++;
      a.hospital = static_cast<int>(place.uniform_int(0, cfg.hospitals - 1));
      Hospital& hosp = hospitals_[static_cast<std::size_t>(a.hospital)];
      a.pos = hosp.pos;
      ambulances_.push_back(a);
      hosp.ambulance_ids.push_back(a.id);
      tree_.add_member(hosp.community, a.id);
      Notification offer;
      offer.origin = a.id;
      offer.kind = Notification::Kind::service_offer;
      offer.role = "ambulance";
      offer.position = hosp.pos;
      publish_notification(tree_, hosp.community, offer);
    }
    for (int i = 0; i < cfg.appliances; ++i) {
      Appliance ap;
      ap.id = next_id++;
      ap.hospital = static_cast<int>(place.uniform_int(0, cfg.hospitals - 1));
      ap.type = static_cast<int>(place.uniform_int(1, 10));
      Hospital& hosp = hospitals_[static_cast<std::size_t>(ap.hospital)];
      appliances_.push_back(ap);
      hosp.appliance_ids.push_back(ap.id);
      tree_.add_member(hosp.community, ap.id);
      Notification offer;
      offer.origin = ap.id;
      offer.kind = Notification::Kind::service_offer;
      offer.role = appliance_role(ap.type);
      offer.position = hosp.pos;
      publish_notification(tree_, hosp.community, offer);
    }
    amb_queues_.resize(static_cast<std::size_t>(cfg.hospitals));
  }
  tree_.validate();
}

CityWorld::Individual& CityWorld::individual_by_id(AgentId id) {
  for (Individual& ind : individuals_) {
    if (ind.id == id) return ind;
  }
  throw ValidationError("city.individual", "unknown individual id");
}

CityWorld::Ambulance* CityWorld::ambulance_by_id(AgentId id) {
  for (Ambulance& a : ambulances_) {
    if (a.id == id) return &a;
  }
  return nullptr;
}

CityWorld::House& CityWorld::house_by_id(AgentId id) {
  for (House& h : houses_) {
    if (h.id == id) return h;
  }
  throw ValidationError("city.house", "unknown house id");
}

int CityWorld::hospital_index_of(CommunityId community) const {
  for (std::size_t i = 0; i < hospitals_.size(); ++i) {
    if (hospitals_[i].community == community) return static_cast<int>(i);
  }
  return -1;
}

int CityWorld::nearest_hospital(Position from) const {
  int best = -1;
  double best_d = 0.0;
  for (std::size_t i = 0; i < hospitals_.size(); ++i) {
    const double d = distance(from, hospitals_[i].pos);
    if (best < 0 || d < best_d) {
      best = static_cast<int>(i);
      best_d = d;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Phase 1: activity generation and fire waves
// ---------------------------------------------------------------------------

void CityWorld::phase_event_generation() {
  if (cfg_city_.fire_enabled && tick_ > 0 && tick_ % cfg_city_.fire_wave_period == 0) {
    std::vector<std::size_t> intact;
    for (std::size_t i = 0; i < houses_.size(); ++i) {
      if (!houses_[i].ever_ignited) intact.push_back(i);
    }
    RngStream& fire = rng("fire");
    const int n = std::min<int>(cfg_city_.fires_per_wave, static_cast<int>(intact.size()));
    for (int k = 0; k < n; ++k) {
      const auto pick = static_cast<std::size_t>(
          fire.uniform_int(k, static_cast<std::int64_t>(intact.size()) - 1));
      std::swap(intact[static_cast<std::size_t>(k)], intact[pick]);
      House& h = houses_[intact[static_cast<std::size_t>(k)]];
      h.ever_ignited = true;
      h.burning = true;
      h.firelevel = static_cast<double>(fire.uniform_int(1, 5));
      emit(h.id, EventKind::fire_ignited).a = static_cast<std::int64_t>(h.firelevel);
    }
  }

  if (!cfg_city_.auto_activities) return;
  RngStream& activity = rng("activity");
  for (Individual& ind : individuals_) {
    if (!ind.alive || ind.state != Individual::State::idle) continue;
    auto kind = trigger_activity(activity, cfg_city_.p_activity, cfg_city_.p_healthcare);
    if (!kind) continue;
    if (*kind == ActivityKind::health_care && !cfg_city_.healthcare_enabled) continue;
    start_activity(ind, *kind);
  }
}

void CityWorld::start_activity(Individual& ind, ActivityKind kind) {
  RngStream& activity = rng("activity");
  switch (kind) {
    case ActivityKind::talk_on_phone: begin_talk(ind.id); break;
    case ActivityKind::go_to_market: begin_market(ind.id); break;
    case ActivityKind::walk_in_park:
      begin_walk(ind.id, activity.bernoulli(cfg_city_.wants_company_p));
      break;
    case ActivityKind::go_to_location:
      begin_car_share(ind.id, {activity.uniform_double(0, cfg_.width),
                               activity.uniform_double(0, cfg_.height)});
      break;
    case ActivityKind::go_to_office: begin_office_trip(ind.id); break;
    case ActivityKind::health_care:
      begin_healthcare(ind.id, static_cast<int>(rng("healthcare").uniform_int(1, 10)));
      break;
  }
}

CityWorld::Individual& CityWorld::activity_prologue(AgentId id, ActivityKind kind) {
  Individual& ind = individual_by_id(id);
  if (!ind.alive || ind.state != Individual::State::idle) {
    throw ValidationError("city.activity", "agent must be idle to start an activity");
  }
  ind.activity = kind;
  ind.activity_since = tick_;
  ind.group = -1;
  ind.detouring = false;
  ind.rider = -1;
  emit(ind.id, EventKind::activity_started).a = static_cast<std::int64_t>(kind);
  return ind;
}

void CityWorld::begin_talk(AgentId id) {
  Individual& ind = activity_prologue(id, ActivityKind::talk_on_phone);
  ind.state = Individual::State::stationary;
  ind.countdown = cfg_city_.talk_duration;
}

void CityWorld::begin_market(AgentId id) {
  Individual& ind = activity_prologue(id, ActivityKind::go_to_market);
  ind.state = Individual::State::stationary;
  ind.countdown = cfg_city_.market_duration;
}

void CityWorld::begin_walk(AgentId id, bool wants_company) {
  Individual& ind = activity_prologue(id, ActivityKind::walk_in_park);
  ind.state = Individual::State::moving;
  ind.target = park_;
  ind.speed = cfg_city_.walk_speed;
  ind.countdown = cfg_city_.walk_dwell;
  ind.wants_company = wants_company;
}

void CityWorld::begin_car_share(AgentId id, Position destination) {
  Individual& ind = activity_prologue(id, ActivityKind::go_to_location);
  ind.share_dest = clamp_to_arena(destination, cfg_);
  if (ind.owns_car) {
    ind.state = Individual::State::moving;
    ind.target = ind.share_dest;
    ind.speed = cfg_city_.vehicle_speed;
  } else {
    ind.state = Individual::State::wait_share;
    share_requesters_.push_back(ind.id);
    emit(ind.id, EventKind::exception_raised).b = kCtxCarShare;
  }
}

void CityWorld::begin_office_trip(AgentId id) {
  Individual& ind = activity_prologue(id, ActivityKind::go_to_office);
  const Position office = offices_[static_cast<std::size_t>(ind.office)];
  ind.mode = plan_office_trip(distance(ind.pos, office), cfg_city_.walk_speed,
                              cfg_city_.office_deadline, ind.owns_car);
  if (ind.mode == TransportMode::taxi) {
    ind.state = Individual::State::wait_taxi;
    taxi_waiters_.push_back(ind.id);
    emit(ind.id, EventKind::exception_raised).b = kCtxTaxi;
  } else {
    ind.state = Individual::State::moving;
    ind.target = office;
    ind.speed = ind.mode == TransportMode::on_foot ? cfg_city_.walk_speed
                                                   : cfg_city_.vehicle_speed;
  }
}

void CityWorld::begin_healthcare(AgentId id, int severity) {
  if (severity < 1 || severity > 10) {
    throw ValidationError("city.severity", "must be in 1..10");
  }
  if (!cfg_city_.healthcare_enabled) {
    throw ValidationError("city.healthcare", "healthcare is disabled in this run");
  }
  Individual& ind = activity_prologue(id, ActivityKind::health_care);
  HcRequest req;
  req.id = static_cast<std::int64_t>(requests_.size());
  req.patient = ind.id;
  req.severity = severity;
  req.issued_at = tick_;
  req.deadline = tick_ + cfg_city_.threshold;
  requests_.push_back(req);
  ind.state = Individual::State::patient;
  ind.request = req.id;
  ++issued_requests_;
  Event& e = emit(ind.id, EventKind::healthcare_issued);
  e.a = req.id;
  e.b = req.severity;
  if (cfg_city_.strategy == Strategy::fso) {
    emit(ind.id, EventKind::exception_raised).b = kCtxHealthcare;
  }
}

// ---------------------------------------------------------------------------
// Phase 2: sensing (fire detectors and bystanders)
// ---------------------------------------------------------------------------

void CityWorld::phase_device_sensing() {
  if (!cfg_city_.fire_enabled) return;
  for (House& h : houses_) {
    if (h.burning && h.health < cfg_city_.escalate_below_health && !h.truck_requested &&
        firefighters_ != -1) {
      h.truck_requested = true;
      Event& e = emit(h.id, EventKind::exception_raised);
      e.b = kCtxFire;
    }
  }
  for (Individual& ind : individuals_) {
    if (!ind.alive || ind.helping_house != -1) continue;
    const bool postponable =
        ind.state == Individual::State::idle || ind.state == Individual::State::stationary ||
        (ind.state == Individual::State::moving && ind.speed == cfg_city_.walk_speed);
    if (!postponable) continue;
    std::int64_t found = -1;
    double best = cfg_city_.observe_radius;
    for (const House& h : houses_) {
      if (!h.burning) continue;
      const double d = distance(ind.pos, h.pos);
      if (d <= best) {
        best = d;
        found = h.id;
      }
    }
    if (found != -1) postpone_for_fire(ind, found);
  }
}

void CityWorld::postpone_for_fire(Individual& ind, std::int64_t house_id) {
  if (ind.state != Individual::State::idle) {
    ind.has_postponed = true;
    ind.postponed_state = ind.state;
    ind.postponed_activity = ind.activity;
    ind.postponed_countdown = ind.countdown;
    ind.postponed_target = ind.target;
    ind.postponed_speed = ind.speed;
    emit(ind.id, EventKind::activity_postponed).a = static_cast<std::int64_t>(ind.activity);
    leave_walk_group(ind);
  }
  ind.state = Individual::State::helping;
  ind.helping_house = house_id;
  emit(ind.id, EventKind::helper_joined).a = house_id;
}

void CityWorld::resume_postponed(Individual& ind) {
  ind.helping_house = -1;
  if (ind.has_postponed) {
    ind.has_postponed = false;
    ind.state = ind.postponed_state;
    ind.activity = ind.postponed_activity;
    ind.countdown = ind.postponed_countdown;
    ind.target = ind.postponed_target;
    ind.speed = ind.postponed_speed;
    emit(ind.id, EventKind::activity_resumed).a = static_cast<std::int64_t>(ind.activity);
  } else {
    ind.state = Individual::State::idle;
  }
}

// ---------------------------------------------------------------------------
// Phase 3: coordinator work
// ---------------------------------------------------------------------------

void CityWorld::phase_coordinator_messages() {
  process_walk_matching();
  process_car_sharing();
  process_taxi_queue();
  process_fire_exceptions();
  if (cfg_city_.healthcare_enabled) {
    process_healthcare();
    process_deadlines();
  }
}

void CityWorld::process_walk_matching() {
  // Walkers who asked for company and have no group yet, in arrival order.
  std::vector<AgentId> candidates;
  for (const Individual& ind : individuals_) {
    if (ind.alive && ind.activity == ActivityKind::walk_in_park && ind.wants_company &&
        ind.group == -1 &&
        (ind.state == Individual::State::moving ||
         ind.state == Individual::State::stationary)) {
      candidates.push_back(ind.id);
    }
  }
  if (candidates.empty()) return;
  std::sort(candidates.begin(), candidates.end(), [&](AgentId a, AgentId b) {
    const Individual& ia = individual_by_id(a);
    const Individual& ib = individual_by_id(b);
    return std::tie(ia.activity_since, a) < std::tie(ib.activity_since, b);
  });

  // A compatible active group absorbs newcomers (links may span > 2 agents).
  WalkGroup* open = nullptr;
  for (WalkGroup& g : groups_) {
    if (g.active) {
      open = &g;
      break;
    }
  }
  for (AgentId id : candidates) {
    Individual& ind = individual_by_id(id);
    if (ind.group != -1) continue;  // grouped by an earlier batch this tick
    if (open) {
      open->members.push_back(id);
      ind.group = open->id;
      Event& e = emit(id, EventKind::mutualistic_relationship);
      e.a = open->id;
      e.b = static_cast<std::int64_t>(ActivityKind::walk_in_park);
      continue;
    }
    // No open group: gather the remaining candidates into a fresh one.
    std::vector<mutualism::GroupCandidate> remaining;
    for (AgentId other : candidates) {
      if (individual_by_id(other).group == -1) {
        remaining.push_back({other, "walk_in_park", true});
      }
    }
    auto groups = mutualism::merge_group_activity(remaining, tick_);
    if (groups.empty()) break;  // a single walker proceeds alone, still matchable
    WalkGroup g;
    g.id = static_cast<std::int64_t>(groups_.size());
    g.members = groups[0].members;
    g.active = true;
    for (AgentId m : g.members) individual_by_id(m).group = g.id;
    groups_.push_back(g);
    open = &groups_.back();
    Event& e = emit(g.members.front(), EventKind::group_formed);
    e.a = g.id;
    e.b = static_cast<std::int64_t>(g.members.size());
    Event& m = emit(g.members.front(), EventKind::mutualistic_relationship);
    m.a = g.id;
    m.b = static_cast<std::int64_t>(ActivityKind::walk_in_park);
  }
}

void CityWorld::leave_walk_group(Individual& ind) {
  if (ind.group == -1) return;
  WalkGroup& g = groups_[static_cast<std::size_t>(ind.group)];
  std::erase(g.members, ind.id);
  emit(ind.id, EventKind::group_member_left).a = g.id;
  if (g.active && g.members.size() < 2) {
    g.active = false;
    if (!g.members.empty()) {
      // The last walker keeps walking alone; the link structure is gone.
      individual_by_id(g.members.front()).group = -1;
      g.members.clear();
    }
    emit(-1, EventKind::group_dissolved).a = g.id;
  }
  ind.group = -1;
}

void CityWorld::process_car_sharing() {
  for (auto it = share_requesters_.begin(); it != share_requesters_.end();) {
    Individual& req = individual_by_id(*it);
    if (!req.alive || req.state != Individual::State::wait_share) {
      it = share_requesters_.erase(it);
      continue;
    }
    if (req.rider != -1) {  // already paired, waiting for pickup
      ++it;
      continue;
    }
    // An owner still driving toward a nearby destination can give a lift.
    Individual* best = nullptr;
    double best_d = 0.0;
    for (Individual& owner : individuals_) {
      if (!owner.alive || owner.activity != ActivityKind::go_to_location || !owner.owns_car ||
          owner.state != Individual::State::moving || owner.detouring || owner.rider != -1) {
        continue;
      }
      const double d = distance(owner.share_dest, req.share_dest);
      if (d > cfg_city_.vicinity_radius) continue;
      if (!best || d < best_d) {
        best = &owner;
        best_d = d;
      }
    }
    if (best) {
      best->detouring = true;
      best->rider = req.id;
      best->target = req.pos;
      req.rider = best->id;
      Event& e = emit(req.id, EventKind::carshare_paired);
      e.a = best->id;
      Event& m = emit(req.id, EventKind::mutualistic_relationship);
      m.a = best->id;
      m.b = static_cast<std::int64_t>(ActivityKind::go_to_location);
      ++it;
      continue;
    }
    if (tick_ - req.activity_since >= cfg_city_.invalidation_threshold) {
      emit(req.id, EventKind::activity_canceled).a =
          static_cast<std::int64_t>(ActivityKind::go_to_location);
      req.state = Individual::State::idle;
      it = share_requesters_.erase(it);
      continue;
    }
    ++it;
  }
}

void CityWorld::process_taxi_queue() {
  for (auto it = taxi_waiters_.begin(); it != taxi_waiters_.end();) {
    Individual& rider = individual_by_id(*it);
    if (!rider.alive || rider.state != Individual::State::wait_taxi) {
      it = taxi_waiters_.erase(it);
      continue;
    }
    ServiceRequest req;
    req.id = rider.id;
    req.requester = rider.id;
    req.where = rider.pos;
    req.roles = {{"taxi", 1}};
    auto out = match_notification(tree_, residents_, req);
    if (!out.enabled) break;  // no taxi free; the rider waits and will be late
    for (Taxi& t : taxis_) {
      if (t.id == out.allocation[0].agent) {
        t.state = Taxi::State::to_rider;
        t.rider = rider.id;
        break;
      }
    }
    Event& e = emit(rider.id, EventKind::taxi_assigned);
    e.a = out.allocation[0].agent;
    Event& m = emit(rider.id, EventKind::mutualistic_relationship);
    m.a = out.allocation[0].agent;
    m.b = static_cast<std::int64_t>(ActivityKind::go_to_office);
    it = taxi_waiters_.erase(it);
  }
}

void CityWorld::process_fire_exceptions() {
  if (firefighters_ == -1) return;
  for (House& h : houses_) {
    if (!h.burning || !h.truck_requested || h.truck != -1) continue;
    ServiceRequest req;
    req.id = h.id;
    req.requester = h.id;
    req.where = h.pos;
    req.roles = {{"firetruck", 1}};
    req.issued_at = tick_;
    auto out = raise_exception(tree_, residents_, req, tree_.height());
    if (out.status != EscalationOutcome::Status::resolved) continue;  // retried next tick
    auto& son = sons_.form_son(req, out.allocation, tick_);
    h.son = son.id;
    h.truck = out.allocation[0].agent;
    for (FireTruck& t : trucks_) {
      if (t.id == h.truck) {
        t.house = h.id;
        t.on_site = false;
        Event& e = emit(t.id, EventKind::truck_dispatched);
        e.a = h.id;
        e.b = t.crew;
        break;
      }
    }
    Event& r = emit(h.id, EventKind::exception_resolved);
    r.a = h.id;
    r.b = out.hops;
    Event& se = emit(h.id, EventKind::son_formed);
    se.a = son.id;
    se.b = son.distinct_communities;
    se.c = req.id;
  }
}

// ---------------------------------------------------------------------------
// Healthcare
// ---------------------------------------------------------------------------

std::vector<RoleDemand> CityWorld::demand_for(int severity) const {
  std::vector<RoleDemand> roles{{doctor_role(severity), 1},
                                {appliance_role(severity), required_appliances(severity)}};
  if (severity >= 4) roles.push_back({"ambulance", 1});
  return roles;
}

bool CityWorld::hospital_can_treat_now(int hospital, int severity) const {
  const Hospital& h = hospitals_[static_cast<std::size_t>(hospital)];
  const auto& reg = tree_.node(h.community).registry;
  return reg.available_of(doctor_role(severity)) >= 1;
}

void CityWorld::process_healthcare() {
  for (HcRequest& req : requests_) {
    if (req.state == HcRequest::State::done || req.allocated_at >= 0) continue;
    switch (cfg_city_.strategy) {
      case Strategy::fso: step_fso_request(req); break;
      case Strategy::traditional: step_traditional_request(req); break;
      case Strategy::perfect_oracle: step_oracle_request(req); break;
    }
  }
  // Hospitals hand their free ambulances to waiting patients in FIFO order.
  for (std::size_t h = 0; h < amb_queues_.size(); ++h) {
    auto& queue = amb_queues_[h];
    while (!queue.empty()) {
      HcRequest& req = requests_[static_cast<std::size_t>(queue.front())];
      if (req.state != HcRequest::State::awaiting_ambulance ||
          req.target != static_cast<int>(h) || req.ambulance != -1) {
        queue.pop_front();
        continue;
      }
      const Hospital& hosp = hospitals_[h];
      const auto& reg = tree_.node(hosp.community).registry;
      AgentId free_amb = -1;
      for (AgentId id : hosp.ambulance_ids) {
        const auto* rec = reg.find(id);
        if (rec && rec->availability == Availability::available) {
          free_amb = id;
          break;
        }
      }
      if (free_amb == -1) break;
      tree_.node(hosp.community).registry.set_availability(free_amb, Availability::busy);
      dispatch_ambulance_for(req, free_amb);
      queue.pop_front();
    }
  }
}

void CityWorld::step_fso_request(HcRequest& req) {
  Individual& patient = individual_by_id(req.patient);
  if (req.state == HcRequest::State::choosing) {
    req.target = nearest_hospital(patient.pos);
    req.state = req.severity <= 3 ? HcRequest::State::walking
                                  : HcRequest::State::awaiting_ambulance;
  }
  const Hospital& hosp = hospitals_[static_cast<std::size_t>(req.target)];
  ServiceRequest sr;
  sr.id = req.id;
  sr.requester = req.patient;
  sr.where = hosp.pos;
  sr.roles = demand_for(req.severity);
  sr.issued_at = req.issued_at;

  auto local = match_notification(tree_, hosp.community, sr);
  std::vector<Allocation> allocation;
  int hops = 0;
  if (local.enabled) {
    allocation = std::move(local.allocation);
  } else {
    auto esc = raise_exception(tree_, hosp.community, sr, tree_.height());
    if (esc.status != EscalationOutcome::Status::resolved) return;  // retried next tick
    allocation = std::move(esc.allocation);
    hops = esc.hops;
  }

  auto& son = sons_.form_son(sr, allocation, tick_);
  req.son = son.id;
  Event& r = emit(req.patient, EventKind::exception_resolved);
  r.a = req.id;
  r.b = hops;
  Event& se = emit(req.patient, EventKind::son_formed);
  se.a = son.id;
  se.b = son.distinct_communities;
  se.c = req.id;

  // Resources from sibling hospitals travel to the patient's hospital.
  Tick transfer = 0;
  for (const Allocation& a : allocation) {
    if (a.role == "ambulance") {
      req.ambulance = a.agent;
    } else if (a.role.rfind("doctor:", 0) == 0) {
      req.doctor = a.agent;
    } else {
      req.appliances.push_back(a.agent);
    }
    if (a.home != hosp.community && a.role != "ambulance") {
      const int from = hospital_index_of(a.home);
      if (from >= 0) {
        const double d = distance(hospitals_[static_cast<std::size_t>(from)].pos, hosp.pos);
        transfer = std::max(transfer,
                            static_cast<Tick>(std::ceil(d / cfg_city_.vehicle_speed)));
      }
    }
  }
  complete_allocation(req, tick_ - req.issued_at);
  req.treatment_ready_at = tick_ + transfer;
  if (req.ambulance != -1) {
    dispatch_ambulance_for(req, req.ambulance);
  }
}

void CityWorld::step_traditional_request(HcRequest& req) {
  Individual& patient = individual_by_id(req.patient);
  if (req.state == HcRequest::State::choosing) {
    if (req.target < 0) {  // first pick is uninformed and random
      req.target = static_cast<int>(
          rng("traditional").uniform_int(0, static_cast<std::int64_t>(hospitals_.size()) - 1));
    }
    if (req.severity <= 3) {
      req.state = HcRequest::State::walking;
    } else {
      req.state = HcRequest::State::awaiting_ambulance;
      enqueue_ambulance_request(req, req.target);
    }
    return;
  }
  if (req.state == HcRequest::State::at_hospital) {
    if (allocate_at_hospital(req)) return;
    Event& e = emit(req.patient, EventKind::hospital_rejected);
    e.a = req.id;
    e.b = req.target;
    req.last_rejected = req.target;
    req.target = (req.target + 1) % static_cast<int>(hospitals_.size());
    req.patient_at_hospital = false;
    if (req.severity <= 3) {
      req.state = HcRequest::State::walking;
    } else {
      req.state = HcRequest::State::awaiting_ambulance;
      enqueue_ambulance_request(req, req.target);
    }
  }
  (void)patient;
}

void CityWorld::step_oracle_request(HcRequest& req) {
  Individual& patient = individual_by_id(req.patient);
  if (req.state == HcRequest::State::choosing) {
    // Perfect knowledge of doctors and their availability; appliances are
    // only discovered on arrival, and there is no borrowing.
    int best = -1;
    double best_d = 0.0;
    for (std::size_t h = 0; h < hospitals_.size(); ++h) {
      if (static_cast<int>(h) == req.last_rejected) continue;
      if (!hospital_can_treat_now(static_cast<int>(h), req.severity)) continue;
      if (req.severity >= 4 && hospitals_[h].ambulance_ids.empty()) continue;
      const double d = distance(patient.pos, hospitals_[h].pos);
      if (best < 0 || d < best_d) {
        best = static_cast<int>(h);
        best_d = d;
      }
    }
    if (best < 0) return;  // nothing suitable right now; keep checking
    req.target = best;
    if (req.severity <= 3) {
      req.state = HcRequest::State::walking;
    } else {
      req.state = HcRequest::State::awaiting_ambulance;
      enqueue_ambulance_request(req, req.target);
    }
    return;
  }
  if (req.state == HcRequest::State::at_hospital) {
    if (allocate_at_hospital(req)) return;
    Event& e = emit(req.patient, EventKind::hospital_rejected);
    e.a = req.id;
    e.b = req.target;
    req.last_rejected = req.target;
    req.patient_at_hospital = false;
    req.state = HcRequest::State::choosing;  // re-routed with fresh knowledge
  }
}

bool CityWorld::allocate_at_hospital(HcRequest& req) {
  Hospital& hosp = hospitals_[static_cast<std::size_t>(req.target)];
  auto& reg = tree_.node(hosp.community).registry;

  AgentId doctor = -1;
  for (const Doctor& d : doctors_) {
    if (d.hospital != req.target || !doctor_covers(d, req.severity)) continue;
    const auto* rec = reg.find(d.id);
    if (rec && rec->availability == Availability::available) {
      doctor = d.id;
      break;
    }
  }
  std::vector<AgentId> picked;
  const int need = required_appliances(req.severity);
  for (const Appliance& a : appliances_) {
    if (static_cast<int>(picked.size()) == need) break;
    if (a.hospital != req.target || a.type != req.severity) continue;
    const auto* rec = reg.find(a.id);
    if (rec && rec->availability == Availability::available) picked.push_back(a.id);
  }
  if (doctor == -1 || static_cast<int>(picked.size()) < need) return false;

  reg.set_availability(doctor, Availability::busy);
  for (AgentId a : picked) reg.set_availability(a, Availability::busy);
  req.doctor = doctor;
  req.appliances = std::move(picked);
  complete_allocation(req, tick_ - req.issued_at);
  req.treatment_ready_at = tick_;
  return true;
}

void CityWorld::complete_allocation(HcRequest& req, Tick querying) {
  req.allocated_at = tick_;
  req.treatment_remaining = rng("treatment").uniform_int(cfg_city_.treatment_min,
                                                         cfg_city_.treatment_max);
  Event& e = emit(req.patient, EventKind::healthcare_treated);
  e.a = req.id;
  e.b = querying;
  e.c = req.treatment_remaining;
}

void CityWorld::dispatch_ambulance_for(HcRequest& req, AgentId amb_id) {
  Ambulance* amb = ambulance_by_id(amb_id);
  amb->state = Ambulance::State::to_patient;
  amb->request = req.id;
  req.ambulance = amb_id;
}

void CityWorld::enqueue_ambulance_request(HcRequest& req, int hospital) {
  amb_queues_[static_cast<std::size_t>(hospital)].push_back(req.id);
}

void CityWorld::process_deadlines() {
  for (HcRequest& req : requests_) {
    if (req.state == HcRequest::State::done || req.allocated_at >= 0) continue;
    if (tick_ < req.deadline) continue;
    fail_request(req);
  }
}

void CityWorld::fail_request(HcRequest& req) {
  release_request_resources(req, true);
  req.state = HcRequest::State::done;
  Individual& patient = individual_by_id(req.patient);
  patient.alive = false;
  patient.state = Individual::State::dead;
  if (cfg_city_.strategy == Strategy::fso) {
    emit(req.patient, EventKind::exception_failed).a = req.id;
  }
  Event& e = emit(req.patient, EventKind::patient_died);
  e.a = req.id;
  e.b = req.severity;
}

void CityWorld::release_request_resources(HcRequest& req, bool include_doctor_appliances) {
  if (req.ambulance != -1) {
    Ambulance* amb = ambulance_by_id(req.ambulance);
    if (amb && amb->request == req.id) {
      amb->request = -1;
      amb->state = Ambulance::State::returning;
      const Hospital& home = hospitals_[static_cast<std::size_t>(amb->hospital)];
      tree_.node(home.community).registry.set_availability(amb->id, Availability::available);
    }
    req.ambulance = -1;
  }
  if (include_doctor_appliances && req.son == -1) {
    if (req.doctor != -1) {
      const Hospital& hosp = hospitals_[static_cast<std::size_t>(req.target)];
      tree_.node(hosp.community).registry.set_availability(req.doctor, Availability::available);
      req.doctor = -1;
    }
    for (AgentId a : req.appliances) {
      const Hospital& hosp = hospitals_[static_cast<std::size_t>(req.target)];
      tree_.node(hosp.community).registry.set_availability(a, Availability::available);
    }
    req.appliances.clear();
  }
}

// ---------------------------------------------------------------------------
// Phase 4: movement
// ---------------------------------------------------------------------------

void CityWorld::phase_movement() {
  for (Individual& ind : individuals_) {
    if (!ind.alive || ind.state != Individual::State::moving) continue;
    auto step = move_toward(ind.pos, ind.target, ind.speed, cfg_);
    ind.pos = step.pos;
    if (!step.arrived) continue;
    switch (ind.activity) {
      case ActivityKind::walk_in_park:
        ind.state = Individual::State::stationary;  // dwell in the park
        break;
      case ActivityKind::go_to_location:
        if (ind.detouring) {
          Individual& rider = individual_by_id(ind.rider);
          if (rider.state == Individual::State::wait_share) {
            rider.state = Individual::State::riding;  // picked up
            ind.target = rider.share_dest;
          } else {
            rider.pos = ind.pos;  // dropped at the destination
            rider.state = Individual::State::stationary;
            rider.countdown = cfg_city_.carshare_dwell;
            ind.detouring = false;
            ind.rider = -1;
            ind.target = ind.share_dest;
          }
        } else {
          ind.state = Individual::State::stationary;
          ind.countdown = cfg_city_.carshare_dwell;
        }
        break;
      case ActivityKind::go_to_office:
        emit(ind.id, EventKind::transport_mode).a = static_cast<std::int64_t>(ind.mode);
        ind.state = Individual::State::stationary;
        ind.countdown = cfg_city_.office_dwell;
        break;
      default:
        ind.state = Individual::State::stationary;
        break;
    }
  }

  // Riders move with their carrier.
  for (Individual& owner : individuals_) {
    if (owner.detouring && owner.rider != -1) {
      Individual& rider = individual_by_id(owner.rider);
      if (rider.state == Individual::State::riding) rider.pos = owner.pos;
    }
  }

  // Patients walking to a hospital.
  for (HcRequest& req : requests_) {
    if (req.state != HcRequest::State::walking) continue;
    Individual& patient = individual_by_id(req.patient);
    const Position hospital = hospitals_[static_cast<std::size_t>(req.target)].pos;
    auto step = move_toward(patient.pos, hospital, cfg_city_.walk_speed, cfg_);
    patient.pos = step.pos;
    if (step.arrived) {
      req.state = HcRequest::State::at_hospital;
      req.patient_at_hospital = true;
    }
  }

  RngStream& taxi_move = rng("taxi_move");
  for (Taxi& t : taxis_) {
    switch (t.state) {
      case Taxi::State::wandering: {
        const double heading = taxi_move.uniform_double(0.0, kTau);
        t.pos = clamp_to_arena({t.pos.x + std::cos(heading) * cfg_city_.vehicle_speed,
                                t.pos.y + std::sin(heading) * cfg_city_.vehicle_speed},
                               cfg_);
        break;
      }
      case Taxi::State::to_rider: {
        Individual& rider = individual_by_id(t.rider);
        auto step = move_toward(t.pos, rider.pos, cfg_city_.vehicle_speed, cfg_);
        t.pos = step.pos;
        if (step.arrived) {
          rider.state = Individual::State::riding;
          t.state = Taxi::State::to_office;
        }
        break;
      }
      case Taxi::State::to_office: {
        Individual& rider = individual_by_id(t.rider);
        const Position office = offices_[static_cast<std::size_t>(rider.office)];
        auto step = move_toward(t.pos, office, cfg_city_.vehicle_speed, cfg_);
        t.pos = step.pos;
        rider.pos = t.pos;
        if (step.arrived) {
          emit(rider.id, EventKind::transport_mode).a =
              static_cast<std::int64_t>(TransportMode::taxi);
          rider.state = Individual::State::stationary;
          rider.countdown = cfg_city_.office_dwell;
          t.rider = -1;
          t.state = Taxi::State::wandering;
          tree_.node(residents_).registry.set_availability(t.id, Availability::available);
        }
        break;
      }
    }
    tree_.node(residents_).registry.set_position(t.id, t.pos);
  }

  for (Ambulance& amb : ambulances_) {
    switch (amb.state) {
      case Ambulance::State::at_base:
        break;
      case Ambulance::State::to_patient: {
        if (amb.request == -1) {
          amb.state = Ambulance::State::returning;
          break;
        }
        HcRequest& req = requests_[static_cast<std::size_t>(amb.request)];
        Individual& patient = individual_by_id(req.patient);
        auto step = move_toward(amb.pos, patient.pos, cfg_city_.vehicle_speed, cfg_);
        amb.pos = step.pos;
        if (step.arrived) {
          patient.state = Individual::State::riding;
          req.state = HcRequest::State::in_ambulance;
          amb.state = Ambulance::State::to_hospital;
        }
        break;
      }
      case Ambulance::State::to_hospital: {
        HcRequest& req = requests_[static_cast<std::size_t>(amb.request)];
        Individual& patient = individual_by_id(req.patient);
        const Position hospital = hospitals_[static_cast<std::size_t>(req.target)].pos;
        auto step = move_toward(amb.pos, hospital, cfg_city_.vehicle_speed, cfg_);
        amb.pos = step.pos;
        patient.pos = amb.pos;
        if (step.arrived) {
          patient.state = Individual::State::patient;
          req.state = HcRequest::State::at_hospital;
          req.patient_at_hospital = true;
          // The vehicle is free again once the patient is handed over.
          const Hospital& home = hospitals_[static_cast<std::size_t>(amb.hospital)];
          tree_.node(home.community).registry.set_availability(amb.id,
                                                               Availability::available);
          amb.request = -1;
          amb.state = Ambulance::State::returning;
        }
        break;
      }
      case Ambulance::State::returning: {
        const Position base = hospitals_[static_cast<std::size_t>(amb.hospital)].pos;
        auto step = move_toward(amb.pos, base, cfg_city_.vehicle_speed, cfg_);
        amb.pos = step.pos;
        if (step.arrived) amb.state = Ambulance::State::at_base;
        break;
      }
    }
  }

  for (FireTruck& t : trucks_) {
    if (t.house != -1 && !t.on_site) {
      const House& h = house_by_id(t.house);
      auto step = move_toward(t.pos, h.pos, cfg_city_.vehicle_speed, cfg_);
      t.pos = step.pos;
      if (step.arrived) t.on_site = true;
    } else if (t.house == -1 && !(t.pos == t.base)) {
      t.pos = move_toward(t.pos, t.base, cfg_city_.vehicle_speed, cfg_).pos;
    }
  }
}

// ---------------------------------------------------------------------------
// Phase 5: progress and completion
// ---------------------------------------------------------------------------

int CityWorld::helpers_at(std::int64_t house_id) const {
  int n = 0;
  for (const Individual& ind : individuals_) {
    if (ind.alive && ind.helping_house == house_id) ++n;
  }
  return n;
}

FireStepResult fire_dynamics_step(double firelevel, double health, bool growth, int helpers,
                                  int truck_firefighters) {
  FireStepResult r;
  const double reduction =
      0.5 * helpers + (truck_firefighters > 0 ? 1.0 + truck_firefighters : 0.0);
  const double level = firelevel + (growth ? 1.0 : 0.0) - reduction;
  if (level <= 0.0) {
    r.firelevel = 0.0;
    r.health = health;
    r.extinguished = true;
    return r;
  }
  r.firelevel = level;
  r.health = health - level;
  if (r.health <= 0.0) {
    r.health = 0.0;
    r.firelevel = 0.0;
    r.destroyed = true;
  }
  return r;
}

void CityWorld::fire_dynamics() {
  RngStream& fire = rng("fire");
  for (House& h : houses_) {
    if (!h.burning) continue;
    int crew = 0;
    for (const FireTruck& t : trucks_) {
      if (t.house == h.id && t.on_site) crew = t.crew;
    }
    const FireStepResult r =
        fire_dynamics_step(h.firelevel, h.health, fire.bernoulli(0.5), helpers_at(h.id), crew);
    h.firelevel = r.firelevel;
    h.health = r.health;
    bool finished = false;
    if (r.extinguished) {
      h.burning = false;
      emit(h.id, EventKind::fire_extinguished).x = h.health;
      finished = true;
    } else if (r.destroyed) {
      h.burning = false;
      emit(h.id, EventKind::house_burned);
      finished = true;
    }
    if (finished) {
      for (Individual& ind : individuals_) {
        if (ind.helping_house == h.id) resume_postponed(ind);
      }
      if (h.truck != -1) {
        for (FireTruck& t : trucks_) {
          if (t.id == h.truck) {
            t.house = -1;
            t.on_site = false;
          }
        }
        sons_.dissolve_son(tree_, h.son);
        emit(h.id, EventKind::son_dissolved).a = h.son;
        h.truck = -1;
        h.son = -1;
      }
    }
  }
}

void CityWorld::phase_service_progress() {
  for (Individual& ind : individuals_) {
    if (!ind.alive || ind.state != Individual::State::stationary) continue;
    if (--ind.countdown > 0) continue;
    finish_activity(ind);
  }
  if (cfg_city_.fire_enabled) fire_dynamics();

  for (HcRequest& req : requests_) {
    if (req.allocated_at < 0 || req.state == HcRequest::State::done) continue;
    if (!req.treating) {
      if (req.patient_at_hospital && tick_ >= req.treatment_ready_at) req.treating = true;
      continue;
    }
    if (--req.treatment_remaining > 0) continue;
    // Treatment over: free the team and send the patient back into the world.
    emit(req.patient, EventKind::treatment_finished).a = req.id;
    if (req.son != -1) {
      sons_.dissolve_son(tree_, req.son);
      emit(req.patient, EventKind::son_dissolved).a = req.son;
    } else {
      const Hospital& hosp = hospitals_[static_cast<std::size_t>(req.target)];
      auto& reg = tree_.node(hosp.community).registry;
      if (req.doctor != -1) reg.set_availability(req.doctor, Availability::available);
      for (AgentId a : req.appliances) reg.set_availability(a, Availability::available);
    }
    req.state = HcRequest::State::done;
    Individual& patient = individual_by_id(req.patient);
    patient.state = Individual::State::idle;
    patient.request = -1;
    emit(patient.id, EventKind::activity_finished).a =
        static_cast<std::int64_t>(ActivityKind::health_care);
  }
}

void CityWorld::finish_activity(Individual& ind) {
  emit(ind.id, EventKind::activity_finished).a = static_cast<std::int64_t>(ind.activity);
  leave_walk_group(ind);
  ind.state = Individual::State::idle;
  ind.wants_company = false;
}

void CityWorld::on_finalize() {
  Event& totals = emit(-1, EventKind::run_totals);
  totals.a = issued_requests_;
}

}  // namespace fsosim
