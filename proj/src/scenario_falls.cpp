#include "fsosim/scenario_falls.hpp"

#include <algorithm>
#include <cmath>

#include "fsosim/errors.hpp"

namespace fsosim {

namespace {

constexpr double kTau = 6.283185307179586;

void purge(std::deque<std::int64_t>& queue, std::int64_t alarm_id) {
  std::erase(queue, alarm_id);
}

std::string device_stream(int index) { return "device_" + std::to_string(index); }

}  // namespace

void FallsConfig::validate() const {
  world.validate();
  if (elderly < 1) throw ValidationError("falls.elderly", "must be >= 1");
  if (device_count != 1 && device_count != 2) {
    throw ValidationError("falls.device_count", "must be 1 or 2");
  }
  if (informal_carers < 0) throw ValidationError("falls.informal_carers", "must be >= 0");
  if (professional_carers < 1) throw ValidationError("falls.professional_carers", "must be >= 1");
  if (mobility_agents < 1) throw ValidationError("falls.mobility_agents", "must be >= 1");
  for (auto [name, p] : {std::pair{"falls.p_fall", p_fall},
                         {"falls.p_false_positive", p_false_positive},
                         {"falls.p_false_negative", p_false_negative}}) {
    if (p < 0.0 || p > 1.0) throw ValidationError(name, "probability must be in [0, 1]");
  }
  if (walk_speed <= 0.0) throw ValidationError("falls.walk_speed", "must be > 0");
  if (vehicle_speed <= 0.0) throw ValidationError("falls.vehicle_speed", "must be > 0");
  if (treatment_min < 1 || treatment_max < treatment_min) {
    throw ValidationError("falls.treatment", "need 1 <= treatment_min <= treatment_max");
  }
}

TickOutcome classify_outcome(bool fell, bool alarmed) {
  if (fell) return alarmed ? TickOutcome::true_positive : TickOutcome::false_negative;
  return alarmed ? TickOutcome::false_positive : TickOutcome::true_negative;
}

bool devices_alarm(int device_count, double p_fp, double p_fn, bool fall, RngSet& rng) {
  // OR over devices: a true fall is missed only when every device misses.
  bool fired = false;
  for (int d = 0; d < device_count; ++d) {
    RngStream& s = rng.stream(device_stream(d));
    fired |= fall ? s.bernoulli(1.0 - p_fn) : s.bernoulli(p_fp);
  }
  return fired;
}

FallsWorld::FallsWorld(const FallsConfig& cfg) : World(cfg.world), cfg_falls_(cfg) {
  cfg.validate();
  AgentId next_id = 0;
  const AgentId root_coord = next_id++;
  const AgentId l1_coord = next_id++;
  const AgentId l2_coord = next_id++;
  const AgentId l3_coord = next_id++;

  root_ = tree_.add_community("aal_root", 2, root_coord);
  l1_ = tree_.add_community("residences", 1, l1_coord, root_);
  if (cfg.informal_carers > 0) {
    l2_ = tree_.add_community("informal_carers", 1, l2_coord, root_);
  }
  l3_ = tree_.add_community("hospital", 1, l3_coord, root_);

  RngStream& place = rng("placement");
  auto random_cell = [&] {
    return Position{place.uniform_double(0, cfg_.width), place.uniform_double(0, cfg_.height)};
  };

  hospital_ = random_cell();

  elderly_.reserve(static_cast<std::size_t>(cfg.elderly));
  for (int i = 0; i < cfg.elderly; ++i) {
    Elderly ea;
    ea.id = next_id++;
    ea.home = random_cell();
    ea.pos = ea.home;
    elderly_.push_back(ea);
    tree_.add_member(l1_, ea.id);
  }
  next_id += static_cast<AgentId>(cfg.elderly * cfg.device_count);  // device ids, attached to EAs

  for (int i = 0; i < cfg.informal_carers; ++i) {
    Carer ic;
    ic.id = next_id++;
    ic.pos = random_cell();
    carers_.push_back(ic);
    tree_.add_member(l2_, ic.id);
    Notification offer;
    offer.origin = ic.id;
    offer.kind = Notification::Kind::service_offer;
    offer.role = "verify";
    offer.position = ic.pos;
    publish_notification(tree_, l2_, offer);
  }
  for (int i = 0; i < cfg.mobility_agents; ++i) {
    Mobility ma;
    ma.id = next_id++;
    ma.pos = hospital_;
    mobility_.push_back(ma);
    tree_.add_member(l3_, ma.id);
    Notification offer;
    offer.origin = ma.id;
    offer.kind = Notification::Kind::service_offer;
    offer.role = "transport";
    offer.position = hospital_;
    publish_notification(tree_, l3_, offer);
  }
  for (int i = 0; i < cfg.professional_carers; ++i) {
    Professional pc;
    pc.id = next_id++;
    professionals_.push_back(pc);
    tree_.add_member(l3_, pc.id);
    Notification offer;
    offer.origin = pc.id;
    offer.kind = Notification::Kind::service_offer;
    offer.role = "treat";
    offer.position = hospital_;
    publish_notification(tree_, l3_, offer);
  }
  tree_.validate();
}

FallsWorld::Elderly& FallsWorld::elder_of(std::int64_t alarm_id) {
  const AgentId ea = alarms_[static_cast<std::size_t>(alarm_id)].ea;
  for (Elderly& e : elderly_) {
    if (e.id == ea) return e;
  }
  throw ValidationError("falls.alarm", "alarm references unknown elderly agent");
}

FallsWorld::Carer* FallsWorld::carer_by_id(AgentId id) {
  for (Carer& c : carers_) {
    if (c.id == id) return &c;
  }
  return nullptr;
}

FallsWorld::Mobility* FallsWorld::mobility_by_id(AgentId id) {
  for (Mobility& m : mobility_) {
    if (m.id == id) return &m;
  }
  return nullptr;
}

FallsWorld::Professional* FallsWorld::professional_by_id(AgentId id) {
  for (Professional& p : professionals_) {
    if (p.id == id) return &p;
  }
  return nullptr;
}

void FallsWorld::phase_device_sensing() {
  RngStream& falls = rng("falls");
  for (Elderly& ea : elderly_) {
    if (ea.away || ea.non_falling > 0 || ea.pending_alarm != -1) continue;
    ++monitorable_ticks_;
    const bool fall = falls.bernoulli(cfg_falls_.p_fall);
    const bool fired = devices_alarm(cfg_falls_.device_count, cfg_falls_.p_false_positive,
                                     cfg_falls_.p_false_negative, fall, rng_);
    switch (classify_outcome(fall, fired)) {
      case TickOutcome::true_positive: ++tp_; break;
      case TickOutcome::false_positive: ++fp_; break;
      case TickOutcome::false_negative: ++fn_; break;
      case TickOutcome::true_negative: ++tn_; break;
    }
    if (fall && !fired) {
      // Missed fall: the elderly agent recovers unaided after this tick.
      emit(ea.id, EventKind::fall_missed);
      continue;
    }
    if (fired) {
      Alarm alarm;
      alarm.id = static_cast<std::int64_t>(alarms_.size());
      alarm.ea = ea.id;
      alarm.raised_at = tick_;
      alarm.true_fall = fall;
      alarms_.push_back(alarm);
      ea.pending_alarm = alarm.id;
      new_alarms_.push_back(alarm.id);
      Event& e = emit(ea.id, EventKind::alarm_raised);
      e.a = alarm.id;
      e.b = fall ? 1 : 0;
    }
  }
}

void FallsWorld::phase_coordinator_messages() {
  // Level-1 coordinator: same-tick delivery to L2 (when present) and L3.
  for (std::int64_t id : new_alarms_) {
    if (l2_ != -1) l2_queue_.push_back(id);
    l3_queue_.push_back(id);
  }
  new_alarms_.clear();

  if (l2_ != -1) {
    for (auto it = l2_queue_.begin(); it != l2_queue_.end();) {
      Alarm& alarm = alarms_[static_cast<std::size_t>(*it)];
      if (alarm.state != Alarm::State::open || alarm.ic_confirmed) {
        it = l2_queue_.erase(it);
        continue;
      }
      ServiceRequest req;
      req.id = alarm.id;
      req.requester = alarm.ea;
      req.where = elder_of(alarm.id).home;
      req.roles = {{"verify", 1}};
      auto out = match_notification(tree_, l2_, req);
      if (!out.enabled) break;  // no carer free; later alarms demand the same role
      Carer* ic = carer_by_id(out.allocation[0].agent);
      ic->alarm = alarm.id;
      ic->cycles = 0;
      alarm.assigned_ic = ic->id;
      emit(ic->id, EventKind::ic_dispatched).a = alarm.id;
      it = l2_queue_.erase(it);
    }
  }

  for (auto it = l3_queue_.begin(); it != l3_queue_.end();) {
    Alarm& alarm = alarms_[static_cast<std::size_t>(*it)];
    if (alarm.state != Alarm::State::open) {  // canceled while waiting
      it = l3_queue_.erase(it);
      continue;
    }
    ServiceRequest req;
    req.id = alarm.id;
    req.requester = alarm.ea;
    req.where = elder_of(alarm.id).home;
    req.roles = {{"transport", 1}, {"treat", 1}};
    auto out = match_notification(tree_, l3_, req);
    if (!out.enabled) break;  // needs an ambulance AND a professional carer
    for (const Allocation& a : out.allocation) {
      if (a.role == "transport") {
        Mobility* ma = mobility_by_id(a.agent);
        ma->state = Mobility::State::en_route;
        ma->alarm = alarm.id;
        ma->cycles = 0;
        alarm.assigned_ma = ma->id;
        emit(ma->id, EventKind::ma_dispatched).a = alarm.id;
      } else {
        Professional* pc = professional_by_id(a.agent);
        pc->state = Professional::State::reserved;
        pc->alarm = alarm.id;
        alarm.assigned_pc = pc->id;
      }
    }
    it = l3_queue_.erase(it);
  }
}

void FallsWorld::release_ic(Carer& ic) {
  if (ic.cycles > 0) {
    Event& e = emit(ic.id, EventKind::cost_accrued);
    e.a = ic.cycles;
    e.b = 2;  // volunteer
    e.c = ic.alarm;
  }
  ic.alarm = -1;
  ic.cycles = 0;
  tree_.node(l2_).registry.set_availability(ic.id, Availability::available);
}

void FallsWorld::release_ma(Mobility& ma) {
  if (ma.cycles > 0) {
    Event& e = emit(ma.id, EventKind::cost_accrued);
    e.a = ma.cycles;
    e.b = 1;  // ambulance
    e.c = ma.alarm;
  }
  ma.state = Mobility::State::idle;
  ma.alarm = -1;
  ma.cycles = 0;
  tree_.node(l3_).registry.set_availability(ma.id, Availability::available);
}

void FallsWorld::release_pc(AgentId pc_id) {
  Professional* pc = professional_by_id(pc_id);
  if (!pc) return;
  pc->state = Professional::State::idle;
  pc->alarm = -1;
  pc->remaining = 0;
  tree_.node(l3_).registry.set_availability(pc_id, Availability::available);
}

void FallsWorld::recall_ic_for(Alarm& alarm) {
  if (alarm.assigned_ic == -1) return;
  Carer* ic = carer_by_id(alarm.assigned_ic);
  if (ic && ic->alarm == alarm.id) release_ic(*ic);
  alarm.assigned_ic = -1;
  if (l2_ != -1) purge(l2_queue_, alarm.id);
}

void FallsWorld::cancel_towards_l3(Alarm& alarm) {
  purge(l3_queue_, alarm.id);
  if (alarm.assigned_ma != -1) {
    Mobility* ma = mobility_by_id(alarm.assigned_ma);
    if (ma && ma->alarm == alarm.id && ma->state == Mobility::State::en_route) {
      ma->state = Mobility::State::aborting;
      emit(ma->id, EventKind::ma_aborted).a = alarm.id;
    }
  }
  if (alarm.assigned_pc != -1) {
    release_pc(alarm.assigned_pc);
    alarm.assigned_pc = -1;
  }
}

void FallsWorld::ic_arrive(Carer& ic, Alarm& alarm) {
  if (alarm.state != Alarm::State::open) {  // resolved while the carer was en route
    alarm.assigned_ic = -1;
    release_ic(ic);
    return;
  }
  Elderly& ea = elder_of(alarm.id);
  Event& v = emit(ic.id, EventKind::ic_verification);
  v.a = alarm.id;
  v.b = alarm.true_fall ? 1 : 0;
  if (!alarm.true_fall) {
    alarm.state = Alarm::State::verified_false;
    alarm.verified_at = tick_;
    Event& e = emit(ic.id, EventKind::alarm_verified);
    e.a = alarm.id;
    e.b = 0;
    e.c = 1;  // verified by informal carer
    e.d = tick_ - alarm.raised_at;
    ea.pending_alarm = -1;
    cancel_towards_l3(alarm);
  } else {
    alarm.ic_confirmed = true;  // the ambulance keeps coming
  }
  alarm.assigned_ic = -1;
  release_ic(ic);
}

void FallsWorld::ma_arrive(Mobility& ma, Alarm& alarm) {
  Elderly& ea = elder_of(alarm.id);
  recall_ic_for(alarm);
  if (!alarm.true_fall) {
    alarm.state = Alarm::State::verified_false;
    alarm.verified_at = tick_;
    Event& e = emit(ma.id, EventKind::alarm_verified);
    e.a = alarm.id;
    e.b = 0;
    e.c = 2;  // verified on site by the ambulance crew
    e.d = tick_ - alarm.raised_at;
    ea.pending_alarm = -1;
    if (alarm.assigned_pc != -1) {
      release_pc(alarm.assigned_pc);
      alarm.assigned_pc = -1;
    }
    ma.state = Mobility::State::returning;
  } else {
    alarm.state = Alarm::State::confirmed_true;
    alarm.verified_at = tick_;
    Event& e = emit(ma.id, EventKind::alarm_verified);
    e.a = alarm.id;
    e.b = 1;
    e.c = 2;
    e.d = tick_ - alarm.raised_at;
    ea.away = true;
    ma.state = Mobility::State::transporting;
  }
}

void FallsWorld::phase_movement() {
  RngStream& wander = rng("ic_move");
  for (Carer& ic : carers_) {
    if (ic.alarm == -1) {
      const double heading = wander.uniform_double(0.0, kTau);
      Position target{ic.pos.x + std::cos(heading) * cfg_falls_.vehicle_speed,
                      ic.pos.y + std::sin(heading) * cfg_falls_.vehicle_speed};
      ic.pos = clamp_to_arena(target, cfg_);
    } else {
      ++ic.cycles;
      Alarm& alarm = alarms_[static_cast<std::size_t>(ic.alarm)];
      auto step = move_toward(ic.pos, elder_of(alarm.id).home, cfg_falls_.vehicle_speed, cfg_);
      ic.pos = step.pos;
      if (step.arrived) ic_arrive(ic, alarm);
    }
    if (l2_ != -1) tree_.node(l2_).registry.set_position(ic.id, ic.pos);
  }

  for (Mobility& ma : mobility_) {
    if (ma.state == Mobility::State::idle) continue;
    ++ma.cycles;
    switch (ma.state) {
      case Mobility::State::en_route: {
        Alarm& alarm = alarms_[static_cast<std::size_t>(ma.alarm)];
        auto step = move_toward(ma.pos, elder_of(alarm.id).home, cfg_falls_.vehicle_speed, cfg_);
        ma.pos = step.pos;
        if (step.arrived) ma_arrive(ma, alarm);
        break;
      }
      case Mobility::State::transporting: {
        Alarm& alarm = alarms_[static_cast<std::size_t>(ma.alarm)];
        Elderly& ea = elder_of(alarm.id);
        auto step = move_toward(ma.pos, hospital_, cfg_falls_.vehicle_speed, cfg_);
        ma.pos = step.pos;
        ea.pos = ma.pos;
        if (step.arrived) {
          emit(ma.id, EventKind::ma_intervention).a = alarm.id;
          Professional* pc = professional_by_id(alarm.assigned_pc);
          pc->state = Professional::State::treating;
          pc->remaining = rng("treatment").uniform_int(cfg_falls_.treatment_min,
                                                       cfg_falls_.treatment_max);
          Event& e = emit(pc->id, EventKind::treatment_started);
          e.a = alarm.id;
          e.b = pc->remaining;
          release_ma(ma);
        }
        break;
      }
      case Mobility::State::returning:
      case Mobility::State::aborting: {
        auto step = move_toward(ma.pos, hospital_, cfg_falls_.vehicle_speed, cfg_);
        ma.pos = step.pos;
        if (step.arrived) release_ma(ma);
        break;
      }
      case Mobility::State::idle: break;
    }
  }

  for (Elderly& ea : elderly_) {
    if (ea.non_falling > 0) {
      ea.pos = move_toward(ea.pos, ea.home, cfg_falls_.walk_speed, cfg_).pos;
      if (--ea.non_falling == 0) {
        ea.pos = ea.home;
        ea.away = false;
      }
    }
  }
}

void FallsWorld::phase_service_progress() {
  for (Professional& pc : professionals_) {
    if (pc.state != Professional::State::treating) continue;
    if (--pc.remaining > 0) continue;
    Alarm& alarm = alarms_[static_cast<std::size_t>(pc.alarm)];
    alarm.state = Alarm::State::treated;
    emit(pc.id, EventKind::treatment_finished).a = alarm.id;
    Elderly& ea = elder_of(alarm.id);
    ea.pending_alarm = -1;
    ea.pos = hospital_;
    ea.non_falling =
        static_cast<Tick>(std::ceil(distance(hospital_, ea.home) / cfg_falls_.walk_speed));
    if (ea.non_falling == 0) {
      ea.pos = ea.home;
      ea.away = false;
    }
    alarm.assigned_pc = -1;
    release_pc(pc.id);
  }
}

void FallsWorld::phase_metrics() {
  // Classification and cost cycles are tallied where they occur; nothing to
  // accrue separately per tick.
}

void FallsWorld::on_finalize() {
  for (Carer& ic : carers_) {
    if (ic.alarm != -1) release_ic(ic);
  }
  for (Mobility& ma : mobility_) {
    if (ma.state != Mobility::State::idle) release_ma(ma);
  }
  for (const Alarm& alarm : alarms_) {
    if (alarm.verified_at < 0) {
      emit(alarm.ea, EventKind::alarm_open_at_end).a = alarm.id;
    }
  }
  Event& totals = emit(-1, EventKind::run_totals);
  totals.a = monitorable_ticks_;
}

}  // namespace fsosim
