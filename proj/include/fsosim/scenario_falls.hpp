#pragma once

#include <deque>
#include <optional>
#include <vector>

#include "fsosim/protocol.hpp"
#include "fsosim/world.hpp"

namespace fsosim {

/// Ambient-assisted-living falls model: statically housed elderly agents with
/// one or two fall-detection devices, a three-level community hierarchy, and
/// optional informal carers verifying alarms before an ambulance arrives.
struct FallsConfig {
  WorldConfig world{.width = 81, .height = 81, .max_ticks = 10000, .master_seed = 1};
  int elderly = 30;
  int device_count = 1;  // 1 -> S1-style sensing, 2 -> S2-style OR fusion
  int informal_carers = 0;
  int professional_carers = 6;
  int mobility_agents = 5;
  double p_fall = 1.0 / 600.0;            // per elderly agent per monitorable tick
  double p_false_positive = 1.0 / 500.0;  // per device per monitorable tick
  double p_false_negative = 100.0 / 500.0;  // per device per fall
  double walk_speed = 0.25;
  double vehicle_speed = 1.0;
  Tick treatment_min = 50;
  Tick treatment_max = 150;

  void validate() const;
  std::string scenario_tag() const { return device_count >= 2 ? "S2" : "S1"; }
};

/// Per-tick outcome of one monitorable elderly-agent observation.
enum class TickOutcome : std::uint8_t { true_positive, false_positive, false_negative, true_negative };

/// Pure classification rule: a fall with an alarm is a hit, an alarm without
/// a fall is a false positive, a silent fall is a miss.
TickOutcome classify_outcome(bool fell, bool alarmed);

/// One monitorable-tick sensing draw over the device set: the alarm is the OR
/// of the device firings, so a fall is missed only when every device misses.
/// Device `i` draws from its own "device_i" stream; adding a second device
/// never removes a detection the first would have made.
bool devices_alarm(int device_count, double p_fp, double p_fn, bool fall, RngSet& rng);

class FallsWorld : public World {
 public:
  explicit FallsWorld(const FallsConfig& cfg);

  struct Elderly {
    AgentId id = -1;
    Position home;
    Position pos;
    Tick non_falling = 0;           // ticks until back home; no falls while > 0
    std::int64_t pending_alarm = -1;
    bool away = false;              // being transported / treated / walking home
  };

  struct Alarm {
    std::int64_t id = -1;
    AgentId ea = -1;
    Tick raised_at = 0;
    bool true_fall = false;
    enum class State : std::uint8_t { open, verified_false, confirmed_true, treated } state =
        State::open;
    Tick verified_at = -1;  // waiting time endpoint; -1 while open
    bool ic_confirmed = false;
    AgentId assigned_ic = -1;
    AgentId assigned_ma = -1;
    AgentId assigned_pc = -1;
  };

  struct Carer {  // informal carer; wanders until dispatched
    AgentId id = -1;
    Position pos;
    std::int64_t alarm = -1;
    Tick cycles = 0;  // current engagement busy-cycles
  };

  struct Mobility {  // ambulance
    AgentId id = -1;
    Position pos;
    enum class State : std::uint8_t { idle, en_route, transporting, returning, aborting } state =
        State::idle;
    std::int64_t alarm = -1;
    Tick cycles = 0;
  };

  struct Professional {
    AgentId id = -1;
    enum class State : std::uint8_t { idle, reserved, treating } state = State::idle;
    std::int64_t alarm = -1;
    Tick remaining = 0;
  };

  const FallsConfig& falls_config() const { return cfg_falls_; }
  const std::vector<Elderly>& elderly() const { return elderly_; }
  const std::vector<Alarm>& alarms() const { return alarms_; }
  const std::vector<Carer>& carers() const { return carers_; }
  const std::vector<Mobility>& mobility() const { return mobility_; }
  const std::vector<Professional>& professionals() const { return professionals_; }
  const CommunityTree& tree() const { return tree_; }
  Position hospital() const { return hospital_; }
  bool has_ic_community() const { return l2_ != -1; }

  std::int64_t monitorable_ticks() const { return monitorable_ticks_; }
  std::int64_t tp() const { return tp_; }
  std::int64_t fp() const { return fp_; }
  std::int64_t fn() const { return fn_; }
  std::int64_t tn() const { return tn_; }

 protected:
  void phase_device_sensing() override;
  void phase_coordinator_messages() override;
  void phase_movement() override;
  void phase_service_progress() override;
  void phase_metrics() override;
  void on_finalize() override;

 private:
  Elderly& elder_of(std::int64_t alarm_id);
  Carer* carer_by_id(AgentId id);
  Mobility* mobility_by_id(AgentId id);
  Professional* professional_by_id(AgentId id);

  void release_ic(Carer& ic);
  void release_ma(Mobility& ma);
  void release_pc(AgentId pc_id);
  void recall_ic_for(Alarm& alarm);
  void cancel_towards_l3(Alarm& alarm);
  void ic_arrive(Carer& ic, Alarm& alarm);
  void ma_arrive(Mobility& ma, Alarm& alarm);

  FallsConfig cfg_falls_;
  CommunityTree tree_;
  CommunityId root_ = -1, l1_ = -1, l2_ = -1, l3_ = -1;
  Position hospital_;

  std::vector<Elderly> elderly_;
  std::vector<Carer> carers_;
  std::vector<Mobility> mobility_;
  std::vector<Professional> professionals_;
  std::vector<Alarm> alarms_;

  std::vector<std::int64_t> new_alarms_;  // raised this tick, delivered in phase 3
  std::deque<std::int64_t> l2_queue_;
  std::deque<std::int64_t> l3_queue_;

  std::int64_t monitorable_ticks_ = 0;
  std::int64_t tp_ = 0, fp_ = 0, fn_ = 0, tn_ = 0;
};

}  // namespace fsosim
