#pragma once

#include <deque>
#include <optional>
#include <set>
#include <vector>

#include "fsosim/metrics.hpp"
#include "fsosim/protocol.hpp"
#include "fsosim/world.hpp"

namespace fsosim {

/// City model: individuals performing six activity kinds, optional house
/// fires with firefighter escalation, and the healthcare case study under
/// three dispatch strategies.
struct CityConfig {
  WorldConfig world{.width = 41, .height = 41, .max_ticks = 3000, .master_seed = 1};
  Strategy strategy = Strategy::fso;
  Tick threshold = 150;  // healthcare deadline

  int individuals = 140;
  double car_ownership = 0.25;
  int offices = 4;
  int taxis = 10;

  bool healthcare_enabled = true;
  int hospitals = 4;
  int doctors = 15;
  int ambulances = 8;
  int appliances = 70;
  Tick treatment_min = 50;
  Tick treatment_max = 200;

  bool fire_enabled = false;
  bool fso_fire_collaboration = true;
  int houses = 0;
  int fire_trucks = 0;
  int firefighters = 0;
  Tick fire_wave_period = 100;
  int fires_per_wave = 10;
  double observe_radius = 3.0;
  double escalate_below_health = 80.0;

  double walk_speed = 0.25;
  double vehicle_speed = 1.0;

  // Simple-activity durations; the healthcare demand level follows from them.
  Tick talk_duration = 150;
  Tick market_duration = 200;
  Tick walk_dwell = 200;
  Tick carshare_dwell = 50;
  Tick office_dwell = 80;
  double wants_company_p = 0.5;
  double vicinity_radius = 3.0;
  Tick invalidation_threshold = 50;
  Tick office_deadline = 150;
  double p_activity = 0.18;    // each of the five ordinary kinds
  double p_healthcare = 0.09;  // health-care events are rarer
  bool auto_activities = true;  // false: only scripted begin_* calls run

  void validate() const;
};

enum class ActivityKind : std::uint8_t {
  talk_on_phone,
  go_to_market,
  walk_in_park,
  go_to_location,  // car sharing
  go_to_office,
  health_care,
};
constexpr int kActivityKinds = 6;

enum class TransportMode : std::uint8_t { on_foot = 0, own_car = 1, taxi = 2 };

/// One activity draw for an idle individual: each ordinary kind with
/// p_activity, health care with p_healthcare, otherwise stay idle.
std::optional<ActivityKind> trigger_activity(RngStream& rng, double p_activity,
                                             double p_healthcare);

/// Distance-time decision for the office trip.
TransportMode plan_office_trip(double dist, double walk_speed, Tick deadline_ticks,
                               bool owns_car);

/// Appliances needed to treat a condition of the given severity.
int required_appliances(int severity);

/// One tick of fire on a burning house: stochastic growth, then suppression
/// by bystanders (0.5 each) and a truck crew (crew + 1, so 2..5). The house
/// takes the resulting level as damage; a level driven to zero puts the fire
/// out; health at zero destroys the house for good.
struct FireStepResult {
  double firelevel = 0.0;
  double health = 0.0;
  bool extinguished = false;
  bool destroyed = false;
};
FireStepResult fire_dynamics_step(double firelevel, double health, bool growth, int helpers,
                                  int truck_firefighters);

RoleKind doctor_role(int condition);
RoleKind appliance_role(int condition);

class CityWorld : public World {
 public:
  explicit CityWorld(const CityConfig& cfg);

  struct Individual {
    AgentId id = -1;
    Position pos;
    bool owns_car = false;
    int office = 0;
    bool alive = true;

    enum class State : std::uint8_t {
      idle,
      stationary,    // talk / market / dwell phases, counts down
      moving,        // walking or driving toward `target`
      wait_share,    // car-share requester waiting for a lift
      wait_taxi,     // office-goer waiting for a taxi
      riding,        // aboard somebody's car / a taxi / an ambulance
      helping,       // extinguishing a nearby fire
      patient,
      dead,
    } state = State::idle;

    ActivityKind activity = ActivityKind::talk_on_phone;
    Tick countdown = 0;
    Position target;
    double speed = 0.0;
    Tick activity_since = 0;

    // Car sharing.
    Position share_dest;
    AgentId rider = -1;     // for owners giving a lift
    bool detouring = false;

    // Walking group.
    std::int64_t group = -1;
    bool wants_company = false;

    // Office trip bookkeeping.
    TransportMode mode = TransportMode::on_foot;

    // Fire help.
    std::int64_t helping_house = -1;
    bool has_postponed = false;
    State postponed_state = State::idle;
    ActivityKind postponed_activity = ActivityKind::talk_on_phone;
    Tick postponed_countdown = 0;
    Position postponed_target;
    double postponed_speed = 0.0;

    std::int64_t request = -1;  // active healthcare request
  };

  struct Hospital {
    AgentId id = -1;
    CommunityId community = -1;
    Position pos;
    std::vector<AgentId> doctor_ids;
    std::vector<AgentId> ambulance_ids;
    std::vector<AgentId> appliance_ids;
  };

  struct Doctor {
    AgentId id = -1;
    int hospital = 0;
    std::set<int> expert;  // severe conditions; 1..3 are always covered
  };

  struct Appliance {
    AgentId id = -1;
    int hospital = 0;
    int type = 1;
  };

  struct Ambulance {
    AgentId id = -1;
    int hospital = 0;  // home base
    Position pos;
    enum class State : std::uint8_t { at_base, to_patient, to_hospital, returning } state =
        State::at_base;
    std::int64_t request = -1;
  };

  struct Taxi {
    AgentId id = -1;
    Position pos;
    enum class State : std::uint8_t { wandering, to_rider, to_office } state = State::wandering;
    AgentId rider = -1;
  };

  struct House {
    AgentId id = -1;
    Position pos;
    double health = 100.0;
    double firelevel = 0.0;
    bool burning = false;
    bool ever_ignited = false;
    bool truck_requested = false;
    AgentId truck = -1;
    std::int64_t son = -1;
  };

  struct FireTruck {
    AgentId id = -1;
    Position base;
    Position pos;
    int crew = 1;
    std::int64_t house = -1;
    bool on_site = false;
  };

  struct WalkGroup {
    std::int64_t id = -1;
    std::vector<AgentId> members;
    bool active = false;
  };

  struct HcRequest {
    std::int64_t id = -1;
    AgentId patient = -1;
    int severity = 1;
    Tick issued_at = 0;
    Tick deadline = 0;

    // Logistics only; querying completion is tracked via allocated_at.
    enum class State : std::uint8_t {
      choosing,           // needs a target hospital
      walking,            // self-transport toward the target
      awaiting_ambulance,
      in_ambulance,
      at_hospital,
      done,
    } state = State::choosing;

    int target = -1;  // hospital index
    int last_rejected = -1;
    Tick allocated_at = -1;
    Tick treatment_ready_at = -1;  // allocation + resource transfer delay
    Tick treatment_remaining = 0;
    bool treating = false;
    bool patient_at_hospital = false;

    AgentId doctor = -1;
    std::vector<AgentId> appliances;
    AgentId ambulance = -1;
    std::int64_t son = -1;
  };

  const CityConfig& city_config() const { return cfg_city_; }
  const std::vector<Individual>& individuals() const { return individuals_; }
  const std::vector<Hospital>& hospitals() const { return hospitals_; }
  const std::vector<Doctor>& doctors() const { return doctors_; }
  const std::vector<Ambulance>& ambulances() const { return ambulances_; }
  const std::vector<Appliance>& appliances() const { return appliances_; }
  const std::vector<Taxi>& taxis() const { return taxis_; }
  const std::vector<House>& houses() const { return houses_; }
  const std::vector<FireTruck>& trucks() const { return trucks_; }
  const std::vector<HcRequest>& requests() const { return requests_; }
  const CommunityTree& tree() const { return tree_; }
  const SonPool& sons() const { return sons_; }
  Position park() const { return park_; }

  /// Doctor coverage rule: minor conditions always, severe ones by expertise.
  static bool doctor_covers(const Doctor& d, int severity);

  // Scripted activity starts for orchestration and tests; the agent must be
  // idle. The random per-tick trigger delegates to these.
  void begin_talk(AgentId id);
  void begin_market(AgentId id);
  void begin_walk(AgentId id, bool wants_company);
  void begin_car_share(AgentId id, Position destination);
  void begin_office_trip(AgentId id);
  void begin_healthcare(AgentId id, int severity);

 protected:
  void phase_event_generation() override;
  void phase_device_sensing() override;
  void phase_coordinator_messages() override;
  void phase_movement() override;
  void phase_service_progress() override;
  void on_finalize() override;

 private:
  Individual& individual_by_id(AgentId id);
  Ambulance* ambulance_by_id(AgentId id);
  House& house_by_id(AgentId id);
  int hospital_index_of(CommunityId community) const;
  int nearest_hospital(Position from) const;

  void start_activity(Individual& ind, ActivityKind kind);
  Individual& activity_prologue(AgentId id, ActivityKind kind);
  void finish_activity(Individual& ind);
  void leave_walk_group(Individual& ind);
  void postpone_for_fire(Individual& ind, std::int64_t house_id);
  void resume_postponed(Individual& ind);

  void process_walk_matching();
  void process_car_sharing();
  void process_taxi_queue();
  void process_fire_exceptions();
  void process_healthcare();
  void process_deadlines();

  std::vector<RoleDemand> demand_for(int severity) const;
  bool hospital_can_treat_now(int hospital, int severity) const;
  bool allocate_at_hospital(HcRequest& req);  // Traditional/PerfectOracle on-arrival check
  void complete_allocation(HcRequest& req, Tick querying);
  void dispatch_ambulance_for(HcRequest& req, AgentId amb_id);
  void enqueue_ambulance_request(HcRequest& req, int hospital);
  void fail_request(HcRequest& req);
  void release_request_resources(HcRequest& req, bool include_doctor_appliances);

  void step_fso_request(HcRequest& req);
  void step_traditional_request(HcRequest& req);
  void step_oracle_request(HcRequest& req);
  void on_patient_arrival(HcRequest& req);

  void fire_dynamics();
  int helpers_at(std::int64_t house_id) const;

  CityConfig cfg_city_;
  CommunityTree tree_;
  SonPool sons_;
  CommunityId root_ = -1, residents_ = -1, firefighters_ = -1;

  Position park_;
  std::vector<Position> offices_;
  std::vector<Individual> individuals_;
  std::vector<Hospital> hospitals_;
  std::vector<Doctor> doctors_;
  std::vector<Appliance> appliances_;
  std::vector<Ambulance> ambulances_;
  std::vector<Taxi> taxis_;
  std::vector<House> houses_;
  std::vector<FireTruck> trucks_;
  std::vector<WalkGroup> groups_;
  std::vector<HcRequest> requests_;

  std::deque<AgentId> taxi_waiters_;
  std::deque<AgentId> share_requesters_;
  std::vector<std::deque<std::int64_t>> amb_queues_;  // per hospital

  std::int64_t issued_requests_ = 0;
};

}  // namespace fsosim
