#pragma once

#include "fsosim/core.hpp"
#include "fsosim/events.hpp"

namespace fsosim {

/// Tick-driven world driver. One advance_tick() call runs the six phases in
/// a fixed order so that a run is a pure function of (config, master_seed):
///
///   1. event generation      4. mobile-agent movement
///   2. device sensing        5. service progress / completion
///   3. coordinator messages  6. metrics accrual
///
/// A single run is strictly single-threaded; independent runs share nothing.
class World {
 public:
  explicit World(const WorldConfig& cfg) : cfg_(cfg), rng_(cfg.master_seed) { cfg_.validate(); }
  virtual ~World() = default;

  World(const World&) = delete;
  World& operator=(const World&) = delete;

  const WorldConfig& config() const { return cfg_; }
  Tick tick() const { return tick_; }
  bool finished() const { return tick_ >= cfg_.max_ticks; }

  /// Runs one full tick. Calling on a finished world is a no-op; the runner
  /// guards the loop.
  void advance_tick() {
    if (finished()) return;
    ++tick_;
    phase_event_generation();
    phase_device_sensing();
    phase_coordinator_messages();
    phase_movement();
    phase_service_progress();
    phase_metrics();
  }

  /// Runs to max_ticks and appends the run terminator record.
  void run_to_end() {
    while (!finished()) advance_tick();
    finalize();
  }

  void finalize() {
    if (!log_.complete()) {
      on_finalize();
      log_.emit(tick_, -1, EventKind::run_finished).a = tick_;
    }
  }

  const EventLog& log() const { return log_; }
  RngStream& rng(std::string_view name) { return rng_.stream(name); }

 protected:
  virtual void phase_event_generation() {}
  virtual void phase_device_sensing() {}
  virtual void phase_coordinator_messages() {}
  virtual void phase_movement() {}
  virtual void phase_service_progress() {}
  virtual void phase_metrics() {}

  /// Hook for end-of-run bookkeeping records (totals, open requests).
  virtual void on_finalize() {}

  Event& emit(AgentId agent, EventKind kind) { return log_.emit(tick_, agent, kind); }

  WorldConfig cfg_;
  Tick tick_ = 0;
  EventLog log_;
  RngSet rng_;
};

}  // namespace fsosim
