#pragma once

#include <cstdint>
#include <iosfwd>
#include <string_view>
#include <vector>

#include "fsosim/core.hpp"

namespace fsosim {

// Every scenario writes the same flat record type. The a..d/x/y payload slots
// are kind-specific; the meaning of each slot is documented at the emit site.
#define FSOSIM_EVENT_KINDS(X)   \
  X(activity_started)           \
  X(activity_finished)          \
  X(activity_canceled)          \
  X(activity_postponed)         \
  X(activity_resumed)           \
  X(mutualistic_relationship)   \
  X(group_formed)               \
  X(group_member_left)          \
  X(group_dissolved)            \
  X(exception_raised)           \
  X(exception_resolved)         \
  X(exception_failed)           \
  X(son_formed)                 \
  X(son_dissolved)              \
  X(transport_mode)             \
  X(taxi_assigned)              \
  X(carshare_paired)            \
  X(healthcare_issued)          \
  X(healthcare_treated)         \
  X(patient_died)               \
  X(hospital_rejected)          \
  X(fire_ignited)               \
  X(fire_extinguished)          \
  X(house_burned)               \
  X(truck_dispatched)           \
  X(helper_joined)              \
  X(fall_missed)                \
  X(alarm_raised)               \
  X(ic_dispatched)              \
  X(ic_verification)            \
  X(alarm_verified)             \
  X(ma_dispatched)              \
  X(ma_aborted)                 \
  X(ma_intervention)            \
  X(treatment_started)          \
  X(treatment_finished)         \
  X(cost_accrued)               \
  X(alarm_open_at_end)          \
  X(run_totals)                 \
  X(run_finished)

enum class EventKind : std::uint8_t {
#define FSOSIM_ENUM(name) name,
  FSOSIM_EVENT_KINDS(FSOSIM_ENUM)
#undef FSOSIM_ENUM
};

std::string_view event_kind_name(EventKind k);
EventKind event_kind_from_name(std::string_view name);  // throws ParseError

struct Event {
  Tick tick = 0;
  AgentId agent = -1;
  EventKind kind = EventKind::run_finished;
  std::int64_t a = 0;
  std::int64_t b = 0;
  std::int64_t c = 0;
  std::int64_t d = 0;
  double x = 0.0;
  double y = 0.0;

  bool operator==(const Event&) const = default;
};

/// Append-only per-run event log; timestamps are non-decreasing.
class EventLog {
 public:
  Event& emit(Tick tick, AgentId agent, EventKind kind) {
    records_.emplace_back(Event{tick, agent, kind});
    return records_.back();
  }

  const std::vector<Event>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  const Event& operator[](std::size_t i) const { return records_[i]; }

  /// True once a run_finished terminator has been appended.
  bool complete() const;

  void write_ndjson(std::ostream& out) const;
  static EventLog read_ndjson(std::istream& in);

  bool operator==(const EventLog&) const = default;

 private:
  std::vector<Event> records_;
};

}  // namespace fsosim
