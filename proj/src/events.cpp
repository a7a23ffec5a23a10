#include "fsosim/events.hpp"

#include <array>
#include <istream>
#include <ostream>
#include <string>

#include <json.hpp>

#include "fsosim/errors.hpp"

namespace fsosim {

namespace {
constexpr std::array kKindNames = {
#define FSOSIM_NAME(name) std::string_view(#name),
    FSOSIM_EVENT_KINDS(FSOSIM_NAME)
#undef FSOSIM_NAME
};
}  // namespace

std::string_view event_kind_name(EventKind k) {
  return kKindNames[static_cast<std::size_t>(k)];
}

EventKind event_kind_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kKindNames.size(); ++i) {
    if (kKindNames[i] == name) return static_cast<EventKind>(i);
  }
  throw ParseError(0, "unknown event kind: " + std::string(name));
}

bool EventLog::complete() const {
  return !records_.empty() && records_.back().kind == EventKind::run_finished;
}

void EventLog::write_ndjson(std::ostream& out) const {
  for (const Event& e : records_) {
    nlohmann::json j;
    j["tick"] = e.tick;
    j["agent"] = e.agent;
    j["kind"] = event_kind_name(e.kind);
    if (e.a != 0) j["a"] = e.a;
    if (e.b != 0) j["b"] = e.b;
    if (e.c != 0) j["c"] = e.c;
    if (e.d != 0) j["d"] = e.d;
    if (e.x != 0.0) j["x"] = e.x;
    if (e.y != 0.0) j["y"] = e.y;
    out << j.dump() << '\n';
  }
}

EventLog EventLog::read_ndjson(std::istream& in) {
  EventLog log;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& ex) {
      throw ParseError(line_no, ex.what());
    }
    Event& e = log.emit(j.at("tick").get<Tick>(), j.at("agent").get<AgentId>(),
                        event_kind_from_name(j.at("kind").get<std::string>()));
    e.a = j.value("a", std::int64_t{0});
    e.b = j.value("b", std::int64_t{0});
    e.c = j.value("c", std::int64_t{0});
    e.d = j.value("d", std::int64_t{0});
    e.x = j.value("x", 0.0);
    e.y = j.value("y", 0.0);
  }
  return log;
}

}  // namespace fsosim
