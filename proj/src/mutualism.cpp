#include "fsosim/mutualism.hpp"

#include "fsosim/errors.hpp"

namespace fsosim::mutualism {

void ActionMap::add(const ActionId& x, const ActionId& y) {
  if (fwd_.count(x)) throw ValidationError("action_map", "duplicate source action " + x);
  if (inv_.count(y)) throw ValidationError("action_map", "duplicate target action " + y);
  fwd_[x] = y;
  inv_[y] = x;
}

const ActionId& ActionMap::forward(const ActionId& x) const {
  auto it = fwd_.find(x);
  if (it == fwd_.end()) throw UnknownActionError(x);
  return it->second;
}

const ActionId& ActionMap::inverse(const ActionId& y) const {
  auto it = inv_.find(y);
  if (it == inv_.end()) throw UnknownActionError(y);
  return it->second;
}

ActionId map_action(const ActionMap& map, const ActionId& a, MapDirection direction) {
  return direction == MapDirection::forward ? map.forward(a) : map.inverse(a);
}

Significance DomainEval::significance_of(const ActionId& a) const {
  auto it = eval.find(a);
  if (it == eval.end()) throw UnknownActionError(a);
  return it->second;
}

bool check_mutualistic_precondition(const DomainEval& x, const DomainEval& y,
                                    const ActionMap& act) {
  bool x_side = false;
  for (const auto& [a, sig] : x.eval) {
    if (sig >= Significance::neutral &&
        y.significance_of(act.forward(a)) == Significance::positive) {
      x_side = true;
      break;
    }
  }
  if (!x_side) return false;
  for (const auto& [b, sig] : y.eval) {
    if (sig >= Significance::neutral &&
        x.significance_of(act.inverse(b)) == Significance::positive) {
      return true;
    }
  }
  return false;
}

bool check_extended_precondition(const DomainEval& x, const DomainEval& y,
                                 const ActionMap& act) {
  bool x_side = false;
  for (const auto& [a, sig] : x.eval) {
    (void)sig;
    if (y.significance_of(act.forward(a)) == Significance::positive) {
      x_side = true;
      break;
    }
  }
  if (!x_side) return false;
  for (const auto& [b, sig] : y.eval) {
    (void)sig;
    if (x.significance_of(act.inverse(b)) == Significance::positive) return true;
  }
  return false;
}

std::vector<GroupActivity> merge_group_activity(std::span<const GroupCandidate> candidates,
                                                Tick now) {
  std::vector<GroupActivity> groups;
  for (const GroupCandidate& c : candidates) {
    if (!c.wants_company) continue;
    GroupActivity* open = nullptr;
    for (GroupActivity& g : groups) {
      if (g.activity_kind == c.activity_kind) {
        open = &g;
        break;
      }
    }
    if (open) {
      open->members.push_back(c.agent);
    } else {
      groups.push_back(GroupActivity{{c.agent}, c.activity_kind, now});
    }
  }
  // Singletons found no partner and proceed alone.
  std::erase_if(groups, [](const GroupActivity& g) { return g.members.size() < 2; });
  return groups;
}

}  // namespace fsosim::mutualism
