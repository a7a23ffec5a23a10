#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "fsosim/core.hpp"

namespace fsosim::mutualism {

using ActionId = std::string;

/// Three-level ordinal significance of an action within a domain.
enum class Significance : int { negative = -1, neutral = 0, positive = 1 };

/// Bijection between the action sets of two domains.
class ActionMap {
 public:
  /// Adds a pair; throws ValidationError if either side is already mapped.
  void add(const ActionId& x, const ActionId& y);

  const ActionId& forward(const ActionId& x) const;  // throws UnknownActionError
  const ActionId& inverse(const ActionId& y) const;  // throws UnknownActionError

  std::size_t size() const { return fwd_.size(); }
  const std::map<ActionId, ActionId>& pairs() const { return fwd_; }

 private:
  std::map<ActionId, ActionId> fwd_;
  std::map<ActionId, ActionId> inv_;
};

enum class MapDirection { forward, inverse };

ActionId map_action(const ActionMap& map, const ActionId& a, MapDirection direction);

/// A domain's action set together with its significance evaluation; the
/// evaluation is total over the action set by construction.
struct DomainEval {
  std::map<ActionId, Significance> eval;

  Significance significance_of(const ActionId& a) const;  // throws UnknownActionError
};

/// True iff there is an action in X that X rates neutral-or-positive whose
/// mapped action Y rates positive, and symmetrically from Y via the inverse
/// map.
bool check_mutualistic_precondition(const DomainEval& x, const DomainEval& y,
                                    const ActionMap& act);

/// The relaxed form: the own-domain evaluation conjuncts are dropped, so a
/// relationship may carry a cost for the acting entity.
bool check_extended_precondition(const DomainEval& x, const DomainEval& y,
                                 const ActionMap& act);

struct GroupCandidate {
  AgentId agent;
  std::string activity_kind;
  bool wants_company = false;
};

struct GroupActivity {
  std::vector<AgentId> members;  // arrival order, >= 2
  std::string activity_kind;
  Tick formed_at = 0;
};

/// Greedy earliest-first grouping of candidates that request company for the
/// same activity kind. Each grouped agent appears in exactly one group; a
/// kind's group grows as further compatible candidates arrive.
std::vector<GroupActivity> merge_group_activity(std::span<const GroupCandidate> candidates,
                                                Tick now);

}  // namespace fsosim::mutualism
