#include "fsosim/protocol.hpp"

#include <algorithm>
#include <ostream>
#include <set>

#include "fsosim/errors.hpp"

namespace fsosim {

ServiceRegistry::Delta ServiceRegistry::add_offer(AgentId agent, const RoleKind& role,
                                                  Position pos, Tick now) {
  Delta d;
  AgentRecord& rec = agents_[agent];
  rec.position = pos;
  auto [it, inserted] = rec.roles.insert_or_assign(role, now);
  (void)it;
  inserted ? ++d.added : ++d.refreshed;
  return d;
}

void ServiceRegistry::remove_agent(AgentId agent) { agents_.erase(agent); }

ServiceRegistry::Delta ServiceRegistry::set_availability(AgentId agent, Availability a) {
  Delta d;
  auto it = agents_.find(agent);
  if (it != agents_.end() && it->second.availability != a) {
    it->second.availability = a;
    ++d.flipped;
  }
  return d;
}

void ServiceRegistry::set_position(AgentId agent, Position pos) {
  auto it = agents_.find(agent);
  if (it != agents_.end()) it->second.position = pos;
}

const ServiceRegistry::AgentRecord* ServiceRegistry::find(AgentId agent) const {
  auto it = agents_.find(agent);
  return it == agents_.end() ? nullptr : &it->second;
}

int ServiceRegistry::total_of(const RoleKind& role) const {
  int n = 0;
  for (const auto& [id, rec] : agents_) {
    (void)id;
    n += rec.roles.count(role) ? 1 : 0;
  }
  return n;
}

int ServiceRegistry::available_of(const RoleKind& role) const {
  int n = 0;
  for (const auto& [id, rec] : agents_) {
    (void)id;
    if (rec.availability == Availability::available && rec.roles.count(role)) ++n;
  }
  return n;
}

std::map<AgentId, Availability> ServiceRegistry::availability_snapshot() const {
  std::map<AgentId, Availability> snap;
  for (const auto& [id, rec] : agents_) snap[id] = rec.availability;
  return snap;
}

CommunityId CommunityTree::add_community(std::string name, int level, AgentId coordinator,
                                         CommunityId parent) {
  if (parent >= 0 && static_cast<std::size_t>(parent) >= nodes_.size()) {
    throw ValidationError("community.parent", "no such community");
  }
  CommunityNode n;
  n.id = static_cast<CommunityId>(nodes_.size());
  n.name = std::move(name);
  n.level = level;
  n.coordinator = coordinator;
  n.parent = parent;
  nodes_.push_back(std::move(n));
  if (parent >= 0) {
    nodes_[parent].children.push_back(nodes_.back().id);
    add_member(parent, coordinator);
  }
  return nodes_.back().id;
}

void CommunityTree::add_member(CommunityId community, AgentId agent) {
  auto& members = node(community).agent_members;
  if (std::find(members.begin(), members.end(), agent) == members.end()) {
    members.push_back(agent);
  }
}

CommunityNode& CommunityTree::node(CommunityId id) {
  if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size()) {
    throw ValidationError("community.id", "no such community");
  }
  return nodes_[id];
}

const CommunityNode& CommunityTree::node(CommunityId id) const {
  return const_cast<CommunityTree*>(this)->node(id);
}

CommunityId CommunityTree::root() const {
  for (const CommunityNode& n : nodes_) {
    if (n.parent < 0) return n.id;
  }
  throw ValidationError("community.tree", "empty tree");
}

bool CommunityTree::is_transitive_member(AgentId agent, CommunityId community) const {
  for (CommunityId c : subtree(community)) {
    const CommunityNode& n = node(c);
    if (std::find(n.agent_members.begin(), n.agent_members.end(), agent) !=
            n.agent_members.end() ||
        n.registry.has_agent(agent) || n.coordinator == agent) {
      return true;
    }
  }
  return false;
}

CommunityId CommunityTree::home_of(AgentId agent) const {
  for (const CommunityNode& n : nodes_) {
    if (n.registry.has_agent(agent)) return n.id;
  }
  return -1;
}

int CommunityTree::height() const {
  int h = 0;
  for (const CommunityNode& n : nodes_) {
    int depth = 0;
    CommunityId c = n.id;
    while (node(c).parent >= 0) {
      c = node(c).parent;
      ++depth;
    }
    h = std::max(h, depth);
  }
  return h;
}

std::vector<CommunityId> CommunityTree::subtree(CommunityId id) const {
  std::vector<CommunityId> out;
  std::vector<CommunityId> stack{id};
  while (!stack.empty()) {
    CommunityId c = stack.back();
    stack.pop_back();
    out.push_back(c);
    const auto& children = node(c).children;
    for (auto it = children.rbegin(); it != children.rend(); ++it) stack.push_back(*it);
  }
  return out;
}

void CommunityTree::validate() const {
  int roots = 0;
  for (const CommunityNode& n : nodes_) {
    if (n.parent < 0) {
      ++roots;
      continue;
    }
    const CommunityNode& p = node(n.parent);
    if (std::find(p.children.begin(), p.children.end(), n.id) == p.children.end()) {
      throw ValidationError("community.tree", "child link missing for " + n.name);
    }
    if (std::find(p.agent_members.begin(), p.agent_members.end(), n.coordinator) ==
        p.agent_members.end()) {
      throw ValidationError("community.tree",
                            "coordinator of " + n.name + " is not a member of its parent");
    }
  }
  if (roots != 1) throw ValidationError("community.tree", "tree must have exactly one root");
  // No cycles: subtree from the root must reach every node exactly once.
  if (subtree(root()).size() != nodes_.size()) {
    throw ValidationError("community.tree", "unreachable communities or cycle");
  }
}

void CommunityTree::dump(std::ostream& out) const {
  std::vector<std::pair<CommunityId, int>> stack{{root(), 0}};
  while (!stack.empty()) {
    auto [id, indent] = stack.back();
    stack.pop_back();
    const CommunityNode& n = node(id);
    out << std::string(static_cast<std::size_t>(indent) * 2, ' ') << n.name << " ... L"
        << n.level << '\n';
    for (const auto& [agent, rec] : n.registry.agents()) {
      out << std::string(static_cast<std::size_t>(indent + 1) * 2, ' ') << "[agent " << agent;
      for (const auto& [role, at] : rec.roles) {
        (void)at;
        out << ' ' << role;
      }
      out << "] ... L" << (n.level > 0 ? n.level - 1 : 0) << '\n';
    }
    for (auto it = n.children.rbegin(); it != n.children.rend(); ++it) {
      stack.push_back({*it, indent + 1});
    }
  }
}

ServiceRegistry::Delta publish_notification(CommunityTree& tree, CommunityId node_id,
                                            const Notification& n) {
  if (!tree.is_transitive_member(n.origin, node_id)) throw NotAMemberError(n.origin);
  CommunityNode& node = tree.node(node_id);
  ServiceRegistry::Delta delta;
  switch (n.kind) {
    case Notification::Kind::service_offer:
      delta = node.registry.add_offer(n.origin, n.role, n.position, n.tick);
      break;
    case Notification::Kind::status:
      delta = node.registry.set_availability(n.origin, n.availability);
      break;
    default:
      node.pending.push_back(n);
      break;
  }
  return delta;
}

namespace {

struct Candidate {
  double dist;
  AgentId agent;
  CommunityId home;
};

// Available holders of `role` in the subtree, nearest to `where` first, ties
// by lowest agent id; agents already picked for this request are skipped.
std::vector<Candidate> candidates_for(const CommunityTree& tree, CommunityId scope,
                                      const RoleKind& role, const Position& where,
                                      const std::set<AgentId>& taken) {
  std::vector<Candidate> out;
  for (CommunityId c : tree.subtree(scope)) {
    for (const auto& [agent, rec] : tree.node(c).registry.agents()) {
      if (rec.availability != Availability::available) continue;
      if (taken.count(agent)) continue;
      if (!rec.roles.count(role)) continue;
      out.push_back({distance(rec.position, where), agent, c});
    }
  }
  std::sort(out.begin(), out.end(), [](const Candidate& a, const Candidate& b) {
    if (a.dist != b.dist) return a.dist < b.dist;
    return a.agent < b.agent;
  });
  return out;
}

void release_all(CommunityTree& tree, const std::vector<Allocation>& allocation) {
  for (const Allocation& a : allocation) {
    tree.node(a.home).registry.set_availability(a.agent, Availability::available);
  }
}

// Takes as many holders of each demanded role as possible from `scope`,
// marking them busy. Satisfied counts are removed from `missing`.
void gather(CommunityTree& tree, CommunityId scope, std::vector<RoleDemand>& missing,
            const Position& where, std::set<AgentId>& taken,
            std::vector<Allocation>& allocation) {
  for (RoleDemand& d : missing) {
    if (d.count <= 0) continue;
    auto cands = candidates_for(tree, scope, d.role, where, taken);
    const int take = std::min<int>(d.count, static_cast<int>(cands.size()));
    for (int i = 0; i < take; ++i) {
      tree.node(cands[i].home).registry.set_availability(cands[i].agent, Availability::busy);
      taken.insert(cands[i].agent);
      allocation.push_back({cands[i].agent, d.role, cands[i].home});
    }
    d.count -= take;
  }
  std::erase_if(missing, [](const RoleDemand& d) { return d.count <= 0; });
}

}  // namespace

MatchOutcome match_notification(CommunityTree& tree, CommunityId node_id,
                                const ServiceRequest& request) {
  const CommunityNode& node = tree.node(node_id);
  // All-or-nothing feasibility check before touching any availability bit.
  std::set<AgentId> taken;
  std::vector<std::pair<AgentId, CommunityId>> picks;
  for (const RoleDemand& d : request.roles) {
    for (int k = 0; k < d.count; ++k) {
      auto cands = candidates_for(tree, node_id, d.role, request.where, taken);
      std::erase_if(cands, [&](const Candidate& c) { return c.home != node.id; });
      if (cands.empty()) return {};
      taken.insert(cands.front().agent);
      picks.push_back({cands.front().agent, cands.front().home});
    }
  }
  MatchOutcome out;
  out.enabled = true;
  std::size_t i = 0;
  for (const RoleDemand& d : request.roles) {
    for (int k = 0; k < d.count; ++k, ++i) {
      auto [agent, home] = picks[i];
      tree.node(home).registry.set_availability(agent, Availability::busy);
      out.allocation.push_back({agent, d.role, home});
    }
  }
  return out;
}

EscalationOutcome raise_exception(CommunityTree& tree, CommunityId origin,
                                  const ServiceRequest& request, int flooding_threshold) {
  EscalationOutcome out;
  std::vector<RoleDemand> missing = request.roles;
  std::set<AgentId> taken;
  CommunityId at = origin;
  while (!missing.empty()) {
    const CommunityId parent = tree.node(at).parent;
    if (parent < 0) break;  // root exhausted
    if (out.hops + 1 > flooding_threshold) break;
    ++out.hops;
    ++out.attempts;
    gather(tree, parent, missing, request.where, taken, out.allocation);
    at = parent;
  }
  if (!missing.empty()) {
    release_all(tree, out.allocation);
    out.allocation.clear();
    out.status = EscalationOutcome::Status::failed;
  } else {
    out.status = EscalationOutcome::Status::resolved;
  }
  return out;
}

SocialOverlayNetwork& SonPool::form_son(const ServiceRequest& request,
                                        std::vector<Allocation> allocation, Tick now) {
  for (const RoleDemand& d : request.roles) {
    const auto have = std::count_if(allocation.begin(), allocation.end(),
                                    [&](const Allocation& a) { return a.role == d.role; });
    if (have < d.count) {
      throw IncompleteAllocationError("allocation misses role " + d.role + " for request " +
                                      std::to_string(request.id));
    }
  }
  std::set<CommunityId> homes;
  for (const Allocation& a : allocation) homes.insert(a.home);

  SocialOverlayNetwork son;
  son.id = static_cast<std::int64_t>(sons_.size());
  son.members = std::move(allocation);
  son.request_id = request.id;
  son.formed_at = now;
  son.active = true;
  son.distinct_communities = static_cast<int>(homes.size());
  if (son.distinct_communities >= 2) ++inter_community_count_;
  sons_.push_back(std::move(son));
  return sons_.back();
}

int SonPool::dissolve_son(CommunityTree& tree, std::int64_t son_id) {
  SocialOverlayNetwork& s = son(son_id);
  if (!s.active) throw AlreadyDissolvedError("SON " + std::to_string(son_id));
  s.active = false;
  release_all(tree, s.members);
  return static_cast<int>(s.members.size());
}

SocialOverlayNetwork& SonPool::son(std::int64_t id) {
  if (id < 0 || static_cast<std::size_t>(id) >= sons_.size()) {
    throw ValidationError("son.id", "no such SON");
  }
  return sons_[static_cast<std::size_t>(id)];
}

}  // namespace fsosim
