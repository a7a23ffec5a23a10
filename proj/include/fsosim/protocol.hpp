#pragma once

#include <deque>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fsosim/core.hpp"

namespace fsosim {

using RoleKind = std::string;
using CommunityId = std::int32_t;

enum class Availability : std::uint8_t { available, busy };

/// Per-community service registry. An agent may register several role kinds
/// (at most one entry per (agent, role)); its availability is a single bit
/// shared by all of its entries, flipped only by allocate/release.
class ServiceRegistry {
 public:
  struct AgentRecord {
    Availability availability = Availability::available;
    Position position;
    std::map<RoleKind, Tick> roles;  // role -> refreshed_at
  };

  struct Delta {
    int added = 0;
    int refreshed = 0;
    int flipped = 0;
  };

  Delta add_offer(AgentId agent, const RoleKind& role, Position pos, Tick now);
  void remove_agent(AgentId agent);
  Delta set_availability(AgentId agent, Availability a);
  void set_position(AgentId agent, Position pos);

  bool has_agent(AgentId agent) const { return agents_.count(agent) != 0; }
  const AgentRecord* find(AgentId agent) const;
  const std::map<AgentId, AgentRecord>& agents() const { return agents_; }

  int total_of(const RoleKind& role) const;
  int available_of(const RoleKind& role) const;

  /// Snapshot of every agent's availability bit, for rollback audits.
  std::map<AgentId, Availability> availability_snapshot() const;

 private:
  std::map<AgentId, AgentRecord> agents_;
};

struct RoleDemand {
  RoleKind role;
  int count = 1;
};

/// A typed, time-stamped demand escalated through the tree.
struct ServiceRequest {
  std::int64_t id = 0;
  AgentId requester = -1;
  Position where;
  std::vector<RoleDemand> roles;
  Tick issued_at = 0;
};

struct Notification {
  enum class Kind : std::uint8_t { status, service_request, service_offer, event_report, alarm, cancel };

  AgentId origin = -1;
  Kind kind = Kind::status;
  Tick tick = 0;
  // Payload; which fields apply depends on the kind.
  RoleKind role;
  Availability availability = Availability::available;
  Position position;
  std::optional<ServiceRequest> request;
};

struct CommunityNode {
  CommunityId id = -1;
  std::string name;
  int level = 0;  // 0 = iSoC
  AgentId coordinator = -1;
  CommunityId parent = -1;
  std::vector<CommunityId> children;
  std::vector<AgentId> agent_members;
  ServiceRegistry registry;
  std::deque<Notification> pending;
};

/// One allocated role-holder, remembering its home community for release.
struct Allocation {
  AgentId agent = -1;
  RoleKind role;
  CommunityId home = -1;
};

struct MatchOutcome {
  bool enabled = false;
  std::vector<Allocation> allocation;
};

struct EscalationOutcome {
  enum class Status : std::uint8_t { resolved, failed };
  Status status = Status::failed;
  std::vector<Allocation> allocation;  // complete iff resolved; empty after rollback
  int hops = 0;                        // upward edges traversed
  int attempts = 0;                    // ancestor gather attempts
};

/// Temporary SoC assembled from allocated roles for one request's lifetime.
struct SocialOverlayNetwork {
  std::int64_t id = -1;
  std::vector<Allocation> members;
  std::int64_t request_id = 0;
  Tick formed_at = 0;
  bool active = false;
  int distinct_communities = 0;
};

class CommunityTree {
 public:
  /// Adds a node; the coordinator joins the parent's member list, keeping the
  /// rule that a coordinator also belongs to the parent community.
  CommunityId add_community(std::string name, int level, AgentId coordinator,
                            CommunityId parent = -1);
  void add_member(CommunityId community, AgentId agent);

  CommunityNode& node(CommunityId id);
  const CommunityNode& node(CommunityId id) const;
  std::size_t size() const { return nodes_.size(); }
  CommunityId root() const;

  bool is_transitive_member(AgentId agent, CommunityId community) const;
  /// Home community = the community whose registry carries the agent.
  CommunityId home_of(AgentId agent) const;

  /// Longest root-to-node edge count.
  int height() const;

  /// Communities of the subtree rooted at `id`, depth-first, the root first.
  std::vector<CommunityId> subtree(CommunityId id) const;

  void validate() const;  // tree shape + coordinator membership

  /// Indented `name ... L<level>` listing for debugging.
  void dump(std::ostream& out) const;

 private:
  std::vector<CommunityNode> nodes_;
};

/// Records an offer/status in the node's registry or queues the notification
/// for matching. Throws NotAMemberError when the origin is outside the
/// node's subtree.
ServiceRegistry::Delta publish_notification(CommunityTree& tree, CommunityId node,
                                            const Notification& n);

/// All-or-nothing match against the node's own registry. On success every
/// allocated agent is marked busy; on NoMatch the registry is untouched.
/// Providers are chosen nearest-to-request first, ties by lowest agent id.
MatchOutcome match_notification(CommunityTree& tree, CommunityId node,
                                const ServiceRequest& request);

/// Climbs from `origin` toward the root, gathering missing roles from each
/// ancestor's aggregated subtree view. Partial fulfillment continues upward;
/// failure (flooding threshold exceeded or root exhausted) releases every
/// partially allocated role.
EscalationOutcome raise_exception(CommunityTree& tree, CommunityId origin,
                                  const ServiceRequest& request, int flooding_threshold);

/// SON lifecycle and the inter-community cooperation counter.
class SonPool {
 public:
  /// Requires the allocation to cover the request's demands exactly; throws
  /// IncompleteAllocationError otherwise. Counts SONs spanning >= 2 distinct
  /// home communities.
  SocialOverlayNetwork& form_son(const ServiceRequest& request,
                                 std::vector<Allocation> allocation, Tick now);

  /// Releases every member role back to its home registry. Throws
  /// AlreadyDissolvedError on a second dissolve. Returns roles released.
  int dissolve_son(CommunityTree& tree, std::int64_t son_id);

  SocialOverlayNetwork& son(std::int64_t id);
  std::int64_t inter_community_count() const { return inter_community_count_; }
  const std::vector<SocialOverlayNetwork>& all() const { return sons_; }

 private:
  std::vector<SocialOverlayNetwork> sons_;
  std::int64_t inter_community_count_ = 0;
};

}  // namespace fsosim
