#include <doctest.h>

#include <set>
#include <sstream>

#include "fsosim/core.hpp"
#include "fsosim/errors.hpp"
#include "fsosim/protocol.hpp"

using namespace fsosim;

namespace {

// Two hospitals and a residents community under one emergency-response root.
struct Fixture {
  CommunityTree tree;
  CommunityId root, people, hosp_a, hosp_b;

  Fixture() {
    root = tree.add_community("emergency_response", 2, 100);
    people = tree.add_community("local_residents", 1, 101, root);
    hosp_a = tree.add_community("hospital_a", 1, 102, root);
    hosp_b = tree.add_community("hospital_b", 1, 103, root);
  }

  void offer(CommunityId c, AgentId agent, const RoleKind& role, Position pos = {0, 0}) {
    tree.add_member(c, agent);
    Notification n;
    n.origin = agent;
    n.kind = Notification::Kind::service_offer;
    n.role = role;
    n.position = pos;
    publish_notification(tree, c, n);
  }
};

ServiceRequest request_for(std::vector<RoleDemand> roles, Position where = {0, 0}) {
  ServiceRequest r;
  r.id = 1;
  r.requester = 1;
  r.where = where;
  r.roles = std::move(roles);
  return r;
}

int busy_count(const ServiceRegistry& reg) {
  int n = 0;
  for (const auto& [id, rec] : reg.agents()) {
    (void)id;
    if (rec.availability == Availability::busy) ++n;
  }
  return n;
}

}  // namespace

TEST_CASE("publish_notification: offers add entries, status flips availability") {
  Fixture f;
  f.offer(f.people, 1, "walk");
  CHECK(f.tree.node(f.people).registry.total_of("walk") == 1);
  CHECK(f.tree.node(f.people).registry.available_of("walk") == 1);

  Notification busy;
  busy.origin = 1;
  busy.kind = Notification::Kind::status;
  busy.availability = Availability::busy;
  auto d = publish_notification(f.tree, f.people, busy);
  CHECK(d.flipped == 1);
  CHECK(f.tree.node(f.people).registry.available_of("walk") == 0);
}

TEST_CASE("publish_notification: origin outside the subtree is rejected") {
  Fixture f;
  Notification n;
  n.origin = 999;
  n.kind = Notification::Kind::service_offer;
  n.role = "walk";
  CHECK_THROWS_AS(publish_notification(f.tree, f.people, n), NotAMemberError);
}

TEST_CASE("duplicate offers refresh a single entry (uniqueness over random sequences)") {
  Fixture f;
  RngStream rng(3, "offers");
  for (int i = 0; i < 500; ++i) {
    const AgentId agent = rng.uniform_int(1, 8);
    const RoleKind role = "r" + std::to_string(rng.uniform_int(0, 2));
    f.tree.add_member(f.people, agent);
    Notification n;
    n.origin = agent;
    n.kind = Notification::Kind::service_offer;
    n.role = role;
    n.tick = i;
    auto d = publish_notification(f.tree, f.people, n);
    CHECK(d.added + d.refreshed == 1);
  }
  const auto& reg = f.tree.node(f.people).registry;
  for (const auto& [agent, rec] : reg.agents()) {
    (void)agent;
    REQUIRE(rec.roles.size() <= 3);  // one entry per (agent, role)
  }
  CHECK(reg.total_of("r0") + reg.total_of("r1") + reg.total_of("r2") <= 24);
}

TEST_CASE("publish_notification: requests and alarms join the pending-match queue") {
  Fixture f;
  f.tree.add_member(f.people, 4);
  Notification req;
  req.origin = 4;
  req.kind = Notification::Kind::service_request;
  req.request = ServiceRequest{1, 4, {0, 0}, {{"walk", 1}}, 0};
  publish_notification(f.tree, f.people, req);
  Notification alarm;
  alarm.origin = 4;
  alarm.kind = Notification::Kind::alarm;
  publish_notification(f.tree, f.people, alarm);
  CHECK(f.tree.node(f.people).pending.size() == 2);
  CHECK(f.tree.node(f.people).pending[0].kind == Notification::Kind::service_request);
}

TEST_CASE("match_notification: single walk offer pairs with a walk request") {
  Fixture f;
  f.offer(f.people, 1, "walk");
  auto out = match_notification(f.tree, f.people, request_for({{"walk", 1}}));
  REQUIRE(out.enabled);
  REQUIRE(out.allocation.size() == 1);
  CHECK(out.allocation[0].agent == 1);
  CHECK(f.tree.node(f.people).registry.available_of("walk") == 0);
}

TEST_CASE("match_notification: no taxi available means NoMatch") {
  Fixture f;
  auto out = match_notification(f.tree, f.people, request_for({{"taxi", 1}}));
  CHECK_FALSE(out.enabled);
}

TEST_CASE("match_notification: all-or-nothing against a brute-force availability check") {
  Fixture f;
  f.offer(f.hosp_a, 10, "doctor");
  auto out = match_notification(f.tree, f.hosp_a,
                                request_for({{"doctor", 1}, {"ambulance", 1}}));
  CHECK_FALSE(out.enabled);
  CHECK(f.tree.node(f.hosp_a).registry.available_of("doctor") == 1);  // untouched

  // Brute force: a request is satisfiable iff every demand count fits the
  // available count of its role.
  RngStream rng(17, "subset");
  for (int trial = 0; trial < 300; ++trial) {
    Fixture g;
    const int docs = static_cast<int>(rng.uniform_int(0, 3));
    const int ambs = static_cast<int>(rng.uniform_int(0, 3));
    for (int i = 0; i < docs; ++i) g.offer(g.hosp_a, 10 + i, "doctor");
    for (int i = 0; i < ambs; ++i) g.offer(g.hosp_a, 20 + i, "ambulance");
    const int want_docs = static_cast<int>(rng.uniform_int(0, 3));
    const int want_ambs = static_cast<int>(rng.uniform_int(0, 3));
    auto o = match_notification(
        g.tree, g.hosp_a, request_for({{"doctor", want_docs}, {"ambulance", want_ambs}}));
    const bool feasible = docs >= want_docs && ambs >= want_ambs;
    REQUIRE(o.enabled == feasible);
    if (!feasible) {
      REQUIRE(g.tree.node(g.hosp_a).registry.available_of("doctor") == docs);
      REQUIRE(g.tree.node(g.hosp_a).registry.available_of("ambulance") == ambs);
    }
  }
}

TEST_CASE("match_notification: nearest provider wins, ties broken by lowest id") {
  Fixture f;
  f.offer(f.people, 5, "ic", {4, 0});
  f.offer(f.people, 2, "ic", {9, 0});
  auto out = match_notification(f.tree, f.people, request_for({{"ic", 1}}, {0, 0}));
  REQUIRE(out.enabled);
  CHECK(out.allocation[0].agent == 5);

  Fixture g;
  g.offer(g.people, 7, "ic", {3, 0});
  g.offer(g.people, 4, "ic", {3, 0});
  auto out2 = match_notification(g.tree, g.people, request_for({{"ic", 1}}, {0, 0}));
  REQUIRE(out2.enabled);
  CHECK(out2.allocation[0].agent == 4);
}

TEST_CASE("raise_exception: resolved within one hospital community") {
  Fixture f;
  f.offer(f.hosp_a, 10, "doctor");
  f.offer(f.hosp_a, 11, "ambulance");
  f.offer(f.hosp_a, 12, "appliance");
  auto out = raise_exception(f.tree, f.hosp_a,
                             request_for({{"doctor", 1}, {"ambulance", 1}, {"appliance", 1}}), 8);
  REQUIRE(out.status == EscalationOutcome::Status::resolved);
  std::set<CommunityId> homes;
  for (const auto& a : out.allocation) homes.insert(a.home);
  const std::set<CommunityId> expected{f.hosp_a};
  CHECK(homes == expected);
}

TEST_CASE("raise_exception: sibling hospital supplies the missing appliances") {
  Fixture f;
  f.offer(f.hosp_a, 10, "doctor");
  f.offer(f.hosp_a, 11, "ambulance");
  f.offer(f.hosp_b, 20, "appliance");
  auto out = raise_exception(f.tree, f.hosp_a,
                             request_for({{"doctor", 1}, {"ambulance", 1}, {"appliance", 1}}), 8);
  REQUIRE(out.status == EscalationOutcome::Status::resolved);
  std::set<CommunityId> homes;
  for (const auto& a : out.allocation) homes.insert(a.home);
  const std::set<CommunityId> expected{f.hosp_a, f.hosp_b};
  CHECK(homes == expected);

  SonPool pool;
  auto& son = pool.form_son(request_for({{"doctor", 1}, {"ambulance", 1}, {"appliance", 1}}),
                            out.allocation, 3);
  CHECK(son.distinct_communities == 2);
  CHECK(pool.inter_community_count() == 1);
}

TEST_CASE("raise_exception: missing role anywhere fails and rolls back fully") {
  Fixture f;
  f.offer(f.hosp_a, 10, "doctor");
  f.offer(f.hosp_b, 20, "ambulance");
  auto before_a = f.tree.node(f.hosp_a).registry.availability_snapshot();
  auto before_b = f.tree.node(f.hosp_b).registry.availability_snapshot();
  auto out = raise_exception(f.tree, f.hosp_a,
                             request_for({{"doctor", 1}, {"ambulance", 1}, {"appliance", 2}}), 8);
  CHECK(out.status == EscalationOutcome::Status::failed);
  CHECK(out.allocation.empty());
  CHECK(f.tree.node(f.hosp_a).registry.availability_snapshot() == before_a);
  CHECK(f.tree.node(f.hosp_b).registry.availability_snapshot() == before_b);
}

TEST_CASE("raise_exception: flooding threshold bounds the climb") {
  // Chain: c0 <- c1 <- c2 <- c3 (root), resource only at the root level.
  CommunityTree tree;
  auto c3 = tree.add_community("root", 3, 1);
  auto c2 = tree.add_community("mid2", 2, 2, c3);
  auto c1 = tree.add_community("mid1", 1, 3, c2);
  auto c0 = tree.add_community("leaf", 0, 4, c1);
  tree.add_member(c3, 50);
  Notification n;
  n.origin = 50;
  n.kind = Notification::Kind::service_offer;
  n.role = "truck";
  publish_notification(tree, c3, n);

  auto fail = raise_exception(tree, c0, request_for({{"truck", 1}}), 2);
  CHECK(fail.status == EscalationOutcome::Status::failed);
  CHECK(fail.hops <= 2);
  CHECK(tree.node(c3).registry.available_of("truck") == 1);

  auto ok = raise_exception(tree, c0, request_for({{"truck", 1}}), 3);
  CHECK(ok.status == EscalationOutcome::Status::resolved);
  CHECK(ok.hops == 3);

  // Termination: attempts never exceed min(height, threshold) + 1.
  for (int thr = 0; thr <= 6; ++thr) {
    auto out = raise_exception(tree, c0, request_for({{"nothing", 1}}), thr);
    CHECK(out.attempts <= std::min(tree.height(), thr) + 1);
    CHECK(out.status == EscalationOutcome::Status::failed);
  }
}

TEST_CASE("form_son: incomplete allocation is an error; infra SON does not count") {
  Fixture f;
  f.offer(f.hosp_a, 10, "doctor");
  auto req = request_for({{"doctor", 1}, {"ambulance", 1}});
  SonPool pool;
  std::vector<Allocation> partial{{10, "doctor", f.hosp_a}};
  CHECK_THROWS_AS(pool.form_son(req, partial, 0), IncompleteAllocationError);

  auto one = request_for({{"doctor", 1}});
  auto out = match_notification(f.tree, f.hosp_a, one);
  REQUIRE(out.enabled);
  auto& son = pool.form_son(one, out.allocation, 1);
  CHECK(son.distinct_communities == 1);
  CHECK(pool.inter_community_count() == 0);

  CHECK(pool.dissolve_son(f.tree, son.id) == 1);
  CHECK(f.tree.node(f.hosp_a).registry.available_of("doctor") == 1);
  CHECK_THROWS_AS(pool.dissolve_son(f.tree, son.id), AlreadyDissolvedError);
}

TEST_CASE("allocate/dissolve cycles conserve the registry exactly") {
  Fixture f;
  RngStream rng(23, "cycles");
  for (int i = 0; i < 6; ++i) f.offer(f.hosp_a, 10 + i, "doctor", {1.0 * i, 0});
  for (int i = 0; i < 4; ++i) f.offer(f.hosp_b, 20 + i, "appliance", {0, 1.0 * i});
  const auto initial_a = f.tree.node(f.hosp_a).registry.availability_snapshot();
  const auto initial_b = f.tree.node(f.hosp_b).registry.availability_snapshot();

  SonPool pool;
  for (int trial = 0; trial < 1000; ++trial) {
    const int docs = static_cast<int>(rng.uniform_int(0, 6));
    const int apps = static_cast<int>(rng.uniform_int(0, 4));
    auto req = request_for({{"doctor", docs}, {"appliance", apps}},
                           {rng.uniform_double(0, 10), rng.uniform_double(0, 10)});
    auto out = raise_exception(f.tree, f.hosp_a, req, 4);
    if (out.status == EscalationOutcome::Status::resolved) {
      auto& son = pool.form_son(req, out.allocation, trial);
      // Role conservation while allocated.
      REQUIRE(f.tree.node(f.hosp_a).registry.available_of("doctor") +
                  busy_count(f.tree.node(f.hosp_a).registry) ==
              6);
      pool.dissolve_son(f.tree, son.id);
    }
    REQUIRE(f.tree.node(f.hosp_a).registry.availability_snapshot() == initial_a);
    REQUIRE(f.tree.node(f.hosp_b).registry.availability_snapshot() == initial_b);
  }
}

TEST_CASE("tree validation and Appendix-style dump") {
  Fixture f;
  f.tree.validate();
  f.offer(f.hosp_a, 10, "doctor");
  std::ostringstream os;
  f.tree.dump(os);
  const std::string s = os.str();
  CHECK(s.find("emergency_response ... L2") != std::string::npos);
  CHECK(s.find("hospital_a ... L1") != std::string::npos);
  CHECK(s.find("[agent 10 doctor]") != std::string::npos);
}

TEST_CASE("role conservation holds for each role kind under random operations") {
  Fixture f;
  RngStream rng(31, "conservation");
  for (int i = 0; i < 5; ++i) f.offer(f.people, 40 + i, "taxi", {1.0 * i, 2.0});
  std::vector<Allocation> held;
  for (int step = 0; step < 2000; ++step) {
    if (rng.bernoulli(0.5) && !held.empty()) {
      auto a = held.back();
      held.pop_back();
      f.tree.node(a.home).registry.set_availability(a.agent, Availability::available);
    } else {
      auto out = match_notification(f.tree, f.people, request_for({{"taxi", 1}}));
      if (out.enabled) held.push_back(out.allocation[0]);
    }
    const auto& reg = f.tree.node(f.people).registry;
    REQUIRE(reg.available_of("taxi") + static_cast<int>(held.size()) == reg.total_of("taxi"));
  }
}
