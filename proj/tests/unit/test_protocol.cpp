#include <doctest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "protocol.hpp"
#include "rng.hpp"

using namespace beaconsim;
using namespace beaconsim::protocol;
using resources::Allocator;

namespace {

struct Fixture {
  explicit Fixture(std::size_t n, ProtocolParams p = {})
      : alloc(resources::dimension({}), 20.0, Torus(144, 144)), mgr(n, p), positions(n) {
    for (std::size_t i = 0; i < n; ++i) positions[i] = {double(i % 12) * 12.0, double(i / 12) * 12.0};
    mgr.assign_individuals(alloc, positions);
  }
  Allocator alloc;
  GroupManager mgr;
  std::vector<Position> positions;
};

std::vector<ReceptionOutcome> outcomes(const Group& g, bool received) {
  std::vector<ReceptionOutcome> out;
  for (UeId m : g.members)
    if (m != g.transmitter) out.push_back({m, received});
  return out;
}

TrackRecord track(EntityKey key, Position start, Position velocity, int n, double t0 = 0.0) {
  TrackRecord r(key, 20);
  for (int i = 0; i < n; ++i)
    r.add({t0 + i * 0.2, {start.x + velocity.x * i, start.y + velocity.y * i}});
  return r;
}

}  // namespace

TEST_CASE("group formation with three UEs") {
  Fixture f(12);
  f.mgr.check_invariants(f.alloc);
  const std::vector<UeId> c{3, 1, 2};
  const auto before = f.alloc.live();
  const GroupId id = f.mgr.form_group(c, f.alloc, f.positions, 7, 0);
  CHECK(before - f.alloc.live() == 2);
  const auto& g = f.mgr.group(id);
  CHECK(g.transmitter == 1);
  CHECK(g.members == std::vector<UeId>{1, 2, 3});
  CHECK(f.mgr.mode(1) == UeMode::group_transmitter);
  CHECK(f.mgr.mode(2) == UeMode::group_member);
  CHECK(f.mgr.mode(0) == UeMode::individual);
  CHECK(f.alloc.find(EntityKey::ue(2)) == nullptr);
  CHECK(f.alloc.find(EntityKey::group(id))->resource == g.resource);
  CHECK(f.mgr.contexts().owner(id) == 7u);
  CHECK(f.mgr.contexts().find(id)->resource == g.resource);
  CHECK(f.mgr.reconfigurations() == 3);
  REQUIRE(f.mgr.events().size() == 1);
  CHECK(f.mgr.events()[0].type == EventType::group_formed);
  f.mgr.check_invariants(f.alloc);

  const std::vector<UeId> single{5};
  CHECK_THROWS_AS(f.mgr.form_group(single, f.alloc, f.positions, 0, 0), std::invalid_argument);
  const std::vector<UeId> overlap{3, 4};
  CHECK_THROWS_AS(f.mgr.form_group(overlap, f.alloc, f.positions, 0, 0), std::logic_error);
  const std::vector<UeId> dup{4, 4};
  CHECK_THROWS_AS(f.mgr.form_group(dup, f.alloc, f.positions, 0, 0), std::invalid_argument);
  f.mgr.check_invariants(f.alloc);
}

TEST_CASE("500 groups from 1500 individuals") {
  Allocator alloc(resources::dimension({}), 20.0, Torus(144, 144));
  GroupManager mgr(1500, {});
  RandomStream rng(1);
  std::vector<Position> pos(1500);
  for (auto& p : pos) p = {rng.uniform(0, 144), rng.uniform(0, 144)};
  mgr.assign_individuals(alloc, pos);
  CHECK(alloc.live() == 1500);
  for (UeId g = 0; g < 500; ++g) {
    const std::vector<UeId> c{3 * g, 3 * g + 1, 3 * g + 2};
    mgr.form_group(c, alloc, pos, 0, 0);
  }
  CHECK(alloc.live() == 500);
  CHECK(mgr.active_group_count() == 500);
  CHECK(mgr.individual_count() == 0);
  mgr.check_invariants(alloc);
}

TEST_CASE("membership monitoring counts consecutive misses") {
  Fixture f(6);
  const std::vector<UeId> c{0, 1, 2};
  const GroupId id = f.mgr.form_group(c, f.alloc, f.positions, 0, 0);
  const auto& g = f.mgr.group(id);
  for (int i = 0; i < 100; ++i) CHECK(f.mgr.monitor_membership(id, outcomes(g, true), i).empty());

  std::vector<ReceptionOutcome> miss2{{1, true}, {2, false}};
  CHECK(f.mgr.monitor_membership(id, miss2, 1).empty());
  CHECK(f.mgr.monitor_membership(id, miss2, 2).empty());
  // a reception resets the counter
  CHECK(f.mgr.monitor_membership(id, outcomes(g, true), 3).empty());
  CHECK(f.mgr.monitor_membership(id, miss2, 4).empty());
  CHECK(f.mgr.monitor_membership(id, miss2, 5).empty());
  const auto ev = f.mgr.monitor_membership(id, miss2, 6);
  REQUIRE(ev.size() == 1);
  CHECK(ev[0].type == EventType::member_left);
  CHECK(ev[0].ues == std::vector<UeId>{2});
  CHECK(ev[0].tick == 6);
  // leaves are reported, not applied
  CHECK(f.mgr.group(id).contains(2));

  std::vector<ReceptionOutcome> partial{{1, true}};
  CHECK_THROWS_AS(f.mgr.monitor_membership(id, partial, 7), std::invalid_argument);
  std::vector<ReceptionOutcome> with_tx{{0, true}, {1, true}, {2, true}};
  CHECK_THROWS_AS(f.mgr.monitor_membership(id, with_tx, 7), std::invalid_argument);
  std::vector<ReceptionOutcome> stranger{{1, true}, {4, true}};
  CHECK_THROWS_AS(f.mgr.monitor_membership(id, stranger, 7), std::invalid_argument);
}

TEST_CASE("member leave and dissolution") {
  Fixture f(6);
  const std::vector<UeId> c{0, 1, 2};
  const GroupId id = f.mgr.form_group(c, f.alloc, f.positions, 0, 0);
  const auto live = f.alloc.live();

  f.mgr.handle_member_leave(id, 2, f.alloc, f.positions, 1);
  CHECK(f.alloc.live() == live + 1);
  CHECK(f.mgr.group(id).state == GroupState::active);
  CHECK(f.mgr.group(id).members == std::vector<UeId>{0, 1});
  CHECK(f.mgr.mode(2) == UeMode::individual);
  CHECK(f.alloc.find(EntityKey::ue(2)));
  CHECK(f.mgr.contexts().find(id)->members == std::vector<UeId>{0, 1});
  f.mgr.check_invariants(f.alloc);

  CHECK_THROWS_AS(f.mgr.handle_member_leave(id, 4, f.alloc, f.positions, 1), std::invalid_argument);

  f.mgr.handle_member_leave(id, 1, f.alloc, f.positions, 2);
  CHECK(f.mgr.group(id).state == GroupState::dissolved);
  CHECK(f.alloc.live() == 6);
  CHECK(f.mgr.individual_count() == 6);
  CHECK(f.mgr.contexts().holders(id) == 0);
  CHECK(f.mgr.events().back().type == EventType::group_dissolved);
  f.mgr.check_invariants(f.alloc);
}

TEST_CASE("transmitter leave dissolves the group once") {
  Fixture f(6);
  const std::vector<UeId> c{3, 4, 5};
  const GroupId id = f.mgr.form_group(c, f.alloc, f.positions, 0, 0);
  f.mgr.handle_member_leave(id, 3, f.alloc, f.positions, 1);
  CHECK(f.mgr.group(id).state == GroupState::dissolved);
  CHECK(f.mgr.individual_count() == 6);
  const auto n = f.mgr.events().size();
  CHECK(f.mgr.events()[n - 2].type == EventType::transmitter_left);
  f.mgr.handle_transmitter_leave(id, f.alloc, f.positions, 2);
  CHECK(f.mgr.events().size() == n);
  f.mgr.check_invariants(f.alloc);
  CHECK_THROWS_AS(f.mgr.rotate_transmitter(id, 3), std::logic_error);
}

TEST_CASE("transmitter rotation is round-robin and fair") {
  Fixture f(6);
  const std::vector<UeId> c{1, 3, 5};
  const GroupId id = f.mgr.form_group(c, f.alloc, f.positions, 0, 0);
  const auto resource = f.mgr.group(id).resource;
  std::map<UeId, int> turns;
  for (int r = 0; r < 30; ++r) {
    ++turns[f.mgr.group(id).transmitter];
    f.mgr.rotate_transmitter(id, r);
    f.mgr.check_invariants(f.alloc);
    CHECK(f.mgr.group(id).resource == resource);
  }
  CHECK(turns == std::map<UeId, int>{{1, 10}, {3, 10}, {5, 10}});
  CHECK(f.mgr.group(id).transmitter == 1);
  f.mgr.rotate_transmitter(id, 31);
  CHECK(f.mgr.group(id).transmitter == 3);
  CHECK(f.mgr.mode(1) == UeMode::group_member);
  CHECK(f.mgr.mode(3) == UeMode::group_transmitter);
}

TEST_CASE("context handover is invisible to UEs") {
  Fixture f(6);
  const std::vector<UeId> c{0, 1};
  const GroupId id = f.mgr.form_group(c, f.alloc, f.positions, 2, 0);
  const auto reconf = f.mgr.reconfigurations();
  const auto assignment = *f.alloc.find(EntityKey::group(id));
  const auto ctx = f.mgr.handover_context(id, 2, 3, 5);
  CHECK(ctx.owner == 3);
  CHECK(f.mgr.contexts().owner(id) == 3u);
  CHECK(f.mgr.contexts().holders(id) == 1);
  CHECK(f.mgr.reconfigurations() == reconf);
  CHECK(f.alloc.find(EntityKey::group(id))->resource == assignment.resource);
  CHECK(f.mgr.events().back().type == EventType::context_transferred);
  CHECK_THROWS_AS(f.mgr.handover_context(id, 2, 1, 6), std::logic_error);
  f.mgr.check_invariants(f.alloc);
}

TEST_CASE("context registry") {
  ContextRegistry reg;
  reg.create({4, {1, 2}, {}, 0});
  CHECK_THROWS(reg.create({4, {1, 2}, {}, 1}));
  CHECK(reg.transfer(4, 0, 1).owner == 1);
  CHECK(reg.holders(4) == 1);
  CHECK(reg.size() == 1);
  reg.erase(4);
  CHECK_FALSE(reg.owner(4));
  CHECK_THROWS(reg.update(4, {}, {}));
}

TEST_CASE("event CSV") {
  std::ostringstream os;
  write_event_header(os);
  write_event_row(os, 2, {10, EventType::group_formed, 3, {1, 2, 3}});
  Event e{11, EventType::context_transferred, 3, {1, 2, 3}};
  e.from = 0;
  e.to = 1;
  write_event_row(os, 2, e);
  CHECK(os.str() ==
        "replication,tick,event,group,ues,from_gnb,to_gnb\n"
        "2,10,group_formed,3,1 2 3,,\n"
        "2,11,context_transferred,3,1 2 3,0,1\n");
}

TEST_CASE("track records") {
  TrackRecord r(EntityKey::ue(1), 3);
  r.add({0.0, {0, 0}});
  CHECK_THROWS_AS(r.add({0.0, {1, 1}}), std::invalid_argument);
  r.add({0.2, {1, 0}});
  r.add({0.4, {2, 0}});
  r.add({0.6, {3, 0}});
  CHECK(r.size() == 3);
  CHECK(r.observations().front().time_s == 0.2);
  CHECK_THROWS(TrackRecord(EntityKey::ue(1), 0));
}

TEST_CASE("position estimate") {
  const Torus t(100, 100);
  CHECK_FALSE(estimate_position({}, t));
  const std::vector<Detection> one{{{10, 10}, 1e-9}};
  CHECK(*estimate_position(one, t) == Position{10, 10});
  const std::vector<Detection> two{{{0, 0}, 1e-9}, {{10, 0}, 1e-9}};
  CHECK(estimate_position(two, t)->x == doctest::Approx(5.0));
  const std::vector<Detection> weighted{{{0, 0}, 3e-9}, {{10, 0}, 1e-9}};
  CHECK(estimate_position(weighted, t)->x == doctest::Approx(2.5));
  const std::vector<Detection> wrap{{{95, 50}, 1.0}, {{5, 50}, 1.0}};
  const auto w = *estimate_position(wrap, t);
  CHECK((w.x < 1e-9 || w.x > 100 - 1e-9));
}

TEST_CASE("group identification") {
  const Torus t(500, 500);
  SUBCASE("rigid triplet") {
    std::vector<TrackRecord> recs{track(EntityKey::ue(0), {10, 10}, {1, 0}, 10),
                                  track(EntityKey::ue(1), {11, 11}, {1, 0}, 10),
                                  track(EntityKey::ue(2), {12, 10}, {1, 0}, 10)};
    const auto sets = identify_group(recs, 5.0, 10, t);
    REQUIRE(sets.size() == 1);
    CHECK(sets[0].size() == 3);
  }
  SUBCASE("crossing paths") {
    std::vector<TrackRecord> recs{track(EntityKey::ue(0), {0, 50}, {5, 0}, 10),
                                  track(EntityKey::ue(1), {50, 0}, {0, 5}, 10)};
    CHECK(identify_group(recs, 5.0, 10, t).empty());
  }
  SUBCASE("too short") {
    std::vector<TrackRecord> recs{track(EntityKey::ue(0), {0, 0}, {1, 0}, 4),
                                  track(EntityKey::ue(1), {1, 0}, {1, 0}, 4)};
    CHECK(identify_group(recs, 5.0, 5, t).empty());
  }
  SUBCASE("misaligned timestamps") {
    std::vector<TrackRecord> recs{track(EntityKey::ue(0), {0, 0}, {1, 0}, 6),
                                  track(EntityKey::ue(1), {1, 0}, {1, 0}, 6, 0.1)};
    CHECK(identify_group(recs, 5.0, 5, t).empty());
  }
}

TEST_CASE("group identification against brute force") {
  const Torus t(200, 200);
  RandomStream rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + trial % 9;
    std::vector<TrackRecord> recs;
    for (int i = 0; i < n; ++i) {
      const Position start{rng.uniform(0, 30), rng.uniform(0, 30)};
      const Position v{rng.uniform(-1, 1), rng.uniform(-1, 1)};
      recs.push_back(track(i % 2 ? EntityKey::group(std::uint32_t(n - i)) : EntityKey::ue(std::uint32_t(i)),
                           start, v, 5));
    }
    std::shuffle(recs.begin(), recs.end(), std::mt19937(trial));
    const double radius = 12.0;
    auto close = [&](EntityKey a, EntityKey b) {
      const TrackRecord *ra = nullptr, *rb = nullptr;
      for (const auto& r : recs) {
        if (r.entity() == a) ra = &r;
        if (r.entity() == b) rb = &r;
      }
      for (std::size_t k = 0; k < 5; ++k)
        if (t.distance(ra->observations()[k].position, rb->observations()[k].position) > radius) return false;
      return true;
    };
    const auto sets = identify_group(recs, radius, 5, t);
    std::set<EntityKey> used;
    for (const auto& s : sets) {
      REQUIRE(s.size() >= 2);
      REQUIRE(std::is_sorted(s.begin(), s.end()));
      for (std::size_t a = 0; a < s.size(); ++a) {
        REQUIRE(used.insert(s[a]).second);
        for (std::size_t b = a + 1; b < s.size(); ++b) REQUIRE(close(s[a], s[b]));
      }
    }
    // maximality: no leftover entity fits an emitted set, and no two leftovers pair up
    std::vector<EntityKey> left;
    for (const auto& r : recs)
      if (!used.count(r.entity())) left.push_back(r.entity());
    for (EntityKey k : left)
      for (const auto& s : sets)
        REQUIRE_FALSE(std::all_of(s.begin(), s.end(), [&](EntityKey m) { return close(k, m); }));
    for (std::size_t a = 0; a < left.size(); ++a)
      for (std::size_t b = a + 1; b < left.size(); ++b) REQUIRE_FALSE(close(left[a], left[b]));
  }
}

TEST_CASE("two triplets far apart") {
  const Torus t(500, 500);
  std::vector<TrackRecord> recs;
  for (std::uint32_t i = 0; i < 6; ++i) {
    const double base = i < 3 ? 0.0 : 100.0;
    recs.push_back(track(EntityKey::ue(i), {base + i, base}, {0.5, 0.5}, 10));
  }
  const auto sets = identify_group(recs, 5.0, 10, t);
  REQUIRE(sets.size() == 2);
  CHECK(sets[0] == std::vector<EntityKey>{EntityKey::ue(0), EntityKey::ue(1), EntityKey::ue(2)});
  CHECK(sets[1] == std::vector<EntityKey>{EntityKey::ue(3), EntityKey::ue(4), EntityKey::ue(5)});
}

TEST_CASE("random lifecycle keeps invariants") {
  Fixture f(60);
  RandomStream rng(12);
  for (int step = 0; step < 5000; ++step) {
    const double u = rng.uniform();
    const auto active = f.mgr.active_groups();
    if (u < 0.3 || active.empty()) {
      std::vector<UeId> free;
      for (UeId ue = 0; ue < 60; ++ue)
        if (!f.mgr.group_of(ue)) free.push_back(ue);
      if (free.size() < 2) continue;
      std::shuffle(free.begin(), free.end(), std::mt19937(step));
      free.resize(std::min<std::size_t>(free.size(), 2 + step % 3));
      f.mgr.form_group(free, f.alloc, f.positions, step % 4, step);
    } else {
      const GroupId id = active[static_cast<std::size_t>(rng.uniform() * active.size())];
      const auto& g = f.mgr.group(id);
      if (u < 0.5) {
        f.mgr.handle_member_leave(id, g.members[static_cast<std::size_t>(rng.uniform() * g.members.size())],
                                  f.alloc, f.positions, step);
      } else if (u < 0.6) {
        f.mgr.handle_transmitter_leave(id, f.alloc, f.positions, step);
      } else if (u < 0.75) {
        f.mgr.rotate_transmitter(id, step);
      } else if (u < 0.85) {
        const GnbId owner = *f.mgr.contexts().owner(id);
        f.mgr.handover_context(id, owner, (owner + 1) % 4, step);
      } else {
        for (UeId ue = 0; ue < 60; ++ue)
          if (!f.mgr.group_of(ue)) {
            f.mgr.add_member(id, ue, f.alloc, step);
            break;
          }
      }
    }
    f.mgr.check_invariants(f.alloc);
  }
}
