#include "protocol.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>
#include <string>

namespace beaconsim::protocol {

void ProtocolParams::validate() const {
  if (miss_threshold < 1) throw std::invalid_argument("miss threshold must be at least 1");
  if (!(rotation_period_s > 0.0)) throw std::invalid_argument("rotation period must be positive");
  if (track_window < 1) throw std::invalid_argument("track window must be at least 1");
  if (!(identify_radius_m > 0.0)) throw std::invalid_argument("identification radius must be positive");
  if (handover_hysteresis < 1) throw std::invalid_argument("handover hysteresis must be at least 1");
}

bool Group::contains(UeId ue) const {
  return std::binary_search(members.begin(), members.end(), ue);
}

// ---------------------------------------------------------------------------
// Context registry

void ContextRegistry::create(GroupContext ctx) {
  if (holders(ctx.group) != 0)
    throw std::logic_error("context for group " + std::to_string(ctx.group) + " already exists");
  by_gnb_[ctx.owner].emplace(ctx.group, std::move(ctx));
}

void ContextRegistry::update(GroupId group, std::vector<UeId> members,
                             resources::BeaconResource resource) {
  for (auto& [gnb, ctxs] : by_gnb_) {
    auto it = ctxs.find(group);
    if (it != ctxs.end()) {
      it->second.members = std::move(members);
      it->second.resource = resource;
      return;
    }
  }
  throw std::out_of_range("no context for group " + std::to_string(group));
}

void ContextRegistry::erase(GroupId group) {
  for (auto& [gnb, ctxs] : by_gnb_) ctxs.erase(group);
}

GroupContext ContextRegistry::transfer(GroupId group, GnbId from, GnbId to) {
  auto src = by_gnb_.find(from);
  if (src == by_gnb_.end() || !src->second.count(group))
    throw std::logic_error("gNB " + std::to_string(from) + " does not own group " +
                           std::to_string(group));
  GroupContext ctx = std::move(src->second.at(group));
  src->second.erase(group);
  ctx.owner = to;
  by_gnb_[to].emplace(group, ctx);
  return ctx;
}

std::optional<GnbId> ContextRegistry::owner(GroupId group) const {
  for (const auto& [gnb, ctxs] : by_gnb_)
    if (ctxs.count(group)) return gnb;
  return std::nullopt;
}

const GroupContext* ContextRegistry::find(GroupId group) const {
  for (const auto& [gnb, ctxs] : by_gnb_) {
    auto it = ctxs.find(group);
    if (it != ctxs.end()) return &it->second;
  }
  return nullptr;
}

std::size_t ContextRegistry::holders(GroupId group) const {
  std::size_t n = 0;
  for (const auto& [gnb, ctxs] : by_gnb_) n += ctxs.count(group);
  return n;
}

std::size_t ContextRegistry::size() const {
  std::size_t n = 0;
  for (const auto& [gnb, ctxs] : by_gnb_) n += ctxs.size();
  return n;
}

// ---------------------------------------------------------------------------
// Event log

std::string_view to_string(EventType type) {
  switch (type) {
    case EventType::group_formed: return "group_formed";
    case EventType::member_added: return "member_added";
    case EventType::member_left: return "member_left";
    case EventType::transmitter_left: return "transmitter_left";
    case EventType::group_dissolved: return "group_dissolved";
    case EventType::transmitter_rotated: return "transmitter_rotated";
    case EventType::context_transferred: return "context_transferred";
  }
  return "unknown";
}

void write_event_header(std::ostream& os) {
  os << "replication,tick,event,group,ues,from_gnb,to_gnb\n";
}

void write_event_row(std::ostream& os, int replication, const Event& e) {
  os << replication << ',' << e.tick << ',' << to_string(e.type) << ',' << e.group << ',';
  for (std::size_t i = 0; i < e.ues.size(); ++i) os << (i ? " " : "") << e.ues[i];
  os << ',';
  if (e.type == EventType::context_transferred) os << e.from << ',' << e.to;
  else os << ',';
  os << '\n';
}

// ---------------------------------------------------------------------------
// Tracking

TrackRecord::TrackRecord(EntityKey entity, std::size_t capacity)
    : entity_(entity), capacity_(capacity) {
  if (capacity < 1) throw std::invalid_argument("track window must hold at least one observation");
}

void TrackRecord::add(Observation obs) {
  if (!window_.empty() && !(obs.time_s > window_.back().time_s))
    throw std::invalid_argument("track timestamps must strictly increase");
  window_.push_back(obs);
  while (window_.size() > capacity_) window_.pop_front();
}

std::optional<Position> estimate_position(std::span<const Detection> detections,
                                          const Torus& torus) {
  if (detections.empty()) return std::nullopt;
  const auto strongest = std::max_element(
      detections.begin(), detections.end(),
      [](const Detection& a, const Detection& b) { return a.power_w < b.power_w; });
  const Position ref = strongest->trp;
  double total = 0.0;
  for (const auto& d : detections) total += d.power_w;
  const bool equal_weights = !(total > 0.0);
  double sx = 0.0, sy = 0.0, sw = 0.0;
  for (const auto& d : detections) {
    const double w = equal_weights ? 1.0 : d.power_w;
    const Position off = torus.delta(ref, d.trp);
    sx += w * off.x;
    sy += w * off.y;
    sw += w;
  }
  return torus.wrap({ref.x + sx / sw, ref.y + sy / sw});
}

namespace {

bool co_moving(const TrackRecord& a, const TrackRecord& b, double radius, std::size_t window,
               const Torus& torus) {
  const auto& oa = a.observations();
  const auto& ob = b.observations();
  if (oa.size() < window || ob.size() < window) return false;
  for (std::size_t i = 0; i < window; ++i) {
    const auto& x = oa[oa.size() - 1 - i];
    const auto& y = ob[ob.size() - 1 - i];
    if (x.time_s != y.time_s) return false;
    if (torus.distance(x.position, y.position) > radius) return false;
  }
  return true;
}

}  // namespace

std::vector<std::vector<EntityKey>> identify_group(std::span<const TrackRecord> records,
                                                   double radius_m, std::size_t window,
                                                   const Torus& torus) {
  std::vector<const TrackRecord*> eligible;
  for (const auto& r : records)
    if (r.size() >= window) eligible.push_back(&r);
  std::sort(eligible.begin(), eligible.end(),
            [](const TrackRecord* a, const TrackRecord* b) { return a->entity() < b->entity(); });

  std::vector<std::vector<EntityKey>> out;
  std::vector<bool> used(eligible.size(), false);
  for (std::size_t i = 0; i < eligible.size(); ++i) {
    if (used[i]) continue;
    std::vector<std::size_t> set{i};
    for (std::size_t j = i + 1; j < eligible.size(); ++j) {
      if (used[j]) continue;
      const bool fits = std::all_of(set.begin(), set.end(), [&](std::size_t k) {
        return co_moving(*eligible[k], *eligible[j], radius_m, window, torus);
      });
      if (fits) set.push_back(j);
    }
    if (set.size() < 2) continue;
    std::vector<EntityKey> keys;
    for (std::size_t k : set) {
      used[k] = true;
      keys.push_back(eligible[k]->entity());
    }
    out.push_back(std::move(keys));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Group manager

GroupManager::GroupManager(std::size_t n_ues, ProtocolParams params)
    : params_(params), modes_(n_ues, UeMode::individual), membership_(n_ues) {
  params_.validate();
}

std::optional<GroupId> GroupManager::group_of(UeId ue) const { return membership_.at(ue); }

const Group& GroupManager::group(GroupId id) const {
  auto it = groups_.find(id);
  if (it == groups_.end()) throw std::out_of_range("unknown group " + std::to_string(id));
  return it->second;
}

Group& GroupManager::mutable_group(GroupId id) {
  auto it = groups_.find(id);
  if (it == groups_.end()) throw std::out_of_range("unknown group " + std::to_string(id));
  return it->second;
}

std::vector<GroupId> GroupManager::active_groups() const {
  std::vector<GroupId> out;
  for (const auto& [id, g] : groups_)
    if (g.state == GroupState::active) out.push_back(id);
  return out;
}

std::size_t GroupManager::individual_count() const {
  return static_cast<std::size_t>(std::count(modes_.begin(), modes_.end(), UeMode::individual));
}

std::size_t GroupManager::active_group_count() const {
  return static_cast<std::size_t>(std::count_if(groups_.begin(), groups_.end(), [](const auto& kv) {
    return kv.second.state == GroupState::active;
  }));
}

void GroupManager::assign_individuals(resources::Allocator& alloc,
                                      std::span<const Position> positions) {
  for (UeId ue = 0; ue < modes_.size(); ++ue)
    if (modes_[ue] == UeMode::individual && !alloc.find(EntityKey::ue(ue)))
      alloc.reassign(EntityKey::ue(ue), positions[ue]);
}

resources::BeaconResource GroupManager::group_resource(const Group& g,
                                                       const resources::Allocator& alloc) const {
  const auto* a = alloc.find(EntityKey::group(g.id));
  if (!a) throw std::logic_error("group " + std::to_string(g.id) + " has no assignment");
  return a->resource;
}

void GroupManager::sync_context(const Group& g, const resources::Allocator& alloc) {
  contexts_.update(g.id, g.members, group_resource(g, alloc));
}

GroupId GroupManager::form_group(std::span<const UeId> candidates, resources::Allocator& alloc,
                                 std::span<const Position> positions, GnbId owner, Tick tick) {
  std::vector<UeId> members(candidates.begin(), candidates.end());
  std::sort(members.begin(), members.end());
  if (members.size() < 2) throw std::invalid_argument("a group needs at least two members");
  if (std::adjacent_find(members.begin(), members.end()) != members.end())
    throw std::invalid_argument("duplicate UE in group candidate");
  for (UeId ue : members) {
    if (ue >= modes_.size()) throw std::out_of_range("unknown UE " + std::to_string(ue));
    if (membership_[ue])
      throw std::logic_error("UE " + std::to_string(ue) + " already belongs to group " +
                             std::to_string(*membership_[ue]));
  }

  Group g;
  g.id = next_id_++;
  g.members = members;
  g.transmitter = members.front();
  for (UeId ue : members) {
    alloc.release(EntityKey::ue(ue));
    g.consecutive_misses[ue] = 0;
    membership_[ue] = g.id;
    modes_[ue] = ue == g.transmitter ? UeMode::group_transmitter : UeMode::group_member;
  }
  g.resource = alloc.reassign(EntityKey::group(g.id), positions[g.transmitter]).resource;
  g.state = GroupState::active;
  contexts_.create({g.id, g.members, g.resource, owner});
  reconfigurations_ += static_cast<std::int64_t>(members.size());
  emit({tick, EventType::group_formed, g.id, members});
  const GroupId id = g.id;
  groups_.emplace(id, std::move(g));
  return id;
}

void GroupManager::add_member(GroupId id, UeId ue, resources::Allocator& alloc, Tick tick) {
  Group& g = mutable_group(id);
  if (g.state != GroupState::active) throw std::logic_error("can only add to an active group");
  if (membership_.at(ue)) throw std::logic_error("UE " + std::to_string(ue) + " already grouped");
  alloc.release(EntityKey::ue(ue));
  g.members.insert(std::upper_bound(g.members.begin(), g.members.end(), ue), ue);
  g.consecutive_misses[ue] = 0;
  membership_[ue] = id;
  modes_[ue] = UeMode::group_member;
  sync_context(g, alloc);
  ++reconfigurations_;
  emit({tick, EventType::member_added, id, {ue}});
}

std::vector<Event> GroupManager::monitor_membership(GroupId id,
                                                    std::span<const ReceptionOutcome> outcomes,
                                                    Tick tick) {
  Group& g = mutable_group(id);
  if (g.state != GroupState::active) throw std::logic_error("monitoring needs an active group");
  std::set<UeId> seen;
  for (const auto& o : outcomes) {
    if (!g.contains(o.member) || o.member == g.transmitter)
      throw std::invalid_argument("reception outcome for UE " + std::to_string(o.member) +
                                  " which is not a receiving member");
    seen.insert(o.member);
  }
  if (seen.size() + 1 != g.members.size())
    throw std::invalid_argument("reception outcomes must cover every receiving member");

  std::vector<Event> leaves;
  for (const auto& o : outcomes) {
    int& misses = g.consecutive_misses[o.member];
    misses = o.received ? 0 : misses + 1;
    if (misses >= params_.miss_threshold)
      leaves.push_back({tick, EventType::member_left, id, {o.member}});
  }
  return leaves;
}

void GroupManager::dissolve(Group& g, resources::Allocator& alloc,
                            std::span<const Position> positions, Tick tick) {
  g.state = GroupState::dissolving;
  alloc.release(EntityKey::group(g.id));
  for (UeId ue : g.members) {
    membership_[ue].reset();
    modes_[ue] = UeMode::individual;
    alloc.reassign(EntityKey::ue(ue), positions[ue]);
  }
  contexts_.erase(g.id);
  reconfigurations_ += static_cast<std::int64_t>(g.members.size());
  emit({tick, EventType::group_dissolved, g.id, g.members});
  g.consecutive_misses.clear();
  g.state = GroupState::dissolved;
}

void GroupManager::handle_member_leave(GroupId id, UeId ue, resources::Allocator& alloc,
                                       std::span<const Position> positions, Tick tick) {
  Group& g = mutable_group(id);
  if (g.state != GroupState::active || !g.contains(ue))
    throw std::invalid_argument("UE " + std::to_string(ue) + " is not a member of group " +
                                std::to_string(id));
  if (ue == g.transmitter) {
    handle_transmitter_leave(id, alloc, positions, tick);
    return;
  }
  g.members.erase(std::find(g.members.begin(), g.members.end(), ue));
  g.consecutive_misses.erase(ue);
  membership_[ue].reset();
  modes_[ue] = UeMode::individual;
  alloc.reassign(EntityKey::ue(ue), positions[ue]);
  ++reconfigurations_;
  emit({tick, EventType::member_left, id, {ue}});
  if (g.members.size() < 2) dissolve(g, alloc, positions, tick);
  else sync_context(g, alloc);
}

void GroupManager::handle_transmitter_leave(GroupId id, resources::Allocator& alloc,
                                            std::span<const Position> positions, Tick tick) {
  Group& g = mutable_group(id);
  if (g.state != GroupState::active) return;
  emit({tick, EventType::transmitter_left, id, {g.transmitter}});
  dissolve(g, alloc, positions, tick);
}

void GroupManager::rotate_transmitter(GroupId id, Tick tick) {
  Group& g = mutable_group(id);
  if (g.state != GroupState::active) throw std::logic_error("rotation needs an active group");
  const UeId old = g.transmitter;
  auto it = std::upper_bound(g.members.begin(), g.members.end(), old);
  const UeId next = it == g.members.end() ? g.members.front() : *it;
  if (next == old) return;
  modes_[old] = UeMode::group_member;
  modes_[next] = UeMode::group_transmitter;
  g.transmitter = next;
  g.consecutive_misses[old] = 0;
  g.consecutive_misses[next] = 0;
  reconfigurations_ += 2;
  emit({tick, EventType::transmitter_rotated, id, {old, next}});
}

GroupContext GroupManager::handover_context(GroupId id, GnbId from, GnbId to, Tick tick) {
  if (group(id).state != GroupState::active) throw std::logic_error("handover needs an active group");
  GroupContext ctx = contexts_.transfer(id, from, to);
  Event e{tick, EventType::context_transferred, id, ctx.members};
  e.from = from;
  e.to = to;
  emit(std::move(e));
  return ctx;
}

void GroupManager::refresh_resources(const resources::Allocator& alloc) {
  for (auto& [id, g] : groups_) {
    if (g.state != GroupState::active) continue;
    g.resource = group_resource(g, alloc);
    sync_context(g, alloc);
  }
}

void GroupManager::check_invariants(const resources::Allocator& alloc) const {
  auto fail = [](const std::string& what) { throw std::logic_error("invariant violated: " + what); };
  std::size_t individuals = 0;
  for (UeId ue = 0; ue < modes_.size(); ++ue) {
    const bool has_assignment = alloc.find(EntityKey::ue(ue)) != nullptr;
    if (!membership_[ue]) {
      if (modes_[ue] != UeMode::individual) fail("ungrouped UE " + std::to_string(ue) + " not individual");
      if (!has_assignment) fail("individual UE " + std::to_string(ue) + " has no assignment");
      ++individuals;
      continue;
    }
    const Group& g = group(*membership_[ue]);
    if (g.state != GroupState::active || !g.contains(ue))
      fail("UE " + std::to_string(ue) + " points at a group that does not list it");
    const UeMode expected = ue == g.transmitter ? UeMode::group_transmitter : UeMode::group_member;
    if (modes_[ue] != expected) fail("UE " + std::to_string(ue) + " mode disagrees with group");
    if (has_assignment) fail("grouped UE " + std::to_string(ue) + " holds an individual assignment");
  }
  std::size_t active = 0;
  for (const auto& [id, g] : groups_) {
    const bool has_assignment = alloc.find(EntityKey::group(id)) != nullptr;
    if (g.state != GroupState::active) {
      if (has_assignment) fail("inactive group " + std::to_string(id) + " holds an assignment");
      if (contexts_.holders(id) != 0) fail("inactive group " + std::to_string(id) + " has a context");
      continue;
    }
    ++active;
    if (g.members.size() < 2) fail("active group " + std::to_string(id) + " has fewer than two members");
    if (!g.contains(g.transmitter)) fail("transmitter of group " + std::to_string(id) + " not a member");
    const auto transmitters = std::count_if(g.members.begin(), g.members.end(), [&](UeId ue) {
      return modes_[ue] == UeMode::group_transmitter;
    });
    if (transmitters != 1) fail("group " + std::to_string(id) + " does not have exactly one transmitter");
    if (!has_assignment) fail("active group " + std::to_string(id) + " has no assignment");
    if (contexts_.holders(id) != 1) fail("group " + std::to_string(id) + " context not held by exactly one gNB");
  }
  if (alloc.live() != individuals + active)
    fail("live assignments " + std::to_string(alloc.live()) + " != individuals + groups " +
         std::to_string(individuals + active));
}

}  // namespace beaconsim::protocol
