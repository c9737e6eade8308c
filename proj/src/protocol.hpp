#ifndef BEACONSIM_PROTOCOL_HPP
#define BEACONSIM_PROTOCOL_HPP

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string_view>
#include <vector>

#include "geometry.hpp"
#include "resources.hpp"

namespace beaconsim::protocol {

using UeId = std::uint32_t;
using GroupId = std::uint32_t;
using GnbId = std::uint32_t;
using Tick = std::int64_t;
using resources::EntityKey;

enum class UeMode { individual, group_member, group_transmitter };
enum class GroupState { forming, active, dissolving, dissolved };

struct ProtocolParams {
  int miss_threshold = 3;             // consecutive misses before leave signalling
  double rotation_period_s = 10.0;
  std::size_t track_window = 5;       // observations used for identification
  double identify_radius_m = 15.0;
  int handover_hysteresis = 2;        // occasions a new gNB must win in a row
  bool regroup = true;

  void validate() const;
};

struct Group {
  GroupId id = 0;
  std::vector<UeId> members;  // ascending
  UeId transmitter = 0;
  GroupState state = GroupState::forming;
  std::map<UeId, int> consecutive_misses;
  resources::BeaconResource resource;

  bool contains(UeId ue) const;
};

/// What the serving gNB keeps for a group. The resource configuration
/// travels with the context on handover.
struct GroupContext {
  GroupId group = 0;
  std::vector<UeId> members;
  resources::BeaconResource resource;
  GnbId owner = 0;
};

class ContextRegistry {
 public:
  void create(GroupContext ctx);
  void update(GroupId group, std::vector<UeId> members, resources::BeaconResource resource);
  void erase(GroupId group);
  /// Throws std::logic_error when `from` does not own the context.
  GroupContext transfer(GroupId group, GnbId from, GnbId to);

  std::optional<GnbId> owner(GroupId group) const;
  const GroupContext* find(GroupId group) const;
  /// Number of gNBs holding a context for `group`.
  std::size_t holders(GroupId group) const;
  std::size_t size() const;

 private:
  std::map<GnbId, std::map<GroupId, GroupContext>> by_gnb_;
};

enum class EventType {
  group_formed,
  member_added,
  member_left,
  transmitter_left,
  group_dissolved,
  transmitter_rotated,
  context_transferred,
};

std::string_view to_string(EventType type);

struct Event {
  Tick tick = 0;
  EventType type = EventType::group_formed;
  GroupId group = 0;
  std::vector<UeId> ues;
  GnbId from = 0;
  GnbId to = 0;
};

/// CSV columns: replication,tick,event,group,ues,from_gnb,to_gnb. The ues
/// field is a space-separated id list; gNB fields are empty unless the
/// event is a context transfer.
void write_event_header(std::ostream& os);
void write_event_row(std::ostream& os, int replication, const Event& e);

struct Observation {
  double time_s = 0.0;
  Position position;
};

/// Sliding window of position estimates for one tracked entity.
class TrackRecord {
 public:
  TrackRecord(EntityKey entity, std::size_t capacity);

  /// Throws std::invalid_argument unless time strictly increases.
  void add(Observation obs);
  void clear() { window_.clear(); }

  EntityKey entity() const { return entity_; }
  const std::deque<Observation>& observations() const { return window_; }
  std::size_t size() const { return window_.size(); }

 private:
  EntityKey entity_;
  std::size_t capacity_;
  std::deque<Observation> window_;
};

struct Detection {
  Position trp;
  double power_w = 0.0;
};

/// Power-weighted centroid of the detecting TRPs on the torus; nullopt when
/// nothing detected the beacon this occasion.
std::optional<Position> estimate_position(std::span<const Detection> detections, const Torus& torus);

/// Maximal sets of entities whose estimated positions stayed pairwise
/// within `radius_m` over their last `window` observations (same
/// timestamps). Sets are built greedily from the lowest entity key.
std::vector<std::vector<EntityKey>> identify_group(std::span<const TrackRecord> records,
                                                   double radius_m, std::size_t window,
                                                   const Torus& torus);

struct ReceptionOutcome {
  UeId member = 0;
  bool received = false;
};

/// Group lifecycle: formation, membership monitoring, leave handling,
/// transmitter rotation and context transfer between gNBs.
///
/// Positions are indexed by UE id. Every mutating call keeps the
/// allocator in step so that live assignments always equal the number of
/// individual UEs plus the number of active groups.
class GroupManager {
 public:
  GroupManager(std::size_t n_ues, ProtocolParams params);

  UeMode mode(UeId ue) const { return modes_.at(ue); }
  std::optional<GroupId> group_of(UeId ue) const;
  const Group& group(GroupId id) const;
  const std::map<GroupId, Group>& groups() const { return groups_; }
  std::vector<GroupId> active_groups() const;
  std::size_t individual_count() const;
  std::size_t active_group_count() const;

  /// Gives every UE an individual assignment.
  void assign_individuals(resources::Allocator& alloc, std::span<const Position> positions);

  GroupId form_group(std::span<const UeId> candidates, resources::Allocator& alloc,
                     std::span<const Position> positions, GnbId owner, Tick tick);

  void add_member(GroupId id, UeId ue, resources::Allocator& alloc, Tick tick);

  /// Updates miss counters; returns one member_left event per member whose
  /// counter reached the threshold. The leaves are not applied.
  std::vector<Event> monitor_membership(GroupId id, std::span<const ReceptionOutcome> outcomes,
                                        Tick tick);

  void handle_member_leave(GroupId id, UeId ue, resources::Allocator& alloc,
                           std::span<const Position> positions, Tick tick);

  /// Dissolves the group into individual UEs. Calling it again is a no-op.
  void handle_transmitter_leave(GroupId id, resources::Allocator& alloc,
                                std::span<const Position> positions, Tick tick);

  /// Round-robin by member id; the group resource is kept.
  void rotate_transmitter(GroupId id, Tick tick);

  GroupContext handover_context(GroupId id, GnbId from, GnbId to, Tick tick);

  /// Pulls group resources back from the allocator after a reallocation.
  void refresh_resources(const resources::Allocator& alloc);

  const ContextRegistry& contexts() const { return contexts_; }
  const std::vector<Event>& events() const { return events_; }
  std::size_t events_since(std::size_t mark) const { return events_.size() - mark; }

  /// UE-visible configuration changes so far.
  std::int64_t reconfigurations() const { return reconfigurations_; }

  /// Throws std::logic_error describing the first violated invariant.
  void check_invariants(const resources::Allocator& alloc) const;

  const ProtocolParams& params() const { return params_; }

 private:
  Group& mutable_group(GroupId id);
  void dissolve(Group& g, resources::Allocator& alloc, std::span<const Position> positions,
                Tick tick);
  void sync_context(const Group& g, const resources::Allocator& alloc);
  resources::BeaconResource group_resource(const Group& g, const resources::Allocator& alloc) const;
  void emit(Event e) { events_.push_back(std::move(e)); }

  ProtocolParams params_;
  std::vector<UeMode> modes_;
  std::vector<std::optional<GroupId>> membership_;
  std::map<GroupId, Group> groups_;
  ContextRegistry contexts_;
  std::vector<Event> events_;
  GroupId next_id_ = 0;
  std::int64_t reconfigurations_ = 0;
};

}  // namespace beaconsim::protocol

#endif
