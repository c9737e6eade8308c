#ifndef BEACONSIM_RESOURCES_HPP
#define BEACONSIM_RESOURCES_HPP

#include <compare>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "geometry.hpp"
#include "radio.hpp"

namespace beaconsim::resources {

/// Beacon resource dimensioning inputs. Durations are integer nanoseconds
/// and all derived quantities are exact integers.
struct DimensioningParams {
  std::int64_t system_bandwidth_hz = 100'000'000;
  std::int64_t subcarrier_spacing_hz = 240'000;
  std::int64_t sequence_length = 7;  // N_Z, subcarriers per BeRB
  std::int64_t n_berb = 53;
  std::int64_t n_roots = 6;
  std::int64_t n_shifts = 2;
  std::int64_t n_scp = 86;
  std::int64_t n_seq = 1024;
  std::int64_t n_sgt = 54;
  std::int64_t t_scp_ns = 350;
  std::int64_t t_seq_ns = 4170;
  std::int64_t t_sgt_ns = 220;
  std::int64_t occasions_per_second = 5;
  std::int64_t max_beacon_rate_hz = 5;
};

/// One (BeRB, sequence) pair; the same channel recurs every occasion.
struct BeaconChannel {
  int berb = 0;
  radio::SequenceId seq;
};

struct BeaconResource {
  int occasion_phase = 0;
  int berb = 0;
  radio::SequenceId seq;

  friend bool operator==(const BeaconResource&, const BeaconResource&) = default;
};

struct ResourceGrid {
  DimensioningParams params;
  std::int64_t m_seq = 0;            // sequences per BeRB
  std::int64_t m_sys = 0;            // sequences per occasion
  std::int64_t n_be = 0;             // samples per beacon
  std::int64_t t_be_ns = 0;          // beacon duration
  std::int64_t b_seq_hz = 0;         // bandwidth of one BeRB
  std::int64_t sample_rate_hz = 0;
  std::int64_t capacity_per_second = 0;  // m_sys * occasions_per_second

  int channels() const { return static_cast<int>(m_sys); }

  /// Channel index ordering spreads consecutive indices over BeRBs first,
  /// then over the cyclic shifts of one root, then over roots.
  BeaconChannel channel(int index) const;
  int channel_index(int berb, radio::SequenceId seq) const;

  /// Every resource of one occasion.
  std::vector<BeaconResource> occasion(int phase) const;

  /// Minimum period (in occasions) that keeps an entity at or below the
  /// maximum beacon rate.
  int min_period() const;
};

/// Throws std::invalid_argument on inconsistent parameters.
ResourceGrid dimension(const DimensioningParams& params);

/// Human-readable audit table.
std::string dimension_table(const ResourceGrid& grid);

struct EntityKey {
  enum class Kind : std::uint8_t { ue = 0, group = 1 };
  Kind kind = Kind::ue;
  std::uint32_t id = 0;

  static EntityKey ue(std::uint32_t id) { return {Kind::ue, id}; }
  static EntityKey group(std::uint32_t id) { return {Kind::group, id}; }
  bool is_group() const { return kind == Kind::group; }

  friend auto operator<=>(const EntityKey&, const EntityKey&) = default;
};

std::string to_string(EntityKey key);

struct Assignment {
  EntityKey entity;
  BeaconResource resource;
  int channel = 0;
  int period = 1;  // occasions between transmissions
  double rate_hz = 0.0;
  Position position;

  bool transmits_at(std::int64_t occasion) const {
    return occasion % period == resource.occasion_phase;
  }
};

/// Assigns beacon channels and time-sharing phases to tracked entities.
///
/// Entities closer than the reuse distance conflict. Allocation visits
/// entities in descending conflict degree (ties by key) and gives each the
/// channel with the fewest conflicting occupants, then the lowest load, then
/// the lowest index. Occupants of one channel are greedily coloured over
/// their conflicts; the number of colours is the channel's period.
class Allocator {
 public:
  struct Entity {
    EntityKey key;
    Position position;
  };

  static constexpr double kNoReuse = std::numeric_limits<double>::infinity();

  Allocator(ResourceGrid grid, double reuse_distance_m, Torus torus);

  /// Rebuilds every assignment from scratch.
  void allocate(std::span<const Entity> entities);

  /// Places one entity against the current assignments, replacing any
  /// assignment it already holds.
  const Assignment& reassign(EntityKey key, Position position);

  /// Throws std::out_of_range for an unknown entity.
  void release(EntityKey key);

  const Assignment* find(EntityKey key) const;
  std::size_t live() const { return assignments_.size(); }
  const std::map<EntityKey, Assignment>& assignments() const { return assignments_; }

  double aggregate_rate_hz() const;
  bool reuse_enabled() const { return reuse_distance_ < kNoReuse; }
  double reuse_distance() const { return reuse_distance_; }
  const ResourceGrid& grid() const { return grid_; }
  const Torus& torus() const { return torus_; }

  bool conflicts(Position a, Position b) const;

 private:
  int pick_channel(std::span<const EntityKey> placed_neighbours) const;
  void recolour(int channel);

  ResourceGrid grid_;
  double reuse_distance_;
  Torus torus_;
  std::map<EntityKey, Assignment> assignments_;
  std::vector<std::vector<EntityKey>> occupants_;  // per channel, in placement order
};

}  // namespace beaconsim::resources

#endif
