#ifndef BEACONSIM_ENGINE_HPP
#define BEACONSIM_ENGINE_HPP

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <vector>

#include "mobility.hpp"
#include "protocol.hpp"
#include "radio.hpp"
#include "resources.hpp"

namespace beaconsim::engine {

using protocol::Tick;
using resources::EntityKey;

struct Scenario {
  mobility::DeploymentParams deployment;
  resources::DimensioningParams dimensioning;
  radio::ChannelParams channel;
  radio::DetectionParams detection;
  protocol::ProtocolParams protocol;

  bool reuse = true;
  double reuse_distance_m = 20.0;
  double tx_power_dbm = 15.0;  // total over the BeRB

  double duration_s = 60.0;  // includes the warmup
  double warmup_s = 5.0;
  double scheduling_period_s = 1.0;
  bool simulate_radio = true;
  bool check_invariants = true;

  std::uint64_t seed = 1;
  int replications = 10;
  int threads = 1;

  /// Replaces every per-link miss-detection probability within range.
  std::optional<double> forced_p_md;
  /// Initial UE positions; overrides the random placement when non-empty.
  std::vector<Position> fixed_positions;

  void validate() const;

  double tick_s() const;
  Tick total_ticks() const;
  Tick warmup_ticks() const;
  Tick ticks_per_period() const;
  Tick ticks_per_rotation() const;
};

struct MetricsRecord {
  double mean_rate_hz = 0.0;  // per user; group members inherit the group's rate
  double p_md = 0.0;          // beacons detected by no TRP / beacons sent
  std::int64_t beacons = 0;
  std::int64_t misses = 0;
  std::int64_t member_leaves = 0;
  std::int64_t transmitter_leaves = 0;
  std::int64_t dissolutions = 0;
  std::int64_t groups_formed = 0;
  std::int64_t members_added = 0;
  std::int64_t handovers = 0;
  std::int64_t rotations = 0;
  std::int64_t reconfigurations = 0;
  Tick ticks = 0;

  friend bool operator==(const MetricsRecord&, const MetricsRecord&) = default;
};

struct Estimate {
  double mean = 0.0;
  double ci95 = 0.0;  // Student-t half-width
  int n = 0;
};

/// Order-independent: samples are sorted before reduction.
Estimate estimate(std::vector<double> samples);

struct Aggregate {
  Estimate mean_rate_hz;
  Estimate p_md;
  std::vector<MetricsRecord> runs;  // by replication index
};

struct TransmissionView {
  EntityKey entity;
  std::uint32_t ue = 0;  // the transmitting UE
  Position position;
  resources::BeaconResource resource;
};

/// One (transmission, TRP) pair. Every pair is listed; `sinr` is only
/// meaningful when `in_range`.
struct LinkView {
  std::size_t transmission = 0;
  std::uint32_t trp = 0;
  double distance_m = 0.0;
  bool los = true;
  double shadow_db = 0.0;
  double fading_power = 1.0;
  bool in_range = false;
  double sinr = 0.0;
};

struct OccasionSnapshot {
  Tick tick = 0;
  std::vector<TransmissionView> transmissions;
  std::vector<LinkView> links;
};

using Observer = std::function<void(const OccasionSnapshot&)>;

/// One replication. Owns its world, allocator, protocol state and streams.
class Simulation {
 public:
  Simulation(const Scenario& scenario, std::uint32_t replication);
  ~Simulation();
  Simulation(const Simulation&) = delete;
  Simulation& operator=(const Simulation&) = delete;

  void set_observer(Observer observer);

  /// Throws std::logic_error when an invariant breaks.
  MetricsRecord run();

  const std::vector<protocol::Event>& events() const;
  const mobility::Population& population() const;
  const resources::Allocator& allocator() const;
  const protocol::GroupManager& groups() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

MetricsRecord run(const Scenario& scenario, std::uint32_t replication);

/// Runs `scenario.replications` independent replications, fanned out over
/// `scenario.threads` workers. Events, if requested, are written in
/// replication order.
Aggregate replicate(const Scenario& scenario, std::ostream* event_log = nullptr);

struct WrongCellParams {
  int drops = 5000;
  double shadow_corr_los_m = 10.0;
  double shadow_corr_nlos_m = 13.0;
  double los_corr_m = 50.0;
};

struct WrongCellPoint {
  double radius_m = 0.0;
  Estimate p_wrong_cell;
  Estimate mean_delta_pl_db;  // over members whose best cell differs
};

/// Static drops: a transmitter placed uniformly, the other members
/// uniformly in the disc of radius r around it. Member shadowing and LoS
/// state are correlated with the transmitter's by separation. The same
/// drops are reused for every radius.
std::vector<WrongCellPoint> wrong_cell_experiment(const Scenario& scenario,
                                                  const std::vector<double>& radii_m,
                                                  const WrongCellParams& params);

/// Order-independent link randomness for UE-to-UE pairs.
struct PairLink {
  double los_uniform = 0.0;
  double shadow_z = 0.0;
};
PairLink pair_link(std::uint64_t seed, std::uint32_t replication, std::uint32_t a, std::uint32_t b);

}  // namespace beaconsim::engine

#endif
