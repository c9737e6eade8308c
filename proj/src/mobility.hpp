#ifndef BEACONSIM_MOBILITY_HPP
#define BEACONSIM_MOBILITY_HPP

#include <cstdint>
#include <vector>

#include "geometry.hpp"
#include "rng.hpp"

namespace beaconsim::mobility {

struct Trp {
  std::uint32_t id = 0;
  Position position;
  std::uint32_t gnb = 0;
};

/// Square TRP grid on a torus; the world spans `trps_per_side` ISDs.
struct World {
  Torus torus;
  double isd_m = 0.0;
  int trps_per_side = 0;
  std::vector<Trp> trps;
  std::uint32_t n_gnbs = 0;

  /// Index of the TRP closest to `p`.
  std::uint32_t nearest_trp(Position p) const;
};

/// Each gNB owns a contiguous `trps_per_gnb_side` square block of TRPs.
World make_world(double isd_m, int trps_per_side, int trps_per_gnb_side);

enum class Grouping { individual, grouped };

struct Ue {
  std::uint32_t id = 0;
  Position position;
  double heading = 0.0;
  double speed = 0.0;
  std::int32_t cohort = -1;  // physical co-moving cohort, -1 when moving alone
};

/// A set of UEs moving rigidly around a virtual anchor.
struct Cohort {
  Position anchor;
  double heading = 0.0;
  double radius = 0.0;
  std::vector<std::uint32_t> members;
  std::vector<Position> offsets;
};

struct DeploymentParams {
  double isd_m = 24.0;
  int trps_per_side = 6;
  int trps_per_gnb_side = 3;
  int n_users = 1500;
  Grouping grouping = Grouping::grouped;
  int group_size = 3;
  double group_radius_m = 5.0;
  double speed_mps = 30.0 / 3.6;
  double direction_change_mean_s = 5.0;

  void validate() const;
};

struct Population {
  World world;
  std::vector<Ue> ues;
  std::vector<Cohort> cohorts;
};

/// Uniform placement; grouped mode places `group_size` members uniformly in
/// the disc of `group_radius_m` around each anchor. Throws when the group
/// size does not divide the population.
Population deploy(const DeploymentParams& params, RandomStream& rng);

/// Uniform point in a disc of radius r.
Position sample_disc(double r, RandomStream& rng);

/// Random-direction mobility. Headings are redrawn uniformly at tick
/// boundaries once an exponential holding time has elapsed, so every mover
/// covers exactly speed * dt per step.
class MobilityModel {
 public:
  MobilityModel(Population& population, double direction_change_mean_s, RandomStream& rng);

  void step(double dt);

 private:
  struct Mover {
    bool is_cohort = false;
    std::uint32_t index = 0;
    double time_to_change = 0.0;
  };

  Population& pop_;
  double change_mean_;
  RandomStream& rng_;
  std::vector<Mover> movers_;
};

}  // namespace beaconsim::mobility

#endif
