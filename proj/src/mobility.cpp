#include "mobility.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace beaconsim::mobility {

std::uint32_t World::nearest_trp(Position p) const {
  std::uint32_t best = 0;
  double best_d = torus.distance(p, trps.front().position);
  for (const auto& t : trps) {
    const double d = torus.distance(p, t.position);
    if (d < best_d) {
      best_d = d;
      best = t.id;
    }
  }
  return best;
}

World make_world(double isd_m, int trps_per_side, int trps_per_gnb_side) {
  if (!(isd_m > 0.0)) throw std::invalid_argument("ISD must be positive");
  if (trps_per_side < 1) throw std::invalid_argument("need at least one TRP per side");
  if (trps_per_gnb_side < 1) throw std::invalid_argument("need at least one TRP per gNB side");
  World w;
  w.isd_m = isd_m;
  w.trps_per_side = trps_per_side;
  w.torus = Torus(isd_m * trps_per_side, isd_m * trps_per_side);
  const int blocks = (trps_per_side + trps_per_gnb_side - 1) / trps_per_gnb_side;
  w.n_gnbs = static_cast<std::uint32_t>(blocks * blocks);
  for (int iy = 0; iy < trps_per_side; ++iy)
    for (int ix = 0; ix < trps_per_side; ++ix) {
      Trp t;
      t.id = static_cast<std::uint32_t>(w.trps.size());
      t.position = {(ix + 0.5) * isd_m, (iy + 0.5) * isd_m};
      t.gnb = static_cast<std::uint32_t>((iy / trps_per_gnb_side) * blocks + ix / trps_per_gnb_side);
      w.trps.push_back(t);
    }
  return w;
}

void DeploymentParams::validate() const {
  if (n_users < 1) throw std::invalid_argument("n_users must be at least 1");
  if (!(speed_mps >= 0.0)) throw std::invalid_argument("speed must be non-negative");
  if (!(direction_change_mean_s > 0.0))
    throw std::invalid_argument("direction change mean must be positive");
  if (grouping == Grouping::grouped) {
    if (group_size < 2) throw std::invalid_argument("group size must be at least 2");
    if (n_users % group_size != 0)
      throw std::invalid_argument("group size does not divide the population");
    if (!(group_radius_m >= 0.0)) throw std::invalid_argument("group radius must be non-negative");
  }
}

Position sample_disc(double r, RandomStream& rng) {
  const double rho = r * std::sqrt(rng.uniform());
  const double a = rng.uniform(0.0, 2.0 * std::numbers::pi);
  return {rho * std::cos(a), rho * std::sin(a)};
}

Population deploy(const DeploymentParams& params, RandomStream& rng) {
  params.validate();
  Population pop;
  pop.world = make_world(params.isd_m, params.trps_per_side, params.trps_per_gnb_side);
  const Torus& torus = pop.world.torus;
  auto uniform_point = [&] {
    const double x = rng.uniform(0.0, torus.width());
    return Position{x, rng.uniform(0.0, torus.height())};
  };
  pop.ues.resize(static_cast<std::size_t>(params.n_users));
  for (std::size_t i = 0; i < pop.ues.size(); ++i) {
    pop.ues[i].id = static_cast<std::uint32_t>(i);
    pop.ues[i].speed = params.speed_mps;
  }
  if (params.grouping == Grouping::individual) {
    for (auto& ue : pop.ues) {
      ue.position = uniform_point();
      ue.heading = rng.uniform(0.0, 2.0 * std::numbers::pi);
    }
    return pop;
  }
  const int n_groups = params.n_users / params.group_size;
  pop.cohorts.reserve(static_cast<std::size_t>(n_groups));
  for (int g = 0; g < n_groups; ++g) {
    Cohort c;
    c.anchor = uniform_point();
    c.heading = rng.uniform(0.0, 2.0 * std::numbers::pi);
    c.radius = params.group_radius_m;
    for (int m = 0; m < params.group_size; ++m) {
      const auto id = static_cast<std::uint32_t>(g * params.group_size + m);
      const Position off = sample_disc(params.group_radius_m, rng);
      c.members.push_back(id);
      c.offsets.push_back(off);
      auto& ue = pop.ues[id];
      ue.position = torus.wrap({c.anchor.x + off.x, c.anchor.y + off.y});
      ue.heading = c.heading;
      ue.cohort = g;
    }
    pop.cohorts.push_back(std::move(c));
  }
  return pop;
}

MobilityModel::MobilityModel(Population& population, double direction_change_mean_s,
                             RandomStream& rng)
    : pop_(population), change_mean_(direction_change_mean_s), rng_(rng) {
  if (!(direction_change_mean_s > 0.0))
    throw std::invalid_argument("direction change mean must be positive");
  for (std::size_t c = 0; c < pop_.cohorts.size(); ++c)
    movers_.push_back({true, static_cast<std::uint32_t>(c), rng_.exponential(change_mean_)});
  for (const auto& ue : pop_.ues)
    if (ue.cohort < 0) movers_.push_back({false, ue.id, rng_.exponential(change_mean_)});
}

void MobilityModel::step(double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("time step must be positive");
  const Torus& torus = pop_.world.torus;
  for (auto& m : movers_) {
    const bool change = m.time_to_change <= 0.0;
    if (change) m.time_to_change += rng_.exponential(change_mean_);
    if (m.is_cohort) {
      auto& c = pop_.cohorts[m.index];
      if (change) c.heading = rng_.uniform(0.0, 2.0 * std::numbers::pi);
      const double speed = pop_.ues[c.members.front()].speed;
      c.anchor = torus.wrap({c.anchor.x + speed * dt * std::cos(c.heading),
                             c.anchor.y + speed * dt * std::sin(c.heading)});
      for (std::size_t k = 0; k < c.members.size(); ++k) {
        auto& ue = pop_.ues[c.members[k]];
        ue.heading = c.heading;
        ue.position = torus.wrap({c.anchor.x + c.offsets[k].x, c.anchor.y + c.offsets[k].y});
      }
    } else {
      auto& ue = pop_.ues[m.index];
      if (change) ue.heading = rng_.uniform(0.0, 2.0 * std::numbers::pi);
      ue.position = torus.wrap({ue.position.x + ue.speed * dt * std::cos(ue.heading),
                                ue.position.y + ue.speed * dt * std::sin(ue.heading)});
    }
    m.time_to_change -= dt;
  }
}

}  // namespace beaconsim::mobility
