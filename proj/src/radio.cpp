#include "radio.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <boost/math/special_functions/gamma.hpp>

namespace beaconsim::radio {

double dbm_to_watt(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
double watt_to_dbm(double watt) { return 10.0 * std::log10(watt) + 30.0; }
double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
double linear_to_db(double linear) { return 10.0 * std::log10(linear); }

double thermal_noise_dbm(double temperature_k, double noise_figure_db, double bandwidth_hz) {
  if (!(temperature_k > 0.0) || !(bandwidth_hz > 0.0))
    throw std::invalid_argument("noise temperature and bandwidth must be positive");
  return watt_to_dbm(kBoltzmann * temperature_k * bandwidth_hz) + noise_figure_db;
}

void ChannelParams::validate() const {
  if (!(carrier_frequency_hz > 0.0))
    throw std::invalid_argument("carrier_frequency must be positive");
  if (sigma_sf_los_db < 0.0 || sigma_sf_nlos_db < 0.0)
    throw std::invalid_argument("shadow fading sigma must be non-negative");
  if (!(trp_height_m > 0.0) || !(ue_height_m > 0.0))
    throw std::invalid_argument("antenna heights must be positive");
}

// Effective environment height of 1 m for the breakpoint distance.
UmiStreetCanyon::UmiStreetCanyon(const ChannelParams& params)
    : params_(params),
      height_diff_(params.trp_height_m - params.ue_height_m),
      breakpoint_(4.0 * (params.trp_height_m - 1.0) * (params.ue_height_m - 1.0) *
                  params.carrier_frequency_hz / kSpeedOfLight),
      log_fc_ghz_(std::log10(params.carrier_frequency_hz / 1e9)) {
  params_.validate();
}

double UmiStreetCanyon::los_loss_db(double d3) const {
  const double d2 = std::sqrt(std::max(0.0, d3 * d3 - height_diff_ * height_diff_));
  if (d2 <= breakpoint_) return 22.0 * std::log10(d3) + 28.0 + 20.0 * log_fc_ghz_;
  return 40.0 * std::log10(d3) + 28.0 + 20.0 * log_fc_ghz_ -
         9.0 * std::log10(breakpoint_ * breakpoint_ + height_diff_ * height_diff_);
}

double UmiStreetCanyon::nlos_loss_db(double d3) const {
  const double nlos = 36.7 * std::log10(d3) + 22.7 + 26.0 * log_fc_ghz_ -
                      0.3 * (params_.ue_height_m - 1.5);
  return std::max(los_loss_db(d3), nlos);
}

double UmiStreetCanyon::loss_db(double distance_2d, bool los) const {
  const double d3 = std::hypot(distance_2d, height_diff_);
  if (!(d3 > 0.0)) throw std::domain_error("path loss undefined at zero distance");
  return los ? los_loss_db(d3) : nlos_loss_db(d3);
}

double UmiStreetCanyon::los_probability(double d) const {
  if (params_.los_model == LosModel::always_los) return 1.0;
  if (d <= 18.0) return 1.0;
  const double e = std::exp(-d / 36.0);
  return 18.0 / d * (1.0 - e) + e;
}

LogDistance::LogDistance(double ref_loss_db, double exponent, double ref_distance_m)
    : ref_loss_db_(ref_loss_db), exponent_(exponent), ref_distance_m_(ref_distance_m) {
  if (!(ref_distance_m > 0.0)) throw std::invalid_argument("reference distance must be positive");
}

double LogDistance::loss_db(double d, bool) const {
  if (!(d > 0.0)) throw std::domain_error("path loss undefined at zero distance");
  return ref_loss_db_ + 10.0 * exponent_ * std::log10(d / ref_distance_m_);
}

double path_loss(double distance_2d, const LinkState& link, const PathLossModel& model) {
  return model.loss_db(distance_2d, link.los) + link.shadow_gain_db;
}

double path_loss(Position tx, Position rx, const Torus& torus, const LinkState& link,
                 const PathLossModel& model) {
  return path_loss(torus.distance(tx, rx), link, model);
}

LinkState draw_link_state(double distance_2d, const ChannelParams& params,
                          const PathLossModel& model, RandomStream& rng, int fading_blocks) {
  if (fading_blocks < 1) throw std::invalid_argument("need at least one fading block");
  LinkState link;
  link.los = rng.uniform() < model.los_probability(distance_2d);
  link.shadow_gain_db = params.shadow_sigma_db(link.los) * rng.normal();
  link.fast_fading_power.resize(static_cast<std::size_t>(fading_blocks));
  for (double& h : link.fast_fading_power) h = rayleigh_power(rng);
  return link;
}

double cross_correlation(SequenceId a, SequenceId b, int n_z) {
  if (n_z < 1) throw std::invalid_argument("sequence length must be at least 1");
  if (a.root == b.root) return a.shift == b.shift ? 1.0 : 0.0;
  return 1.0 / std::sqrt(static_cast<double>(n_z));
}

double ReceivedBeacon::received_power_w() const {
  if (n_subcarriers < 1) throw std::invalid_argument("empty subcarrier set");
  if (fast_fading_power.empty()) throw std::invalid_argument("missing fast fading gains");
  double sum = 0.0;
  if (fast_fading_power.size() == 1) {
    sum = n_subcarriers * power_per_subcarrier_w * channel_gain * fast_fading_power[0];
  } else {
    if (fast_fading_power.size() != static_cast<std::size_t>(n_subcarriers))
      throw std::invalid_argument("fading vector does not match subcarrier count");
    for (double h : fast_fading_power) sum += power_per_subcarrier_w * channel_gain * h;
  }
  return sum;
}

double sinr(const ReceivedBeacon& target, std::span<const ReceivedBeacon> interferers,
            double noise_w, int n_z) {
  const double s = target.received_power_w();
  double i = 0.0;
  for (const auto& k : interferers) {
    const double rho = cross_correlation(target.seq, k.seq, n_z);
    if (rho > 0.0) i += rho * k.received_power_w();
  }
  return s / (noise_w + i);
}

void DetectionParams::validate() const {
  if (n_antennas < 1) throw std::invalid_argument("n_antennas must be at least 1");
  if (search_window < 1) throw std::invalid_argument("search_window must be at least 1");
  if (!(threshold > 0.0)) throw std::invalid_argument("threshold must be positive");
  if (sequence_length < 1) throw std::invalid_argument("sequence_length must be at least 1");
  if (!(beacon_range_m > 0.0)) throw std::invalid_argument("beacon_range must be positive");
}

double chi2_cdf(double x, int dof) {
  if (dof < 1) throw std::invalid_argument("chi-squared needs at least one degree of freedom");
  if (std::isnan(x) || x < 0.0) throw std::domain_error("chi-squared CDF needs x >= 0");
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  return boost::math::gamma_p(0.5 * dof, 0.5 * x);
}

namespace {

double chi2_sf(double x, int dof) {
  if (x == 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  return boost::math::gamma_q(0.5 * dof, 0.5 * x);
}

}  // namespace

double miss_detection_prob(double sinr, const DetectionParams& det, double distance_m) {
  if (std::isnan(sinr) || sinr < 0.0) throw std::domain_error("SINR must be non-negative");
  if (distance_m > det.beacon_range_m) return 1.0;
  const int dof = 2 * det.n_antennas;
  const double noise_only = det.search_window > 1
                                ? std::pow(chi2_cdf(det.threshold, dof), det.search_window - 1)
                                : 1.0;
  const double signal =
      chi2_cdf(det.threshold / (1.0 + det.sequence_length * sinr), dof);
  return std::clamp(noise_only * signal, 0.0, 1.0);
}

double false_alarm_prob(const DetectionParams& det) {
  const double q = chi2_sf(det.threshold, 2 * det.n_antennas);
  // 1 - (1 - q)^D without cancellation
  return -std::expm1(det.search_window * std::log1p(-q));
}

double calibrate_threshold(double target_pfa, int n_antennas, int search_window) {
  if (!(target_pfa > 0.0) || !(target_pfa < 1.0))
    throw std::invalid_argument("target false-alarm probability must lie in (0, 1)");
  DetectionParams det;
  det.n_antennas = n_antennas;
  det.search_window = search_window;
  auto pfa = [&](double lambda) {
    det.threshold = lambda;
    return false_alarm_prob(det);
  };
  double lo = 0.0;
  double hi = 1.0;
  while (pfa(hi) > target_pfa) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e6) throw std::runtime_error("threshold calibration diverged");
  }
  for (int it = 0; it < 200 && hi - lo > 1e-14 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (pfa(mid) > target_pfa) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace beaconsim::radio
