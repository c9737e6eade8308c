#ifndef BEACONSIM_RADIO_HPP
#define BEACONSIM_RADIO_HPP

#include <span>
#include <vector>

#include "geometry.hpp"
#include "rng.hpp"

namespace beaconsim::radio {

inline constexpr double kBoltzmann = 1.38e-23;
inline constexpr double kSpeedOfLight = 299792458.0;

double dbm_to_watt(double dbm);
double watt_to_dbm(double watt);
double db_to_linear(double db);
double linear_to_db(double linear);

/// Thermal noise kT*NF*B in dBm.
double thermal_noise_dbm(double temperature_k, double noise_figure_db, double bandwidth_hz);

enum class LosModel { always_los, distance_probabilistic };

struct ChannelParams {
  double carrier_frequency_hz = 3.5e9;
  double sigma_sf_los_db = 3.0;
  double sigma_sf_nlos_db = 4.0;
  double trp_height_m = 10.0;
  double ue_height_m = 1.5;
  LosModel los_model = LosModel::distance_probabilistic;

  void validate() const;
  double shadow_sigma_db(bool los) const { return los ? sigma_sf_los_db : sigma_sf_nlos_db; }
};

/// Per (transmitter, receiver) channel. `shadow_gain_db` is added to the
/// distance-dependent loss; `fast_fading_power` holds |h|^2 per subcarrier
/// block (a single entry is shared by every subcarrier of the block).
struct LinkState {
  bool los = true;
  double shadow_gain_db = 0.0;
  std::vector<double> fast_fading_power{1.0};
};

/// Distance-dependent loss plus the line-of-sight probability it assumes.
class PathLossModel {
 public:
  virtual ~PathLossModel() = default;
  virtual double loss_db(double distance_2d, bool los) const = 0;
  virtual double los_probability(double distance_2d) const = 0;
};

/// 3D-UMi street canyon (TR 36.873) with the heights from ChannelParams.
class UmiStreetCanyon final : public PathLossModel {
 public:
  explicit UmiStreetCanyon(const ChannelParams& params);

  double loss_db(double distance_2d, bool los) const override;
  double los_probability(double distance_2d) const override;

  double los_loss_db(double distance_3d) const;
  double nlos_loss_db(double distance_3d) const;
  double breakpoint_distance() const { return breakpoint_; }

 private:
  ChannelParams params_;
  double height_diff_;
  double breakpoint_;
  double log_fc_ghz_;
};

/// PL = ref_loss + 10*n*log10(d/d0); always line of sight. Used for
/// hand-checkable scenarios.
class LogDistance final : public PathLossModel {
 public:
  LogDistance(double ref_loss_db, double exponent, double ref_distance_m = 1.0);

  double loss_db(double distance_2d, bool los) const override;
  double los_probability(double) const override { return 1.0; }

 private:
  double ref_loss_db_;
  double exponent_;
  double ref_distance_m_;
};

/// Total loss in dB including the link's shadowing. Throws on zero distance.
double path_loss(double distance_2d, const LinkState& link, const PathLossModel& model);
double path_loss(Position tx, Position rx, const Torus& torus, const LinkState& link,
                 const PathLossModel& model);

/// Draws LoS state, shadowing and `fading_blocks` Rayleigh power gains.
LinkState draw_link_state(double distance_2d, const ChannelParams& params,
                          const PathLossModel& model, RandomStream& rng, int fading_blocks = 1);

/// Unit-mean Rayleigh power gain |h|^2.
inline double rayleigh_power(RandomStream& rng) { return rng.exponential(); }

struct SequenceId {
  int root = 0;
  int shift = 0;

  friend bool operator==(const SequenceId&, const SequenceId&) = default;
};

/// 1 for identical sequences, 0 for distinct cyclic shifts of one root,
/// 1/sqrt(n_z) across roots.
double cross_correlation(SequenceId a, SequenceId b, int n_z);

/// One transmission as seen by a given receiver.
struct ReceivedBeacon {
  SequenceId seq;
  double power_per_subcarrier_w = 0.0;
  int n_subcarriers = 0;
  double channel_gain = 0.0;  // linear G, shadowing included
  std::span<const double> fast_fading_power;

  /// Sum over subcarriers of P_b * G * |h|^2.
  double received_power_w() const;
};

/// Linear SINR of `target` against co-channel `interferers`, each weighted
/// by its sequence cross-correlation with the target.
double sinr(const ReceivedBeacon& target, std::span<const ReceivedBeacon> interferers,
            double noise_w, int n_z);

struct DetectionParams {
  int n_antennas = 1;
  int search_window = 1;
  double threshold = 9.210340371976182;
  int sequence_length = 7;
  double beacon_range_m = 32.9;
  double noise_power_dbm = -72.74;

  void validate() const;
  double noise_w() const { return dbm_to_watt(noise_power_dbm); }
};

/// Central chi-squared CDF.
double chi2_cdf(double x, int dof);

double miss_detection_prob(double sinr, const DetectionParams& det, double distance_m);

/// Noise-only probability that any of the search-window positions crosses
/// the threshold.
double false_alarm_prob(const DetectionParams& det);
double calibrate_threshold(double target_pfa, int n_antennas, int search_window);

/// True with probability 1 - p_md.
inline bool detect(double p_md, RandomStream& rng) { return rng.uniform() >= p_md; }

}  // namespace beaconsim::radio

#endif
