#ifndef BEACONSIM_CONFIG_HPP
#define BEACONSIM_CONFIG_HPP

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "engine.hpp"

namespace beaconsim::config {

enum class NoiseMode { literal, derived };

/// Configuration text that is not valid JSON.
struct ParseError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct Experiments {
  std::vector<double> isds_m{24.0, 18.0};
  std::vector<int> users{300, 600, 900, 1200, 1500};
  std::vector<std::string> schemes{"grouped", "individual"};
  bool fig3_simulate_radio = false;  // beacon rate depends only on allocation
  std::vector<double> fig6_radii_m{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  engine::WrongCellParams fig6;
};

/// Scenario plus the settings that are resolved before a run: the detection
/// threshold (a number or calibrated from a false-alarm target) and the
/// noise power (literal or kT*NF*B over one BeRB).
struct Config {
  engine::Scenario scenario;
  bool threshold_auto = true;
  double target_pfa = 0.01;
  NoiseMode noise_mode = NoiseMode::literal;
  double noise_figure_db = 9.0;
  double temperature_k = 290.0;
  Experiments experiments;

  /// Scenario with threshold and noise resolved; validated.
  engine::Scenario resolve() const;

  /// Same scenario with the threshold and noise power written out as numbers.
  Config resolved() const;
};

std::string to_string(NoiseMode mode);

/// Sections: channel, detection, dimensioning, deployment, protocol,
/// simulation, experiments. Missing keys keep their defaults; unknown
/// sections or keys throw std::invalid_argument.
Config from_json_text(std::string_view text, const Config& base = {});
Config load_file(const std::string& path, const Config& base = {});
std::string to_json_text(const Config& cfg);

/// Sets "section.key". The value is parsed as JSON when possible, otherwise
/// taken as a string.
void set(Config& cfg, std::string_view dotted_key, std::string_view value);

}  // namespace beaconsim::config

#endif
