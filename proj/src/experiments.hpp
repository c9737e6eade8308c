#ifndef BEACONSIM_EXPERIMENTS_HPP
#define BEACONSIM_EXPERIMENTS_HPP

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "config.hpp"

namespace beaconsim::experiments {

enum class Preset { fig3, fig4, fig6, custom };

std::optional<Preset> preset_from_name(std::string_view name);
std::string_view to_string(Preset preset);

/// Shortest representation that parses back to the same double.
std::string format_number(double v);

/// Writes through a temporary file in the same directory, then renames.
void write_atomic(const std::filesystem::path& path, const std::string& content);

/// CSV outputs:
///   fig3   beacon_rate.csv     isd_m,n_users,scheme,reuse,mean_rate_hz,ci95
///   fig4   miss_detection.csv  isd_m,n_users,scheme,p_md,ci95
///   fig6   wrong_cell.csv      group_radius_m,p_wrong_cell,mean_delta_pl_db,ci95
///   custom scenario.csv        one row for the configured scenario
/// ci95 in wrong_cell.csv is the half-width for p_wrong_cell. The event log
/// is only produced by the custom preset. Returns the files written.
std::vector<std::filesystem::path> run_preset(const config::Config& cfg, Preset preset,
                                              const std::filesystem::path& out_dir,
                                              const std::string& event_log_path = {});

std::string beacon_rate_csv(const config::Config& cfg);
std::string miss_detection_csv(const config::Config& cfg);
std::string wrong_cell_csv(const config::Config& cfg);
std::string scenario_csv(const config::Config& cfg, std::ostream* event_log = nullptr);

}  // namespace beaconsim::experiments

#endif
