#include "experiments.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <system_error>

namespace beaconsim::experiments {

namespace fs = std::filesystem;

std::optional<Preset> preset_from_name(std::string_view name) {
  if (name == "fig3") return Preset::fig3;
  if (name == "fig4") return Preset::fig4;
  if (name == "fig6") return Preset::fig6;
  if (name == "custom") return Preset::custom;
  return std::nullopt;
}

std::string_view to_string(Preset preset) {
  switch (preset) {
    case Preset::fig3: return "fig3";
    case Preset::fig4: return "fig4";
    case Preset::fig6: return "fig6";
    case Preset::custom: return "custom";
  }
  return "unknown";
}

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_atomic(const fs::path& path, const std::string& content) {
  const fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create directory " + dir.string() + ": " + ec.message());
  const fs::path tmp = dir / ("." + path.filename().string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw std::runtime_error("cannot replace " + path.string() + ": " + ec.message());
  }
}

namespace {

engine::Scenario variant(const engine::Scenario& base, double isd, int users, const std::string& scheme) {
  engine::Scenario s = base;
  s.deployment.isd_m = isd;
  s.deployment.n_users = users;
  s.deployment.grouping =
      scheme == "grouped" ? mobility::Grouping::grouped : mobility::Grouping::individual;
  return s;
}

}  // namespace

std::string beacon_rate_csv(const config::Config& cfg) {
  const engine::Scenario base = cfg.resolve();
  std::ostringstream os;
  os << "isd_m,n_users,scheme,reuse,mean_rate_hz,ci95\n";
  for (double isd : cfg.experiments.isds_m)
    for (int users : cfg.experiments.users)
      for (const auto& scheme : cfg.experiments.schemes)
        for (bool reuse : {true, false}) {
          engine::Scenario s = variant(base, isd, users, scheme);
          s.reuse = reuse;
          s.simulate_radio = cfg.experiments.fig3_simulate_radio;
          const auto agg = engine::replicate(s);
          os << format_number(isd) << ',' << users << ',' << scheme << ',' << (reuse ? "on" : "off")
             << ',' << format_number(agg.mean_rate_hz.mean) << ','
             << format_number(agg.mean_rate_hz.ci95) << '\n';
        }
  return os.str();
}

std::string miss_detection_csv(const config::Config& cfg) {
  const engine::Scenario base = cfg.resolve();
  std::ostringstream os;
  os << "isd_m,n_users,scheme,p_md,ci95\n";
  for (double isd : cfg.experiments.isds_m)
    for (int users : cfg.experiments.users)
      for (const auto& scheme : cfg.experiments.schemes) {
        engine::Scenario s = variant(base, isd, users, scheme);
        s.simulate_radio = true;
        const auto agg = engine::replicate(s);
        os << format_number(isd) << ',' << users << ',' << scheme << ','
           << format_number(agg.p_md.mean) << ',' << format_number(agg.p_md.ci95) << '\n';
      }
  return os.str();
}

std::string wrong_cell_csv(const config::Config& cfg) {
  const engine::Scenario s = cfg.resolve();
  const auto curve = engine::wrong_cell_experiment(s, cfg.experiments.fig6_radii_m, cfg.experiments.fig6);
  std::ostringstream os;
  os << "group_radius_m,p_wrong_cell,mean_delta_pl_db,ci95\n";
  for (const auto& p : curve)
    os << format_number(p.radius_m) << ',' << format_number(p.p_wrong_cell.mean) << ','
       << format_number(p.mean_delta_pl_db.mean) << ',' << format_number(p.p_wrong_cell.ci95) << '\n';
  return os.str();
}

std::string scenario_csv(const config::Config& cfg, std::ostream* event_log) {
  const engine::Scenario s = cfg.resolve();
  const auto agg = engine::replicate(s, event_log);
  engine::MetricsRecord total;
  for (const auto& r : agg.runs) {
    total.beacons += r.beacons;
    total.misses += r.misses;
    total.member_leaves += r.member_leaves;
    total.dissolutions += r.dissolutions;
    total.groups_formed += r.groups_formed;
    total.members_added += r.members_added;
    total.handovers += r.handovers;
    total.rotations += r.rotations;
  }
  std::ostringstream os;
  os << "isd_m,n_users,scheme,reuse,mean_rate_hz,rate_ci95,p_md,p_md_ci95,replications,beacons,"
        "misses,member_leaves,dissolutions,groups_formed,members_added,handovers,rotations\n";
  os << format_number(s.deployment.isd_m) << ',' << s.deployment.n_users << ','
     << (s.deployment.grouping == mobility::Grouping::grouped ? "grouped" : "individual") << ','
     << (s.reuse ? "on" : "off") << ',' << format_number(agg.mean_rate_hz.mean) << ','
     << format_number(agg.mean_rate_hz.ci95) << ',' << format_number(agg.p_md.mean) << ','
     << format_number(agg.p_md.ci95) << ',' << s.replications << ',' << total.beacons << ','
     << total.misses << ',' << total.member_leaves << ',' << total.dissolutions << ','
     << total.groups_formed << ',' << total.members_added << ',' << total.handovers << ','
     << total.rotations << '\n';
  return os.str();
}

std::vector<fs::path> run_preset(const config::Config& cfg, Preset preset, const fs::path& out_dir,
                                 const std::string& event_log_path) {
  if (!event_log_path.empty() && preset != Preset::custom)
    throw std::invalid_argument("the event log is only written by the custom preset");
  cfg.resolve();
  std::vector<fs::path> written;
  switch (preset) {
    case Preset::fig3:
      written.push_back(out_dir / "beacon_rate.csv");
      write_atomic(written.back(), beacon_rate_csv(cfg));
      break;
    case Preset::fig4:
      written.push_back(out_dir / "miss_detection.csv");
      write_atomic(written.back(), miss_detection_csv(cfg));
      break;
    case Preset::fig6:
      written.push_back(out_dir / "wrong_cell.csv");
      write_atomic(written.back(), wrong_cell_csv(cfg));
      break;
    case Preset::custom: {
      std::ostringstream events;
      const std::string csv = scenario_csv(cfg, event_log_path.empty() ? nullptr : &events);
      written.push_back(out_dir / "scenario.csv");
      write_atomic(written.back(), csv);
      if (!event_log_path.empty()) {
        written.emplace_back(event_log_path);
        write_atomic(written.back(), events.str());
      }
      break;
    }
  }
  return written;
}

}  // namespace beaconsim::experiments
