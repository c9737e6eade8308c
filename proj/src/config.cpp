#include "config.hpp"

#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace beaconsim::config {

using json = nlohmann::ordered_json;

namespace {

[[noreturn]] void bad(const std::string& where, const std::string& what) {
  throw std::invalid_argument(where + ": " + what);
}

void assign(const json& v, double& out, const std::string& where) {
  if (!v.is_number()) bad(where, "expected a number");
  out = v.get<double>();
}

void assign(const json& v, bool& out, const std::string& where) {
  if (!v.is_boolean()) bad(where, "expected true or false");
  out = v.get<bool>();
}

void assign(const json& v, std::string& out, const std::string& where) {
  if (!v.is_string()) bad(where, "expected a string");
  out = v.get<std::string>();
}

template <class Int>
  requires std::is_integral_v<Int>
void assign(const json& v, Int& out, const std::string& where) {
  if (!v.is_number_integer()) bad(where, "expected an integer");
  if constexpr (std::is_unsigned_v<Int>) {
    if (v.is_number_unsigned()) out = v.get<Int>();
    else if (v.get<std::int64_t>() >= 0) out = static_cast<Int>(v.get<std::int64_t>());
    else bad(where, "expected a non-negative integer");
  } else {
    out = v.get<Int>();
  }
}

template <class T>
void assign(const json& v, std::vector<T>& out, const std::string& where) {
  if (!v.is_array()) bad(where, "expected a list");
  std::vector<T> tmp(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) assign(v[i], tmp[i], where + "[" + std::to_string(i) + "]");
  out = std::move(tmp);
}

struct Field {
  const char* section;
  const char* key;
  std::function<json(const Config&)> get;
  std::function<void(Config&, const json&, const std::string&)> put;
};

#define BSIM_FIELD(sec, name, member)                                                   \
  Field {                                                                               \
    sec, name, [](const Config& c) { return json(c.member); },                          \
        [](Config& c, const json& v, const std::string& w) { assign(v, c.member, w); } \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      BSIM_FIELD("channel", "carrier_frequency_hz", scenario.channel.carrier_frequency_hz),
      BSIM_FIELD("channel", "sigma_sf_los_db", scenario.channel.sigma_sf_los_db),
      BSIM_FIELD("channel", "sigma_sf_nlos_db", scenario.channel.sigma_sf_nlos_db),
      BSIM_FIELD("channel", "trp_height_m", scenario.channel.trp_height_m),
      BSIM_FIELD("channel", "ue_height_m", scenario.channel.ue_height_m),
      Field{"channel", "los_model",
            [](const Config& c) {
              return json(c.scenario.channel.los_model == radio::LosModel::always_los
                              ? "always_los"
                              : "distance_probabilistic");
            },
            [](Config& c, const json& v, const std::string& w) {
              std::string s;
              assign(v, s, w);
              if (s == "always_los") c.scenario.channel.los_model = radio::LosModel::always_los;
              else if (s == "distance_probabilistic")
                c.scenario.channel.los_model = radio::LosModel::distance_probabilistic;
              else bad(w, "expected always_los or distance_probabilistic");
            }},
      BSIM_FIELD("channel", "tx_power_dbm", scenario.tx_power_dbm),

      BSIM_FIELD("detection", "n_antennas", scenario.detection.n_antennas),
      BSIM_FIELD("detection", "search_window", scenario.detection.search_window),
      Field{"detection", "threshold",
            [](const Config& c) {
              return c.threshold_auto ? json("auto") : json(c.scenario.detection.threshold);
            },
            [](Config& c, const json& v, const std::string& w) {
              if (v.is_string()) {
                if (v.get<std::string>() != "auto") bad(w, "expected a number or \"auto\"");
                c.threshold_auto = true;
              } else {
                assign(v, c.scenario.detection.threshold, w);
                c.threshold_auto = false;
              }
            }},
      BSIM_FIELD("detection", "target_pfa", target_pfa),
      BSIM_FIELD("detection", "sequence_length", scenario.detection.sequence_length),
      BSIM_FIELD("detection", "beacon_range_m", scenario.detection.beacon_range_m),
      Field{"detection", "noise_mode", [](const Config& c) { return json(to_string(c.noise_mode)); },
            [](Config& c, const json& v, const std::string& w) {
              std::string s;
              assign(v, s, w);
              if (s == "literal") c.noise_mode = NoiseMode::literal;
              else if (s == "derived") c.noise_mode = NoiseMode::derived;
              else bad(w, "expected literal or derived");
            }},
      BSIM_FIELD("detection", "noise_power_dbm", scenario.detection.noise_power_dbm),
      BSIM_FIELD("detection", "noise_figure_db", noise_figure_db),
      BSIM_FIELD("detection", "temperature_k", temperature_k),

      BSIM_FIELD("dimensioning", "system_bandwidth_hz", scenario.dimensioning.system_bandwidth_hz),
      BSIM_FIELD("dimensioning", "subcarrier_spacing_hz", scenario.dimensioning.subcarrier_spacing_hz),
      BSIM_FIELD("dimensioning", "sequence_length", scenario.dimensioning.sequence_length),
      BSIM_FIELD("dimensioning", "n_berb", scenario.dimensioning.n_berb),
      BSIM_FIELD("dimensioning", "n_roots", scenario.dimensioning.n_roots),
      BSIM_FIELD("dimensioning", "n_shifts", scenario.dimensioning.n_shifts),
      BSIM_FIELD("dimensioning", "n_scp", scenario.dimensioning.n_scp),
      BSIM_FIELD("dimensioning", "n_seq", scenario.dimensioning.n_seq),
      BSIM_FIELD("dimensioning", "n_sgt", scenario.dimensioning.n_sgt),
      BSIM_FIELD("dimensioning", "t_scp_ns", scenario.dimensioning.t_scp_ns),
      BSIM_FIELD("dimensioning", "t_seq_ns", scenario.dimensioning.t_seq_ns),
      BSIM_FIELD("dimensioning", "t_sgt_ns", scenario.dimensioning.t_sgt_ns),
      BSIM_FIELD("dimensioning", "occasions_per_second", scenario.dimensioning.occasions_per_second),
      BSIM_FIELD("dimensioning", "max_beacon_rate_hz", scenario.dimensioning.max_beacon_rate_hz),
      BSIM_FIELD("dimensioning", "reuse", scenario.reuse),
      BSIM_FIELD("dimensioning", "reuse_distance_m", scenario.reuse_distance_m),

      BSIM_FIELD("deployment", "isd_m", scenario.deployment.isd_m),
      BSIM_FIELD("deployment", "trps_per_side", scenario.deployment.trps_per_side),
      BSIM_FIELD("deployment", "trps_per_gnb_side", scenario.deployment.trps_per_gnb_side),
      BSIM_FIELD("deployment", "n_users", scenario.deployment.n_users),
      Field{"deployment", "grouping",
            [](const Config& c) {
              return json(c.scenario.deployment.grouping == mobility::Grouping::grouped ? "grouped"
                                                                                       : "individual");
            },
            [](Config& c, const json& v, const std::string& w) {
              std::string s;
              assign(v, s, w);
              if (s == "grouped") c.scenario.deployment.grouping = mobility::Grouping::grouped;
              else if (s == "individual") c.scenario.deployment.grouping = mobility::Grouping::individual;
              else bad(w, "expected grouped or individual");
            }},
      BSIM_FIELD("deployment", "group_size", scenario.deployment.group_size),
      BSIM_FIELD("deployment", "group_radius_m", scenario.deployment.group_radius_m),
      BSIM_FIELD("deployment", "speed_mps", scenario.deployment.speed_mps),
      BSIM_FIELD("deployment", "direction_change_mean_s", scenario.deployment.direction_change_mean_s),

      BSIM_FIELD("protocol", "miss_threshold", scenario.protocol.miss_threshold),
      BSIM_FIELD("protocol", "rotation_period_s", scenario.protocol.rotation_period_s),
      BSIM_FIELD("protocol", "track_window", scenario.protocol.track_window),
      BSIM_FIELD("protocol", "identify_radius_m", scenario.protocol.identify_radius_m),
      BSIM_FIELD("protocol", "handover_hysteresis", scenario.protocol.handover_hysteresis),
      BSIM_FIELD("protocol", "regroup", scenario.protocol.regroup),

      BSIM_FIELD("simulation", "duration_s", scenario.duration_s),
      BSIM_FIELD("simulation", "warmup_s", scenario.warmup_s),
      BSIM_FIELD("simulation", "scheduling_period_s", scenario.scheduling_period_s),
      BSIM_FIELD("simulation", "seed", scenario.seed),
      BSIM_FIELD("simulation", "replications", scenario.replications),
      BSIM_FIELD("simulation", "threads", scenario.threads),
      BSIM_FIELD("simulation", "simulate_radio", scenario.simulate_radio),
      BSIM_FIELD("simulation", "check_invariants", scenario.check_invariants),
      Field{"simulation", "forced_p_md",
            [](const Config& c) {
              return c.scenario.forced_p_md ? json(*c.scenario.forced_p_md) : json(nullptr);
            },
            [](Config& c, const json& v, const std::string& w) {
              if (v.is_null()) {
                c.scenario.forced_p_md.reset();
              } else {
                double p = 0.0;
                assign(v, p, w);
                c.scenario.forced_p_md = p;
              }
            }},

      BSIM_FIELD("experiments", "isds_m", experiments.isds_m),
      BSIM_FIELD("experiments", "users", experiments.users),
      BSIM_FIELD("experiments", "schemes", experiments.schemes),
      BSIM_FIELD("experiments", "fig3_simulate_radio", experiments.fig3_simulate_radio),
      BSIM_FIELD("experiments", "fig6_radii_m", experiments.fig6_radii_m),
      BSIM_FIELD("experiments", "fig6_drops", experiments.fig6.drops),
      BSIM_FIELD("experiments", "fig6_shadow_corr_los_m", experiments.fig6.shadow_corr_los_m),
      BSIM_FIELD("experiments", "fig6_shadow_corr_nlos_m", experiments.fig6.shadow_corr_nlos_m),
      BSIM_FIELD("experiments", "fig6_los_corr_m", experiments.fig6.los_corr_m),
  };
  return table;
}

#undef BSIM_FIELD

const Field* find_field(std::string_view section, std::string_view key) {
  for (const auto& f : fields())
    if (section == f.section && key == f.key) return &f;
  return nullptr;
}

bool known_section(std::string_view section) {
  for (const auto& f : fields())
    if (section == f.section) return true;
  return false;
}

void check_experiments(const Experiments& e) {
  for (double isd : e.isds_m)
    if (!(isd > 0.0)) bad("experiments.isds_m", "ISDs must be positive");
  for (int n : e.users)
    if (n < 1) bad("experiments.users", "user counts must be positive");
  for (const auto& s : e.schemes)
    if (s != "grouped" && s != "individual") bad("experiments.schemes", "unknown scheme '" + s + "'");
  for (double r : e.fig6_radii_m)
    if (!(r >= 0.0)) bad("experiments.fig6_radii_m", "radii must be non-negative");
  if (e.fig6.drops < 1) bad("experiments.fig6_drops", "need at least one drop");
}

Config apply_document(const json& doc, Config cfg) {
  if (!doc.is_object()) throw std::invalid_argument("configuration must be a JSON object");
  for (const auto& [section, body] : doc.items()) {
    if (!known_section(section)) bad(section, "unknown section");
    if (!body.is_object()) bad(section, "section must be an object");
    for (const auto& [key, value] : body.items()) {
      const Field* f = find_field(section, key);
      if (!f) bad(section + "." + key, "unknown key");
      f->put(cfg, value, section + "." + key);
    }
  }
  check_experiments(cfg.experiments);
  return cfg;
}

}  // namespace

std::string to_string(NoiseMode mode) { return mode == NoiseMode::literal ? "literal" : "derived"; }

engine::Scenario Config::resolve() const {
  engine::Scenario s = scenario;
  if (noise_mode == NoiseMode::derived) {
    const double b_seq = static_cast<double>(s.dimensioning.sequence_length) *
                         static_cast<double>(s.dimensioning.subcarrier_spacing_hz);
    s.detection.noise_power_dbm = radio::thermal_noise_dbm(temperature_k, noise_figure_db, b_seq);
  }
  if (threshold_auto)
    s.detection.threshold =
        radio::calibrate_threshold(target_pfa, s.detection.n_antennas, s.detection.search_window);
  s.validate();
  return s;
}

Config Config::resolved() const {
  Config out = *this;
  const engine::Scenario s = resolve();
  out.scenario.detection.threshold = s.detection.threshold;
  out.scenario.detection.noise_power_dbm = s.detection.noise_power_dbm;
  out.threshold_auto = false;
  out.noise_mode = NoiseMode::literal;
  return out;
}

Config from_json_text(std::string_view text, const Config& base) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("configuration is not valid JSON: ") + e.what());
  }
  return apply_document(doc, base);
}

Config load_file(const std::string& path, const Config& base) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open configuration file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str(), base);
}

std::string to_json_text(const Config& cfg) {
  json doc = json::object();
  for (const auto& f : fields()) doc[f.section][f.key] = f.get(cfg);
  return doc.dump(2) + "\n";
}

void set(Config& cfg, std::string_view dotted_key, std::string_view value) {
  const auto dot = dotted_key.find('.');
  if (dot == std::string_view::npos) bad(std::string(dotted_key), "expected section.key");
  const std::string section(dotted_key.substr(0, dot));
  const std::string key(dotted_key.substr(dot + 1));
  if (!find_field(section, key)) bad(std::string(dotted_key), "unknown key");
  json v = json::parse(value, nullptr, false);
  if (v.is_discarded()) v = std::string(value);
  json doc;
  doc[section][key] = v;
  cfg = apply_document(doc, cfg);
}

}  // namespace beaconsim::config
