#include "beaconsim/beaconsim.h"

#include <cstring>
#include <filesystem>
#include <new>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "config.hpp"
#include "engine.hpp"
#include "experiments.hpp"
#include "radio.hpp"
#include "resources.hpp"

struct bsim_config {
  beaconsim::config::Config cfg;
};

namespace {

thread_local std::string last_error;

bsim_status fail(bsim_status code, const std::string& message) {
  last_error = message;
  return code;
}

template <class F>
bsim_status guarded(F&& body) {
  try {
    last_error.clear();
    body();
    return BSIM_OK;
  } catch (const std::bad_alloc&) {
    return fail(BSIM_ERR_INTERNAL, "out of memory");
  } catch (const beaconsim::config::ParseError& e) {
    return fail(BSIM_ERR_PARSE, e.what());
  } catch (const nlohmann::json::exception& e) {
    return fail(BSIM_ERR_PARSE, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(BSIM_ERR_IO, e.what());
  } catch (const std::invalid_argument& e) {
    return fail(BSIM_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::domain_error& e) {
    return fail(BSIM_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::out_of_range& e) {
    return fail(BSIM_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::logic_error& e) {
    return fail(BSIM_ERR_INVARIANT, e.what());
  } catch (const std::runtime_error& e) {
    return fail(BSIM_ERR_IO, e.what());
  } catch (const std::exception& e) {
    return fail(BSIM_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(BSIM_ERR_INTERNAL, "unknown error");
  }
}

bsim_status copy_out(const std::string& text, char* buf, size_t cap, size_t* len) {
  if (len) *len = text.size() + 1;
  if (!buf) return BSIM_OK;
  if (cap < text.size() + 1) return fail(BSIM_ERR_BUFFER_TOO_SMALL, "buffer too small");
  std::memcpy(buf, text.c_str(), text.size() + 1);
  return BSIM_OK;
}

#define BSIM_REQUIRE(cond, what) \
  if (!(cond)) return fail(BSIM_ERR_INVALID_ARGUMENT, what)

}  // namespace

extern "C" {

const char* bsim_last_error(void) { return last_error.c_str(); }

const char* bsim_version(void) { return "0.1.0"; }

bsim_status bsim_config_create(bsim_config** out) {
  BSIM_REQUIRE(out, "null output pointer");
  return guarded([&] { *out = new bsim_config{}; });
}

void bsim_config_destroy(bsim_config* cfg) { delete cfg; }

bsim_status bsim_config_load_file(bsim_config* cfg, const char* path) {
  BSIM_REQUIRE(cfg && path, "null argument");
  return guarded([&] { cfg->cfg = beaconsim::config::load_file(path, cfg->cfg); });
}

bsim_status bsim_config_load_string(bsim_config* cfg, const char* json) {
  BSIM_REQUIRE(cfg && json, "null argument");
  return guarded([&] { cfg->cfg = beaconsim::config::from_json_text(json, cfg->cfg); });
}

bsim_status bsim_config_set(bsim_config* cfg, const char* key, const char* value) {
  BSIM_REQUIRE(cfg && key && value, "null argument");
  return guarded([&] { beaconsim::config::set(cfg->cfg, key, value); });
}

bsim_status bsim_config_to_string(const bsim_config* cfg, char* buf, size_t cap, size_t* len) {
  BSIM_REQUIRE(cfg, "null config");
  std::string text;
  const auto st = guarded([&] { text = beaconsim::config::to_json_text(cfg->cfg); });
  return st == BSIM_OK ? copy_out(text, buf, cap, len) : st;
}

bsim_status bsim_config_resolved_to_string(const bsim_config* cfg, char* buf, size_t cap,
                                           size_t* len) {
  BSIM_REQUIRE(cfg, "null config");
  std::string text;
  const auto st = guarded([&] { text = beaconsim::config::to_json_text(cfg->cfg.resolved()); });
  return st == BSIM_OK ? copy_out(text, buf, cap, len) : st;
}

bsim_status bsim_config_dimension(const bsim_config* cfg, bsim_dimension* out) {
  BSIM_REQUIRE(cfg && out, "null argument");
  return guarded([&] {
    const auto g = beaconsim::resources::dimension(cfg->cfg.scenario.dimensioning);
    *out = {g.m_seq, g.m_sys, g.n_be, g.t_be_ns, g.b_seq_hz, g.sample_rate_hz, g.capacity_per_second};
  });
}

bsim_status bsim_config_dimension_table(const bsim_config* cfg, char* buf, size_t cap, size_t* len) {
  BSIM_REQUIRE(cfg, "null config");
  std::string text;
  const auto st = guarded([&] {
    text = beaconsim::resources::dimension_table(
        beaconsim::resources::dimension(cfg->cfg.scenario.dimensioning));
  });
  return st == BSIM_OK ? copy_out(text, buf, cap, len) : st;
}

bsim_status bsim_preset_from_name(const char* name, bsim_preset* out) {
  BSIM_REQUIRE(name && out, "null argument");
  const auto p = beaconsim::experiments::preset_from_name(name);
  if (!p) return fail(BSIM_ERR_INVALID_ARGUMENT, std::string("unknown preset '") + name + "'");
  *out = static_cast<bsim_preset>(*p);
  last_error.clear();
  return BSIM_OK;
}

bsim_status bsim_run_preset(const bsim_config* cfg, bsim_preset preset, const char* out_dir,
                            const char* event_log_path) {
  BSIM_REQUIRE(cfg && out_dir, "null argument");
  BSIM_REQUIRE(preset >= BSIM_PRESET_FIG3 && preset <= BSIM_PRESET_CUSTOM, "unknown preset");
  return guarded([&] {
    beaconsim::experiments::run_preset(cfg->cfg, static_cast<beaconsim::experiments::Preset>(preset),
                                       out_dir, event_log_path ? event_log_path : "");
  });
}

bsim_status bsim_run_scenario(const bsim_config* cfg, bsim_metrics* out) {
  BSIM_REQUIRE(cfg && out, "null argument");
  return guarded([&] {
    const auto agg = beaconsim::engine::replicate(cfg->cfg.resolve());
    bsim_metrics m{};
    m.mean_rate_hz = agg.mean_rate_hz.mean;
    m.mean_rate_ci95 = agg.mean_rate_hz.ci95;
    m.p_md = agg.p_md.mean;
    m.p_md_ci95 = agg.p_md.ci95;
    m.replications = static_cast<int32_t>(agg.runs.size());
    for (const auto& r : agg.runs) {
      m.beacons += r.beacons;
      m.misses += r.misses;
      m.member_leaves += r.member_leaves;
      m.dissolutions += r.dissolutions;
      m.groups_formed += r.groups_formed;
      m.handovers += r.handovers;
      m.rotations += r.rotations;
    }
    *out = m;
  });
}

bsim_status bsim_calibrate_threshold(double target_pfa, int n_antennas, int search_window,
                                     double* out) {
  BSIM_REQUIRE(out, "null output pointer");
  return guarded([&] { *out = beaconsim::radio::calibrate_threshold(target_pfa, n_antennas, search_window); });
}

bsim_status bsim_miss_detection_probability(double sinr, int n_antennas, int search_window,
                                            double threshold, int sequence_length,
                                            double beacon_range_m, double distance_m, double* out) {
  BSIM_REQUIRE(out, "null output pointer");
  return guarded([&] {
    beaconsim::radio::DetectionParams det;
    det.n_antennas = n_antennas;
    det.search_window = search_window;
    det.threshold = threshold;
    det.sequence_length = sequence_length;
    det.beacon_range_m = beacon_range_m;
    det.validate();
    if (!(distance_m >= 0.0)) throw std::invalid_argument("distance must be non-negative");
    *out = beaconsim::radio::miss_detection_prob(sinr, det, distance_m);
  });
}

}  // extern "C"
