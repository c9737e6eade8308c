#ifndef BEACONSIM_BEACONSIM_H
#define BEACONSIM_BEACONSIM_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(BEACONSIM_BUILDING)
#    define BEACONSIM_API __declspec(dllexport)
#  else
#    define BEACONSIM_API __declspec(dllimport)
#  endif
#else
#  define BEACONSIM_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum bsim_status {
  BSIM_OK = 0,
  BSIM_ERR_INVALID_ARGUMENT = 1, /* bad parameter, unknown key, bad value */
  BSIM_ERR_PARSE = 2,            /* configuration text is not valid */
  BSIM_ERR_IO = 3,               /* file could not be read or written */
  BSIM_ERR_BUFFER_TOO_SMALL = 4, /* *len holds the required size */
  BSIM_ERR_INVARIANT = 5,        /* a simulation invariant was violated */
  BSIM_ERR_INTERNAL = 6
} bsim_status;

typedef enum bsim_preset {
  BSIM_PRESET_FIG3 = 0,
  BSIM_PRESET_FIG4 = 1,
  BSIM_PRESET_FIG6 = 2,
  BSIM_PRESET_CUSTOM = 3
} bsim_preset;

/* Opaque configuration handle. Not thread-safe; use one per thread. */
typedef struct bsim_config bsim_config;

typedef struct bsim_dimension {
  int64_t m_seq;
  int64_t m_sys;
  int64_t n_be;
  int64_t t_be_ns;
  int64_t b_seq_hz;
  int64_t sample_rate_hz;
  int64_t capacity_per_second;
} bsim_dimension;

typedef struct bsim_metrics {
  double mean_rate_hz;
  double mean_rate_ci95;
  double p_md;
  double p_md_ci95;
  int32_t replications;
  int64_t beacons;
  int64_t misses;
  int64_t member_leaves;
  int64_t dissolutions;
  int64_t groups_formed;
  int64_t handovers;
  int64_t rotations;
} bsim_metrics;

/* Message for the last failed call on this thread; empty after success. */
BEACONSIM_API const char* bsim_last_error(void);
BEACONSIM_API const char* bsim_version(void);

BEACONSIM_API bsim_status bsim_config_create(bsim_config** out);
BEACONSIM_API void bsim_config_destroy(bsim_config* cfg);
BEACONSIM_API bsim_status bsim_config_load_file(bsim_config* cfg, const char* path);
BEACONSIM_API bsim_status bsim_config_load_string(bsim_config* cfg, const char* json);
/* key is "section.key"; value is JSON, or a bare string. */
BEACONSIM_API bsim_status bsim_config_set(bsim_config* cfg, const char* key, const char* value);

/* Copies the configuration as JSON text. *len receives the size including the
   terminating NUL; pass buf = NULL to query it. */
BEACONSIM_API bsim_status bsim_config_to_string(const bsim_config* cfg, char* buf, size_t cap,
                                                size_t* len);

/* As above, with the detection threshold and noise power resolved to
   numbers. Loading the result reproduces the same scenario. */
BEACONSIM_API bsim_status bsim_config_resolved_to_string(const bsim_config* cfg, char* buf,
                                                         size_t cap, size_t* len);

BEACONSIM_API bsim_status bsim_config_dimension(const bsim_config* cfg, bsim_dimension* out);
BEACONSIM_API bsim_status bsim_config_dimension_table(const bsim_config* cfg, char* buf, size_t cap,
                                                      size_t* len);

BEACONSIM_API bsim_status bsim_preset_from_name(const char* name, bsim_preset* out);

/* Writes the preset's CSV into out_dir. event_log_path may be NULL; it is
   only accepted for BSIM_PRESET_CUSTOM. */
BEACONSIM_API bsim_status bsim_run_preset(const bsim_config* cfg, bsim_preset preset,
                                          const char* out_dir, const char* event_log_path);

BEACONSIM_API bsim_status bsim_run_scenario(const bsim_config* cfg, bsim_metrics* out);

BEACONSIM_API bsim_status bsim_calibrate_threshold(double target_pfa, int n_antennas,
                                                   int search_window, double* out);
BEACONSIM_API bsim_status bsim_miss_detection_probability(double sinr, int n_antennas,
                                                          int search_window, double threshold,
                                                          int sequence_length, double beacon_range_m,
                                                          double distance_m, double* out);

#ifdef __cplusplus
}
#endif

#endif
