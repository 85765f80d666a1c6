/*
 * Copyright 2026 The crowdnav Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/*
 * C interface of the crowd navigation benchmark. Every call returns a
 * cn_status; on failure cn_last_error() describes the error for the calling
 * thread until its next call. Handles are opaque and owned by the caller;
 * destroy functions accept NULL.
 */

#ifndef CROWDNAV_CROWDNAV_H_
#define CROWDNAV_CROWDNAV_H_

#include <stddef.h>
#include <stdint.h>

#if defined(CROWDNAV_BUILD_SHARED)
#define CROWDNAV_API __attribute__((visibility("default")))
#else
#define CROWDNAV_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum cn_status {
  CN_OK = 0,
  CN_ERR_INVALID_ARGUMENT = 1,
  CN_ERR_CONFIG = 2,
  CN_ERR_IO = 3,
  CN_ERR_NUMERIC = 4,
  CN_ERR_INTERNAL = 5
} cn_status;

typedef enum cn_outcome {
  CN_OUTCOME_SUCCESS = 0,
  CN_OUTCOME_COLLISION = 1,
  CN_OUTCOME_TIMEOUT = 2
} cn_outcome;

/* Pipeline configuration: defaults plus key = value overrides. */
typedef struct cn_config cn_config;
/* One experiment: a configuration, a mode and the trial layout. */
typedef struct cn_spec cn_spec;
/* Per-trial records and the summary of a finished experiment. */
typedef struct cn_result cn_result;

typedef struct cn_summary {
  int agents;
  int trials;
  double success_rate;
  double collision_rate;
  double timeout_rate;
  double mean_steps;
  double mean_dagap_s; /* per plan */
  double mean_cfs_s;   /* per plan */
  double mean_ssa_s;   /* per step */
  double cfs_feasibility_rate;
} cn_summary;

typedef struct cn_trial {
  uint64_t seed;
  cn_outcome outcome;
  int64_t steps;
  int64_t collision_tick; /* -1 without collision */
  int collision_agent;    /* -1 without collision */
  int plans;
  double min_clearance; /* +inf without agents */
} cn_trial;

CROWDNAV_API const char* cn_version(void);
/* Message of the calling thread's last failure; "" after a success. */
CROWDNAV_API const char* cn_last_error(void);
CROWDNAV_API const char* cn_status_name(cn_status status);

CROWDNAV_API cn_status cn_config_create(cn_config** out);
CROWDNAV_API void cn_config_destroy(cn_config* config);
/* Appends the lines of a config file. Scenario keys take effect before the
 * shared constants are synced into the modules, every other key after. */
CROWDNAV_API cn_status cn_config_load(cn_config* config, const char* path);
/* Appends one key = value override. */
CROWDNAV_API cn_status cn_config_set(cn_config* config, const char* key, const char* value);

/* mode: "sgap", "dagap", "dagap-cfs" or "full". */
CROWDNAV_API cn_status cn_spec_create(const cn_config* config, const char* mode, cn_spec** out);
CROWDNAV_API void cn_spec_destroy(cn_spec* spec);
CROWDNAV_API cn_status cn_spec_set_agents(cn_spec* spec, int agents);
CROWDNAV_API cn_status cn_spec_set_trials(cn_spec* spec, int trials);
CROWDNAV_API cn_status cn_spec_set_seed(cn_spec* spec, uint64_t base_seed);
CROWDNAV_API cn_status cn_spec_set_workers(cn_spec* spec, int workers);
/* NULL or "" writes nothing. */
CROWDNAV_API cn_status cn_spec_set_output(cn_spec* spec, const char* dir, int emit_plots);
CROWDNAV_API cn_status cn_spec_set_continue_after_collision(cn_spec* spec, int enabled);

CROWDNAV_API cn_status cn_run(const cn_spec* spec, cn_result** out);
CROWDNAV_API void cn_result_destroy(cn_result* result);
CROWDNAV_API cn_status cn_result_summary(const cn_result* result, cn_summary* out);
CROWDNAV_API cn_status cn_result_mode(const cn_result* result, const char** out);
CROWDNAV_API cn_status cn_result_trial_count(const cn_result* result, int* out);
CROWDNAV_API cn_status cn_result_trial(const cn_result* result, int index, cn_trial* out);

/* Fixed-width table of `count` results. Copies at most `capacity` bytes,
 * NUL included, and stores the full length plus one in `needed`. */
CROWDNAV_API cn_status cn_format_table(const cn_result* const* results, int count, char* buffer,
                                       size_t capacity, size_t* needed);
/* CSV summary of `count` results, one row each. */
CROWDNAV_API cn_status cn_write_summary_csv(const cn_result* const* results, int count,
                                            const char* path);

#ifdef __cplusplus
}
#endif

#endif /* CROWDNAV_CROWDNAV_H_ */
