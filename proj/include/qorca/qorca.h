/*
 * qorca.h
 * qorca
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

#ifndef QORCA_H
#define QORCA_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define QORCA_API __declspec(dllexport)
#else
#define QORCA_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum qorca_status {
  QORCA_OK = 0,
  QORCA_ERROR_INVALID_ARGUMENT = 1,
  QORCA_ERROR_IO = 2,
  QORCA_ERROR_PARSE = 3,
  QORCA_ERROR_INVALID_SCENARIO = 4,
  QORCA_ERROR_ABORTED = 5,
  QORCA_ERROR_PORT_IN_USE = 6,
  QORCA_ERROR_STATE = 7,
  QORCA_ERROR_INTERNAL = 8
} qorca_status;

QORCA_API const char* qorca_version(void);
QORCA_API const char* qorca_status_name(qorca_status status);

/* Message for the last failing call on this thread; "" when none. */
QORCA_API const char* qorca_last_error(void);
/* JSON pointer of the offending scenario key for the last
 * QORCA_ERROR_INVALID_SCENARIO / QORCA_ERROR_PARSE on this thread; "" when
 * not applicable. */
QORCA_API const char* qorca_last_error_pointer(void);

/* Strings returned through char** out-parameters are owned by the caller. */
QORCA_API void qorca_string_free(char* s);

/* ---- scenarios ---- */

typedef struct qorca_scenario qorca_scenario;

QORCA_API qorca_status qorca_scenario_load(const char* path, qorca_scenario** out);
QORCA_API qorca_status qorca_scenario_parse(const char* json_text, qorca_scenario** out);
QORCA_API void qorca_scenario_free(qorca_scenario* scenario);

QORCA_API qorca_status qorca_scenario_set_seed(qorca_scenario* scenario, uint64_t seed);
QORCA_API qorca_status qorca_scenario_set_tick_dt(qorca_scenario* scenario, double tick_dt);
QORCA_API qorca_status qorca_scenario_set_tau(qorca_scenario* scenario, double tau);
QORCA_API qorca_status qorca_scenario_set_duration(qorca_scenario* scenario, double duration);
QORCA_API qorca_status qorca_scenario_to_json(const qorca_scenario* scenario, char** out);
/* 16 hex digits plus terminator. */
QORCA_API qorca_status qorca_scenario_hash(const qorca_scenario* scenario, char out[17]);
QORCA_API size_t qorca_scenario_agent_count(const qorca_scenario* scenario);

/* ---- single runs ---- */

typedef struct qorca_run_info {
  long ticks;
  int aborted;
  long abort_tick;
  double min_clearance;
  int collided;
  int dance_events;
  char label[32];
} qorca_run_info;

/* Writes the run log (JSONL) to out_path. Returns QORCA_ERROR_ABORTED when
 * the world went non-finite; the log, with its abort record, is still
 * written. */
QORCA_API qorca_status qorca_run(const qorca_scenario* scenario, const char* out_path, qorca_run_info* info);

/* ---- stepping ---- */

typedef struct qorca_sim qorca_sim;

QORCA_API qorca_status qorca_sim_create(const qorca_scenario* scenario, qorca_sim** out);
QORCA_API void qorca_sim_free(qorca_sim* sim);
/* tick_json may be NULL. */
QORCA_API qorca_status qorca_sim_step(qorca_sim* sim, char** tick_json);
QORCA_API long qorca_sim_tick(const qorca_sim* sim);
QORCA_API qorca_status qorca_sim_set_preferred(qorca_sim* sim, int agent_id, const double velocity[3]);
QORCA_API qorca_status qorca_sim_agent_state(const qorca_sim* sim, int agent_id, double position[3],
                                             double velocity[3]);

/* ---- batches ---- */

typedef struct qorca_batch_options {
  const uint64_t* seeds;
  size_t seed_count;
  const double* noise_levels; /* may be NULL with noise_count 0 */
  size_t noise_count;
  unsigned workers;
  const char* out_dir; /* receives runs/, summary.csv, sweep.csv, failures.csv */
} qorca_batch_options;

typedef struct qorca_batch_info {
  size_t runs;
  size_t failed;
  size_t aborted;
} qorca_batch_info;

QORCA_API qorca_status qorca_batch(const qorca_scenario* scenario, const qorca_batch_options* options,
                                   qorca_batch_info* info);

/* ---- analysis ---- */

/* Reads run logs and writes the per-run summary CSV and the per-noise sweep
 * CSV. Either output path may be NULL. */
QORCA_API qorca_status qorca_analyze(const char* const* log_paths, size_t count, const char* summary_csv,
                                     const char* sweep_csv, size_t* runs_read);

/* ---- live bridge ---- */

typedef struct qorca_server qorca_server;

typedef struct qorca_server_options {
  const char* address; /* NULL: 127.0.0.1 */
  unsigned short port; /* 0: any free port */
  double realtime_factor; /* <= 0: unpaced */
  double broadcast_hz;
} qorca_server_options;

QORCA_API void qorca_server_options_init(qorca_server_options* options);
QORCA_API qorca_status qorca_server_start(const qorca_scenario* scenario, const qorca_server_options* options,
                                          qorca_server** out);
QORCA_API unsigned short qorca_server_port(const qorca_server* server);
QORCA_API qorca_status qorca_server_health(const qorca_server* server, char** json);
QORCA_API void qorca_server_stop(qorca_server* server);
QORCA_API void qorca_server_free(qorca_server* server);

#ifdef __cplusplus
}
#endif

#endif /* QORCA_H */
