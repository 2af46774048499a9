/*
 * capi.cpp
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

#include "qorca/qorca.h"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <new>
#include <string>

#include "qorca/analysis.hpp"
#include "qorca/batch.hpp"
#include "qorca/bridge_server.hpp"

struct qorca_scenario {
  qorca::Scenario value;
};

struct qorca_sim {
  explicit qorca_sim(const qorca::Scenario& s) : sim(s) {}
  qorca::Simulation sim;
};

struct qorca_server {
  std::unique_ptr<qorca::bridge::BridgeServer> server;
};

namespace {

namespace fs = std::filesystem;

thread_local std::string last_error;
thread_local std::string last_pointer;

qorca_status fail(qorca_status status, std::string message, std::string pointer = {}) {
  last_error = std::move(message);
  last_pointer = std::move(pointer);
  return status;
}

template <class F>
qorca_status guarded(F&& f) {
  last_error.clear();
  last_pointer.clear();
  try {
    return f();
  } catch (const qorca::ScenarioError& e) {
    return fail(e.pointer().empty() && std::strstr(e.what(), "malformed JSON") ? QORCA_ERROR_PARSE
                                                                               : QORCA_ERROR_INVALID_SCENARIO,
                e.what(), e.pointer());
  } catch (const qorca::IoError& e) {
    return fail(QORCA_ERROR_IO, e.what());
  } catch (const qorca::RunLogError& e) {
    return fail(QORCA_ERROR_PARSE, e.what());
  } catch (const qorca::bridge::PortInUseError& e) {
    return fail(QORCA_ERROR_PORT_IN_USE, e.what());
  } catch (const std::invalid_argument& e) {
    return fail(QORCA_ERROR_INVALID_ARGUMENT, e.what());
  } catch (const fs::filesystem_error& e) {
    return fail(QORCA_ERROR_IO, e.what());
  } catch (const std::bad_alloc&) {
    return fail(QORCA_ERROR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(QORCA_ERROR_INTERNAL, e.what());
  }
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw qorca::IoError("cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw qorca::IoError("write failed for '" + path.string() + "'");
}

void write_log(const fs::path& path, const qorca::RunLog& log) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw qorca::IoError("cannot write '" + path.string() + "'");
  qorca::write_runlog(out, log);
  if (!out) throw qorca::IoError("write failed for '" + path.string() + "'");
}

#define QORCA_REQUIRE(cond, what) \
  if (!(cond)) return fail(QORCA_ERROR_INVALID_ARGUMENT, what)

}  // namespace

extern "C" {

const char* qorca_version(void) { return "1.0.0"; }

const char* qorca_status_name(qorca_status status) {
  switch (status) {
    case QORCA_OK: return "ok";
    case QORCA_ERROR_INVALID_ARGUMENT: return "invalid_argument";
    case QORCA_ERROR_IO: return "io";
    case QORCA_ERROR_PARSE: return "parse";
    case QORCA_ERROR_INVALID_SCENARIO: return "invalid_scenario";
    case QORCA_ERROR_ABORTED: return "aborted";
    case QORCA_ERROR_PORT_IN_USE: return "port_in_use";
    case QORCA_ERROR_STATE: return "state";
    case QORCA_ERROR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* qorca_last_error(void) { return last_error.c_str(); }
const char* qorca_last_error_pointer(void) { return last_pointer.c_str(); }
void qorca_string_free(char* s) { std::free(s); }

qorca_status qorca_scenario_load(const char* path, qorca_scenario** out) {
  QORCA_REQUIRE(path && out, "path and out are required");
  return guarded([&] {
    auto s = std::make_unique<qorca_scenario>(qorca_scenario{qorca::load_scenario(path)});
    qorca::validate(s->value);
    *out = s.release();
    return QORCA_OK;
  });
}

qorca_status qorca_scenario_parse(const char* json_text, qorca_scenario** out) {
  QORCA_REQUIRE(json_text && out, "json_text and out are required");
  return guarded([&] {
    auto s = std::make_unique<qorca_scenario>(qorca_scenario{qorca::parse_scenario(json_text)});
    qorca::validate(s->value);
    *out = s.release();
    return QORCA_OK;
  });
}

void qorca_scenario_free(qorca_scenario* scenario) { delete scenario; }

qorca_status qorca_scenario_set_seed(qorca_scenario* scenario, uint64_t seed) {
  QORCA_REQUIRE(scenario, "scenario is required");
  scenario->value.seed = seed;
  return QORCA_OK;
}

qorca_status qorca_scenario_set_tick_dt(qorca_scenario* scenario, double tick_dt) {
  QORCA_REQUIRE(scenario, "scenario is required");
  QORCA_REQUIRE(std::isfinite(tick_dt) && tick_dt > 0.0, "tick_dt must be positive");
  return guarded([&] {
    qorca::Scenario s = scenario->value;
    s.tick_dt = tick_dt;
    qorca::validate(s);
    scenario->value = std::move(s);
    return QORCA_OK;
  });
}

qorca_status qorca_scenario_set_tau(qorca_scenario* scenario, double tau) {
  QORCA_REQUIRE(scenario, "scenario is required");
  QORCA_REQUIRE(std::isfinite(tau) && tau > 0.0, "tau must be positive");
  scenario->value.tau = tau;
  return QORCA_OK;
}

qorca_status qorca_scenario_set_duration(qorca_scenario* scenario, double duration) {
  QORCA_REQUIRE(scenario, "scenario is required");
  QORCA_REQUIRE(std::isfinite(duration) && duration >= scenario->value.tick_dt, "duration must cover one tick");
  scenario->value.duration = duration;
  return QORCA_OK;
}

qorca_status qorca_scenario_to_json(const qorca_scenario* scenario, char** out) {
  QORCA_REQUIRE(scenario && out, "scenario and out are required");
  return guarded([&] {
    *out = copy_string(qorca::scenario_to_json(scenario->value).dump(2));
    return QORCA_OK;
  });
}

qorca_status qorca_scenario_hash(const qorca_scenario* scenario, char out[17]) {
  QORCA_REQUIRE(scenario && out, "scenario and out are required");
  return guarded([&] {
    const std::string h = qorca::scenario_hash(scenario->value);
    std::snprintf(out, 17, "%s", h.c_str());
    return QORCA_OK;
  });
}

size_t qorca_scenario_agent_count(const qorca_scenario* scenario) {
  return scenario ? scenario->value.agents.size() : 0;
}

qorca_status qorca_run(const qorca_scenario* scenario, const char* out_path, qorca_run_info* info) {
  QORCA_REQUIRE(scenario && out_path, "scenario and out_path are required");
  return guarded([&] {
    const qorca::RunLog log = qorca::run(scenario->value);
    write_log(out_path, log);
    const qorca::RunClassification c = qorca::classify(log);
    if (info) {
      *info = qorca_run_info{};
      info->ticks = static_cast<long>(log.ticks.size());
      info->aborted = log.abort ? 1 : 0;
      info->abort_tick = log.abort ? log.abort->tick : -1;
      info->min_clearance = c.min_clearance;
      info->collided = c.collided ? 1 : 0;
      info->dance_events = static_cast<int>(c.dance_event_count);
      std::snprintf(info->label, sizeof info->label, "%s", std::string(qorca::label_name(c.label)).c_str());
    }
    if (log.abort) return fail(QORCA_ERROR_ABORTED, "run aborted at tick " + std::to_string(log.abort->tick) + ": " +
                                                        log.abort->reason);
    return QORCA_OK;
  });
}

qorca_status qorca_sim_create(const qorca_scenario* scenario, qorca_sim** out) {
  QORCA_REQUIRE(scenario && out, "scenario and out are required");
  return guarded([&] {
    *out = new qorca_sim(scenario->value);
    return QORCA_OK;
  });
}

void qorca_sim_free(qorca_sim* sim) { delete sim; }

qorca_status qorca_sim_step(qorca_sim* sim, char** tick_json) {
  QORCA_REQUIRE(sim, "sim is required");
  if (sim->sim.aborted()) return fail(QORCA_ERROR_ABORTED, sim->sim.abort()->reason);
  return guarded([&] {
    const qorca::TickRecord rec = sim->sim.step();
    if (sim->sim.aborted()) return fail(QORCA_ERROR_ABORTED, sim->sim.abort()->reason);
    if (tick_json) *tick_json = copy_string(qorca::tick_to_json(rec).dump());
    return QORCA_OK;
  });
}

long qorca_sim_tick(const qorca_sim* sim) { return sim ? sim->sim.tick() : -1; }

qorca_status qorca_sim_set_preferred(qorca_sim* sim, int agent_id, const double velocity[3]) {
  QORCA_REQUIRE(sim && velocity, "sim and velocity are required");
  if (!sim->sim.set_external_preferred(agent_id, {velocity[0], velocity[1], velocity[2]}))
    return fail(QORCA_ERROR_INVALID_ARGUMENT, "agent " + std::to_string(agent_id) +
                                                  " is not externally steered or the velocity is not finite");
  return QORCA_OK;
}

qorca_status qorca_sim_agent_state(const qorca_sim* sim, int agent_id, double position[3], double velocity[3]) {
  QORCA_REQUIRE(sim, "sim is required");
  for (const qorca::AgentState& a : sim->sim.agents())
    if (a.id == agent_id) {
      if (position) position[0] = a.pos.x, position[1] = a.pos.y, position[2] = a.pos.z;
      if (velocity) velocity[0] = a.vel.x, velocity[1] = a.vel.y, velocity[2] = a.vel.z;
      return QORCA_OK;
    }
  return fail(QORCA_ERROR_INVALID_ARGUMENT, "no agent " + std::to_string(agent_id));
}

qorca_status qorca_batch(const qorca_scenario* scenario, const qorca_batch_options* options,
                         qorca_batch_info* info) {
  QORCA_REQUIRE(scenario && options && options->out_dir, "scenario, options and out_dir are required");
  QORCA_REQUIRE(options->seeds || options->seed_count == 0, "seeds is NULL");
  QORCA_REQUIRE(options->noise_levels || options->noise_count == 0, "noise_levels is NULL");
  return guarded([&] {
    const fs::path dir(options->out_dir);
    fs::create_directories(dir / "runs");
    const std::span<const std::uint64_t> seeds(options->seeds, options->seed_count);
    const std::span<const double> noise(options->noise_levels, options->noise_count);
    const std::vector<qorca::Scenario> jobs = qorca::expand_batch(scenario->value, seeds, noise);
    const std::size_t per_level = std::max<std::size_t>(1, seeds.size());

    auto log_name = [&](std::size_t i) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "run_n%02zu_s%llu.jsonl", i / per_level,
                    static_cast<unsigned long long>(jobs[i].seed));
      return dir / "runs" / buf;
    };
    const std::vector<qorca::BatchResult> results = qorca::run_batch(
        jobs, options->workers == 0 ? 1u : options->workers,
        [&](std::size_t i, const qorca::RunLog& log) { write_log(log_name(i), log); });

    std::vector<qorca::RunSummary> summaries;
    std::string failures = "index,seed,noise,kind,message\n";
    qorca_batch_info local{results.size(), 0, 0};
    for (const qorca::BatchResult& r : results) {
      char noise_buf[32];
      std::snprintf(noise_buf, sizeof noise_buf, "%.9g", r.noise);
      if (r.summary) summaries.push_back(*r.summary);
      if (!r.error.empty()) {
        ++local.failed;
        failures += std::to_string(r.index) + "," + std::to_string(r.seed) + "," + noise_buf + ",error,\"" +
                    r.error + "\"\n";
      } else if (r.abort) {
        ++local.aborted;
        failures += std::to_string(r.index) + "," + std::to_string(r.seed) + "," + noise_buf + ",aborted,\"" +
                    r.abort->reason + "\"\n";
      }
    }
    std::ostringstream summary, sweep;
    qorca::write_summary_csv(summary, summaries);
    qorca::write_sweep_csv(sweep, qorca::sweep_summary(summaries));
    write_file(dir / "summary.csv", summary.str());
    write_file(dir / "sweep.csv", sweep.str());
    write_file(dir / "failures.csv", failures);
    if (info) *info = local;
    return QORCA_OK;
  });
}

qorca_status qorca_analyze(const char* const* log_paths, size_t count, const char* summary_csv,
                           const char* sweep_csv, size_t* runs_read) {
  QORCA_REQUIRE(log_paths || count == 0, "log_paths is NULL");
  return guarded([&] {
    std::vector<qorca::RunSummary> summaries;
    for (size_t i = 0; i < count; ++i) {
      if (!log_paths[i]) throw std::invalid_argument("log path is NULL");
      summaries.push_back(qorca::summarize(qorca::load_runlog(log_paths[i])));
    }
    if (summary_csv) {
      std::ostringstream out;
      qorca::write_summary_csv(out, summaries);
      write_file(summary_csv, out.str());
    }
    if (sweep_csv) {
      std::ostringstream out;
      qorca::write_sweep_csv(out, qorca::sweep_summary(summaries));
      write_file(sweep_csv, out.str());
    }
    if (runs_read) *runs_read = summaries.size();
    return QORCA_OK;
  });
}

void qorca_server_options_init(qorca_server_options* options) {
  if (!options) return;
  options->address = nullptr;
  options->port = 8765;
  options->realtime_factor = 1.0;
  options->broadcast_hz = 30.0;
}

qorca_status qorca_server_start(const qorca_scenario* scenario, const qorca_server_options* options,
                                qorca_server** out) {
  QORCA_REQUIRE(scenario && options && out, "scenario, options and out are required");
  QORCA_REQUIRE(std::isfinite(options->realtime_factor), "realtime_factor must be finite");
  QORCA_REQUIRE(std::isfinite(options->broadcast_hz) && options->broadcast_hz > 0.0, "broadcast_hz must be positive");
  return guarded([&] {
    qorca::bridge::ServerOptions o;
    if (options->address) o.address = options->address;
    o.port = options->port;
    o.live.realtime_factor = std::max(0.0, options->realtime_factor);
    o.live.broadcast_hz = options->broadcast_hz;
    auto s = std::make_unique<qorca_server>();
    s->server = std::make_unique<qorca::bridge::BridgeServer>(scenario->value, o);
    s->server->start();
    *out = s.release();
    return QORCA_OK;
  });
}

unsigned short qorca_server_port(const qorca_server* server) {
  return server && server->server ? server->server->port() : 0;
}

qorca_status qorca_server_health(const qorca_server* server, char** json) {
  QORCA_REQUIRE(server && server->server && json, "server and json are required");
  return guarded([&] {
    const qorca::bridge::HealthStatus h = server->server->session().health();
    nlohmann::json j = {{"status", h.status}, {"tick", h.tick}, {"sim_time", h.sim_time}, {"clients", h.clients}};
    if (h.abort_reason) j["abort_reason"] = *h.abort_reason;
    *json = copy_string(j.dump());
    return QORCA_OK;
  });
}

void qorca_server_stop(qorca_server* server) {
  if (server && server->server) server->server->stop();
}

void qorca_server_free(qorca_server* server) { delete server; }

}  // extern "C"
