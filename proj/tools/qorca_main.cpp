/*
 * qorca_main.cpp
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

#include <csignal>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "qorca/qorca.h"

namespace {

enum Exit { kOk = 0, kBadInput = 2, kAborted = 3, kPortInUse = 4, kInternal = 1 };

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<double> tick_dt;
  std::optional<double> tau;
};

int report(qorca_status status) {
  const std::string pointer = qorca_last_error_pointer();
  if (!pointer.empty())
    std::fprintf(stderr, "qorca: %s (at %s)\n", qorca_last_error(), pointer.c_str());
  else
    std::fprintf(stderr, "qorca: %s\n", qorca_last_error());
  switch (status) {
    case QORCA_OK: return kOk;
    case QORCA_ERROR_ABORTED: return kAborted;
    case QORCA_ERROR_PORT_IN_USE: return kPortInUse;
    case QORCA_ERROR_INVALID_ARGUMENT:
    case QORCA_ERROR_IO:
    case QORCA_ERROR_PARSE:
    case QORCA_ERROR_INVALID_SCENARIO: return kBadInput;
    default: return kInternal;
  }
}

class ScenarioHandle {
 public:
  ~ScenarioHandle() { qorca_scenario_free(ptr_); }
  qorca_scenario* get() const { return ptr_; }

  qorca_status load(const std::string& path, const Overrides& o) {
    qorca_status st = qorca_scenario_load(path.c_str(), &ptr_);
    if (st == QORCA_OK && o.seed) st = qorca_scenario_set_seed(ptr_, *o.seed);
    if (st == QORCA_OK && o.tick_dt) st = qorca_scenario_set_tick_dt(ptr_, *o.tick_dt);
    if (st == QORCA_OK && o.tau) st = qorca_scenario_set_tau(ptr_, *o.tau);
    return st;
  }

 private:
  qorca_scenario* ptr_ = nullptr;
};

// "A..B" inclusive, or a single seed.
std::vector<std::uint64_t> parse_seed_range(const std::string& text) {
  const auto dots = text.find("..");
  try {
    std::size_t used = 0;
    if (dots == std::string::npos) {
      const std::uint64_t s = std::stoull(text, &used);
      if (used != text.size()) throw std::invalid_argument(text);
      return {s};
    }
    const std::string a = text.substr(0, dots), b = text.substr(dots + 2);
    const std::uint64_t lo = std::stoull(a, &used);
    if (used != a.size()) throw std::invalid_argument(text);
    const std::uint64_t hi = std::stoull(b, &used);
    if (used != b.size() || hi < lo) throw std::invalid_argument(text);
    std::vector<std::uint64_t> seeds;
    for (std::uint64_t s = lo;; ++s) {
      seeds.push_back(s);
      if (s == hi) break;
    }
    return seeds;
  } catch (const std::logic_error&) {
    throw CLI::ValidationError("--seeds", "expected A..B with A <= B, got '" + text + "'");
  }
}

void add_overrides(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--tick-dt", o.tick_dt, "Override tick period [s]")->check(CLI::PositiveNumber);
  cmd->add_option("--tau", o.tau, "Override ORCA time horizon [s]")->check(CLI::PositiveNumber);
}

int cmd_run(const std::string& scenario, const std::string& out, const Overrides& o) {
  ScenarioHandle s;
  if (qorca_status st = s.load(scenario, o); st != QORCA_OK) return report(st);
  qorca_run_info info{};
  const qorca_status st = qorca_run(s.get(), out.c_str(), &info);
  if (st != QORCA_OK && st != QORCA_ERROR_ABORTED) return report(st);
  std::printf("ticks %ld  min_clearance %.6f  collided %s  dance_events %d  label %s\n", info.ticks,
              info.min_clearance, info.collided ? "yes" : "no", info.dance_events, info.label);
  std::printf("log: %s\n", out.c_str());
  if (st == QORCA_ERROR_ABORTED) return report(st);
  return kOk;
}

int cmd_batch(const std::string& scenario, const std::string& seeds_text, const std::vector<double>& noise,
              const std::string& out, unsigned workers, const Overrides& o) {
  ScenarioHandle s;
  if (qorca_status st = s.load(scenario, o); st != QORCA_OK) return report(st);
  const std::vector<std::uint64_t> seeds = parse_seed_range(seeds_text);
  qorca_batch_options opt{seeds.data(), seeds.size(), noise.data(), noise.size(), workers, out.c_str()};
  qorca_batch_info info{};
  if (qorca_status st = qorca_batch(s.get(), &opt, &info); st != QORCA_OK) return report(st);
  std::printf("runs %zu  failed %zu  aborted %zu\n", info.runs, info.failed, info.aborted);
  std::printf("outputs: %s/summary.csv %s/sweep.csv %s/failures.csv\n", out.c_str(), out.c_str(), out.c_str());
  return kOk;
}

int cmd_analyze(const std::vector<std::string>& logs, const std::string& summary, const std::string& sweep) {
  std::vector<const char*> paths;
  for (const std::string& p : logs) paths.push_back(p.c_str());
  std::size_t read = 0;
  const qorca_status st = qorca_analyze(paths.data(), paths.size(), summary.empty() ? nullptr : summary.c_str(),
                                        sweep.empty() ? nullptr : sweep.c_str(), &read);
  if (st != QORCA_OK) return report(st);
  std::printf("analyzed %zu run logs\n", read);
  return kOk;
}

int cmd_serve(const std::string& scenario, const std::string& address, unsigned short port, double rtf,
              const Overrides& o) {
  ScenarioHandle s;
  if (qorca_status st = s.load(scenario, o); st != QORCA_OK) return report(st);

  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  qorca_server_options opt;
  qorca_server_options_init(&opt);
  opt.address = address.c_str();
  opt.port = port;
  opt.realtime_factor = rtf;
  qorca_server* server = nullptr;
  if (qorca_status st = qorca_server_start(s.get(), &opt, &server); st != QORCA_OK) return report(st);
  std::printf("serving on http://%s:%u  (ws: /ws, GET /scenario, GET /healthz)\n", address.c_str(),
              qorca_server_port(server));
  std::fflush(stdout);

  int sig = 0;
  sigwait(&set, &sig);
  qorca_server_stop(server);
  qorca_server_free(server);
  std::printf("stopped\n");
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decentralized 3-D ORCA simulator"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(qorca_version()));

  Overrides over;
  std::string scenario, out, seeds_text, summary, sweep, address = "127.0.0.1";
  std::vector<double> noise;
  std::vector<std::string> logs;
  unsigned workers = std::max(1u, std::thread::hardware_concurrency());
  unsigned short port = 8765;
  double rtf = 1.0;

  CLI::App* run = app.add_subcommand("run", "Run one scenario and write its log");
  run->add_option("--scenario", scenario, "Scenario JSON")->required();
  run->add_option("--seed", over.seed, "Override master seed");
  run->add_option("--out", out, "Run log path (JSONL)")->required();
  add_overrides(run, over);

  CLI::App* batch = app.add_subcommand("batch", "Run a seed range over a noise sweep");
  batch->add_option("--scenario", scenario, "Scenario JSON")->required();
  batch->add_option("--seeds", seeds_text, "Inclusive seed range A..B")->required();
  batch->add_option("--noise-sweep", noise, "sigma_selfvel levels v1,v2,...")->delimiter(',')->check(
      CLI::NonNegativeNumber);
  batch->add_option("--out", out, "Output directory")->required();
  batch->add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);
  add_overrides(batch, over);

  CLI::App* analyze = app.add_subcommand("analyze", "Summarize existing run logs");
  analyze->add_option("logs", logs, "Run logs")->required()->check(CLI::ExistingFile);
  analyze->add_option("--summary", summary, "Per-run CSV path");
  analyze->add_option("--sweep", sweep, "Per-noise CSV path");

  CLI::App* serve = app.add_subcommand("serve", "Start the live WebSocket bridge");
  serve->add_option("--scenario", scenario, "Scenario JSON")->required();
  serve->add_option("--port", port, "TCP port (0 picks one)");
  serve->add_option("--address", address, "Bind address");
  serve->add_option("--realtime-factor", rtf, "Sim seconds per wall second; 0 runs unpaced")->check(
      CLI::NonNegativeNumber);
  serve->add_option("--seed", over.seed, "Override master seed");
  add_overrides(serve, over);

  try {
    app.parse(argc, argv);
    if (*run) return cmd_run(scenario, out, over);
    if (*batch) return cmd_batch(scenario, seeds_text, noise, out, workers, over);
    if (*analyze) {
      if (summary.empty() && sweep.empty()) summary = "summary.csv";
      return cmd_analyze(logs, summary, sweep);
    }
    if (*serve) return cmd_serve(scenario, address, port, rtf, over);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kBadInput;
  }
  return kBadInput;
}
