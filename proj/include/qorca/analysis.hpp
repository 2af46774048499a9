/*
 * analysis.hpp
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

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qorca/sim_engine.hpp"

namespace qorca {

enum class RunLabel { SmoothAvoidance, ReciprocalDance, OneNonCooperative, BothNonCooperative };

std::string_view label_name(RunLabel label);
std::optional<RunLabel> parse_label(std::string_view name);

/// Minimum run length, in ticks, of a same-side block to count as a dance.
inline constexpr long kDanceDebounceTicks = 3;
/// Clearance below 1 - kCollisionTolerance counts as a collision in run
/// statistics.
inline constexpr double kCollisionTolerance = 1e-6;

/// Both agents hold an in-obstacle plane for each other and their
/// avoidance vectors point the same way.
bool dance_tick(const PlaneRecord* a_to_b, const PlaneRecord* b_to_a);

struct DanceEvent {
  int agent_a = 0;
  int agent_b = 0;
  long first_tick = 0;
  long last_tick = 0;  // inclusive

  long length() const { return last_tick - first_tick + 1; }
  bool operator==(const DanceEvent&) const = default;
};

/// Maximal same-side blocks of at least kDanceDebounceTicks, per agent pair.
std::vector<DanceEvent> dance_events(const RunLog& log);

/// Ticks covered by dance events, ascending and unique.
std::vector<long> detect_dance(const RunLog& log);

struct ConvergenceFit {
  double rate = 0.0;  ///< [1/s], positive when the residual shrinks
  long first_tick = 0;
  long last_tick = 0;
  int samples = 0;
  bool degenerate = false;
};

/// Fits log|u| against time over the longest in-obstacle block of agent's
/// plane toward other, where |u| is the distance from the current relative
/// velocity to the collision-avoiding one. Empty when that block has fewer
/// than 10 usable ticks.
std::optional<ConvergenceFit> fit_convergence(const RunLog& log, int agent, int other);

struct RunClassification {
  RunLabel label = RunLabel::SmoothAvoidance;
  std::vector<long> dance_ticks;
  std::size_t dance_event_count = 0;
  double min_clearance = 0.0;
  bool collided = false;
  std::optional<double> convergence_rate;
};

/// An agent "acted" toward another when it is cooperative and held a usable
/// track of it while the two were within camera range. Labels come from the
/// pair with the fewest acting sides; ties resolve to dance over smooth.
RunClassification classify(const RunLog& log);

struct RunSummary {
  std::uint64_t seed = 0;
  double noise = 0.0;  ///< sigma_selfvel of the run
  RunClassification classification;
};

RunSummary summarize(const RunLog& log);

struct ProportionInterval {
  double lower = 0.0;
  double upper = 0.0;
};

/// Wilson score interval; z = 1.96 gives 95%.
ProportionInterval wilson_interval(std::size_t successes, std::size_t trials, double z = 1.959963984540054);

struct SweepRow {
  double noise = 0.0;
  std::size_t run_count = 0;
  std::size_t dance_runs = 0;
  std::size_t collision_runs = 0;
  double dance_fraction = 0.0;
  double collision_fraction = 0.0;
  double mean_min_clearance = 0.0;
  ProportionInterval dance_ci;
};

/// One row per distinct noise level, ascending.
std::vector<SweepRow> sweep_summary(std::span<const RunSummary> runs);

void write_summary_csv(std::ostream& out, std::span<const RunSummary> runs);
void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows);

}  // namespace qorca
