/*
 * batch.hpp
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
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qorca/analysis.hpp"

namespace qorca {

/// One scenario per (noise level, seed), noise-major. An empty noise list
/// keeps the scenario's own sigma_selfvel.
std::vector<Scenario> expand_batch(const Scenario& base, std::span<const std::uint64_t> seeds,
                                   std::span<const double> noise_levels);

struct BatchResult {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  double noise = 0.0;
  std::optional<RunSummary> summary;  ///< empty when the run failed outright
  std::optional<AbortRecord> abort;
  std::string error;
};

/// Called from worker threads, once per finished run, before the log is
/// discarded. Must be thread-safe.
using RunSink = std::function<void(std::size_t index, const RunLog& log)>;

/// Runs every scenario on `workers` threads and returns results in input
/// order. A run that throws is reported in its result; the rest continue.
std::vector<BatchResult> run_batch(std::span<const Scenario> scenarios, unsigned workers, const RunSink& sink = {});

}  // namespace qorca
