/*
 * batch.cpp
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

#include "qorca/batch.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>

namespace qorca {

std::vector<Scenario> expand_batch(const Scenario& base, std::span<const std::uint64_t> seeds,
                                   std::span<const double> noise_levels) {
  std::vector<Scenario> out;
  const std::vector<double> levels =
      noise_levels.empty() ? std::vector<double>{base.noise.sigma_selfvel}
                           : std::vector<double>(noise_levels.begin(), noise_levels.end());
  out.reserve(levels.size() * seeds.size());
  for (double level : levels)
    for (std::uint64_t seed : seeds) {
      Scenario s = base;
      s.seed = seed;
      s.noise.sigma_selfvel = level;
      out.push_back(std::move(s));
    }
  return out;
}

std::vector<BatchResult> run_batch(std::span<const Scenario> scenarios, unsigned workers, const RunSink& sink) {
  std::vector<BatchResult> results(scenarios.size());
  std::atomic<std::size_t> next{0};

  auto work = [&] {
    for (std::size_t i = next.fetch_add(1); i < scenarios.size(); i = next.fetch_add(1)) {
      BatchResult& r = results[i];
      r.index = i;
      r.seed = scenarios[i].seed;
      r.noise = scenarios[i].noise.sigma_selfvel;
      try {
        const RunLog log = run(scenarios[i]);
        r.abort = log.abort;
        r.summary = summarize(log);
        if (sink) sink(i, log);
      } catch (const std::exception& e) {
        r.error = e.what();
      }
    }
  };

  const unsigned n = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(scenarios.size())));
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 1; w < n; ++w) pool.emplace_back(work);
    work();
  }
  return results;
}

}  // namespace qorca
