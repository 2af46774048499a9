/*
 * analysis.cpp
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

#include "qorca/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <ostream>

namespace qorca {

namespace {

constexpr long kMinFitTicks = 10;
constexpr double kMinResidual = 1e-12;

std::string number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::vector<std::pair<int, int>> agent_pairs(const RunLog& log) {
  std::vector<std::pair<int, int>> pairs;
  const auto& agents = log.scenario.agents;
  for (std::size_t a = 0; a < agents.size(); ++a)
    for (std::size_t b = a + 1; b < agents.size(); ++b) pairs.emplace_back(agents[a].id, agents[b].id);
  std::sort(pairs.begin(), pairs.end());
  return pairs;
}

bool acted_toward(const RunLog& log, int agent, int other) {
  const AgentSpec* spec = log.scenario.agent(agent);
  if (!spec || !spec->cooperative) return false;
  const double range = log.scenario.camera.max_range;
  for (const TickRecord& t : log.ticks) {
    const AgentRecord* a = t.agent(agent);
    const AgentRecord* b = t.agent(other);
    if (!a || !b || norm(b->pos - a->pos) > range) continue;
    const TrackRecord* tr = a->track_for(other);
    if (tr && tr->usable) return true;
  }
  return false;
}

int label_rank(RunLabel label) {
  switch (label) {
    case RunLabel::BothNonCooperative: return 3;
    case RunLabel::OneNonCooperative: return 2;
    case RunLabel::ReciprocalDance: return 1;
    case RunLabel::SmoothAvoidance: return 0;
  }
  return 0;
}

}  // namespace

std::string_view label_name(RunLabel label) {
  switch (label) {
    case RunLabel::SmoothAvoidance: return "smooth_avoidance";
    case RunLabel::ReciprocalDance: return "reciprocal_dance";
    case RunLabel::OneNonCooperative: return "one_noncooperative";
    case RunLabel::BothNonCooperative: return "both_noncooperative";
  }
  return "unknown";
}

std::optional<RunLabel> parse_label(std::string_view name) {
  for (RunLabel l : {RunLabel::SmoothAvoidance, RunLabel::ReciprocalDance, RunLabel::OneNonCooperative,
                     RunLabel::BothNonCooperative})
    if (label_name(l) == name) return l;
  return std::nullopt;
}

bool dance_tick(const PlaneRecord* a_to_b, const PlaneRecord* b_to_a) {
  if (!a_to_b || !b_to_a || !a_to_b->in_obstacle || !b_to_a->in_obstacle) return false;
  return dot(a_to_b->u, b_to_a->u) > 0.0;
}

std::vector<DanceEvent> dance_events(const RunLog& log) {
  std::vector<DanceEvent> events;
  for (const auto& [a, b] : agent_pairs(log)) {
    long start = -1, prev = -1;
    auto close = [&] {
      if (start >= 0 && prev - start + 1 >= kDanceDebounceTicks) events.push_back({a, b, start, prev});
      start = -1;
    };
    for (const TickRecord& t : log.ticks) {
      const AgentRecord* ra = t.agent(a);
      const AgentRecord* rb = t.agent(b);
      const bool same_side = ra && rb && dance_tick(ra->plane_for(b), rb->plane_for(a));
      if (same_side && start >= 0 && t.tick != prev + 1) close();
      if (same_side) {
        if (start < 0) start = t.tick;
        prev = t.tick;
      } else {
        close();
      }
    }
    close();
  }
  return events;
}

std::vector<long> detect_dance(const RunLog& log) {
  std::vector<long> ticks;
  for (const DanceEvent& e : dance_events(log))
    for (long t = e.first_tick; t <= e.last_tick; ++t) ticks.push_back(t);
  std::sort(ticks.begin(), ticks.end());
  ticks.erase(std::unique(ticks.begin(), ticks.end()), ticks.end());
  return ticks;
}

std::optional<ConvergenceFit> fit_convergence(const RunLog& log, int agent, int other) {
  struct Sample {
    long tick;
    double time;
    double residual;
  };
  std::vector<Sample> best, current;
  auto flush = [&] {
    if (current.size() > best.size()) best = current;
    current.clear();
  };
  for (const TickRecord& t : log.ticks) {
    const AgentRecord* a = t.agent(agent);
    const PlaneRecord* p = a ? a->plane_for(other) : nullptr;
    const double r = p ? norm(p->u) : 0.0;
    if (!p || !p->in_obstacle || r <= kMinResidual || (!current.empty() && t.tick != current.back().tick + 1)) {
      flush();
      if (!p || !p->in_obstacle || r <= kMinResidual) continue;
    }
    current.push_back({t.tick, t.time, r});
  }
  flush();
  if (static_cast<long>(best.size()) < kMinFitTicks) return std::nullopt;

  double st = 0.0, sy = 0.0, stt = 0.0, sty = 0.0;
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  const double n = static_cast<double>(best.size());
  const double t0 = best.front().time;
  for (const Sample& s : best) {
    const double t = s.time - t0;
    const double y = std::log(s.residual);
    st += t;
    sy += y;
    stt += t * t;
    sty += t * y;
    lo = std::min(lo, s.residual);
    hi = std::max(hi, s.residual);
  }
  const double denom = n * stt - st * st;
  ConvergenceFit fit;
  fit.first_tick = best.front().tick;
  fit.last_tick = best.back().tick;
  fit.samples = static_cast<int>(best.size());
  fit.rate = denom > 0.0 ? -(n * sty - st * sy) / denom : 0.0;
  if (std::log(hi / lo) < 1e-6) {
    fit.degenerate = true;
    fit.rate = 0.0;
  }
  return fit;
}

RunClassification classify(const RunLog& log) {
  RunClassification c;
  c.min_clearance = std::numeric_limits<double>::infinity();
  for (const TickRecord& t : log.ticks) c.min_clearance = std::min(c.min_clearance, t.min_clearance);
  c.collided = c.min_clearance < 1.0 - kCollisionTolerance;

  const std::vector<DanceEvent> events = dance_events(log);
  c.dance_event_count = events.size();
  c.dance_ticks = detect_dance(log);

  RunLabel worst = RunLabel::SmoothAvoidance;
  for (const auto& [a, b] : agent_pairs(log)) {
    const int acting = (acted_toward(log, a, b) ? 1 : 0) + (acted_toward(log, b, a) ? 1 : 0);
    RunLabel l = RunLabel::SmoothAvoidance;
    if (acting == 0)
      l = RunLabel::BothNonCooperative;
    else if (acting == 1)
      l = RunLabel::OneNonCooperative;
    else if (std::any_of(events.begin(), events.end(),
                         [&](const DanceEvent& e) { return e.agent_a == a && e.agent_b == b; }))
      l = RunLabel::ReciprocalDance;
    if (label_rank(l) > label_rank(worst)) worst = l;

    if (!c.convergence_rate)
      for (const auto& [x, y] : {std::pair{a, b}, std::pair{b, a}}) {
        const auto fit = fit_convergence(log, x, y);
        if (fit && !fit->degenerate) {
          c.convergence_rate = fit->rate;
          break;
        }
      }
  }
  c.label = worst;
  return c;
}

RunSummary summarize(const RunLog& log) {
  return {log.scenario.seed, log.scenario.noise.sigma_selfvel, classify(log)};
}

ProportionInterval wilson_interval(std::size_t successes, std::size_t trials, double z) {
  if (trials == 0) return {0.0, 1.0};
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
  const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / (1.0 + z2 / n);
  return {successes == 0 ? 0.0 : std::max(0.0, centre - half),
          successes == trials ? 1.0 : std::min(1.0, centre + half)};
}

std::vector<SweepRow> sweep_summary(std::span<const RunSummary> runs) {
  std::map<double, SweepRow> by_noise;
  std::map<double, double> clearance_sum;
  for (const RunSummary& r : runs) {
    SweepRow& row = by_noise[r.noise];
    row.noise = r.noise;
    ++row.run_count;
    if (r.classification.label == RunLabel::ReciprocalDance) ++row.dance_runs;
    if (r.classification.collided) ++row.collision_runs;
    clearance_sum[r.noise] += r.classification.min_clearance;
  }
  std::vector<SweepRow> rows;
  for (auto& [noise, row] : by_noise) {
    const double n = static_cast<double>(row.run_count);
    row.dance_fraction = static_cast<double>(row.dance_runs) / n;
    row.collision_fraction = static_cast<double>(row.collision_runs) / n;
    row.mean_min_clearance = clearance_sum[noise] / n;
    row.dance_ci = wilson_interval(row.dance_runs, row.run_count);
    rows.push_back(row);
  }
  return rows;
}

void write_summary_csv(std::ostream& out, std::span<const RunSummary> runs) {
  out << "seed,noise,label,min_clearance,dance_event_count,convergence_rate,collided\n";
  for (const RunSummary& r : runs) {
    const RunClassification& c = r.classification;
    out << r.seed << ',' << number(r.noise) << ',' << label_name(c.label) << ',' << number(c.min_clearance) << ','
        << c.dance_event_count << ',' << (c.convergence_rate ? number(*c.convergence_rate) : "") << ','
        << (c.collided ? "true" : "false") << '\n';
  }
}

void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows) {
  out << "noise,run_count,dance_fraction,dance_ci_lower,dance_ci_upper,collision_fraction,mean_min_clearance\n";
  for (const SweepRow& r : rows)
    out << number(r.noise) << ',' << r.run_count << ',' << number(r.dance_fraction) << ','
        << number(r.dance_ci.lower) << ',' << number(r.dance_ci.upper) << ',' << number(r.collision_fraction)
        << ',' << number(r.mean_min_clearance) << '\n';
}

}  // namespace qorca
