/*
 * test_analysis_batch.cpp
 * qorca tests
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

#include <doctest.h>

#include <cmath>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "qorca/analysis.hpp"
#include "qorca/batch.hpp"

using namespace qorca;

namespace {

PlaneRecord plane(int neighbor, bool inside, const Vec3& u) {
  PlaneRecord p;
  p.neighbor = neighbor;
  p.in_obstacle = inside;
  p.u = u;
  p.normal = inside ? normalize(u) : Vec3{1.0, 0.0, 0.0};
  return p;
}

TrackRecord usable_track(int id) {
  TrackRecord t;
  t.id = id;
  t.usable = true;
  return t;
}

// Two agents 2 m apart with usable tracks of each other. `same_side[k]`
// says whether tick k has both u pointing the same way.
RunLog synthetic(const std::vector<bool>& same_side) {
  RunLog log;
  log.scenario = make_head_on();
  for (std::size_t k = 0; k < same_side.size(); ++k) {
    TickRecord t;
    t.tick = static_cast<long>(k);
    t.time = static_cast<double>(k) / 60.0;
    t.min_clearance = 3.0;
    AgentRecord a, b;
    a.id = 0;
    b.id = 1;
    a.pos = {-1.0, 0.0, 0.0};
    b.pos = {1.0, 0.0, 0.0};
    a.tracks.push_back(usable_track(1));
    b.tracks.push_back(usable_track(0));
    a.planes.push_back(plane(1, true, {0.0, 0.1, 0.0}));
    b.planes.push_back(plane(0, true, {0.0, same_side[k] ? 0.1 : -0.1, 0.0}));
    t.agents = {a, b};
    log.ticks.push_back(t);
  }
  return log;
}

std::vector<bool> pattern(const std::string& s) {
  std::vector<bool> v;
  for (char c : s) v.push_back(c == '#');
  return v;
}

}  // namespace

TEST_SUITE("analysis") {
  TEST_CASE("labels round-trip through their names") {
    for (RunLabel l : {RunLabel::SmoothAvoidance, RunLabel::ReciprocalDance, RunLabel::OneNonCooperative,
                       RunLabel::BothNonCooperative})
      CHECK(parse_label(label_name(l)) == l);
    CHECK_FALSE(parse_label("waltz"));
  }

  TEST_CASE("dance tick needs both planes inside and a shared direction") {
    const PlaneRecord a = plane(1, true, {0.0, 0.2, 0.0});
    const PlaneRecord same = plane(0, true, {0.1, 0.3, 0.0});
    const PlaneRecord opposite = plane(0, true, {0.0, -0.3, 0.0});
    const PlaneRecord outside = plane(0, false, {});
    CHECK(dance_tick(&a, &same));
    CHECK_FALSE(dance_tick(&a, &opposite));
    CHECK_FALSE(dance_tick(&a, &outside));
    CHECK_FALSE(dance_tick(&a, nullptr));
  }

  TEST_CASE("same-side blocks shorter than the debounce are ignored") {
    CHECK(dance_events(synthetic(pattern("..##..#...##."))).empty());
    const auto events = dance_events(synthetic(pattern("..###...####.#")));
    REQUIRE(events.size() == 2);
    CHECK(events[0] == DanceEvent{0, 1, 2, 4});
    CHECK(events[1] == DanceEvent{0, 1, 8, 11});
    CHECK(detect_dance(synthetic(pattern("###."))) == std::vector<long>{0, 1, 2});
  }

  TEST_CASE("gaps in the tick sequence split a block") {
    RunLog log = synthetic(pattern("######"));
    log.ticks.erase(log.ticks.begin() + 3);
    CHECK(dance_events(log).size() == 1);  // 0..2 survives, 4..5 is too short
  }

  TEST_CASE("classification picks dance, smooth or non-cooperative") {
    CHECK(classify(synthetic(pattern("....####..."))).label == RunLabel::ReciprocalDance);
    CHECK(classify(synthetic(pattern("##........."))).label == RunLabel::SmoothAvoidance);

    RunLog one = synthetic(pattern("....####..."));
    one.scenario.agents[1].cooperative = false;
    CHECK(classify(one).label == RunLabel::OneNonCooperative);

    RunLog none = synthetic(pattern("..."));
    for (TickRecord& t : none.ticks)
      for (AgentRecord& a : t.agents) a.tracks.clear();
    CHECK(classify(none).label == RunLabel::BothNonCooperative);

    // Tracks held only while out of camera range do not count.
    RunLog far = synthetic(pattern("..."));
    for (TickRecord& t : far.ticks) t.agents[1].pos = {20.0, 0.0, 0.0};
    CHECK(classify(far).label == RunLabel::BothNonCooperative);
  }

  TEST_CASE("collision flag is open at clearance 1") {
    RunLog log = synthetic(pattern("...."));
    log.ticks[2].min_clearance = 1.0 - 1e-7;
    CHECK_FALSE(classify(log).collided);
    CHECK(classify(log).min_clearance == 1.0 - 1e-7);
    log.ticks[2].min_clearance = 1.0 - 2e-6;
    CHECK(classify(log).collided);
  }

  TEST_CASE("convergence fit recovers an exponential rate") {
    RunLog log = synthetic(std::vector<bool>(40, false));
    for (TickRecord& t : log.ticks) {
      // Only ticks 5..34 are inside.
      const bool inside = t.tick >= 5 && t.tick < 35;
      t.agents[0].planes[0] = plane(1, inside, {0.0, 0.3 * std::exp(-2.5 * t.time), 0.0});
    }
    const auto fit = fit_convergence(log, 0, 1);
    REQUIRE(fit);
    CHECK(fit->rate == doctest::Approx(2.5).epsilon(1e-9));
    CHECK(fit->first_tick == 5);
    CHECK(fit->last_tick == 34);
    CHECK(fit->samples == 30);
    CHECK_FALSE(fit->degenerate);
  }

  TEST_CASE("convergence fit degenerate cases") {
    // Too short.
    RunLog shortlog = synthetic(std::vector<bool>(9, false));
    CHECK_FALSE(fit_convergence(shortlog, 0, 1));
    // Constant residual.
    RunLog flat = synthetic(std::vector<bool>(20, false));
    const auto fit = fit_convergence(flat, 0, 1);
    REQUIRE(fit);
    CHECK(fit->degenerate);
    CHECK(fit->rate == 0.0);
    // Never inside.
    for (TickRecord& t : flat.ticks) t.agents[0].planes[0] = plane(1, false, {});
    CHECK_FALSE(fit_convergence(flat, 0, 1));
    CHECK_FALSE(fit_convergence(flat, 0, 7));
  }

  TEST_CASE("Wilson interval matches tabulated values") {
    // Reference values for 95% Wilson score intervals.
    const auto a = wilson_interval(0, 10);
    CHECK(a.lower == 0.0);
    CHECK(a.upper == doctest::Approx(0.27753).epsilon(1e-4));
    const auto b = wilson_interval(5, 10);
    CHECK(b.lower == doctest::Approx(0.23659).epsilon(1e-4));
    CHECK(b.upper == doctest::Approx(0.76341).epsilon(1e-4));
    const auto c = wilson_interval(81, 263);
    CHECK(c.lower == doctest::Approx(0.255289).epsilon(1e-5));
    CHECK(c.upper == doctest::Approx(0.366210).epsilon(1e-5));
    CHECK(wilson_interval(0, 3).lower == 0.0);
    CHECK(wilson_interval(3, 3).upper == 1.0);
    const auto d = wilson_interval(0, 0);
    CHECK(d.lower == 0.0);
    CHECK(d.upper == 1.0);
  }

  TEST_CASE("sweep rows group by noise in ascending order") {
    std::vector<RunSummary> runs;
    for (int i = 0; i < 6; ++i) {
      RunSummary r;
      r.seed = static_cast<std::uint64_t>(i);
      r.noise = i % 2 ? 0.1 : 0.0;
      r.classification.label = i == 1 || i == 3 ? RunLabel::ReciprocalDance : RunLabel::SmoothAvoidance;
      r.classification.min_clearance = 1.0 + i;
      r.classification.collided = i == 5;
      runs.push_back(r);
    }
    const auto rows = sweep_summary(runs);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].noise == 0.0);
    CHECK(rows[0].run_count == 3);
    CHECK(rows[0].dance_runs == 0);
    CHECK(rows[0].mean_min_clearance == doctest::Approx(3.0));
    CHECK(rows[1].dance_runs == 2);
    CHECK(rows[1].collision_runs == 1);
    CHECK(rows[1].dance_fraction == doctest::Approx(2.0 / 3.0));
    CHECK(rows[1].mean_min_clearance == doctest::Approx(4.0));

    std::ostringstream sweep;
    write_sweep_csv(sweep, rows);
    CHECK(sweep.str().rfind("noise,run_count,dance_fraction,dance_ci_lower,dance_ci_upper,collision_fraction,"
                            "mean_min_clearance\n0,3,0,0,0.561497032,0,3\n0.1,3,0.666666667,",
                            0) == 0);

    std::ostringstream summary;
    write_summary_csv(summary, std::span(runs).first(2));
    CHECK(summary.str() ==
          "seed,noise,label,min_clearance,dance_event_count,convergence_rate,collided\n"
          "0,0,smooth_avoidance,1,0,,false\n"
          "1,0.1,reciprocal_dance,2,0,,false\n");
  }
}

TEST_SUITE("batch") {
  TEST_CASE("expansion is noise-major and keeps sigma when no levels are given") {
    const Scenario base = make_head_on();
    const std::vector<std::uint64_t> seeds{3, 4, 5};
    const std::vector<double> levels{0.0, 0.2};
    const auto all = expand_batch(base, seeds, levels);
    REQUIRE(all.size() == 6);
    CHECK(all[0].noise.sigma_selfvel == 0.0);
    CHECK(all[2].seed == 5);
    CHECK(all[3].noise.sigma_selfvel == 0.2);
    CHECK(all[3].seed == 3);

    Scenario noisy = base;
    noisy.noise.sigma_selfvel = 0.07;
    const auto kept = expand_batch(noisy, seeds, {});
    REQUIRE(kept.size() == 3);
    for (const Scenario& s : kept) CHECK(s.noise.sigma_selfvel == 0.07);
  }

  TEST_CASE("results do not depend on the worker count") {
    HeadOnOptions opt;
    opt.duration = 4.0;
    const std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    const std::vector<double> levels{0.0, 0.3};
    const auto scenarios = expand_batch(make_head_on(opt), seeds, levels);

    auto render = [&](unsigned workers) {
      std::vector<std::string> logs(scenarios.size());
      std::mutex m;
      const auto results = run_batch(scenarios, workers, [&](std::size_t i, const RunLog& log) {
        const std::string text = runlog_to_string(log);
        std::lock_guard lock(m);
        logs[i] = text;
      });
      std::vector<RunSummary> summaries;
      for (const BatchResult& r : results) summaries.push_back(*r.summary);
      std::ostringstream out;
      write_summary_csv(out, summaries);
      for (const std::string& l : logs) out << l;
      return out.str();
    };
    const std::string one = render(1);
    CHECK(one == render(4));
    CHECK(one == render(0));
  }

  TEST_CASE("a failing run is reported and the rest continue") {
    HeadOnOptions opt;
    opt.duration = 1.0;
    std::vector<Scenario> scenarios{make_head_on(opt), make_head_on(opt), make_head_on(opt)};
    scenarios[1].tick_dt = -1.0;
    const auto results = run_batch(scenarios, 2);
    REQUIRE(results.size() == 3);
    CHECK(results[0].summary);
    CHECK_FALSE(results[1].summary);
    CHECK(results[1].error.find("tick_dt") != std::string::npos);
    CHECK(results[2].summary);
    for (std::size_t i = 0; i < 3; ++i) CHECK(results[i].index == i);
  }

  TEST_CASE("aborted runs keep their summary and abort record") {
    HeadOnOptions opt;
    opt.dynamics = Dynamics::first_order(1e9);
    const std::vector<Scenario> scenarios{make_head_on(opt)};
    const auto results = run_batch(scenarios, 1);
    REQUIRE(results[0].abort);
    CHECK(results[0].summary);
    CHECK(results[0].error.empty());
  }
}
