// Copyright 2026 The dualcredit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// Multi-seed ablation sweep: every method is trained on every seed with the
// same config, then evaluated greedily on held-out episodes. Runs execute in
// parallel, but results are stored by (method, seed) slot, so every table is
// independent of the worker count.

#ifndef DUALCREDIT_EXPERIMENT_HPP_
#define DUALCREDIT_EXPERIMENT_HPP_

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dualcredit/config.hpp"
#include "dualcredit/error.hpp"
#include "dualcredit/metrics.hpp"
#include "dualcredit/rollout.hpp"
#include "dualcredit/trainer.hpp"

namespace dualcredit {

struct RunSummary {
  Method method = Method::Duca;
  std::uint64_t seed = 0;
  std::vector<TrainStepRecord> records;
  EvalReport eval;
  double repeat_script_rate = 0.0;  // RepeatScript turns / turns, sampled held-out
};

struct AblationRow {
  Method method = Method::Duca;
  double cvr = 0.0;
  double compliance = 0.0;
  double avg_turn = 0.0;
  double repeat_action_rate = 0.0;
};

// Median; the mean of the two middle values for even sizes.
inline double median(std::vector<double> v) {
  if (v.empty()) throw EmptyInput("median of nothing");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = std::min(text.find(',', start), text.size());
    const std::string item = text.substr(start, comma - start);
    if (item.empty() || item.find_first_not_of("0123456789") != std::string::npos) {
      throw ValidationError("seeds", "expected a comma-separated list of integers, got '" + text + "'");
    }
    seeds.push_back(std::stoull(item));
    start = comma + 1;
  }
  return seeds;
}

inline RunSummary run_single(const ExperimentConfig& base, Method method, std::uint64_t seed,
                             const World& world, int rollout_workers = 1) {
  ExperimentConfig c = base;
  c.seed = seed;
  TrainOptions opt;
  opt.workers = rollout_workers;
  auto trained = train(c, method, world, opt);
  RunSummary s;
  s.method = method;
  s.seed = seed;
  s.records = std::move(trained.records);
  const auto ev = evaluate(trained.model, c, world, c.eval_episodes, seed, rollout_workers);
  s.eval = ev.report;
  s.repeat_script_rate = action_frequency(
      sampled_rollouts(trained.model, c, world, c.eval_episodes, seed, rollout_workers),
      ActionKind::RepeatScript);
  return s;
}

// Runs are ordered method-major, seed-minor.
inline std::vector<RunSummary> run_ablation(const ExperimentConfig& c,
                                            std::span<const std::uint64_t> seeds,
                                            const World& world, int workers = 1,
                                            std::span<const Method> methods = kAllMethods) {
  c.validate();
  if (seeds.empty()) throw ValidationError("seeds", "at least one seed is required");
  std::vector<RunSummary> runs(methods.size() * seeds.size());
  parallel_for(runs.size(), workers, [&](std::size_t i) {
    runs[i] = run_single(c, methods[i / seeds.size()], seeds[i % seeds.size()], world);
  });
  return runs;
}

inline std::vector<AblationRow> summarize(std::span<const RunSummary> runs) {
  std::vector<AblationRow> rows;
  for (Method m : kAllMethods) {
    std::vector<double> cvr, compliance, turns, repeats;
    for (const auto& r : runs) {
      if (r.method != m) continue;
      cvr.push_back(r.eval.cvr);
      compliance.push_back(r.eval.compliance);
      turns.push_back(r.eval.avg_turn);
      repeats.push_back(r.eval.repeat_action_rate);
    }
    if (cvr.empty()) continue;
    rows.push_back({m, median(cvr), median(compliance), median(turns), median(repeats)});
  }
  return rows;
}

// One row per method: medians over seeds of the held-out metrics.
inline std::string ablation_table_csv(std::span<const AblationRow> rows) {
  std::string out = "method,cvr,compliance,avg_turn\n";
  for (const auto& r : rows) {
    out += std::string(to_string(r.method)) + ',' + format_number(r.cvr) + ',' +
           format_number(r.compliance) + ',' + format_number(r.avg_turn) + '\n';
  }
  return out;
}

// One row per (method, seed) with the fuller metric set.
inline std::string ablation_runs_csv(std::span<const RunSummary> runs) {
  std::string out =
      "method,seed,cvr,compliance,avg_turn,intra_r,inter_r,repeat_action_rate,filler_rate,"
      "overpromise_rate,positive_transfer_rate,repeat_script_rate,train_cvr,train_compliance\n";
  for (const auto& r : runs) {
    const auto& e = r.eval;
    out += std::string(to_string(r.method)) + ',' + std::to_string(r.seed);
    for (double v : {e.cvr, e.compliance, e.avg_turn, e.intra_r, e.inter_r, e.repeat_action_rate,
                     e.filler_rate, e.overpromise_rate, e.positive_transfer_rate,
                     r.repeat_script_rate}) {
      out += ',' + format_number(v);
    }
    const double train_cvr = r.records.empty() ? 0.0 : r.records.back().cvr;
    const double train_compliance = r.records.empty() ? 0.0 : r.records.back().compliance;
    out += ',' + format_number(train_cvr) + ',' + format_number(train_compliance) + '\n';
  }
  return out;
}

}  // namespace dualcredit

#endif  // DUALCREDIT_EXPERIMENT_HPP_
