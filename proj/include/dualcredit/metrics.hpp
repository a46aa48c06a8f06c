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

#ifndef DUALCREDIT_METRICS_HPP_
#define DUALCREDIT_METRICS_HPP_

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "dualcredit/env.hpp"
#include "dualcredit/error.hpp"
#include "dualcredit/rewards.hpp"
#include "dualcredit/trajectory.hpp"

namespace dualcredit {

// Episode-set metrics. Rates are fractions in [0,1]; compliance is on the
// 0-100 scale.
//
//   cvr                     converted episodes / episodes
//   compliance              100 - mean per-episode violation score
//   avg_turn                mean episode length
//   intra_r, inter_r        mean intra / inter repetition component per turn
//   repeat_action_rate      adjacent turn pairs with the same action kind /
//                           adjacent turn pairs
//   filler_rate             Filler turns / turns
//   overpromise_rate        OverPromise turns / turns
//   positive_transfer_rate  episodes whose final attitude ranks above the
//                           initial one / episodes
struct EvalReport {
  std::size_t episodes = 0;
  double cvr = 0.0;
  double compliance = 0.0;
  double avg_turn = 0.0;
  double intra_r = 0.0;
  double inter_r = 0.0;
  double repeat_action_rate = 0.0;
  double filler_rate = 0.0;
  double overpromise_rate = 0.0;
  double positive_transfer_rate = 0.0;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["episodes"] = episodes;
    j["cvr"] = cvr;
    j["compliance"] = compliance;
    j["avg_turn"] = avg_turn;
    j["intra_r"] = intra_r;
    j["inter_r"] = inter_r;
    j["repeat_action_rate"] = repeat_action_rate;
    j["filler_rate"] = filler_rate;
    j["overpromise_rate"] = overpromise_rate;
    j["positive_transfer_rate"] = positive_transfer_rate;
    return j;
  }

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

namespace detail {
inline double sorted_sum(std::vector<double>& v) {
  std::sort(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}
}  // namespace detail

inline EvalReport compute_report(std::span<const Trajectory> trajectories) {
  if (trajectories.empty()) throw EmptyInput("compute_report needs trajectories");
  EvalReport r;
  r.episodes = trajectories.size();
  std::size_t converted = 0, turns = 0, pairs = 0, repeats = 0, fillers = 0,
              overpromises = 0, improved = 0;
  double violation_total = 0.0;
  // Per-turn components are summed in sorted order so the report does not
  // depend on episode order.
  std::vector<double> intra_terms, inter_terms;
  for (const auto& tr : trajectories) {
    converted += tr.converted ? 1 : 0;
    violation_total += count_violations(tr) * kViolationUnit;
    turns += tr.turns.size();
    for (std::size_t k = 0; k < tr.turns.size(); ++k) {
      const auto& t = tr.turns[k];
      intra_terms.push_back(t.reward.intra);
      inter_terms.push_back(t.reward.inter);
      fillers += t.action == ActionKind::Filler ? 1 : 0;
      overpromises += violates_compliance(t.action) ? 1 : 0;
      if (k > 0) {
        ++pairs;
        repeats += t.action == tr.turns[k - 1].action ? 1 : 0;
      }
    }
    if (!tr.turns.empty() &&
        attitude_rank(tr.final_attitude()) > attitude_rank(tr.turns.front().intent_before)) {
      ++improved;
    }
  }
  const double n = static_cast<double>(r.episodes);
  r.cvr = static_cast<double>(converted) / n;
  r.compliance = compliance_score(violation_total / n);
  r.avg_turn = static_cast<double>(turns) / n;
  if (turns > 0) {
    const double nt = static_cast<double>(turns);
    r.intra_r = detail::sorted_sum(intra_terms) / nt;
    r.inter_r = detail::sorted_sum(inter_terms) / nt;
    r.filler_rate = static_cast<double>(fillers) / nt;
    r.overpromise_rate = static_cast<double>(overpromises) / nt;
  }
  r.repeat_action_rate = pairs > 0 ? static_cast<double>(repeats) / static_cast<double>(pairs) : 0.0;
  r.positive_transfer_rate = static_cast<double>(improved) / n;
  return r;
}

// Fraction of all turns that took action `kind`; 0 for an empty list.
inline double action_frequency(std::span<const Trajectory> trajectories, ActionKind kind) {
  std::size_t hits = 0, turns = 0;
  for (const auto& tr : trajectories) {
    for (const auto& t : tr.turns) hits += t.action == kind ? 1 : 0;
    turns += tr.turns.size();
  }
  return turns > 0 ? static_cast<double>(hits) / static_cast<double>(turns) : 0.0;
}

}  // namespace dualcredit

#endif  // DUALCREDIT_METRICS_HPP_
