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

// Turn-level and session-level rewards.
//
// The turn reward is a gated length incentive:
//
//   r_turn = r_len            if rep <= delta1 or sim <= delta2
//          = r_penalty        otherwise
//
// where rep is the worse of intra-utterance repetition and Jaccard overlap with
// the previous three agent turns, sim is the best cosine similarity against the
// script library, and r_len = exp(-(len - l_target)^2 / (2 sigma_len^2)).
//
// The session reward is alpha * converted - beta * violations, with one unit of
// violation per OverPromise turn.

#ifndef DUALCREDIT_REWARDS_HPP_
#define DUALCREDIT_REWARDS_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dualcredit/env.hpp"
#include "dualcredit/error.hpp"

namespace dualcredit {

struct TurnRewardParams {
  double delta1 = 0.4;
  double delta2 = 0.85;
  int l_target = 30;
  double sigma_len = 10.0;
  double r_penalty = -2.0;

  void validate() const {
    if (!(delta1 > 0.0 && delta1 < 1.0)) {
      throw ValidationError("turn_reward.delta1", "must lie in (0,1)");
    }
    if (!(delta2 > 0.0 && delta2 <= 1.0)) {
      throw ValidationError("turn_reward.delta2", "must lie in (0,1]");
    }
    if (l_target < 1) throw ValidationError("turn_reward.l_target", "must be positive");
    if (!(sigma_len > 0.0)) {
      throw ValidationError("turn_reward.sigma_len", "must be positive");
    }
    if (!(r_penalty < 0.0)) {
      throw ValidationError("turn_reward.r_penalty", "must be negative");
    }
  }

  friend bool operator==(const TurnRewardParams&, const TurnRewardParams&) = default;
};

struct SessionRewardParams {
  double alpha = 5.0;
  double beta = 1.0;

  void validate() const {
    if (!(alpha > 0.0)) throw ValidationError("session_reward.alpha", "must be positive");
    if (!(beta > 0.0)) throw ValidationError("session_reward.beta", "must be positive");
  }

  friend bool operator==(const SessionRewardParams&, const SessionRewardParams&) = default;
};

// Penalty units charged per OverPromise turn.
inline constexpr double kViolationUnit = 1.0;

struct RepetitionScore {
  double intra = 0.0;
  double inter = 0.0;
  double value() const { return std::max(intra, inter); }
};

struct RewardBreakdown {
  double rep = 0.0;
  double intra = 0.0;
  double inter = 0.0;
  double sim = 0.0;
  double r_len = 0.0;
  bool gate_valid = true;
  double r_turn = 0.0;
};

namespace detail {

// Sorted (token, count) pairs.
using TokenCounts = std::vector<std::pair<std::string_view, int>>;

inline TokenCounts count_tokens(const Utterance& u) {
  std::vector<std::string_view> sorted(u.begin(), u.end());
  std::sort(sorted.begin(), sorted.end());
  TokenCounts out;
  for (auto tok : sorted) {
    if (!out.empty() && out.back().first == tok) {
      ++out.back().second;
    } else {
      out.emplace_back(tok, 1);
    }
  }
  return out;
}

template <typename A, typename B>
double jaccard(const A& a, const B& b) {
  std::size_t i = 0, j = 0, inter = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i].first < b[j].first) {
      ++i;
    } else if (b[j].first < a[i].first) {
      ++j;
    } else {
      ++inter, ++i, ++j;
    }
  }
  const std::size_t uni = a.size() + b.size() - inter;
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

template <typename A, typename B>
double cosine(const A& a, const B& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (const auto& [_, c] : a) na += static_cast<double>(c) * c;
  for (const auto& [_, c] : b) nb += static_cast<double>(c) * c;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i].first < b[j].first) {
      ++i;
    } else if (b[j].first < a[i].first) {
      ++j;
    } else {
      dot += static_cast<double>(a[i].second) * b[j].second;
      ++i, ++j;
    }
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  // Integer counts keep na * nb exact, so identical vectors give exactly 1.
  return std::min(1.0, dot / std::sqrt(na * nb));
}

}  // namespace detail

// Intra and inter repetition of `current` against up to the last three entries
// of `previous_agent_turns` (most recent last).
inline RepetitionScore repetition_components(
    const Utterance& current, std::span<const Utterance> previous_agent_turns) {
  if (current.empty()) throw EmptyUtterance();
  const auto counts = detail::count_tokens(current);
  RepetitionScore s;
  s.intra = 1.0 - static_cast<double>(counts.size()) /
                      static_cast<double>(current.size());
  const std::size_t n = previous_agent_turns.size();
  for (std::size_t k = n > 3 ? n - 3 : 0; k < n; ++k) {
    s.inter = std::max(
        s.inter, detail::jaccard(counts, detail::count_tokens(previous_agent_turns[k])));
  }
  return s;
}

inline double repetition_score(const Utterance& current,
                               std::span<const Utterance> previous_agent_turns) {
  return repetition_components(current, previous_agent_turns).value();
}

// Standard sales-script library: one whitespace-tokenized script per line.
class ScriptLibrary {
 public:
  ScriptLibrary() = default;
  explicit ScriptLibrary(std::vector<Utterance> scripts) : scripts_(std::move(scripts)) {
    counts_.reserve(scripts_.size());
    for (const auto& s : scripts_) {
      OwnedCounts owned;
      for (const auto& [tok, c] : detail::count_tokens(s)) owned.emplace_back(tok, c);
      counts_.push_back(std::move(owned));
    }
  }

  // Blank lines are skipped.
  static ScriptLibrary load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open script library " + path.string());
    std::vector<Utterance> scripts;
    for (std::string line; std::getline(in, line);) {
      auto toks = tokenize(line);
      if (!toks.empty()) scripts.push_back(std::move(toks));
    }
    return ScriptLibrary(std::move(scripts));
  }

  const std::vector<Utterance>& scripts() const { return scripts_; }
  bool empty() const { return scripts_.empty(); }

  // Max cosine similarity between token-count vectors.
  double similarity(const Utterance& utterance) const {
    if (scripts_.empty()) throw EmptyLibrary();
    const auto u = detail::count_tokens(utterance);
    double best = 0.0;
    for (const auto& c : counts_) {
      best = std::max(best, detail::cosine(u, c));
    }
    return best;
  }

 private:
  using OwnedCounts = std::vector<std::pair<std::string, int>>;

  std::vector<Utterance> scripts_;
  std::vector<OwnedCounts> counts_;
};

inline double script_similarity(const Utterance& utterance,
                                std::span<const Utterance> script_library) {
  if (script_library.empty()) throw EmptyLibrary();
  const auto u = detail::count_tokens(utterance);
  double best = 0.0;
  for (const auto& s : script_library) {
    best = std::max(best, detail::cosine(u, detail::count_tokens(s)));
  }
  return best;
}

inline double length_reward(std::size_t length_tokens, const TurnRewardParams& p) {
  const double d = static_cast<double>(length_tokens) - p.l_target;
  return std::exp(-(d * d) / (2.0 * p.sigma_len * p.sigma_len));
}

// Gate and fuse precomputed components.
inline RewardBreakdown gate_turn_reward(RepetitionScore rep, double sim, double r_len,
                                        const TurnRewardParams& p) {
  RewardBreakdown b;
  b.intra = rep.intra;
  b.inter = rep.inter;
  b.rep = rep.value();
  b.sim = sim;
  b.r_len = r_len;
  b.gate_valid = b.rep <= p.delta1 || b.sim <= p.delta2;
  b.r_turn = b.gate_valid ? b.r_len : p.r_penalty;
  return b;
}

inline RewardBreakdown turn_reward(const AgentAction& action,
                                   std::span<const Utterance> history,
                                   const ScriptLibrary& library,
                                   const TurnRewardParams& p) {
  const auto rep = repetition_components(action.utterance, history);
  return gate_turn_reward(rep, library.similarity(action.utterance),
                          length_reward(action.length_tokens(), p), p);
}

inline double session_reward(bool converted, int violations,
                             const SessionRewardParams& p) {
  return p.alpha * (converted ? 1.0 : 0.0) - p.beta * violations * kViolationUnit;
}

// Compliance on the 0-100 scale: 100 minus the violation score, floored at 0.
inline double compliance_score(double violation_score) {
  return std::max(0.0, 100.0 - violation_score);
}

}  // namespace dualcredit

#endif  // DUALCREDIT_REWARDS_HPP_
