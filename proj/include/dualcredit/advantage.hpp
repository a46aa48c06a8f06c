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

// Dual-horizon advantage estimation.
//
// Each trajectory carries two reward streams: the dense per-turn reward and a
// sparse session stream that is zero everywhere except the final turn. Both
// streams get their own GAE pass against their own value head. The resulting
// advantages are standardized separately over the whole update batch and only
// then combined:
//
//   A_total = w_turn * (A_turn - mu_turn) / (sigma_turn + eps)
//           + w_session * (A_session - mu_session) / (sigma_session + eps)
//
// Standardizing the summed stream instead scales the turn component by
// 1 / sqrt(sigma_turn^2 + sigma_session^2), which vanishes when the session
// stream dominates the variance; naive_advantages() and dominance_ratio()
// expose that baseline.

#ifndef DUALCREDIT_ADVANTAGE_HPP_
#define DUALCREDIT_ADVANTAGE_HPP_

#include <cmath>
#include <concepts>
#include <cstddef>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "dualcredit/error.hpp"
#include "dualcredit/trajectory.hpp"

namespace dualcredit {

struct GaeParams {
  double gamma_turn = 0.99;
  double lambda_turn = 0.95;
  double gamma_session = 1.0;
  double lambda_session = 1.0;

  void validate() const {
    auto unit = [](double v, const char* key) {
      if (!(v >= 0.0 && v <= 1.0)) throw ValidationError(key, "must lie in [0,1]");
    };
    unit(gamma_turn, "gae.gamma_turn");
    unit(lambda_turn, "gae.lambda_turn");
    unit(gamma_session, "gae.gamma_session");
    unit(lambda_session, "gae.lambda_session");
  }

  friend bool operator==(const GaeParams&, const GaeParams&) = default;
};

struct HianParams {
  double epsilon_norm = 1e-8;
  double w_turn = 1.0;
  double w_session = 1.0;

  void validate() const {
    if (!(epsilon_norm > 0.0)) {
      throw ValidationError("hian.epsilon_norm", "must be positive");
    }
    if (!(w_turn >= 0.0)) throw ValidationError("hian.w_turn", "must be non-negative");
    if (!(w_session >= 0.0)) {
      throw ValidationError("hian.w_session", "must be non-negative");
    }
    if (!(w_turn + w_session > 0.0)) {
      throw ValidationError("hian.w_turn", "w_turn + w_session must be positive");
    }
  }

  friend bool operator==(const HianParams&, const HianParams&) = default;
};

// Per-turn advantages over a flat concatenation of every turn in a batch.
struct AdvantageSet {
  std::vector<double> a_turn;
  std::vector<double> a_session;
  std::vector<double> a_turn_hat;
  std::vector<double> a_session_hat;
  std::vector<double> a_total;

  std::size_t size() const { return a_total.size(); }

  nlohmann::ordered_json to_json() const {
    return {{"a_turn", a_turn},
            {"a_session", a_session},
            {"a_turn_hat", a_turn_hat},
            {"a_session_hat", a_session_hat},
            {"a_total", a_total}};
  }
};

// Anything that scores a feature vector. Used for the single-head baseline.
template <typename F>
concept ValueFunction = requires(const F& f, std::span<const double> x) {
  { f(x) } -> std::convertible_to<double>;
};

// A pair of value heads, one per horizon.
template <typename H>
concept ValueHeads = requires(const H& h, std::span<const double> x) {
  { h.value_turn(x) } -> std::convertible_to<double>;
  { h.value_session(x) } -> std::convertible_to<double>;
};

struct ZeroValueHeads {
  double value_turn(std::span<const double>) const { return 0.0; }
  double value_session(std::span<const double>) const { return 0.0; }
};

struct BatchStats {
  double mean = 0.0;
  double stddev = 0.0;  // population
};

inline BatchStats batch_stats(std::span<const double> v) {
  BatchStats s;
  if (v.empty()) return s;
  const double n = static_cast<double>(v.size());
  for (double x : v) s.mean += x;
  s.mean /= n;
  double var = 0.0;
  for (double x : v) var += (x - s.mean) * (x - s.mean);
  s.stddev = std::sqrt(var / n);
  return s;
}

// GAE with V_T = 0, by the backward recursion
//   delta_t = r_t + gamma V_{t+1} - V_t,   A_t = delta_t + gamma lambda A_{t+1}.
inline std::vector<double> gae(std::span<const double> rewards,
                               std::span<const double> values, double gamma,
                               double lambda) {
  if (rewards.size() != values.size()) {
    throw LengthMismatch("gae rewards " + std::to_string(rewards.size()) +
                         " vs values " + std::to_string(values.size()));
  }
  if (rewards.empty()) throw LengthMismatch("gae needs at least one step");
  const std::size_t n = rewards.size();
  std::vector<double> adv(n);
  double next_value = 0.0;
  double running = 0.0;
  for (std::size_t k = n; k-- > 0;) {
    const double delta = rewards[k] + gamma * next_value - values[k];
    running = delta + gamma * lambda * running;
    adv[k] = running;
    next_value = values[k];
  }
  return adv;
}

// Discounted reward-to-go; the value-head regression target for a stream.
inline std::vector<double> returns_to_go(std::span<const double> rewards, double gamma) {
  std::vector<double> out(rewards.size());
  double acc = 0.0;
  for (std::size_t k = rewards.size(); k-- > 0;) {
    acc = rewards[k] + gamma * acc;
    out[k] = acc;
  }
  return out;
}

// (A - mean) / (population std + eps).
inline std::vector<double> normalize(std::span<const double> advantages,
                                     double epsilon_norm) {
  const BatchStats s = batch_stats(advantages);
  std::vector<double> out(advantages.size());
  const double denom = s.stddev + epsilon_norm;
  for (std::size_t i = 0; i < advantages.size(); ++i) {
    out[i] = (advantages[i] - s.mean) / denom;
  }
  return out;
}

inline std::vector<double> fuse(std::span<const double> a_turn_hat,
                                std::span<const double> a_session_hat,
                                const HianParams& p) {
  if (a_turn_hat.size() != a_session_hat.size()) {
    throw LengthMismatch("fuse streams " + std::to_string(a_turn_hat.size()) +
                         " vs " + std::to_string(a_session_hat.size()));
  }
  std::vector<double> out(a_turn_hat.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = p.w_turn * a_turn_hat[i] + p.w_session * a_session_hat[i];
  }
  return out;
}

// Reward streams of one trajectory.
inline std::vector<double> turn_rewards(const Trajectory& tr) {
  std::vector<double> r;
  r.reserve(tr.turns.size());
  for (const auto& t : tr.turns) r.push_back(t.reward.r_turn);
  return r;
}

// Zero everywhere except R_session on the final turn.
inline std::vector<double> session_rewards(const Trajectory& tr) {
  std::vector<double> r(tr.turns.size(), 0.0);
  if (!r.empty()) r.back() = tr.session_reward;
  return r;
}

inline std::vector<double> summed_rewards(const Trajectory& tr) {
  auto r = turn_rewards(tr);
  if (!r.empty()) r.back() += tr.session_reward;
  return r;
}

namespace detail {

inline void check_batch(std::span<const Trajectory> batch) {
  if (batch.empty()) throw EmptyInput("advantage batch");
  for (const auto& tr : batch) {
    if (!tr.terminal) throw NonTerminalTrajectory();
    if (tr.turns.empty()) throw EmptyInput("trajectory with no turns");
  }
}

template <typename Predict>
std::vector<double> predict_all(const Trajectory& tr, Predict&& predict) {
  std::vector<double> v;
  v.reserve(tr.turns.size());
  for (const auto& t : tr.turns) v.push_back(predict(std::span<const double>(t.features)));
  return v;
}

}  // namespace detail

// Raw per-horizon GAE over a batch, before normalization.
template <ValueHeads Heads>
std::pair<std::vector<double>, std::vector<double>> dual_gae(
    std::span<const Trajectory> batch, const Heads& heads, const GaeParams& g) {
  detail::check_batch(batch);
  std::vector<double> a_turn, a_session;
  for (const auto& tr : batch) {
    const auto vt = detail::predict_all(
        tr, [&](std::span<const double> x) { return heads.value_turn(x); });
    const auto vs = detail::predict_all(
        tr, [&](std::span<const double> x) { return heads.value_session(x); });
    const auto at = gae(turn_rewards(tr), vt, g.gamma_turn, g.lambda_turn);
    const auto as = gae(session_rewards(tr), vs, g.gamma_session, g.lambda_session);
    a_turn.insert(a_turn.end(), at.begin(), at.end());
    a_session.insert(a_session.end(), as.begin(), as.end());
  }
  return {std::move(a_turn), std::move(a_session)};
}

template <ValueHeads Heads>
AdvantageSet duca_advantages(std::span<const Trajectory> batch, const Heads& heads,
                             const GaeParams& g, const HianParams& h) {
  AdvantageSet out;
  std::tie(out.a_turn, out.a_session) = dual_gae(batch, heads, g);
  out.a_turn_hat = normalize(out.a_turn, h.epsilon_norm);
  out.a_session_hat = normalize(out.a_session, h.epsilon_norm);
  out.a_total = fuse(out.a_turn_hat, out.a_session_hat, h);
  return out;
}

// Single-stream baseline: one GAE over r_turn + r_session, one normalization.
struct NaiveAdvantages {
  std::vector<double> raw;
  std::vector<double> normalized;
  BatchStats stats;
};

template <ValueFunction Value>
NaiveAdvantages naive_advantages_detailed(std::span<const Trajectory> batch,
                                          const Value& value, double gamma,
                                          double lambda, double epsilon_norm) {
  detail::check_batch(batch);
  NaiveAdvantages out;
  for (const auto& tr : batch) {
    const auto v = detail::predict_all(tr, value);
    const auto a = gae(summed_rewards(tr), v, gamma, lambda);
    out.raw.insert(out.raw.end(), a.begin(), a.end());
  }
  out.stats = batch_stats(out.raw);
  out.normalized = normalize(out.raw, epsilon_norm);
  return out;
}

template <ValueFunction Value>
std::vector<double> naive_advantages(std::span<const Trajectory> batch,
                                     const Value& value, double gamma, double lambda,
                                     double epsilon_norm) {
  return naive_advantages_detailed(batch, value, gamma, lambda, epsilon_norm).normalized;
}

// Effective per-unit weight of the turn signal after standardization.
// Under joint standardization of the summed stream it is
// sigma_turn / sqrt(sigma_turn^2 + sigma_session^2); under separate
// standardization it is 1. Returns {naive, separate}.
inline std::pair<double, double> dominance_ratio(double sigma_turn, double sigma_session) {
  const double total = std::hypot(sigma_turn, sigma_session);
  if (total == 0.0) return {1.0, 1.0};
  return {sigma_turn / total, 1.0};
}

inline std::pair<double, double> dominance_ratio(std::span<const double> a_turn,
                                                 std::span<const double> a_session) {
  if (a_turn.size() != a_session.size()) {
    throw LengthMismatch("dominance_ratio streams");
  }
  if (a_turn.empty()) throw EmptyInput("dominance_ratio");
  return dominance_ratio(batch_stats(a_turn).stddev, batch_stats(a_session).stddev);
}

}  // namespace dualcredit

#endif  // DUALCREDIT_ADVANTAGE_HPP_
