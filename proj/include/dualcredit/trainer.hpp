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

// Training loop: rollout -> rewards -> advantages -> clipped PPO + value fits.
//
// Each step snapshots the behaviour policy, collects episodes_per_step episodes
// with it, computes per-turn advantages with the selected method, and then runs
// epochs_per_batch full-batch gradient steps on the PPO loss and the value
// losses. The KL reference is the policy at initialization.
//
// Methods:
//   Duca        separate GAE and standardization per horizon, then fusion.
//   NaiveSum    one GAE over r_turn + r_session, one standardization.
//   GroupNorm   critic-free: each episode's total return standardized within
//               the episodes of the same persona, broadcast to every turn.
//   SingleTurn  episodes truncated to one turn, advantages as NaiveSum.
//
// Episode i of step s uses seed derive_seed(seed, s) ^ i and persona
// (derive_seed(seed, s) + i) mod |personas|. Rollouts may run on several
// threads; results land in index order, so output is independent of the
// worker count.

#ifndef DUALCREDIT_TRAINER_HPP_
#define DUALCREDIT_TRAINER_HPP_

#include <algorithm>
#include <array>
#include <exception>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "dualcredit/advantage.hpp"
#include "dualcredit/config.hpp"
#include "dualcredit/error.hpp"
#include "dualcredit/metrics.hpp"
#include "dualcredit/policy.hpp"
#include "dualcredit/rollout.hpp"
#include "dualcredit/trajectory.hpp"

namespace dualcredit {

enum class Method { Duca, NaiveSum, GroupNorm, SingleTurn };

inline constexpr std::array<Method, 4> kAllMethods = {Method::Duca, Method::NaiveSum,
                                                      Method::GroupNorm, Method::SingleTurn};

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::Duca: return "duca";
    case Method::NaiveSum: return "naive";
    case Method::GroupNorm: return "groupnorm";
    case Method::SingleTurn: return "singleturn";
  }
  return "?";
}

inline Method parse_method(std::string_view name) {
  for (Method m : kAllMethods) {
    if (to_string(m) == name) return m;
  }
  throw UnknownMethod(std::string(name));
}

struct TrainStepRecord {
  int step = 0;
  double cvr = 0.0;
  double compliance = 0.0;
  double avg_turns = 0.0;
  double mean_r_turn = 0.0;
  double mean_a_total_abs = 0.0;
  double policy_loss = 0.0;
  ValueLoss value_losses;

  friend bool operator==(const TrainStepRecord& a, const TrainStepRecord& b) {
    return a.step == b.step && a.cvr == b.cvr && a.compliance == b.compliance &&
           a.avg_turns == b.avg_turns && a.mean_r_turn == b.mean_r_turn &&
           a.mean_a_total_abs == b.mean_a_total_abs && a.policy_loss == b.policy_loss &&
           a.value_losses.turn == b.value_losses.turn &&
           a.value_losses.session == b.value_losses.session;
  }
};

inline constexpr std::string_view kCurveHeader =
    "step,cvr,compliance,avg_turns,mean_r_turn,mean_a_total_abs,policy_loss,"
    "v_turn_loss,v_session_loss";

inline std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline std::string to_csv_row(const TrainStepRecord& r) {
  std::string s = std::to_string(r.step);
  for (double v : {r.cvr, r.compliance, r.avg_turns, r.mean_r_turn, r.mean_a_total_abs,
                   r.policy_loss, r.value_losses.turn, r.value_losses.session}) {
    s += ',';
    s += format_number(v);
  }
  return s;
}

inline std::string to_csv(std::span<const TrainStepRecord> records) {
  std::string out(kCurveHeader);
  out += '\n';
  for (const auto& r : records) {
    out += to_csv_row(r);
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Rollout collection

struct EpisodeSpec {
  std::size_t persona_index = 0;
  std::uint64_t seed = 0;
};

inline std::vector<EpisodeSpec> step_episodes(std::uint64_t base_seed, int step, int count) {
  const std::uint64_t base = derive_seed(base_seed, static_cast<std::uint64_t>(step));
  std::vector<EpisodeSpec> out(static_cast<std::size_t>(std::max(count, 0)));
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = {static_cast<std::size_t>(base + i), base ^ i};
  }
  return out;
}

// Runs fn(i) for i in [0, n) on up to `workers` threads.
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
  const std::size_t w = std::min<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)),
                                              std::max<std::size_t>(n, 1));
  if (w == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(w);
  for (std::size_t k = 0; k < w; ++k) {
    pool.emplace_back([&, k] {
      try {
        for (std::size_t i = k; i < n; i += w) fn(i);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

inline std::vector<Trajectory> collect(const PolicyModel& policy,
                                       std::span<const EpisodeSpec> episodes,
                                       const World& world, const RolloutOptions& opt,
                                       int workers) {
  std::vector<Trajectory> out(episodes.size());
  parallel_for(episodes.size(), workers, [&](std::size_t i) {
    const auto& persona = world.environment.persona(episodes[i].persona_index);
    out[i] = rollout(policy, persona, episodes[i].seed, world, opt);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Advantages per method

// Advantages plus the regression targets for whichever value heads the method
// trains.
struct MethodAdvantages {
  std::vector<double> a_total;
  std::optional<std::vector<double>> targets_turn;
  std::optional<std::vector<double>> targets_session;
};

// Single-stream methods regress their value on the session-head slot.
inline auto session_slot(const PolicyModel& m) {
  return [&m](std::span<const double> x) { return m.value_session(x); };
}

inline std::vector<double> concat_returns(std::span<const Trajectory> batch,
                                          std::vector<double> (*stream)(const Trajectory&),
                                          double gamma) {
  std::vector<double> out;
  for (const auto& tr : batch) {
    const auto r = returns_to_go(stream(tr), gamma);
    out.insert(out.end(), r.begin(), r.end());
  }
  return out;
}

// Group-normalized episode returns broadcast to every turn. Groups are episodes
// sharing a persona id.
inline std::vector<double> group_norm_advantages(std::span<const Trajectory> batch,
                                                 double epsilon_norm) {
  if (batch.empty()) throw EmptyInput("advantage batch");
  std::map<int, std::vector<std::size_t>> groups;
  std::vector<double> returns(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    double total = batch[i].session_reward;
    for (const auto& t : batch[i].turns) total += t.reward.r_turn;
    returns[i] = total;
    groups[batch[i].persona_id].push_back(i);
  }
  std::vector<double> per_episode(batch.size());
  for (const auto& [_, members] : groups) {
    std::vector<double> g;
    for (auto i : members) g.push_back(returns[i]);
    const auto z = normalize(g, epsilon_norm);
    for (std::size_t k = 0; k < members.size(); ++k) per_episode[members[k]] = z[k];
  }
  std::vector<double> out;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    out.insert(out.end(), batch[i].turns.size(), per_episode[i]);
  }
  return out;
}

inline MethodAdvantages method_advantages(Method method, std::span<const Trajectory> batch,
                                          const PolicyModel& model,
                                          const ExperimentConfig& c) {
  MethodAdvantages out;
  switch (method) {
    case Method::Duca: {
      out.a_total = duca_advantages(batch, model, c.gae, c.hian).a_total;
      out.targets_turn = concat_returns(batch, turn_rewards, c.gae.gamma_turn);
      out.targets_session = concat_returns(batch, session_rewards, c.gae.gamma_session);
      break;
    }
    case Method::NaiveSum:
    case Method::SingleTurn: {
      out.a_total = naive_advantages(batch, session_slot(model), c.gae.gamma_session,
                                     c.gae.lambda_session, c.hian.epsilon_norm);
      out.targets_session = concat_returns(batch, summed_rewards, c.gae.gamma_session);
      break;
    }
    case Method::GroupNorm: {
      out.a_total = group_norm_advantages(batch, c.hian.epsilon_norm);
      break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Updates

struct FlatBatch {
  std::vector<PolicySample> samples;
  std::vector<std::span<const double>> features;
  std::vector<double> ref_log_probs;
};

inline FlatBatch flatten(std::span<const Trajectory> batch, const PolicyModel& reference) {
  FlatBatch fb;
  for (const auto& tr : batch) {
    for (const auto& t : tr.turns) {
      const std::size_t a = static_cast<std::size_t>(t.action);
      fb.samples.push_back({t.features, a, t.log_prob});
      fb.features.emplace_back(t.features);
      fb.ref_log_probs.push_back(reference.log_probs(t.features)[a]);
    }
  }
  return fb;
}

struct UpdateStats {
  double policy_loss = 0.0;  // mean over epochs
  ValueLoss value_losses;    // mean over epochs
};

inline UpdateStats ppo_update(PolicyModel& model, const FlatBatch& fb,
                              const MethodAdvantages& adv, const PpoParams& ppo) {
  UpdateStats stats;
  const double inv_epochs = 1.0 / ppo.epochs_per_batch;
  const auto keep_current = [&](bool session) {
    std::vector<double> v;
    for (auto x : fb.features) v.push_back(session ? model.value_session(x) : model.value_turn(x));
    return v;
  };
  for (int epoch = 0; epoch < ppo.epochs_per_batch; ++epoch) {
    auto [pl, grad] = model.ppo_loss_and_grad(fb.samples, adv.a_total, fb.ref_log_probs,
                                              ppo.epsilon_clip, ppo.kl_coef);
    stats.policy_loss += pl.loss * inv_epochs;
    if (adv.targets_turn || adv.targets_session) {
      // A head without targets regresses onto its own predictions: zero loss,
      // zero gradient.
      const auto tt = adv.targets_turn ? *adv.targets_turn : keep_current(false);
      const auto ts = adv.targets_session ? *adv.targets_session : keep_current(true);
      auto [vl, vgrad] = model.value_loss_and_grad(fb.features, tt, ts);
      stats.value_losses.turn += vl.turn * inv_epochs;
      stats.value_losses.session += vl.session * inv_epochs;
      grad.axpy(1.0, vgrad);
    }
    model.apply_gradient(grad, ppo.learning_rate);
  }
  return stats;
}

inline double mean_abs(std::span<const double> v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += std::abs(x);
  return s / static_cast<double>(v.size());
}

inline PolicyModel initial_model(const ExperimentConfig& c) {
  return PolicyModel(static_cast<std::size_t>(c.feature_dim), kActionCount,
                     static_cast<std::size_t>(c.policy_hidden), derive_seed(c.seed, 0x1417));
}

inline RolloutOptions training_rollout_options(Method method, const ExperimentConfig& c) {
  auto opt = RolloutOptions::from(c);
  if (method == Method::SingleTurn) opt.t_max = 1;
  return opt;
}

struct TrainResult {
  std::vector<TrainStepRecord> records;
  PolicyModel model;
};

struct TrainOptions {
  int workers = 1;
  // Called with each step's batch, e.g. to dump trajectories.
  std::function<void(int, std::span<const Trajectory>)> on_batch;
};

inline TrainResult train(const ExperimentConfig& c, Method method, const World& world,
                         const TrainOptions& options = {}) {
  c.validate();
  TrainResult result{{}, initial_model(c)};
  const PolicyModel reference = result.model;
  const auto opt = training_rollout_options(method, c);
  for (int step = 0; step < c.ppo.max_steps; ++step) {
    const auto specs = step_episodes(c.seed, step, c.ppo.episodes_per_step);
    const auto batch = collect(result.model, specs, world, opt, options.workers);
    if (options.on_batch) options.on_batch(step, batch);

    const auto adv = method_advantages(method, batch, result.model, c);
    const auto fb = flatten(batch, reference);
    const auto stats = ppo_update(result.model, fb, adv, c.ppo);

    const auto report = compute_report(batch);
    TrainStepRecord rec;
    rec.step = step;
    rec.cvr = report.cvr;
    rec.compliance = report.compliance;
    rec.avg_turns = report.avg_turn;
    double r_sum = 0.0;
    std::size_t turns = 0;
    for (const auto& tr : batch) {
      for (const auto& t : tr.turns) r_sum += t.reward.r_turn, ++turns;
    }
    rec.mean_r_turn = turns ? r_sum / static_cast<double>(turns) : 0.0;
    rec.mean_a_total_abs = mean_abs(adv.a_total);
    rec.policy_loss = stats.policy_loss;
    rec.value_losses = stats.value_losses;
    result.records.push_back(rec);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Evaluation

struct EvalResult {
  EvalReport report;
  bool empty = true;
  std::vector<Trajectory> trajectories;
};

// Greedy rollouts over a seed range disjoint from training (seeds are derived
// with a distinct salt). Personas are cycled in library order.
inline EvalResult evaluate(const PolicyModel& model, const ExperimentConfig& c,
                           const World& world, int episodes, std::uint64_t seed,
                           int workers = 1) {
  EvalResult out;
  if (episodes <= 0) return out;
  std::vector<EpisodeSpec> specs(static_cast<std::size_t>(episodes));
  const std::uint64_t base = derive_seed(seed, 0xE7A1'0000'0000ULL);
  for (std::size_t i = 0; i < specs.size(); ++i) specs[i] = {i, base ^ i};
  out.trajectories = collect(model, specs, world, RolloutOptions::from(c, true), workers);
  out.report = compute_report(out.trajectories);
  out.empty = false;
  return out;
}

// Stochastic rollouts over another held-out seed range. Greedy evaluation hides
// actions the policy still takes with moderate probability; this exposes them.
inline std::vector<Trajectory> sampled_rollouts(const PolicyModel& model,
                                                const ExperimentConfig& c, const World& world,
                                                int episodes, std::uint64_t seed,
                                                int workers = 1) {
  if (episodes <= 0) return {};
  std::vector<EpisodeSpec> specs(static_cast<std::size_t>(episodes));
  const std::uint64_t base = derive_seed(seed, 0x5A3B'0000'0000ULL);
  for (std::size_t i = 0; i < specs.size(); ++i) specs[i] = {i, base ^ i};
  return collect(model, specs, world, RolloutOptions::from(c, false), workers);
}

// ---------------------------------------------------------------------------
// Gradient dominance probe

struct TurnSignalNorms {
  double naive = 0.0;
  double duca = 0.0;
  double ratio() const { return duca > 0.0 ? naive / duca : 0.0; }
};

// Norm of the policy gradient driven by the turn-level signal alone, under each
// method, at the model's current parameters. The session stream is zeroed
// while the normalization statistics stay those of the full batch: for
// NaiveSum that is the summed stream's mean and std, for Duca the turn
// stream's own. Measured at rho = 1 with the KL term off.
inline TurnSignalNorms turn_signal_gradient_norms(std::span<const Trajectory> batch,
                                                  const PolicyModel& model,
                                                  const ExperimentConfig& c) {
  const FlatBatch fb = flatten(batch, model);
  std::vector<PolicySample> samples = fb.samples;
  for (std::size_t i = 0; i < samples.size(); ++i) samples[i].old_log_prob = fb.ref_log_probs[i];

  // NaiveSum: turn component of the jointly standardized summed stream.
  const auto value = session_slot(model);
  const auto full = naive_advantages_detailed(batch, value, c.gae.gamma_session,
                                              c.gae.lambda_session, c.hian.epsilon_norm);
  std::vector<Trajectory> turn_only(batch.begin(), batch.end());
  for (auto& tr : turn_only) tr.session_reward = 0.0;
  const auto turn_part = naive_advantages_detailed(turn_only, value, c.gae.gamma_session,
                                                   c.gae.lambda_session, c.hian.epsilon_norm);
  std::vector<double> a_naive(turn_part.raw.size());
  const double turn_mean = turn_part.stats.mean;
  for (std::size_t i = 0; i < a_naive.size(); ++i) {
    a_naive[i] = (turn_part.raw[i] - turn_mean) / (full.stats.stddev + c.hian.epsilon_norm);
  }

  // Duca: w_turn * standardized turn stream (the session stream contributes
  // nothing once zeroed).
  const auto set = duca_advantages(std::span<const Trajectory>(turn_only), model, c.gae, c.hian);
  std::vector<double> a_duca(set.a_turn_hat.size());
  for (std::size_t i = 0; i < a_duca.size(); ++i) a_duca[i] = c.hian.w_turn * set.a_turn_hat[i];

  auto norm = [&](std::span<const double> adv) {
    const auto g = model.ppo_loss_and_grad(samples, adv, fb.ref_log_probs, c.ppo.epsilon_clip, 0.0).second;
    double s = 0.0;
    for (const auto* b : {&g.hidden_w, &g.hidden_b, &g.policy_w, &g.policy_b}) {
      for (double v : *b) s += v * v;
    }
    return std::sqrt(s);
  };
  return {norm(a_naive), norm(a_duca)};
}

}  // namespace dualcredit

#endif  // DUALCREDIT_TRAINER_HPP_
