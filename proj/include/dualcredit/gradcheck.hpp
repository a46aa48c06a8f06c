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


// Central finite-difference check of the model's analytic gradients.
//
// Each trial draws a small random model (linear or with a tanh hidden layer),
// a short PPO batch whose behaviour log-probs are perturbed so that the
// importance ratio lands on both sides of the clip band, random advantages and
// reference log-probs, and random value targets. The loss is then perturbed
// one parameter at a time:
//
//   numeric = (L(theta + h e_i) - L(theta - h e_i)) / 2h
//   error   = |analytic - numeric| / max(|analytic|, |numeric|, floor)
//
// Ratios within a small margin of 1 +/- eps are redrawn, since the clipped
// objective has a kink there and central differences straddling it are
// meaningless.

#ifndef DUALCREDIT_GRADCHECK_HPP_
#define DUALCREDIT_GRADCHECK_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dualcredit/policy.hpp"
#include "dualcredit/rng.hpp"

namespace dualcredit {

struct GradcheckOptions {
  int models = 100;
  double step = 1e-5;
  double floor = 1e-6;
  double epsilon_clip = 0.2;
  std::uint64_t seed = 1;
};

struct GradcheckResult {
  // Max relative error per ParameterSet block, in kBlockNames order. Blocks a
  // model does not have (hidden layer of a linear model) stay at 0.
  std::array<double, 8> block_error{};
  std::size_t clipped_turns = 0;
  std::size_t total_turns = 0;
  double max_error() const { return *std::max_element(block_error.begin(), block_error.end()); }
};

// A random PPO + value problem with everything the losses need.
struct GradcheckProblem {
  PolicyModel model;
  std::vector<std::vector<double>> features;
  std::vector<std::size_t> actions;
  std::vector<double> old_log_probs;
  std::vector<double> advantages;
  std::vector<double> ref_log_probs;
  std::vector<double> targets_turn;
  std::vector<double> targets_session;
  double kl_coef = 0.0;

  std::vector<PolicySample> samples() const {
    std::vector<PolicySample> s;
    for (std::size_t t = 0; t < features.size(); ++t) {
      s.push_back({features[t], actions[t], old_log_probs[t]});
    }
    return s;
  }

  std::vector<std::span<const double>> feature_spans() const {
    return {features.begin(), features.end()};
  }

  // PPO loss plus both value losses. The policy and the value heads share no
  // parameters, so one scalar exercises every block.
  double total_loss(double epsilon_clip) const {
    const auto s = samples();
    const auto fs = feature_spans();
    const double ppo =
        model.ppo_loss_and_grad(s, advantages, ref_log_probs, epsilon_clip, kl_coef).first.loss;
    const auto v = model.value_loss_and_grad(fs, targets_turn, targets_session).first;
    return ppo + v.turn + v.session;
  }

  GradientRecord total_grad(double epsilon_clip) const {
    const auto s = samples();
    const auto fs = feature_spans();
    auto g = model.ppo_loss_and_grad(s, advantages, ref_log_probs, epsilon_clip, kl_coef).second;
    g.axpy(1.0, model.value_loss_and_grad(fs, targets_turn, targets_session).second);
    return g;
  }
};

inline GradcheckProblem random_gradcheck_problem(Rng& rng, double epsilon_clip) {
  auto sym = [&](double scale) { return (2.0 * rng.uniform() - 1.0) * scale; };
  const std::size_t dim = 1 + rng.below(8);
  const std::size_t actions = 2 + rng.below(7);
  const std::size_t hidden = rng.below(2) == 0 ? 0 : 1 + rng.below(4);
  GradcheckProblem p;
  p.model = PolicyModel(dim, actions, hidden, rng.next_u64());
  for (auto* block : p.model.params().blocks()) {
    for (double& w : *block) w = sym(1.0);
  }
  const std::size_t turns = 1 + rng.below(6);
  const double margin = 1e-3;
  for (std::size_t t = 0; t < turns; ++t) {
    std::vector<double> x(dim);
    for (double& v : x) v = sym(1.0);
    const std::size_t a = rng.below(actions);
    const double logp = p.model.log_probs(x)[a];
    // log rho uniform in [-0.5, 0.5], redrawn near the clip kinks.
    double log_rho = 0.0;
    while (true) {
      log_rho = sym(0.5);
      const double rho = std::exp(log_rho);
      if (std::abs(rho - (1.0 + epsilon_clip)) > margin &&
          std::abs(rho - (1.0 - epsilon_clip)) > margin) {
        break;
      }
    }
    p.features.push_back(std::move(x));
    p.actions.push_back(a);
    p.old_log_probs.push_back(logp - log_rho);
    p.advantages.push_back(sym(2.0));
    p.ref_log_probs.push_back(logp + sym(0.5));
    p.targets_turn.push_back(sym(3.0));
    p.targets_session.push_back(sym(5.0));
  }
  p.kl_coef = rng.uniform() * 0.2;
  return p;
}

inline GradcheckResult run_gradcheck(const GradcheckOptions& opt) {
  GradcheckResult result;
  Rng rng(opt.seed);
  for (int m = 0; m < opt.models; ++m) {
    GradcheckProblem p = random_gradcheck_problem(rng, opt.epsilon_clip);
    for (std::size_t t = 0; t < p.features.size(); ++t) {
      const double rho =
          std::exp(p.model.log_probs(p.features[t])[p.actions[t]] - p.old_log_probs[t]);
      const double a = p.advantages[t];
      if ((rho > 1.0 + opt.epsilon_clip && a > 0.0) || (rho < 1.0 - opt.epsilon_clip && a < 0.0)) {
        ++result.clipped_turns;
      }
      ++result.total_turns;
    }
    const GradientRecord analytic = p.total_grad(opt.epsilon_clip);
    const auto analytic_blocks = analytic.blocks();
    auto blocks = p.model.params().blocks();
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      for (std::size_t i = 0; i < blocks[b]->size(); ++i) {
        double& w = (*blocks[b])[i];
        const double saved = w;
        w = saved + opt.step;
        const double up = p.total_loss(opt.epsilon_clip);
        w = saved - opt.step;
        const double down = p.total_loss(opt.epsilon_clip);
        w = saved;
        const double numeric = (up - down) / (2.0 * opt.step);
        const double exact = (*analytic_blocks[b])[i];
        const double denom = std::max({std::abs(exact), std::abs(numeric), opt.floor});
        result.block_error[b] = std::max(result.block_error[b], std::abs(exact - numeric) / denom);
      }
    }
  }
  return result;
}

}  // namespace dualcredit

#endif  // DUALCREDIT_GRADCHECK_HPP_
