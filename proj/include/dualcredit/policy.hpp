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

// Softmax policy over action kinds with two disjoint linear value heads.
//
// The policy is linear (logits = W x + b) unless hidden_width > 0, in which case
// one tanh layer sits in front of the output layer. All gradients are written
// out by hand.

#ifndef DUALCREDIT_POLICY_HPP_
#define DUALCREDIT_POLICY_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "dualcredit/error.hpp"
#include "dualcredit/rng.hpp"

namespace dualcredit {

struct PpoParams {
  double epsilon_clip = 0.2;
  double kl_coef = 0.05;
  double learning_rate = 0.05;
  int epochs_per_batch = 4;
  int episodes_per_step = 64;
  int max_steps = 70;

  void validate() const {
    if (!(epsilon_clip > 0.0 && epsilon_clip < 1.0)) {
      throw ValidationError("ppo.epsilon_clip", "must lie in (0,1)");
    }
    if (!(kl_coef >= 0.0)) throw ValidationError("ppo.kl_coef", "must be non-negative");
    // Zero is accepted: it freezes the parameters, which tests rely on.
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
      throw ValidationError("ppo.learning_rate", "must be non-negative and finite");
    }
    if (epochs_per_batch < 1) {
      throw ValidationError("ppo.epochs_per_batch", "must be positive");
    }
    if (episodes_per_step < 1) {
      throw ValidationError("ppo.episodes_per_step", "must be positive");
    }
    if (max_steps < 0) throw ValidationError("ppo.max_steps", "must be non-negative");
  }

  friend bool operator==(const PpoParams&, const PpoParams&) = default;
};

// Every trainable array of the model. Also used as the gradient container, so
// a GradientRecord always has exactly the model's shapes.
struct ParameterSet {
  std::vector<double> hidden_w;   // hidden_width x feature_dim
  std::vector<double> hidden_b;   // hidden_width
  std::vector<double> policy_w;   // action_count x (hidden_width or feature_dim)
  std::vector<double> policy_b;   // action_count
  std::vector<double> v_turn_w;   // feature_dim
  std::vector<double> v_turn_b;   // 1
  std::vector<double> v_session_w;
  std::vector<double> v_session_b;

  static constexpr std::array<std::string_view, 8> kBlockNames = {
      "hidden_w", "hidden_b", "policy_w",    "policy_b",
      "v_turn_w", "v_turn_b", "v_session_w", "v_session_b"};

  std::array<std::vector<double>*, 8> blocks() {
    return {&hidden_w, &hidden_b, &policy_w,    &policy_b,
            &v_turn_w, &v_turn_b, &v_session_w, &v_session_b};
  }
  std::array<const std::vector<double>*, 8> blocks() const {
    return {&hidden_w, &hidden_b, &policy_w,    &policy_b,
            &v_turn_w, &v_turn_b, &v_session_w, &v_session_b};
  }

  // Same shapes, all zero.
  ParameterSet zeros_like() const {
    ParameterSet z = *this;
    for (auto* b : z.blocks()) std::fill(b->begin(), b->end(), 0.0);
    return z;
  }

  // this += scale * other
  void axpy(double scale, const ParameterSet& other) {
    auto dst = blocks();
    auto src = other.blocks();
    for (std::size_t i = 0; i < dst.size(); ++i) {
      for (std::size_t k = 0; k < dst[i]->size(); ++k) (*dst[i])[k] += scale * (*src[i])[k];
    }
  }

  friend bool operator==(const ParameterSet&, const ParameterSet&) = default;
};

using GradientRecord = ParameterSet;

// One (state, taken action, behaviour log-prob) triple of a PPO batch.
struct PolicySample {
  std::span<const double> features;
  std::size_t action = 0;
  double old_log_prob = 0.0;
};

struct PpoLoss {
  double loss = 0.0;
  double surrogate = 0.0;  // mean clipped surrogate
  double kl = 0.0;         // mean(log pi - log pi_ref)
  double clip_fraction = 0.0;
};

struct ValueLoss {
  double turn = 0.0;
  double session = 0.0;
};

class PolicyModel {
 public:
  static constexpr int kSchemaVersion = 1;

  PolicyModel() = default;

  // Policy output layer and value heads start at zero, so the initial policy is
  // uniform. The optional hidden layer is drawn from U(-s, s), s = 1/sqrt(dim).
  PolicyModel(std::size_t feature_dim, std::size_t action_count,
              std::size_t hidden_width = 0, std::uint64_t init_seed = 0)
      : feature_dim_(feature_dim), action_count_(action_count),
        hidden_width_(hidden_width) {
    if (feature_dim == 0) throw ValidationError("feature_dim", "must be positive");
    if (action_count == 0) throw ValidationError("action_count", "must be positive");
    p_.hidden_w.assign(hidden_width * feature_dim, 0.0);
    p_.hidden_b.assign(hidden_width, 0.0);
    p_.policy_w.assign(action_count * trunk_dim(), 0.0);
    p_.policy_b.assign(action_count, 0.0);
    p_.v_turn_w.assign(feature_dim, 0.0);
    p_.v_turn_b.assign(1, 0.0);
    p_.v_session_w.assign(feature_dim, 0.0);
    p_.v_session_b.assign(1, 0.0);
    if (hidden_width > 0) {
      Rng rng(init_seed);
      const double scale = 1.0 / std::sqrt(static_cast<double>(feature_dim));
      for (double& w : p_.hidden_w) w = (2.0 * rng.uniform() - 1.0) * scale;
    }
  }

  std::size_t feature_dim() const { return feature_dim_; }
  std::size_t action_count() const { return action_count_; }
  std::size_t hidden_width() const { return hidden_width_; }

  const ParameterSet& params() const { return p_; }
  ParameterSet& params() { return p_; }

  void apply_gradient(const GradientRecord& g, double learning_rate) {
    p_.axpy(-learning_rate, g);
  }

  std::vector<double> action_logits(std::span<const double> x) const {
    check_dim(x);
    std::vector<double> h = trunk(x);
    return output_layer(h);
  }

  std::vector<double> log_probs(std::span<const double> x) const {
    return log_softmax(action_logits(x));
  }

  std::vector<double> probs(std::span<const double> x) const {
    auto lp = log_probs(x);
    for (double& v : lp) v = std::exp(v);
    return lp;
  }

  double value_turn(std::span<const double> x) const {
    return linear_head(p_.v_turn_w, p_.v_turn_b[0], x);
  }
  double value_session(std::span<const double> x) const {
    return linear_head(p_.v_session_w, p_.v_session_b[0], x);
  }

  // Inverse-CDF categorical draw. Returns {action, log_prob}.
  std::pair<std::size_t, double> sample_action(std::span<const double> x, Rng& rng) const {
    const auto lp = log_probs(x);
    std::vector<double> p(lp.size());
    for (std::size_t i = 0; i < lp.size(); ++i) p[i] = std::exp(lp[i]);
    const std::size_t a = rng.categorical(p);
    return {a, lp[a]};
  }

  // Argmax with ties broken toward the lowest index.
  std::pair<std::size_t, double> greedy_action(std::span<const double> x) const {
    const auto lp = log_probs(x);
    const auto it = std::max_element(lp.begin(), lp.end());
    const auto a = static_cast<std::size_t>(it - lp.begin());
    return {a, lp[a]};
  }

  // Clipped-surrogate loss with a KL penalty toward a reference policy:
  //
  //   L = -mean_t min(rho_t A_t, clip(rho_t, 1-eps, 1+eps) A_t)
  //       + kl_coef * mean_t (log pi(a_t|s_t) - ref_log_prob_t)
  //
  // rho_t = exp(log pi(a_t|s_t) - old_log_prob_t). Turns in the clipped region
  // contribute no surrogate gradient.
  std::pair<PpoLoss, GradientRecord> ppo_loss_and_grad(
      std::span<const PolicySample> batch, std::span<const double> advantages,
      std::span<const double> ref_log_probs, double epsilon_clip, double kl_coef) const {
    if (batch.size() != advantages.size() || batch.size() != ref_log_probs.size()) {
      throw DimMismatch("ppo batch, advantages and reference log-probs must align");
    }
    PpoLoss out;
    GradientRecord grad = p_.zeros_like();
    if (batch.empty()) return {out, grad};
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    std::size_t clipped = 0;
    for (std::size_t t = 0; t < batch.size(); ++t) {
      const auto& s = batch[t];
      check_dim(s.features);
      if (s.action >= action_count_) throw DimMismatch("action index out of range");
      const auto h = trunk(s.features);
      const auto lp = log_softmax(output_layer(h));
      const double logp = lp[s.action];
      const double rho = std::exp(logp - s.old_log_prob);
      const double adv = advantages[t];
      const double lo = 1.0 - epsilon_clip;
      const double hi = 1.0 + epsilon_clip;
      const double clipped_rho = std::clamp(rho, lo, hi);
      out.surrogate += std::min(rho * adv, clipped_rho * adv) * inv_n;
      out.kl += (logp - ref_log_probs[t]) * inv_n;

      const bool in_clip = (rho > hi && adv > 0.0) || (rho < lo && adv < 0.0);
      if (in_clip) ++clipped;
      // dL/dlog pi(a_t)
      const double dlogp = (in_clip ? 0.0 : -rho * adv * inv_n) + kl_coef * inv_n;
      if (dlogp == 0.0) continue;
      // dlog pi(a)/dlogits = onehot(a) - p
      std::vector<double> dlogits(action_count_);
      for (std::size_t k = 0; k < action_count_; ++k) {
        dlogits[k] = dlogp * ((k == s.action ? 1.0 : 0.0) - std::exp(lp[k]));
      }
      backprop_policy(s.features, h, dlogits, grad);
    }
    out.loss = -out.surrogate + kl_coef * out.kl;
    out.clip_fraction = static_cast<double>(clipped) * inv_n;
    return {out, grad};
  }

  // Mean-squared error of each head against its targets.
  std::pair<ValueLoss, GradientRecord> value_loss_and_grad(
      std::span<const std::span<const double>> features,
      std::span<const double> targets_turn, std::span<const double> targets_session) const {
    if (features.size() != targets_turn.size() ||
        features.size() != targets_session.size()) {
      throw DimMismatch("value batch and targets must align");
    }
    ValueLoss out;
    GradientRecord grad = p_.zeros_like();
    if (features.empty()) return {out, grad};
    const double inv_n = 1.0 / static_cast<double>(features.size());
    for (std::size_t t = 0; t < features.size(); ++t) {
      const auto x = features[t];
      check_dim(x);
      const double et = targets_turn[t] - value_turn(x);
      const double es = targets_session[t] - value_session(x);
      out.turn += et * et * inv_n;
      out.session += es * es * inv_n;
      const double gt = -2.0 * et * inv_n;
      const double gs = -2.0 * es * inv_n;
      for (std::size_t i = 0; i < feature_dim_; ++i) {
        grad.v_turn_w[i] += gt * x[i];
        grad.v_session_w[i] += gs * x[i];
      }
      grad.v_turn_b[0] += gt;
      grad.v_session_b[0] += gs;
    }
    return {out, grad};
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["schema_version"] = kSchemaVersion;
    j["feature_dim"] = feature_dim_;
    j["action_count"] = action_count_;
    j["hidden_width"] = hidden_width_;
    auto& pj = j["params"];
    const auto blocks = p_.blocks();
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      pj[std::string(ParameterSet::kBlockNames[i])] = *blocks[i];
    }
    return j;
  }

  static PolicyModel from_json(const nlohmann::json& j) {
    try {
      if (j.at("schema_version").get<int>() != kSchemaVersion) {
        throw ValidationError("schema_version", "unsupported checkpoint version");
      }
      PolicyModel m(j.at("feature_dim").get<std::size_t>(),
                    j.at("action_count").get<std::size_t>(),
                    j.at("hidden_width").get<std::size_t>());
      auto blocks = m.p_.blocks();
      for (std::size_t i = 0; i < blocks.size(); ++i) {
        const std::string name(ParameterSet::kBlockNames[i]);
        auto values = j.at("params").at(name).get<std::vector<double>>();
        if (values.size() != blocks[i]->size()) {
          throw ValidationError(name, "checkpoint block has the wrong size");
        }
        for (double v : values) {
          if (!std::isfinite(v)) throw ValidationError(name, "non-finite parameter");
        }
        *blocks[i] = std::move(values);
      }
      return m;
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("checkpoint: ") + e.what());
    }
  }

  void save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write checkpoint " + path.string());
    out << to_json().dump() << '\n';
  }

  static PolicyModel load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open checkpoint " + path.string());
    try {
      return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(path.string() + ": " + e.what());
    }
  }

  friend bool operator==(const PolicyModel&, const PolicyModel&) = default;

  static std::vector<double> log_softmax(std::vector<double> logits) {
    const double m = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double v : logits) sum += std::exp(v - m);
    const double lse = m + std::log(sum);
    for (double& v : logits) v -= lse;
    return logits;
  }

 private:
  std::size_t trunk_dim() const { return hidden_width_ > 0 ? hidden_width_ : feature_dim_; }

  void check_dim(std::span<const double> x) const {
    if (x.size() != feature_dim_) {
      throw DimMismatch("features have " + std::to_string(x.size()) + " entries, model expects " +
                        std::to_string(feature_dim_));
    }
  }

  std::vector<double> trunk(std::span<const double> x) const {
    if (hidden_width_ == 0) return {x.begin(), x.end()};
    std::vector<double> h(hidden_width_);
    for (std::size_t j = 0; j < hidden_width_; ++j) {
      double z = p_.hidden_b[j];
      const double* row = &p_.hidden_w[j * feature_dim_];
      for (std::size_t i = 0; i < feature_dim_; ++i) z += row[i] * x[i];
      h[j] = std::tanh(z);
    }
    return h;
  }

  std::vector<double> output_layer(std::span<const double> h) const {
    const std::size_t d = trunk_dim();
    std::vector<double> logits(action_count_);
    for (std::size_t k = 0; k < action_count_; ++k) {
      double z = p_.policy_b[k];
      const double* row = &p_.policy_w[k * d];
      for (std::size_t i = 0; i < d; ++i) z += row[i] * h[i];
      logits[k] = z;
    }
    return logits;
  }

  void backprop_policy(std::span<const double> x, std::span<const double> h,
                       std::span<const double> dlogits, GradientRecord& g) const {
    const std::size_t d = trunk_dim();
    for (std::size_t k = 0; k < action_count_; ++k) {
      const double gk = dlogits[k];
      g.policy_b[k] += gk;
      double* row = &g.policy_w[k * d];
      for (std::size_t i = 0; i < d; ++i) row[i] += gk * h[i];
    }
    if (hidden_width_ == 0) return;
    for (std::size_t j = 0; j < hidden_width_; ++j) {
      double dh = 0.0;
      for (std::size_t k = 0; k < action_count_; ++k) dh += p_.policy_w[k * d + j] * dlogits[k];
      const double dz = dh * (1.0 - h[j] * h[j]);
      g.hidden_b[j] += dz;
      double* row = &g.hidden_w[j * feature_dim_];
      for (std::size_t i = 0; i < feature_dim_; ++i) row[i] += dz * x[i];
    }
  }

  double linear_head(const std::vector<double>& w, double b, std::span<const double> x) const {
    check_dim(x);
    double v = b;
    for (std::size_t i = 0; i < feature_dim_; ++i) v += w[i] * x[i];
    return v;
  }

  std::size_t feature_dim_ = 0;
  std::size_t action_count_ = 0;
  std::size_t hidden_width_ = 0;
  ParameterSet p_;
};

}  // namespace dualcredit

#endif  // DUALCREDIT_POLICY_HPP_
