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


#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <vector>

#include "dualcredit.hpp"
#include "test_support.hpp"

namespace dualcredit {
namespace {

// Independent forward pass: logits from raw parameter arrays.
std::vector<double> oracle_logits(const PolicyModel& m, const std::vector<double>& x) {
  const auto& p = m.params();
  const std::size_t f = m.feature_dim(), hw = m.hidden_width(), a = m.action_count();
  std::vector<double> h = x;
  if (hw > 0) {
    h.assign(hw, 0.0);
    for (std::size_t j = 0; j < hw; ++j) {
      double z = p.hidden_b[j];
      for (std::size_t i = 0; i < f; ++i) z += p.hidden_w[j * f + i] * x[i];
      h[j] = std::tanh(z);
    }
  }
  std::vector<double> out(a);
  for (std::size_t k = 0; k < a; ++k) {
    out[k] = p.policy_b[k];
    for (std::size_t i = 0; i < h.size(); ++i) out[k] += p.policy_w[k * h.size() + i] * h[i];
  }
  return out;
}

double oracle_log_prob(const PolicyModel& m, const std::vector<double>& x, std::size_t a) {
  const auto z = oracle_logits(m, x);
  double sum = 0.0;
  for (double v : z) sum += std::exp(v);
  return z[a] - std::log(sum);
}

// Surrogate + KL + both value MSEs, written out directly.
double oracle_loss(const PolicyModel& m, const GradcheckProblem& prob, double eps) {
  const auto& p = m.params();
  const double n = static_cast<double>(prob.features.size());
  double surrogate = 0.0, kl = 0.0, vt = 0.0, vs = 0.0;
  for (std::size_t t = 0; t < prob.features.size(); ++t) {
    const auto& x = prob.features[t];
    const double lp = oracle_log_prob(m, x, prob.actions[t]);
    const double rho = std::exp(lp - prob.old_log_probs[t]);
    const double adv = prob.advantages[t];
    const double clipped = std::min(std::max(rho, 1.0 - eps), 1.0 + eps);
    surrogate += std::min(rho * adv, clipped * adv);
    kl += lp - prob.ref_log_probs[t];
    double pt = p.v_turn_b[0], ps = p.v_session_b[0];
    for (std::size_t i = 0; i < x.size(); ++i) {
      pt += p.v_turn_w[i] * x[i];
      ps += p.v_session_w[i] * x[i];
    }
    vt += (prob.targets_turn[t] - pt) * (prob.targets_turn[t] - pt);
    vs += (prob.targets_session[t] - ps) * (prob.targets_session[t] - ps);
  }
  return -surrogate / n + prob.kl_coef * kl / n + vt / n + vs / n;
}

PolicySample sample(const std::vector<double>& x, std::size_t a, double old_lp) {
  return PolicySample{x, a, old_lp};
}

// --- logits and sampling -------------------------------------------------------

TEST(PolicyTest, ZeroModelIsUniform) {
  PolicyModel m(3, 8);
  const std::vector<double> x = {0.3, -1.0, 2.0};
  for (double lp : m.log_probs(x)) EXPECT_NEAR(lp, -std::log(8.0), 1e-15);
}

TEST(PolicyTest, ShiftInvariance) {
  PolicyModel m(2, 4);
  testing::Gen g(1);
  m.params().policy_w = g.vec(8, -1, 1);
  m.params().policy_b = g.vec(4, -1, 1);
  const std::vector<double> x = {0.5, -0.25};
  const auto before = m.log_probs(x);
  for (double& b : m.params().policy_b) b += 7.0;
  const auto after = m.log_probs(x);
  for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(before[k], after[k], 1e-13);
}

TEST(PolicyTest, HandSoftmax) {
  PolicyModel m(1, 2);
  m.params().policy_w = {1.0, 0.0};
  const std::vector<double> x = {1.0};
  const auto p = m.probs(x);
  const double e = std::exp(1.0);
  EXPECT_NEAR(p[0], e / (e + 1.0), 1e-15);
  EXPECT_NEAR(p[1], 1.0 / (e + 1.0), 1e-15);
}

TEST(PolicyTest, ProbabilitiesSumToOne) {
  testing::Gen g(2);
  for (int i = 0; i < 500; ++i) {
    PolicyModel m(1, 8);
    m.params().policy_b = g.vec(8, -50, 50);
    const std::vector<double> x = {0.0};
    double sum = 0.0;
    for (double v : m.probs(x)) sum += v;
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(PolicyTest, DimensionMismatchThrows) {
  PolicyModel m(3, 8);
  const std::vector<double> x = {1.0};
  EXPECT_THROW(m.action_logits(x), DimMismatch);
  EXPECT_THROW(m.value_turn(x), DimMismatch);
  Rng rng(1);
  EXPECT_THROW(m.sample_action(x, rng), DimMismatch);
}

TEST(PolicyTest, SaturatedLogitsPickDominantAction) {
  PolicyModel m(1, 2);
  m.params().policy_b = {40.0, -40.0};
  Rng rng(3);
  const std::vector<double> x = {0.0};
  int zero = 0;
  for (int i = 0; i < 10000; ++i) zero += m.sample_action(x, rng).first == 0;
  EXPECT_GE(zero / 10000.0, 0.9999);
}

TEST(PolicyTest, UniformSamplingFrequencies) {
  PolicyModel m(1, 8);
  Rng rng(4);
  const std::vector<double> x = {0.0};
  std::vector<int> hist(8, 0);
  for (int i = 0; i < 10000; ++i) ++hist[m.sample_action(x, rng).first];
  for (int h : hist) EXPECT_NEAR(h / 10000.0, 0.125, 0.02);
}

TEST(PolicyTest, SamplingIsDeterministicPerStream) {
  testing::Gen g(5);
  PolicyModel m(2, 8);
  m.params().policy_w = g.vec(16, -1, 1);
  const std::vector<double> x = {0.1, 0.9};
  Rng a(9), b(9);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(m.sample_action(x, a), m.sample_action(x, b));
}

TEST(PolicyTest, SampledLogProbMatchesOracle) {
  testing::Gen g(6);
  PolicyModel m(3, 5, 4, 77);
  m.params().policy_w = g.vec(20, -1, 1);
  const std::vector<double> x = {0.2, -0.4, 1.0};
  Rng rng(1);
  const auto [a, lp] = m.sample_action(x, rng);
  EXPECT_NEAR(lp, oracle_log_prob(m, x, a), 1e-13);
}

// --- ppo loss ------------------------------------------------------------------

TEST(PpoLossTest, OnPolicySurrogateIsMeanAdvantage) {
  testing::Gen g(7);
  PolicyModel m(2, 8);
  m.params().policy_w = g.vec(16, -1, 1);
  std::vector<std::vector<double>> xs;
  std::vector<PolicySample> batch;
  std::vector<double> adv, ref;
  for (int t = 0; t < 10; ++t) xs.push_back(g.vec(2, -1, 1));
  for (int t = 0; t < 10; ++t) {
    const auto a = static_cast<std::size_t>(g.integer(0, 7));
    const double lp = m.log_probs(xs[t])[a];
    batch.push_back(sample(xs[t], a, lp));
    adv.push_back(g.uniform(-2, 2));
    ref.push_back(lp);
  }
  const auto [loss, grad] = m.ppo_loss_and_grad(batch, adv, ref, 0.2, 0.05);
  double mean = 0.0;
  for (double v : adv) mean += v / 10.0;
  EXPECT_NEAR(loss.surrogate, mean, 1e-12);
  EXPECT_EQ(loss.clip_fraction, 0.0);
  EXPECT_NEAR(loss.kl, 0.0, 1e-15);
}

TEST(PpoLossTest, ClippedAboveWithPositiveAdvantage) {
  PolicyModel m(1, 2);
  m.params().policy_w = {0.3, -0.2};
  const std::vector<double> x = {1.0};
  const double lp = m.log_probs(x)[0];
  const std::vector<PolicySample> batch = {sample(x, 0, lp - std::log(1.5))};
  const std::vector<double> adv = {1.0}, ref = {lp};
  const auto [loss, grad] = m.ppo_loss_and_grad(batch, adv, ref, 0.2, 0.0);
  EXPECT_NEAR(loss.surrogate, 1.2, 1e-12);
  EXPECT_EQ(loss.clip_fraction, 1.0);
  for (const auto* b : grad.blocks()) {
    for (double v : *b) EXPECT_EQ(v, 0.0);
  }
}

TEST(PpoLossTest, ClippedBelowWithNegativeAdvantage) {
  PolicyModel m(1, 2);
  const std::vector<double> x = {1.0};
  const double lp = m.log_probs(x)[1];
  const std::vector<PolicySample> batch = {sample(x, 1, lp - std::log(0.5))};
  const std::vector<double> adv = {-1.0}, ref = {lp};
  const auto [loss, grad] = m.ppo_loss_and_grad(batch, adv, ref, 0.2, 0.0);
  EXPECT_NEAR(loss.surrogate, -0.8, 1e-12);
  EXPECT_EQ(loss.clip_fraction, 1.0);
  for (double v : grad.policy_w) EXPECT_EQ(v, 0.0);
}

// Inside the clipped region small parameter moves leave the surrogate flat.
TEST(PpoLossTest, ClipRegionIsFlat) {
  PolicyModel m(1, 2);
  const std::vector<double> x = {1.0};
  const double lp = m.log_probs(x)[0];
  const std::vector<PolicySample> batch = {sample(x, 0, lp - std::log(1.5))};
  const std::vector<double> adv = {1.0}, ref = {lp};
  const double base = m.ppo_loss_and_grad(batch, adv, ref, 0.2, 0.0).first.surrogate;
  for (double d : {1e-4, -1e-4}) {
    PolicyModel q = m;
    q.params().policy_w[0] += d;
    EXPECT_EQ(q.ppo_loss_and_grad(batch, adv, ref, 0.2, 0.0).first.surrogate, base);
  }
}

TEST(PpoLossTest, MisalignedInputsThrow) {
  PolicyModel m(1, 2);
  const std::vector<double> x = {1.0};
  const std::vector<PolicySample> batch = {sample(x, 0, 0.0)};
  const std::vector<double> two = {1.0, 2.0}, one = {0.0};
  EXPECT_THROW(m.ppo_loss_and_grad(batch, two, one, 0.2, 0.0), DimMismatch);
  const std::vector<PolicySample> bad = {sample(x, 5, 0.0)};
  EXPECT_THROW(m.ppo_loss_and_grad(bad, one, one, 0.2, 0.0), DimMismatch);
}

// --- value loss ----------------------------------------------------------------

TEST(ValueLossTest, PerfectPredictionsGiveZero) {
  PolicyModel m(2, 2);
  m.params().v_turn_w = {1.0, 2.0};
  m.params().v_session_b = {3.0};
  const std::vector<double> x = {0.5, 0.25};
  const std::vector<std::span<const double>> f = {x};
  const std::vector<double> tt = {1.0}, ts = {3.0};
  const auto [loss, grad] = m.value_loss_and_grad(f, tt, ts);
  EXPECT_EQ(loss.turn, 0.0);
  EXPECT_EQ(loss.session, 0.0);
  for (const auto* b : grad.blocks()) {
    for (double v : *b) EXPECT_EQ(v, 0.0);
  }
}

TEST(ValueLossTest, HandGradient) {
  PolicyModel m(1, 2);
  const std::vector<double> x = {1.0};
  const std::vector<std::span<const double>> f = {x, x};
  const std::vector<double> ones = {1.0, 1.0};
  const auto [loss, grad] = m.value_loss_and_grad(f, ones, ones);
  EXPECT_EQ(loss.turn, 1.0);
  EXPECT_EQ(grad.v_turn_b[0], -2.0);
  EXPECT_EQ(grad.v_session_b[0], -2.0);
  const std::vector<double> twos = {2.0, 2.0};
  EXPECT_EQ(m.value_loss_and_grad(f, twos, twos).first.turn, 4.0);
}

TEST(ValueLossTest, HeadsAreDisjoint) {
  PolicyModel m(1, 2);
  const std::vector<double> x = {1.0};
  const std::vector<std::span<const double>> f = {x};
  const std::vector<double> t = {1.0}, s = {0.0};
  const auto grad = m.value_loss_and_grad(f, t, s).second;
  EXPECT_NE(grad.v_turn_b[0], 0.0);
  EXPECT_EQ(grad.v_session_b[0], 0.0);
  for (double v : grad.policy_w) EXPECT_EQ(v, 0.0);
}

// --- gradient check ---------------------------------------------------------------

// Analytic gradients against central differences of an independently written
// loss, on random small models with clipped and unclipped turns.
TEST(GradientTest, MatchesIndependentFiniteDifferences) {
  Rng rng(2026);
  const double eps = 0.2, h = 1e-5;
  double worst = 0.0;
  for (int trial = 0; trial < 30; ++trial) {
    const auto prob = random_gradcheck_problem(rng, eps);
    const auto analytic = prob.total_grad(eps);
    PolicyModel m = prob.model;
    auto blocks = m.params().blocks();
    const auto grad_blocks = analytic.blocks();
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      for (std::size_t i = 0; i < blocks[b]->size(); ++i) {
        double& w = (*blocks[b])[i];
        const double saved = w;
        w = saved + h;
        const double up = oracle_loss(m, prob, eps);
        w = saved - h;
        const double down = oracle_loss(m, prob, eps);
        w = saved;
        const double numeric = (up - down) / (2 * h);
        const double a = (*grad_blocks[b])[i];
        const double err =
            std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6});
        worst = std::max(worst, err);
      }
    }
    EXPECT_NEAR(prob.total_loss(eps), oracle_loss(m, prob, eps), 1e-12);
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(GradientTest, SuiteCoversClipCases) {
  GradcheckOptions opt;
  opt.models = 20;
  const auto r = run_gradcheck(opt);
  EXPECT_LT(r.max_error(), 1e-4);
  EXPECT_GT(r.clipped_turns, 0u);
  EXPECT_LT(r.clipped_turns, r.total_turns);
}

// --- checkpoints -----------------------------------------------------------------

TEST(CheckpointTest, RoundTripIsExact) {
  testing::Gen g(9);
  PolicyModel m(3, 4, 2, 5);
  for (auto* b : m.params().blocks()) *b = g.vec(b->size(), -3, 3);
  const auto path = std::filesystem::temp_directory_path() / "dualcredit_policy_test.json";
  m.save(path);
  EXPECT_EQ(PolicyModel::load(path), m);
  std::filesystem::remove(path);
}

TEST(CheckpointTest, RejectsBadRecords) {
  PolicyModel m(2, 2);
  auto j = nlohmann::json::parse(m.to_json().dump());
  auto wrong = j;
  wrong["params"]["policy_b"] = {1.0};
  EXPECT_THROW(PolicyModel::from_json(wrong), ValidationError);
  auto version = j;
  version["schema_version"] = 9;
  EXPECT_THROW(PolicyModel::from_json(version), ValidationError);
  auto missing = j;
  missing.erase("params");
  EXPECT_THROW(PolicyModel::from_json(missing), ParseError);
  EXPECT_THROW(PolicyModel::load("/nonexistent/ckpt.json"), ConfigError);
}

TEST(PpoParamsTest, Validation) {
  PpoParams p;
  p.epsilon_clip = 1.0;
  EXPECT_THROW(p.validate(), ValidationError);
  p = {};
  p.learning_rate = 0.0;
  EXPECT_NO_THROW(p.validate());
  p.max_steps = -1;
  EXPECT_THROW(p.validate(), ValidationError);
}

}  // namespace
}  // namespace dualcredit
