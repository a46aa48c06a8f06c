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

#include <algorithm>
#include <vector>

#include "dualcredit.hpp"
#include "test_support.hpp"

namespace dualcredit {
namespace {

using testing::make_trajectory;

Trajectory with_actions(std::initializer_list<ActionKind> actions) {
  std::vector<double> r(actions.size(), 0.5);
  auto tr = make_trajectory(r, 0.0);
  std::size_t i = 0;
  for (auto a : actions) tr.turns[i++].action = a;
  return tr;
}

TEST(MetricsTest, EmptyInputThrows) {
  EXPECT_THROW(compute_report(std::vector<Trajectory>{}), EmptyInput);
}

TEST(MetricsTest, AllConverted) {
  std::vector<Trajectory> batch(4, make_trajectory({1.0}, 5.0));
  for (auto& tr : batch) tr.converted = true;
  EXPECT_EQ(compute_report(batch).cvr, 1.0);
}

TEST(MetricsTest, RepeatRateCountsAdjacentPairs) {
  const std::vector<Trajectory> one = {with_actions({ActionKind::Greet, ActionKind::Greet})};
  EXPECT_EQ(compute_report(one).repeat_action_rate, 1.0);
  const std::vector<Trajectory> two = {
      with_actions({ActionKind::Greet, ActionKind::Greet, ActionKind::PitchFeature}),
      with_actions({ActionKind::AskClose})};
  EXPECT_EQ(compute_report(two).repeat_action_rate, 0.5);
}

TEST(MetricsTest, PositiveTransfer) {
  auto up = with_actions({ActionKind::Greet, ActionKind::AskClose});
  up.turns[0].intent_before = Intent::Neutral;
  up.turns[1].intent_before = Intent::ReadyToBuy;
  up.turns[1].reaction = Intent::Terminated;
  up.converted = true;
  auto down = with_actions({ActionKind::Greet});
  down.turns[0].intent_before = Intent::Neutral;
  down.turns[0].reaction = Intent::Annoyed;
  auto same = with_actions({ActionKind::Greet});
  same.turns[0].intent_before = Intent::Neutral;
  same.turns[0].reaction = Intent::Terminated;
  const std::vector<Trajectory> batch = {up, down, same};
  EXPECT_DOUBLE_EQ(compute_report(batch).positive_transfer_rate, 1.0 / 3.0);
}

TEST(MetricsTest, CountsByHand) {
  auto a = with_actions({ActionKind::Filler, ActionKind::OverPromise, ActionKind::OverPromise});
  a.turns[0].reward.intra = 0.3;
  a.turns[1].reward.inter = 0.6;
  auto b = with_actions({ActionKind::Greet});
  b.converted = true;
  const std::vector<Trajectory> batch = {a, b};
  const auto r = compute_report(batch);
  EXPECT_EQ(r.episodes, 2u);
  EXPECT_EQ(r.cvr, 0.5);
  EXPECT_EQ(r.avg_turn, 2.0);
  EXPECT_EQ(r.filler_rate, 0.25);
  EXPECT_EQ(r.overpromise_rate, 0.5);
  EXPECT_EQ(r.compliance, 99.0);  // 2 violations over 2 episodes
  EXPECT_DOUBLE_EQ(r.intra_r, 0.3 / 4);
  EXPECT_DOUBLE_EQ(r.inter_r, 0.6 / 4);
  EXPECT_EQ(r.repeat_action_rate, 0.5);
  EXPECT_EQ(action_frequency(batch, ActionKind::OverPromise), 0.5);
}

TEST(MetricsTest, OverPromisingLowersCompliance) {
  const std::vector<Trajectory> bad = {with_actions({ActionKind::OverPromise})};
  const std::vector<Trajectory> good = {with_actions({ActionKind::PitchFeature})};
  EXPECT_LT(compute_report(bad).compliance, compute_report(good).compliance);
}

TEST(MetricsTest, PermutationInvariant) {
  testing::Gen g(4);
  std::vector<Trajectory> batch;
  for (int i = 0; i < 40; ++i) {
    auto tr = testing::random_trajectory(g);
    for (auto& t : tr.turns) {
      t.action = static_cast<ActionKind>(g.integer(0, 7));
      t.reward.intra = g.uniform(0, 1);
      t.reward.inter = g.uniform(0, 1);
      t.intent_before = static_cast<Intent>(g.integer(0, 4));
    }
    tr.converted = g.coin();
    batch.push_back(tr);
  }
  const auto base = compute_report(batch);
  for (int k = 0; k < 20; ++k) {
    std::shuffle(batch.begin(), batch.end(), g.engine());
    EXPECT_EQ(compute_report(batch), base);
  }
}

TEST(MetricsTest, RatesStayInRange) {
  testing::Gen g(5);
  for (int i = 0; i < 100; ++i) {
    std::vector<Trajectory> batch;
    const int n = g.integer(1, 10);
    for (int k = 0; k < n; ++k) {
      auto tr = testing::random_trajectory(g);
      for (auto& t : tr.turns) t.action = static_cast<ActionKind>(g.integer(0, 7));
      batch.push_back(tr);
    }
    const auto r = compute_report(batch);
    for (double v : {r.cvr, r.repeat_action_rate, r.filler_rate, r.overpromise_rate,
                     r.positive_transfer_rate, r.intra_r, r.inter_r}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
    EXPECT_GE(r.compliance, 0.0);
    EXPECT_LE(r.compliance, 100.0);
  }
}

TEST(MetricsTest, ReportFromSimulatedDumpRoundTrips) {
  const auto c = default_config();
  const auto world = World::load(c);
  PolicyModel m(kFeatureDim, kActionCount);
  const auto opt = RolloutOptions::from(c);
  std::vector<Trajectory> batch;
  for (std::uint64_t s = 0; s < 30; ++s) {
    batch.push_back(rollout(m, world.environment.persona(s), s, world, opt));
  }
  std::stringstream buf;
  write_jsonl(buf, batch);
  EXPECT_EQ(compute_report(read_jsonl(buf)), compute_report(batch));
}

}  // namespace
}  // namespace dualcredit
