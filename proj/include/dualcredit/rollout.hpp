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

#ifndef DUALCREDIT_ROLLOUT_HPP_
#define DUALCREDIT_ROLLOUT_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "dualcredit/config.hpp"
#include "dualcredit/env.hpp"
#include "dualcredit/policy.hpp"
#include "dualcredit/rewards.hpp"
#include "dualcredit/rng.hpp"
#include "dualcredit/trajectory.hpp"

namespace dualcredit {

// Immutable data every rollout needs: the environment model and the script
// library. Safe to share across threads.
struct World {
  EnvironmentModel environment;
  ScriptLibrary scripts;

  static World load(const ExperimentConfig& c) {
    return World{EnvironmentModel::load(c.persona_library_path),
                 ScriptLibrary::load(c.script_library_path)};
  }
};

struct RolloutOptions {
  int t_max = 12;
  TurnRewardParams turn_reward;
  SessionRewardParams session_reward;
  bool greedy = false;

  static RolloutOptions from(const ExperimentConfig& c, bool greedy = false) {
    return {c.t_max, c.turn_reward, c.session_reward, greedy};
  }
};

// Plays one episode. One seeded stream drives, in order per turn: the action
// draw (skipped when greedy), the utterance jitter, and the user transition.
inline Trajectory rollout(const PolicyModel& policy, const Persona& persona,
                          std::uint64_t seed, const World& world,
                          const RolloutOptions& opt) {
  DialogueEnv env(world.environment, opt.t_max);
  Rng rng(seed);
  Trajectory tr;
  tr.persona_id = persona.id;
  tr.seed = seed;
  DialogueState state = env.reset(persona, seed);
  std::vector<Utterance> history;
  while (true) {
    const auto [index, log_prob] = opt.greedy
                                       ? policy.greedy_action(state.history_features)
                                       : policy.sample_action(state.history_features, rng);
    AgentAction action = realize_action(static_cast<ActionKind>(index), rng);
    TurnRecord rec;
    rec.t = state.turn_index;
    rec.intent_before = state.user_intent;
    rec.features = state.history_features;
    rec.action = action.kind;
    rec.log_prob = log_prob;
    rec.reward = turn_reward(action, history, world.scripts, opt.turn_reward);

    StepOutcome out = env.step(state, action, persona, rng);
    rec.user_utterance = std::move(out.user_utterance);
    rec.reaction = out.reaction;
    rec.utterance = action.utterance;
    history.push_back(std::move(action.utterance));
    tr.turns.push_back(std::move(rec));
    state = std::move(out.next_state);
    if (out.terminal) {
      tr.terminal = true;
      tr.converted = out.converted;
      break;
    }
  }
  tr.violations = count_violations(tr);
  tr.session_reward = session_reward(tr, opt.session_reward);
  return tr;
}

}  // namespace dualcredit

#endif  // DUALCREDIT_ROLLOUT_HPP_
