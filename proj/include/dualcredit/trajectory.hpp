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

#ifndef DUALCREDIT_TRAJECTORY_HPP_
#define DUALCREDIT_TRAJECTORY_HPP_

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dualcredit/env.hpp"
#include "dualcredit/error.hpp"
#include "dualcredit/rewards.hpp"

namespace dualcredit {

struct TurnRecord {
  int t = 0;
  Intent intent_before = Intent::Neutral;
  std::vector<double> features;
  ActionKind action = ActionKind::Greet;
  Utterance utterance;
  double log_prob = 0.0;
  Utterance user_utterance;
  Intent reaction = Intent::Neutral;
  RewardBreakdown reward;
};

// One complete dialogue episode.
struct Trajectory {
  int persona_id = 0;
  std::uint64_t seed = 0;
  std::vector<TurnRecord> turns;
  bool terminal = false;
  bool converted = false;
  int violations = 0;
  double session_reward = 0.0;

  std::size_t length() const { return turns.size(); }

  // Attitude the user ended on: ReadyToBuy if converted, otherwise the last
  // non-terminal reaction (falling back to the intent before the final turn).
  Intent final_attitude() const {
    if (converted) return Intent::ReadyToBuy;
    if (turns.empty()) return Intent::Neutral;
    const auto& last = turns.back();
    return last.reaction == Intent::Terminated ? last.intent_before : last.reaction;
  }
};

inline int count_violations(const Trajectory& tr) {
  int n = 0;
  for (const auto& turn : tr.turns) n += violates_compliance(turn.action) ? 1 : 0;
  return n;
}

inline double session_reward(const Trajectory& tr, const SessionRewardParams& p) {
  if (!tr.terminal) throw NonTerminalTrajectory();
  return session_reward(tr.converted, count_violations(tr), p);
}

inline double compliance_score(const Trajectory& tr) {
  return compliance_score(count_violations(tr) * kViolationUnit);
}

// ---------------------------------------------------------------------------
// Line-delimited JSON. Field order is fixed by ordered_json insertion order.

inline nlohmann::ordered_json to_json(const Trajectory& tr) {
  nlohmann::ordered_json j;
  j["persona_id"] = tr.persona_id;
  j["seed"] = tr.seed;
  j["length"] = tr.turns.size();
  j["terminal"] = tr.terminal;
  j["converted"] = tr.converted;
  j["violations"] = tr.violations;
  j["session_reward"] = tr.session_reward;
  auto& turns = j["turns"] = nlohmann::ordered_json::array();
  for (const auto& t : tr.turns) {
    nlohmann::ordered_json tj;
    tj["t"] = t.t;
    tj["intent"] = to_string(t.intent_before);
    tj["action"] = to_string(t.action);
    tj["utterance"] = join(t.utterance);
    tj["log_prob"] = t.log_prob;
    tj["user"] = join(t.user_utterance);
    tj["reaction"] = to_string(t.reaction);
    tj["rep"] = t.reward.rep;
    tj["intra"] = t.reward.intra;
    tj["inter"] = t.reward.inter;
    tj["sim"] = t.reward.sim;
    tj["r_len"] = t.reward.r_len;
    tj["gate_valid"] = t.reward.gate_valid;
    tj["r_turn"] = t.reward.r_turn;
    tj["features"] = t.features;
    turns.push_back(std::move(tj));
  }
  return j;
}

inline Trajectory trajectory_from_json(const nlohmann::json& j) {
  auto intent = [](const nlohmann::json& v) {
    auto i = parse_intent(v.get<std::string>());
    if (!i) throw ParseError("unknown intent " + v.dump());
    return *i;
  };
  try {
    Trajectory tr;
    tr.persona_id = j.at("persona_id").get<int>();
    tr.seed = j.at("seed").get<std::uint64_t>();
    tr.terminal = j.at("terminal").get<bool>();
    tr.converted = j.at("converted").get<bool>();
    tr.violations = j.at("violations").get<int>();
    tr.session_reward = j.at("session_reward").get<double>();
    for (const auto& tj : j.at("turns")) {
      TurnRecord t;
      t.t = tj.at("t").get<int>();
      t.intent_before = intent(tj.at("intent"));
      auto kind = parse_action_kind(tj.at("action").get<std::string>());
      if (!kind) throw ParseError("unknown action " + tj.at("action").dump());
      t.action = *kind;
      t.utterance = tokenize(tj.at("utterance").get<std::string>());
      t.log_prob = tj.at("log_prob").get<double>();
      t.user_utterance = tokenize(tj.at("user").get<std::string>());
      t.reaction = intent(tj.at("reaction"));
      t.reward.rep = tj.at("rep").get<double>();
      t.reward.intra = tj.at("intra").get<double>();
      t.reward.inter = tj.at("inter").get<double>();
      t.reward.sim = tj.at("sim").get<double>();
      t.reward.r_len = tj.at("r_len").get<double>();
      t.reward.gate_valid = tj.at("gate_valid").get<bool>();
      t.reward.r_turn = tj.at("r_turn").get<double>();
      t.features = tj.at("features").get<std::vector<double>>();
      tr.turns.push_back(std::move(t));
    }
    return tr;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("trajectory record: ") + e.what());
  }
}

inline void write_jsonl(std::ostream& out, const std::vector<Trajectory>& batch) {
  for (const auto& tr : batch) out << to_json(tr).dump() << '\n';
}

inline std::vector<Trajectory> read_jsonl(std::istream& in) {
  std::vector<Trajectory> out;
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    }
    out.push_back(trajectory_from_json(j));
  }
  return out;
}

}  // namespace dualcredit

#endif  // DUALCREDIT_TRAJECTORY_HPP_
