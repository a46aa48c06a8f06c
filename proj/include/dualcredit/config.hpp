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

// Experiment configuration: one JSON file, every key optional, unknown keys
// rejected. Relative data paths resolve against the config file's directory;
// when omitted they point at the data files shipped with the library.

#ifndef DUALCREDIT_CONFIG_HPP_
#define DUALCREDIT_CONFIG_HPP_

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "dualcredit/advantage.hpp"
#include "dualcredit/env.hpp"
#include "dualcredit/error.hpp"
#include "dualcredit/policy.hpp"
#include "dualcredit/rewards.hpp"

#ifndef DUALCREDIT_DATA_DIR
#define DUALCREDIT_DATA_DIR "data"
#endif

namespace dualcredit {

inline std::filesystem::path default_data_dir() {
  if (const char* env = std::getenv("DUALCREDIT_DATA_DIR"); env && *env) return env;
  return DUALCREDIT_DATA_DIR;
}

struct ExperimentConfig {
  static constexpr int kSchemaVersion = 1;

  int schema_version = kSchemaVersion;
  std::uint64_t seed = 1;
  int t_max = 12;
  int feature_dim = static_cast<int>(kFeatureDim);
  int policy_hidden = 0;  // 0 = linear policy
  int eval_episodes = 512;
  TurnRewardParams turn_reward;
  SessionRewardParams session_reward;
  GaeParams gae;
  HianParams hian;
  PpoParams ppo;
  std::filesystem::path persona_library_path = default_data_dir() / "environment.json";
  std::filesystem::path script_library_path = default_data_dir() / "scripts.txt";
  std::filesystem::path output_dir = "runs";

  void validate() const {
    if (schema_version != kSchemaVersion) {
      throw ValidationError("schema_version",
                            "expected " + std::to_string(kSchemaVersion));
    }
    if (t_max < 1) throw ValidationError("t_max", "must be positive");
    if (feature_dim != static_cast<int>(kFeatureDim)) {
      throw ValidationError("feature_dim",
                            "the environment emits " + std::to_string(kFeatureDim) +
                                " features");
    }
    if (policy_hidden < 0) throw ValidationError("policy_hidden", "must be non-negative");
    if (eval_episodes < 0) throw ValidationError("eval_episodes", "must be non-negative");
    turn_reward.validate();
    session_reward.validate();
    gae.validate();
    hian.validate();
    ppo.validate();
    if (!std::filesystem::exists(persona_library_path)) {
      throw ValidationError("persona_library_path",
                            "no such file: " + persona_library_path.string());
    }
    if (!std::filesystem::exists(script_library_path)) {
      throw ValidationError("script_library_path",
                            "no such file: " + script_library_path.string());
    }
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["schema_version"] = schema_version;
    j["seed"] = seed;
    j["t_max"] = t_max;
    j["feature_dim"] = feature_dim;
    j["policy_hidden"] = policy_hidden;
    j["eval_episodes"] = eval_episodes;
    j["turn_reward"] = {{"delta1", turn_reward.delta1},
                        {"delta2", turn_reward.delta2},
                        {"l_target", turn_reward.l_target},
                        {"sigma_len", turn_reward.sigma_len},
                        {"r_penalty", turn_reward.r_penalty}};
    j["session_reward"] = {{"alpha", session_reward.alpha},
                           {"beta", session_reward.beta}};
    j["gae"] = {{"gamma_turn", gae.gamma_turn},
                {"lambda_turn", gae.lambda_turn},
                {"gamma_session", gae.gamma_session},
                {"lambda_session", gae.lambda_session}};
    j["hian"] = {{"epsilon_norm", hian.epsilon_norm},
                 {"w_turn", hian.w_turn},
                 {"w_session", hian.w_session}};
    j["ppo"] = {{"epsilon_clip", ppo.epsilon_clip},
                {"kl_coef", ppo.kl_coef},
                {"learning_rate", ppo.learning_rate},
                {"epochs_per_batch", ppo.epochs_per_batch},
                {"episodes_per_step", ppo.episodes_per_step},
                {"max_steps", ppo.max_steps}};
    j["persona_library_path"] = persona_library_path.string();
    j["script_library_path"] = script_library_path.string();
    j["output_dir"] = output_dir.string();
    return j;
  }

  std::string serialize() const { return to_json().dump(2) + "\n"; }

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

namespace detail {

// Expands ${NAME} from the environment; unset variables expand to "".
inline std::string expand_env(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '$' && i + 1 < s.size() && s[i + 1] == '{') {
      const auto close = s.find('}', i + 2);
      if (close != std::string_view::npos) {
        const std::string name(s.substr(i + 2, close - i - 2));
        if (const char* v = std::getenv(name.c_str())) out += v;
        i = close;
        continue;
      }
    }
    out += s[i];
  }
  return out;
}

// Rejects any key of `given` that is absent from `schema`, recursing into
// objects. Returns the dotted path of the first offender.
inline void check_keys(const nlohmann::json& given, const nlohmann::ordered_json& schema,
                       const std::string& prefix) {
  for (const auto& [key, value] : given.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (!schema.contains(key)) throw UnknownKey(path);
    const auto& expected = schema.at(key);
    if (expected.is_object()) {
      if (!value.is_object()) throw ValidationError(path, "must be an object");
      check_keys(value, expected, path);
    } else if (expected.is_number() && !value.is_number()) {
      throw ValidationError(path, "must be a number");
    } else if (expected.is_string() && !value.is_string()) {
      throw ValidationError(path, "must be a string");
    }
  }
}

template <typename T>
void read(const nlohmann::json& j, std::string_view key, const std::string& path, T& out) {
  const std::string k(key);
  if (!j.contains(k)) return;
  const auto& v = j.at(k);
  const std::string full = path.empty() ? k : path + "." + k;
  if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer() && !v.is_number_unsigned()) {
      throw ValidationError(full, "must be an integer");
    }
    if constexpr (std::is_unsigned_v<T>) {
      if (v.is_number_integer() && v.get<std::int64_t>() < 0) {
        throw ValidationError(full, "must be non-negative");
      }
    }
  }
  out = v.get<T>();
}

inline std::filesystem::path resolve(const std::filesystem::path& base,
                                     const std::string& value) {
  std::filesystem::path p(value);
  if (p.is_relative() && !base.empty()) p = base / p;
  return p.lexically_normal();
}

}  // namespace detail

// Builds a validated config from a parsed document. `base_dir` anchors relative
// data paths.
inline ExperimentConfig config_from_json(const nlohmann::json& j,
                                         const std::filesystem::path& base_dir = {}) {
  if (!j.is_object()) throw ParseError("config must be a JSON object");
  ExperimentConfig c;
  detail::check_keys(j, c.to_json(), "");
  using detail::read;
  read(j, "schema_version", "", c.schema_version);
  read(j, "seed", "", c.seed);
  read(j, "t_max", "", c.t_max);
  read(j, "feature_dim", "", c.feature_dim);
  read(j, "policy_hidden", "", c.policy_hidden);
  read(j, "eval_episodes", "", c.eval_episodes);
  if (j.contains("turn_reward")) {
    const auto& t = j.at("turn_reward");
    read(t, "delta1", "turn_reward", c.turn_reward.delta1);
    read(t, "delta2", "turn_reward", c.turn_reward.delta2);
    read(t, "l_target", "turn_reward", c.turn_reward.l_target);
    read(t, "sigma_len", "turn_reward", c.turn_reward.sigma_len);
    read(t, "r_penalty", "turn_reward", c.turn_reward.r_penalty);
  }
  if (j.contains("session_reward")) {
    const auto& s = j.at("session_reward");
    read(s, "alpha", "session_reward", c.session_reward.alpha);
    read(s, "beta", "session_reward", c.session_reward.beta);
  }
  if (j.contains("gae")) {
    const auto& g = j.at("gae");
    read(g, "gamma_turn", "gae", c.gae.gamma_turn);
    read(g, "lambda_turn", "gae", c.gae.lambda_turn);
    read(g, "gamma_session", "gae", c.gae.gamma_session);
    read(g, "lambda_session", "gae", c.gae.lambda_session);
  }
  if (j.contains("hian")) {
    const auto& h = j.at("hian");
    read(h, "epsilon_norm", "hian", c.hian.epsilon_norm);
    read(h, "w_turn", "hian", c.hian.w_turn);
    read(h, "w_session", "hian", c.hian.w_session);
  }
  if (j.contains("ppo")) {
    const auto& p = j.at("ppo");
    read(p, "epsilon_clip", "ppo", c.ppo.epsilon_clip);
    read(p, "kl_coef", "ppo", c.ppo.kl_coef);
    read(p, "learning_rate", "ppo", c.ppo.learning_rate);
    read(p, "epochs_per_batch", "ppo", c.ppo.epochs_per_batch);
    read(p, "episodes_per_step", "ppo", c.ppo.episodes_per_step);
    read(p, "max_steps", "ppo", c.ppo.max_steps);
  }
  if (j.contains("persona_library_path")) {
    c.persona_library_path =
        detail::resolve(base_dir, j.at("persona_library_path").get<std::string>());
  }
  if (j.contains("script_library_path")) {
    c.script_library_path =
        detail::resolve(base_dir, j.at("script_library_path").get<std::string>());
  }
  if (j.contains("output_dir")) {
    c.output_dir = detail::expand_env(j.at("output_dir").get<std::string>());
  }
  c.validate();
  return c;
}

// Applies "dotted.key=value" overrides to a parsed document. Values are read
// as JSON when they parse (numbers, booleans) and as strings otherwise.
inline void apply_overrides(nlohmann::json& j,
                            const std::vector<std::string>& overrides) {
  const auto schema = ExperimentConfig{}.to_json();
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ParseError("override '" + o + "' is not of the form key=value");
    }
    const std::string key = o.substr(0, eq);
    const std::string raw = o.substr(eq + 1);
    nlohmann::json value;
    try {
      value = nlohmann::json::parse(raw);
    } catch (const nlohmann::json::exception&) {
      value = raw;
    }
    const nlohmann::ordered_json* node = &schema;
    nlohmann::json* target = &j;
    std::size_t start = 0;
    for (;;) {
      const auto dot = key.find('.', start);
      const std::string part = key.substr(start, dot - start);
      if (!node->is_object() || !node->contains(part)) throw UnknownKey(key);
      node = &node->at(part);
      if (dot == std::string::npos) {
        if (node->is_object()) throw ValidationError(key, "is a section, not a scalar");
        (*target)[part] = value;
        break;
      }
      if (!target->contains(part)) (*target)[part] = nlohmann::json::object();
      target = &(*target)[part];
      start = dot + 1;
    }
  }
}

inline nlohmann::json parse_config_text(const std::string& text, const std::string& origin) {
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
    return nlohmann::json::object();
  }
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(origin + ": " + e.what());
  }
}

inline ExperimentConfig load_config(const std::filesystem::path& path,
                                    const std::vector<std::string>& overrides = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  auto j = parse_config_text(buf.str(), path.string());
  apply_overrides(j, overrides);
  return config_from_json(j, path.parent_path());
}

// Defaults plus overrides, no file.
inline ExperimentConfig default_config(const std::vector<std::string>& overrides = {}) {
  nlohmann::json j = nlohmann::json::object();
  apply_overrides(j, overrides);
  return config_from_json(j);
}

}  // namespace dualcredit

#endif  // DUALCREDIT_CONFIG_HPP_
