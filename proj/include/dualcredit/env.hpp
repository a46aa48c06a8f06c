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

// Persona-conditioned sales-dialogue MDP.
//
// The user is a scripted stochastic process over a small set of intents. Each
// agent turn picks one of eight action kinds; the kind is realized as a
// templated utterance with seeded synonym jitter, and the user's next intent is
// drawn from a transition table loaded from a JSON data file. The table rows
// are conditioned on the current intent and the action kind, then adjusted by
// three persona-dependent modifiers:
//
//   annoyance_gain      RepeatScript and Filler shift `gain * skepticism` of
//                       the receptive mass (Neutral, Interested, Objecting,
//                       ReadyToBuy) onto Annoyed.
//   repeat_annoyance    repeating the previous action kind shifts this fraction
//                       of the receptive mass onto Annoyed.
//   busy_filler_hangup  Filler aimed at a busy persona shifts this fraction of
//                       all non-terminal mass onto Terminated.
//
// AskClose while ReadyToBuy converts with probability
// clamp(base_acceptance - 0.5 * price_sensitivity * discount_absent, 0, 1);
// on failure the next intent is drawn from the ReadyToBuy/AskClose row.
// Episodes are force-terminated once turn_index reaches t_max.

#ifndef DUALCREDIT_ENV_HPP_
#define DUALCREDIT_ENV_HPP_

#include <algorithm>
#include <array>
#include <cstddef>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "dualcredit/error.hpp"
#include "dualcredit/rng.hpp"

namespace dualcredit {

enum class Intent : std::uint8_t {
  Neutral = 0,
  Interested,
  Objecting,
  Annoyed,
  ReadyToBuy,
  Terminated,
};
inline constexpr std::size_t kIntentCount = 6;
// Intents with a transition row (everything but Terminated).
inline constexpr std::size_t kLiveIntentCount = 5;

enum class ActionKind : std::uint8_t {
  Greet = 0,
  PitchFeature,
  AddressObjection,
  OfferDiscount,
  AskClose,
  RepeatScript,
  Filler,
  OverPromise,
};
inline constexpr std::size_t kActionCount = 8;

inline constexpr std::array<std::string_view, kIntentCount> kIntentNames = {
    "Neutral", "Interested", "Objecting", "Annoyed", "ReadyToBuy", "Terminated"};

inline constexpr std::array<std::string_view, kActionCount> kActionNames = {
    "Greet",  "PitchFeature", "AddressObjection", "OfferDiscount",
    "AskClose", "RepeatScript", "Filler",           "OverPromise"};

inline std::string_view to_string(Intent i) {
  return kIntentNames[static_cast<std::size_t>(i)];
}
inline std::string_view to_string(ActionKind k) {
  return kActionNames[static_cast<std::size_t>(k)];
}

inline std::optional<Intent> parse_intent(std::string_view name) {
  for (std::size_t i = 0; i < kIntentCount; ++i) {
    if (kIntentNames[i] == name) return static_cast<Intent>(i);
  }
  return std::nullopt;
}

inline std::optional<ActionKind> parse_action_kind(std::string_view name) {
  for (std::size_t i = 0; i < kActionCount; ++i) {
    if (kActionNames[i] == name) return static_cast<ActionKind>(i);
  }
  return std::nullopt;
}

// OverPromise is the only compliance-violating kind.
inline constexpr bool violates_compliance(ActionKind k) {
  return k == ActionKind::OverPromise;
}

// Rank on Annoyed < Objecting < Neutral < Interested < ReadyToBuy.
// Terminated has no rank and maps to -1.
inline int attitude_rank(Intent i) {
  switch (i) {
    case Intent::Annoyed: return 0;
    case Intent::Objecting: return 1;
    case Intent::Neutral: return 2;
    case Intent::Interested: return 3;
    case Intent::ReadyToBuy: return 4;
    case Intent::Terminated: return -1;
  }
  return -1;
}

using Token = std::string;
using Utterance = std::vector<Token>;

inline Utterance tokenize(std::string_view text) {
  Utterance out;
  std::istringstream in{std::string(text)};
  for (std::string tok; in >> tok;) out.push_back(std::move(tok));
  return out;
}

inline std::string join(const Utterance& u) {
  std::string out;
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (i) out += ' ';
    out += u[i];
  }
  return out;
}

struct Persona {
  int id = 0;
  double price_sensitivity = 0.0;
  double skepticism = 0.0;
  bool busy = false;
  double base_acceptance = 0.0;

  void validate() const {
    auto unit = [](double v, const char* key) {
      if (!(v >= 0.0 && v <= 1.0)) {
        throw ValidationError(key, "must lie in [0,1]");
      }
    };
    unit(price_sensitivity, "price_sensitivity");
    unit(skepticism, "skepticism");
    unit(base_acceptance, "base_acceptance");
    if (id < 0) throw ValidationError("id", "must be non-negative");
  }

  friend bool operator==(const Persona&, const Persona&) = default;
};

struct AgentAction {
  ActionKind kind = ActionKind::Greet;
  Utterance utterance;

  std::size_t length_tokens() const { return utterance.size(); }
};

// Layout of DialogueState::history_features.
namespace features {
inline constexpr std::size_t kCounts = 0;                          // 8
inline constexpr std::size_t kLastAction = kCounts + kActionCount;  // 8
inline constexpr std::size_t kIntent = kLastAction + kActionCount;  // 4
inline constexpr std::size_t kPersona = kIntent + 4;                // 4
inline constexpr std::size_t kTurn = kPersona + 4;                  // 1
inline constexpr std::size_t kDim = kTurn + 1;
}  // namespace features

inline constexpr std::size_t kFeatureDim = features::kDim;

struct DialogueState {
  int turn_index = 0;
  Intent user_intent = Intent::Neutral;
  std::array<int, kActionCount> action_counts{};
  std::optional<ActionKind> last_action;
  std::uint64_t episode_seed = 0;
  std::vector<double> history_features;

  bool discount_offered() const {
    return action_counts[static_cast<std::size_t>(ActionKind::OfferDiscount)] > 0;
  }

  friend bool operator==(const DialogueState&, const DialogueState&) = default;
};

struct StepOutcome {
  Utterance user_utterance;
  DialogueState next_state;
  // The intent the user expressed this turn. Equals next_state.user_intent
  // unless the episode was force-terminated at the horizon or converted.
  Intent reaction = Intent::Neutral;
  bool terminal = false;
  bool converted = false;
};

using IntentRow = std::array<double, kIntentCount>;

struct TransitionModifiers {
  double annoyance_gain = 0.0;
  double repeat_annoyance = 0.0;
  double busy_filler_hangup = 0.0;
};

// Persona library plus transition table, as shipped in data/environment.json.
struct EnvironmentModel {
  static constexpr int kSchemaVersion = 1;

  std::vector<Persona> personas;
  // rows[intent][kind] for the five live intents.
  std::array<std::array<IntentRow, kActionCount>, kLiveIntentCount> rows{};
  TransitionModifiers modifiers;

  const IntentRow& row(Intent intent, ActionKind kind) const {
    return rows[static_cast<std::size_t>(intent)][static_cast<std::size_t>(kind)];
  }

  const Persona& persona(std::size_t index) const {
    return personas.at(index % personas.size());
  }

  static EnvironmentModel from_json(const nlohmann::json& j);
  static EnvironmentModel load(const std::filesystem::path& path);
  nlohmann::ordered_json to_json() const;
};

namespace detail {

inline double json_unit(const nlohmann::json& j, const std::string& key) {
  if (!j.contains(key) || !j.at(key).is_number()) {
    throw ValidationError(key, "missing or not a number");
  }
  return j.at(key).get<double>();
}

// Shift `fraction` of the mass held in `from` columns onto `to`.
inline void shift_mass(IntentRow& row, std::initializer_list<Intent> from,
                       Intent to, double fraction) {
  fraction = std::clamp(fraction, 0.0, 1.0);
  double moved = 0.0;
  for (Intent i : from) {
    auto& p = row[static_cast<std::size_t>(i)];
    moved += p * fraction;
    p *= 1.0 - fraction;
  }
  row[static_cast<std::size_t>(to)] += moved;
}

}  // namespace detail

inline EnvironmentModel EnvironmentModel::from_json(const nlohmann::json& j) {
  EnvironmentModel m;
  if (!j.is_object()) throw ParseError("environment file must hold an object");
  for (const auto& [key, _] : j.items()) {
    if (key != "schema_version" && key != "columns" && key != "personas" &&
        key != "modifiers" && key != "transitions") {
      throw UnknownKey(key);
    }
  }
  if (!j.contains("schema_version") ||
      j.at("schema_version") != kSchemaVersion) {
    throw ValidationError("schema_version",
                          "expected " + std::to_string(kSchemaVersion));
  }
  if (j.contains("columns")) {
    const auto& cols = j.at("columns");
    bool ok = cols.is_array() && cols.size() == kIntentCount;
    for (std::size_t i = 0; ok && i < kIntentCount; ++i) {
      ok = cols[i] == kIntentNames[i];
    }
    if (!ok) throw ValidationError("columns", "must list the six intents in order");
  }

  if (!j.contains("personas") || !j.at("personas").is_array() ||
      j.at("personas").empty()) {
    throw ValidationError("personas", "must be a nonempty array");
  }
  for (const auto& pj : j.at("personas")) {
    Persona p;
    p.id = pj.at("id").get<int>();
    p.price_sensitivity = detail::json_unit(pj, "price_sensitivity");
    p.skepticism = detail::json_unit(pj, "skepticism");
    p.busy = pj.at("busy").get<bool>();
    p.base_acceptance = detail::json_unit(pj, "base_acceptance");
    p.validate();
    m.personas.push_back(p);
  }

  const auto& mod = j.at("modifiers");
  m.modifiers.annoyance_gain = detail::json_unit(mod, "annoyance_gain");
  m.modifiers.repeat_annoyance = detail::json_unit(mod, "repeat_annoyance");
  m.modifiers.busy_filler_hangup = detail::json_unit(mod, "busy_filler_hangup");
  for (double v : {m.modifiers.annoyance_gain, m.modifiers.repeat_annoyance,
                   m.modifiers.busy_filler_hangup}) {
    if (v < 0.0 || v > 1.0) throw ValidationError("modifiers", "must lie in [0,1]");
  }

  const auto& tj = j.at("transitions");
  for (std::size_t s = 0; s < kLiveIntentCount; ++s) {
    const std::string intent_name(kIntentNames[s]);
    if (!tj.contains(intent_name)) {
      throw ValidationError("transitions." + intent_name, "missing row group");
    }
    const auto& group = tj.at(intent_name);
    for (std::size_t a = 0; a < kActionCount; ++a) {
      const std::string key =
          "transitions." + intent_name + "." + std::string(kActionNames[a]);
      const std::string kind_name(kActionNames[a]);
      if (!group.contains(kind_name) || !group.at(kind_name).is_array() ||
          group.at(kind_name).size() != kIntentCount) {
        throw ValidationError(key, "must be an array of 6 probabilities");
      }
      IntentRow row{};
      double sum = 0.0;
      for (std::size_t c = 0; c < kIntentCount; ++c) {
        row[c] = group.at(kind_name)[c].get<double>();
        if (row[c] < 0.0) throw ValidationError(key, "negative probability");
        sum += row[c];
      }
      if (std::abs(sum - 1.0) > 1e-9) {
        throw ValidationError(key, "probabilities must sum to 1");
      }
      m.rows[s][a] = row;
    }
  }

  // From Annoyed only AddressObjection may open a path to ReadyToBuy.
  for (std::size_t a = 0; a < kActionCount; ++a) {
    if (static_cast<ActionKind>(a) == ActionKind::AddressObjection) continue;
    if (m.row(Intent::Annoyed, static_cast<ActionKind>(a))
            [static_cast<std::size_t>(Intent::ReadyToBuy)] != 0.0) {
      throw ValidationError(
          "transitions.Annoyed." + std::string(kActionNames[a]),
          "ReadyToBuy must be unreachable from Annoyed");
    }
  }
  return m;
}

inline EnvironmentModel EnvironmentModel::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open environment file " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  try {
    return from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

inline nlohmann::ordered_json EnvironmentModel::to_json() const {
  nlohmann::ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["columns"] = kIntentNames;
  auto& pj = j["personas"] = nlohmann::ordered_json::array();
  for (const auto& p : personas) {
    pj.push_back({{"id", p.id},
                  {"price_sensitivity", p.price_sensitivity},
                  {"skepticism", p.skepticism},
                  {"busy", p.busy},
                  {"base_acceptance", p.base_acceptance}});
  }
  j["modifiers"] = {{"annoyance_gain", modifiers.annoyance_gain},
                    {"repeat_annoyance", modifiers.repeat_annoyance},
                    {"busy_filler_hangup", modifiers.busy_filler_hangup}};
  auto& tj = j["transitions"];
  for (std::size_t s = 0; s < kLiveIntentCount; ++s) {
    for (std::size_t a = 0; a < kActionCount; ++a) {
      tj[std::string(kIntentNames[s])][std::string(kActionNames[a])] = rows[s][a];
    }
  }
  return j;
}

// ---------------------------------------------------------------------------
// Utterance templates. "{a|b}" marks a jitter slot; the first alternative is
// the canonical form that appears in the shipped script library.

namespace detail {

inline constexpr std::array<std::string_view, kActionCount> kAgentTemplates = {
    // Greet
    "{hello|hi} there thank you for taking my call today i am {calling|reaching} "
    "from brightline about your internet service",
    // PitchFeature
    "our {fiber|premium} plan gives you {faster|quicker} speeds with no data caps "
    "a free router and {round|around} the clock support so your whole family can "
    "stream work and game without any slowdown",
    // AddressObjection
    "i {understand|hear} your {concern|worry} about the {cost|price} many of our "
    "customers felt the same at first and found the savings on {bundled|combined} "
    "services {covered|offset} the difference within a few months",
    // OfferDiscount
    "{since|because} you are a {loyal|valued} customer i can {apply|add} a twenty "
    "percent discount for the first {year|term} if you {sign|enroll} up this week",
    // AskClose
    "{shall|can} we go ahead and {set|get} up your new plan today so you can start "
    "enjoying the {faster|better} connection right away",
    // RepeatScript: recited verbatim, no jitter.
    "as i said our plan is the best plan and as i said our plan has the best "
    "speeds so as i said our plan is the best plan for you",
    // Filler
    "please hold on {one|a} moment while i pull up your account",
    // OverPromise
    "our fiber plan gives you faster speeds with no data caps a free router and "
    "round the clock support so your whole family can stream work and game without "
    "any slowdown and i {guarantee|promise} you will {never|not} have a single outage",
};

inline constexpr std::array<std::string_view, kIntentCount> kUserTemplates = {
    "{okay|sure} go on",
    "that sounds {interesting|good} tell me more",
    "i am not sure it seems {expensive|pricey} to me",
    "you already said that {please|just} get to the point",
    "okay that works for me what are the next steps",
    "sorry i have to go {bye|goodbye}",
};

inline constexpr std::string_view kConvertedReply = "yes {sign|count} me up";

inline Utterance realize(std::string_view tmpl, Rng* rng) {
  Utterance out;
  for (const Token& raw : tokenize(tmpl)) {
    if (raw.size() > 2 && raw.front() == '{' && raw.back() == '}') {
      std::vector<std::string> alts;
      std::string body = raw.substr(1, raw.size() - 2);
      std::size_t start = 0;
      for (std::size_t pos; (pos = body.find('|', start)) != std::string::npos;
           start = pos + 1) {
        alts.push_back(body.substr(start, pos - start));
      }
      alts.push_back(body.substr(start));
      out.push_back(rng ? alts[rng->below(alts.size())] : alts.front());
    } else {
      out.push_back(raw);
    }
  }
  return out;
}

}  // namespace detail

// Canonical (unjittered) utterance for an action kind.
inline Utterance canonical_utterance(ActionKind kind) {
  return detail::realize(detail::kAgentTemplates[static_cast<std::size_t>(kind)],
                         nullptr);
}

// Realizes an action kind as a jittered utterance.
inline AgentAction realize_action(ActionKind kind, Rng& rng) {
  return AgentAction{
      kind,
      detail::realize(detail::kAgentTemplates[static_cast<std::size_t>(kind)], &rng)};
}

// ---------------------------------------------------------------------------

class DialogueEnv {
 public:
  DialogueEnv(const EnvironmentModel& model, int t_max)
      : model_(&model), t_max_(t_max) {
    if (t_max < 1) throw ValidationError("t_max", "must be positive");
  }

  int t_max() const { return t_max_; }
  const EnvironmentModel& model() const { return *model_; }

  DialogueState reset(const Persona& persona, std::uint64_t seed) const {
    DialogueState s;
    s.episode_seed = seed;
    s.history_features = encode(s, persona);
    return s;
  }

  // Probability that AskClose in ReadyToBuy converts.
  static double conversion_probability(const Persona& p, bool discount_offered) {
    const double discount_absent = discount_offered ? 0.0 : 1.0;
    return std::clamp(
        p.base_acceptance - 0.5 * p.price_sensitivity * discount_absent, 0.0, 1.0);
  }

  // Next-intent distribution for a non-closing transition, after modifiers.
  IntentRow transition_distribution(const DialogueState& s, ActionKind kind,
                                    const Persona& p) const {
    if (s.user_intent == Intent::Terminated) throw StepAfterTerminal();
    IntentRow row = model_->row(s.user_intent, kind);
    const auto& mod = model_->modifiers;
    const std::initializer_list<Intent> receptive = {Intent::Neutral, Intent::Interested,
                                                     Intent::Objecting, Intent::ReadyToBuy};
    if (kind == ActionKind::RepeatScript || kind == ActionKind::Filler) {
      detail::shift_mass(row, receptive, Intent::Annoyed,
                         mod.annoyance_gain * p.skepticism);
    }
    if (s.last_action && *s.last_action == kind) {
      detail::shift_mass(row, receptive, Intent::Annoyed, mod.repeat_annoyance);
    }
    if (p.busy && kind == ActionKind::Filler) {
      detail::shift_mass(row,
                         {Intent::Neutral, Intent::Interested, Intent::Objecting,
                          Intent::Annoyed, Intent::ReadyToBuy},
                         Intent::Terminated, mod.busy_filler_hangup);
    }
    return row;
  }

  StepOutcome step(const DialogueState& s, const AgentAction& action,
                   const Persona& p, Rng& rng) const {
    if (s.user_intent == Intent::Terminated || s.turn_index >= t_max_) {
      throw StepAfterTerminal();
    }
    StepOutcome out;
    Intent next = Intent::Neutral;
    if (s.user_intent == Intent::ReadyToBuy && action.kind == ActionKind::AskClose &&
        rng.uniform() < conversion_probability(p, s.discount_offered())) {
      out.converted = true;
      next = Intent::Terminated;
      out.reaction = Intent::ReadyToBuy;
    } else {
      const IntentRow row = transition_distribution(s, action.kind, p);
      next = static_cast<Intent>(rng.categorical(row));
      out.reaction = next;
    }

    DialogueState n = s;
    n.turn_index = s.turn_index + 1;
    n.action_counts[static_cast<std::size_t>(action.kind)] += 1;
    n.last_action = action.kind;
    n.user_intent = next;
    if (n.turn_index >= t_max_) n.user_intent = Intent::Terminated;
    out.terminal = n.user_intent == Intent::Terminated;
    n.history_features = encode(n, p);
    out.next_state = std::move(n);

    out.user_utterance = out.converted
        ? detail::realize(detail::kConvertedReply, &rng)
        : detail::realize(
              detail::kUserTemplates[static_cast<std::size_t>(out.reaction)], &rng);
    return out;
  }

  std::vector<double> encode(const DialogueState& s, const Persona& p) const {
    std::vector<double> f(kFeatureDim, 0.0);
    const double horizon = static_cast<double>(t_max_);
    for (std::size_t k = 0; k < kActionCount; ++k) {
      f[features::kCounts + k] = s.action_counts[k] / horizon;
    }
    if (s.last_action) {
      f[features::kLastAction + static_cast<std::size_t>(*s.last_action)] = 1.0;
    }
    switch (s.user_intent) {
      case Intent::Interested: f[features::kIntent + 0] = 1.0; break;
      case Intent::Objecting: f[features::kIntent + 1] = 1.0; break;
      case Intent::Annoyed: f[features::kIntent + 2] = 1.0; break;
      case Intent::ReadyToBuy: f[features::kIntent + 3] = 1.0; break;
      default: break;
    }
    f[features::kPersona + 0] = p.price_sensitivity;
    f[features::kPersona + 1] = p.skepticism;
    f[features::kPersona + 2] = p.busy ? 1.0 : 0.0;
    f[features::kPersona + 3] = p.base_acceptance;
    f[features::kTurn] = s.turn_index / horizon;
    return f;
  }

 private:
  const EnvironmentModel* model_;
  int t_max_;
};

}  // namespace dualcredit

#endif  // DUALCREDIT_ENV_HPP_
