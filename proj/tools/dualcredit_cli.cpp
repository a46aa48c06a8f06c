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


// Command-line front end: train, eval, gradcheck, ablate, report, help.
//
// Exit codes: 0 success, 1 runtime failure (including a failed gradcheck),
// 2 usage error, 3 invalid configuration or input data.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dualcredit.hpp"

namespace fs = std::filesystem;
using namespace dualcredit;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;
constexpr int kExitInvalid = 3;

constexpr const char* kSynopsis =
    "usage: dualcredit <verb> [flags]\n"
    "verbs: train, eval, gradcheck, ablate, report, help\n"
    "run 'dualcredit help' for every flag of every verb\n";

struct CommonFlags {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir;
  int workers = 1;
};

void add_common(CLI::App* sub, CommonFlags& f) {
  sub->add_option("--config", f.config_path, "JSON config file (defaults apply when omitted)");
  sub->add_option("--set", f.overrides, "Override a config key, e.g. --set ppo.max_steps=10")
      ->type_name("KEY=VALUE");
  sub->add_option("--out", f.out_dir, "Output directory (overrides output_dir)");
  sub->add_option("--workers", f.workers, "Worker threads for rollouts or runs")
      ->check(CLI::PositiveNumber);
}

ExperimentConfig load(const CommonFlags& f) {
  ExperimentConfig c = f.config_path.empty() ? default_config(f.overrides)
                                             : load_config(f.config_path, f.overrides);
  if (!f.out_dir.empty()) c.output_dir = f.out_dir;
  return c;
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed for " + path.string());
}

std::string run_name(Method m, std::uint64_t seed) {
  return std::string(to_string(m)) + "_seed" + std::to_string(seed);
}

int cmd_train(const CommonFlags& f, const std::string& method_name, const std::string& seeds_text,
              bool dump) {
  const Method method = parse_method(method_name);
  ExperimentConfig c = load(f);
  const auto seeds = seeds_text.empty() ? std::vector<std::uint64_t>{c.seed}
                                        : parse_seed_list(seeds_text);
  const World world = World::load(c);
  write_file(c.output_dir / "config.json", c.serialize());
  for (std::uint64_t seed : seeds) {
    c.seed = seed;
    const std::string name = run_name(method, seed);
    std::ostringstream trajectories;
    TrainOptions opt;
    opt.workers = f.workers;
    if (dump) {
      opt.on_batch = [&](int, std::span<const Trajectory> batch) {
        write_jsonl(trajectories, {batch.begin(), batch.end()});
      };
    }
    const auto result = train(c, method, world, opt);
    write_file(c.output_dir / (name + ".csv"), to_csv(result.records));
    result.model.save(c.output_dir / (name + ".ckpt.json"));
    if (dump) write_file(c.output_dir / (name + ".jsonl"), trajectories.str());
    const auto& last = result.records;
    std::printf("%s: %zu steps", name.c_str(), last.size());
    if (!last.empty()) {
      std::printf(", final cvr %.4f compliance %.2f", last.back().cvr, last.back().compliance);
    }
    std::printf(" -> %s\n", (c.output_dir / (name + ".csv")).string().c_str());
  }
  return 0;
}

int cmd_eval(const CommonFlags& f, const std::string& checkpoint, std::optional<int> episodes,
             std::optional<std::uint64_t> seed, bool dump) {
  const ExperimentConfig c = load(f);
  const World world = World::load(c);
  const PolicyModel model = PolicyModel::load(checkpoint);
  if (model.feature_dim() != static_cast<std::size_t>(c.feature_dim) ||
      model.action_count() != kActionCount) {
    throw ValidationError("checkpoint", "model shape does not match the config");
  }
  const int n = episodes.value_or(c.eval_episodes);
  if (n < 0) throw ValidationError("episodes", "must be non-negative");
  const auto result = evaluate(model, c, world, n, seed.value_or(c.seed), f.workers);
  nlohmann::ordered_json j;
  j["empty"] = result.empty;
  j["report"] = result.report.to_json();
  const std::string text = j.dump(2) + "\n";
  write_file(c.output_dir / "eval_report.json", text);
  if (dump) {
    std::ostringstream out;
    write_jsonl(out, result.trajectories);
    write_file(c.output_dir / "eval_trajectories.jsonl", out.str());
  }
  std::cout << text;
  return 0;
}

int cmd_gradcheck(std::uint64_t seed, int models) {
  GradcheckOptions opt;
  opt.seed = seed;
  opt.models = models;
  const auto r = run_gradcheck(opt);
  for (std::size_t b = 0; b < r.block_error.size(); ++b) {
    std::printf("%-12s max_rel_error %.3e\n", std::string(ParameterSet::kBlockNames[b]).c_str(),
                r.block_error[b]);
  }
  std::printf("clipped turns %zu of %zu\n", r.clipped_turns, r.total_turns);
  const bool ok = r.max_error() < 1e-4;
  std::printf("max_rel_error %.3e (threshold 1e-4) %s\n", r.max_error(), ok ? "PASS" : "FAIL");
  return ok ? 0 : kExitRuntime;
}

int cmd_ablate(const CommonFlags& f, const std::string& seeds_text) {
  const ExperimentConfig c = load(f);
  const auto seeds = parse_seed_list(seeds_text);
  const World world = World::load(c);
  const auto runs = run_ablation(c, seeds, world, f.workers);
  for (const auto& r : runs) {
    write_file(c.output_dir / "curves" / (run_name(r.method, r.seed) + ".csv"), to_csv(r.records));
  }
  const auto rows = summarize(runs);
  const std::string table = ablation_table_csv(rows);
  write_file(c.output_dir / "config.json", c.serialize());
  write_file(c.output_dir / "ablate.csv", table);
  write_file(c.output_dir / "ablate_runs.csv", ablation_runs_csv(runs));
  std::printf("%-11s %8s %11s %9s %15s\n", "method", "cvr", "compliance", "avg_turn",
              "repeat_action");
  for (const auto& r : rows) {
    std::printf("%-11s %8.4f %11.2f %9.3f %15.4f\n", std::string(to_string(r.method)).c_str(),
                r.cvr, r.compliance, r.avg_turn, r.repeat_action_rate);
  }
  std::printf("medians over %zu seeds -> %s\n", seeds.size(),
              (c.output_dir / "ablate.csv").string().c_str());
  return 0;
}

int cmd_report(const std::string& input, const std::string& out_dir) {
  std::ifstream in(input);
  if (!in) throw ConfigError("cannot open trajectory dump " + input);
  std::vector<Trajectory> trajectories;
  try {
    trajectories = read_jsonl(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(input + ": " + e.what());
  }
  const std::string text = compute_report(trajectories).to_json().dump(2) + "\n";
  if (!out_dir.empty()) write_file(fs::path(out_dir) / "report.json", text);
  std::cout << text;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dualcredit: dual-horizon credit assignment for dialogue policies"};
  app.require_subcommand(1);

  CommonFlags train_flags, eval_flags, ablate_flags;
  std::string method = "duca", train_seeds;
  bool train_dump = false;
  auto* train_cmd = app.add_subcommand("train", "Train one method; writes curves CSV and checkpoint");
  add_common(train_cmd, train_flags);
  train_cmd->add_option("--method", method, "duca | naive | groupnorm | singleturn");
  train_cmd->add_option("--seeds", train_seeds, "Comma-separated seeds (default: config seed)");
  train_cmd->add_flag("--dump", train_dump, "Also write every training episode as JSONL");

  std::string checkpoint;
  std::optional<int> episodes;
  std::optional<std::uint64_t> eval_seed;
  bool eval_dump = false;
  auto* eval_cmd = app.add_subcommand("eval", "Greedy held-out evaluation of a checkpoint");
  add_common(eval_cmd, eval_flags);
  eval_cmd->add_option("--checkpoint", checkpoint, "Checkpoint written by train")->required();
  eval_cmd->add_option("--episodes", episodes, "Episodes to roll out (default: eval_episodes)");
  eval_cmd->add_option("--seed", eval_seed, "Evaluation seed (default: config seed)");
  eval_cmd->add_flag("--dump", eval_dump, "Also write the evaluation episodes as JSONL");

  std::uint64_t gc_seed = 1;
  int gc_models = 100;
  auto* gc_cmd = app.add_subcommand("gradcheck", "Finite-difference check of analytic gradients");
  gc_cmd->add_option("--seed", gc_seed, "Seed for the random models");
  gc_cmd->add_option("--models", gc_models, "Number of random models")->check(CLI::PositiveNumber);

  std::string ablate_seeds = "1,2,3,4,5";
  auto* ablate_cmd = app.add_subcommand("ablate", "Train and evaluate every method over seeds");
  add_common(ablate_cmd, ablate_flags);
  ablate_cmd->add_option("--seeds", ablate_seeds, "Comma-separated seeds")->capture_default_str();

  std::string report_input, report_out;
  auto* report_cmd = app.add_subcommand("report", "Recompute metrics from a JSONL dump");
  report_cmd->add_option("--input", report_input, "JSONL trajectory dump")->required();
  report_cmd->add_option("--out", report_out, "Directory for report.json");

  auto* help_cmd = app.add_subcommand("help", "Show help for every verb and flag");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << kSynopsis;
    return kExitUsage;
  }

  try {
    if (*help_cmd) {
      std::cout << kSynopsis;
      for (auto* sub : {train_cmd, eval_cmd, gc_cmd, ablate_cmd, report_cmd}) {
        std::cout << "\n" << sub->help();
      }
      return 0;
    }
    if (*train_cmd) return cmd_train(train_flags, method, train_seeds, train_dump);
    if (*eval_cmd) return cmd_eval(eval_flags, checkpoint, episodes, eval_seed, eval_dump);
    if (*gc_cmd) return cmd_gradcheck(gc_seed, gc_models);
    if (*ablate_cmd) return cmd_ablate(ablate_flags, ablate_seeds);
    if (*report_cmd) return cmd_report(report_input, report_out);
  } catch (const UnknownMethod& e) {
    std::cerr << "error: " << e.what() << "\n\n" << kSynopsis;
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
