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


// Drives the built command-line tool as a subprocess.

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

namespace {

namespace fs = std::filesystem;

struct Outcome {
  int code = -1;
  std::string output;
};

Outcome run(const std::string& args) {
  const std::string cmd = std::string(DUALCREDIT_CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) return {};
  Outcome out;
  std::array<char, 4096> buf;
  while (std::fgets(buf.data(), buf.size(), pipe)) out.output += buf.data();
  const int status = ::pclose(pipe);
  out.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("dualcredit_cli_test_" +
            std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string out(const std::string& sub = "") const { return (dir_ / sub).string(); }

  fs::path dir_;
};

TEST_F(CliTest, HelpMentionsEveryVerbAndFlag) {
  const auto r = run("help");
  EXPECT_EQ(r.code, 0);
  for (const char* word :
       {"train", "eval", "gradcheck", "ablate", "report", "--config", "--set", "--out",
        "--workers", "--method", "--seeds", "--dump", "--checkpoint", "--episodes", "--seed",
        "--models", "--input"}) {
    EXPECT_NE(r.output.find(word), std::string::npos) << word;
  }
}

TEST_F(CliTest, UsageErrorsExitTwo) {
  for (const char* args : {"", "frobnicate", "train --bogus", "eval", "report",
                           "train --method grpo", "gradcheck --models 0"}) {
    const auto r = run(args);
    EXPECT_EQ(r.code, 2) << args << "\n" << r.output;
    EXPECT_NE(r.output.find("usage"), std::string::npos) << args;
  }
}

TEST_F(CliTest, ValidationErrorsExitThree) {
  EXPECT_EQ(run("train --set turn_reward.delta1=1.5 --out " + out()).code, 3);
  EXPECT_EQ(run("train --set no_such_key=1 --out " + out()).code, 3);
  EXPECT_EQ(run("train --config " + out("missing.json")).code, 3);
  EXPECT_EQ(run("ablate --seeds 1,x --out " + out()).code, 3);
  std::ofstream(dir_ / "bad.json") << "{\"turn_reward\": {\"delta1\": 1.5}}";
  const auto r = run("train --config " + out("bad.json"));
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.output.find("delta1"), std::string::npos);
}

TEST_F(CliTest, TrainEvalReportPipeline) {
  std::ofstream(dir_ / "c.json") << "{\"ppo\": {\"max_steps\": 3, \"episodes_per_step\": 16}}";
  const auto t = run("train --config " + out("c.json") + " --method duca --dump --out " + out());
  ASSERT_EQ(t.code, 0) << t.output;
  const auto csv = slurp(dir_ / "duca_seed1.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);  // header + max_steps rows
  EXPECT_TRUE(fs::exists(dir_ / "duca_seed1.ckpt.json"));
  EXPECT_TRUE(fs::exists(dir_ / "duca_seed1.jsonl"));
  EXPECT_TRUE(fs::exists(dir_ / "config.json"));

  const auto e = run("eval --checkpoint " + out("duca_seed1.ckpt.json") +
                     " --episodes 24 --dump --out " + out("ev"));
  ASSERT_EQ(e.code, 0) << e.output;
  const auto report = nlohmann::json::parse(slurp(dir_ / "ev" / "eval_report.json"));
  EXPECT_FALSE(report.at("empty").get<bool>());
  EXPECT_EQ(report.at("report").at("episodes").get<int>(), 24);

  const auto rp = run("report --input " + out("ev/eval_trajectories.jsonl") + " --out " +
                      out("rp"));
  ASSERT_EQ(rp.code, 0) << rp.output;
  const auto again = nlohmann::json::parse(slurp(dir_ / "rp" / "report.json"));
  EXPECT_EQ(again.at("cvr"), report.at("report").at("cvr"));
  EXPECT_EQ(again.at("compliance"), report.at("report").at("compliance"));
}

TEST_F(CliTest, EvalWithZeroEpisodesIsFlagged) {
  ASSERT_EQ(run("train --set ppo.max_steps=0 --out " + out()).code, 0);
  ASSERT_EQ(run("eval --checkpoint " + out("duca_seed1.ckpt.json") + " --episodes 0 --out " +
                out("ev"))
                .code,
            0);
  const auto report = nlohmann::json::parse(slurp(dir_ / "ev" / "eval_report.json"));
  EXPECT_TRUE(report.at("empty").get<bool>());
}

TEST_F(CliTest, TrainIsByteReproducible) {
  const std::string args =
      "train --method naive --seeds 4,5 --set ppo.max_steps=2 --set ppo.episodes_per_step=8";
  ASSERT_EQ(run(args + " --out " + out("a")).code, 0);
  ASSERT_EQ(run(args + " --workers 3 --out " + out("b")).code, 0);
  for (const char* f : {"naive_seed4.csv", "naive_seed5.csv", "naive_seed4.ckpt.json"}) {
    EXPECT_EQ(slurp(dir_ / "a" / f), slurp(dir_ / "b" / f)) << f;
  }
}

TEST_F(CliTest, GradcheckPasses) {
  const auto r = run("gradcheck --seed 1 --models 10");
  EXPECT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("max_rel_error"), std::string::npos);
  EXPECT_NE(r.output.find("PASS"), std::string::npos);
}

TEST_F(CliTest, AblateWritesTables) {
  const auto r = run("ablate --seeds 1,2 --set ppo.max_steps=2 --set ppo.episodes_per_step=8 "
                     "--set eval_episodes=16 --out " + out());
  ASSERT_EQ(r.code, 0) << r.output;
  const auto table = slurp(dir_ / "ablate.csv");
  EXPECT_EQ(table.substr(0, table.find('\n')), "method,cvr,compliance,avg_turn");
  EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 5);
  for (const char* m : {"duca", "naive", "groupnorm", "singleturn"}) {
    EXPECT_NE(table.find(m), std::string::npos) << m;
  }
  const auto runs = slurp(dir_ / "ablate_runs.csv");
  EXPECT_EQ(std::count(runs.begin(), runs.end(), '\n'), 9);
  EXPECT_TRUE(fs::exists(dir_ / "curves" / "duca_seed1.csv"));
}

TEST_F(CliTest, MalformedDumpIsAnError) {
  std::ofstream(dir_ / "bad.jsonl") << "{not json}\n";
  EXPECT_EQ(run("report --input " + out("bad.jsonl")).code, 3);
}

}  // namespace
