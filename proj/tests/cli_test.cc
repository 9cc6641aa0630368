// Copyright 2026 The dpsynth Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "dpsynth/corpus.h"
#include "json.hpp"
#include "support/testbed.h"

namespace dpsynth {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string Slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = fs::path(::testing::TempDir()) /
            ("dpsynth_cli_" +
             std::string(
                 ::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(root_);
    fs::create_directories(root_);
    WriteCorpus(testing::InstructionCorpus(400, 1), (root_ / "real.jsonl").string());
  }
  void TearDown() override { fs::remove_all(root_); }

  json BaseJson() const {
    json j = json::parse(R"({
      "seed": 5,
      "model": {"embed_dim": 4, "hidden_dim": 8, "max_len": 80},
      "train": {"batch_size": 50, "epochs": 2, "noise_multiplier": 1.2},
      "privacy": {"delta": 1e-5},
      "sampling": {"count": 500},
      "featurizer": {"dim": 32},
      "clustering": {"k": 5},
      "resample": {"target": 80, "with_replacement": true},
      "mauve": {"bins": 20, "grid": 50}
    })");
    j["work_dir"] = (root_ / "work").string();
    j["real_corpus"] = (root_ / "real.jsonl").string();
    return j;
  }

  std::string WriteConfig(const json& j, const std::string& name = "cfg.json") {
    std::string path = (root_ / name).string();
    std::ofstream(path) << j.dump(2);
    return path;
  }

  // Runs the CLI with stdout captured; returns the exit status.
  int Run(const std::string& args) {
    std::string cmd = std::string("\"") + DPSYNTH_CLI + "\" " + args + " > \"" +
                      (root_ / "stdout.txt").string() + "\" 2> \"" +
                      (root_ / "stderr.txt").string() + "\"";
    int status = std::system(cmd.c_str());
    out_ = Slurp(root_ / "stdout.txt");
    err_ = Slurp(root_ / "stderr.txt");
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  fs::path root_;
  std::string out_, err_;
};

TEST_F(CliTest, RunAllThenStandaloneAccountAgreesWithReport) {
  std::string cfg = WriteConfig(BaseJson());
  ASSERT_EQ(Run("run-all --config " + cfg), 0) << err_;
  json report = json::parse(Slurp(root_ / "work" / "report.json"));
  json train = json::parse(Slurp(root_ / "work" / "train.json"));
  std::ostringstream args;
  args.precision(17);
  args << "account --sigma " << train["sigma"].get<double>() << " --q "
       << train["q"].get<double>() << " --steps " << train["steps"].get<uint64_t>()
       << " --delta 1e-5 --hist-sigma 10";
  ASSERT_EQ(Run(args.str()), 0) << err_;
  json standalone = json::parse(out_);
  EXPECT_EQ(standalone["epsilon"].get<double>(),
            report["privacy"]["epsilon"].get<double>());

  // The report subcommand prints the report path.
  ASSERT_EQ(Run("report --config " + cfg), 0) << err_;
  EXPECT_NE(out_.find("report.json"), std::string::npos);
}

TEST_F(CliTest, SeedOverrideChangesOutputs) {
  std::string cfg = WriteConfig(BaseJson());
  ASSERT_EQ(Run("preprocess --config " + cfg), 0) << err_;
  ASSERT_EQ(Run("train --config " + cfg), 0) << err_;
  ASSERT_EQ(Run("sample --config " + cfg), 0) << err_;
  std::string first = Slurp(root_ / "work" / "synthetic.jsonl");
  std::string other = (root_ / "other").string();
  ASSERT_EQ(Run("preprocess --config " + cfg + " --work-dir " + other + " --seed 6"), 0);
  ASSERT_EQ(Run("train --config " + cfg + " --work-dir " + other + " --seed 6"), 0);
  ASSERT_EQ(Run("sample --config " + cfg + " --work-dir " + other + " --seed 6"), 0);
  EXPECT_NE(Slurp(fs::path(other) / "synthetic.jsonl"), first);
}

TEST_F(CliTest, ConfigErrorsExitTwo) {
  json bad = BaseJson();
  bad["clustering"]["kk"] = 3;
  EXPECT_EQ(Run("preprocess --config " + WriteConfig(bad, "bad.json")), 2);
  EXPECT_NE(err_.find("kk"), std::string::npos);
  EXPECT_EQ(Run("preprocess"), 2);  // --config is required
  EXPECT_EQ(Run("preprocess --config /nonexistent.json"), 2);
  EXPECT_EQ(Run("--no-such-flag"), 2);
  EXPECT_EQ(Run("mauve --rep nonsense"), 2);
  // Out-of-order stage: missing upstream artifact.
  EXPECT_EQ(Run("cluster --config " + WriteConfig(BaseJson())), 2);
  EXPECT_EQ(Run("report --config " + WriteConfig(BaseJson())), 2);
}

TEST_F(CliTest, InfeasiblePlanExitsThree) {
  json j = BaseJson();
  j["resample"] = {{"target", 5000}, {"with_replacement", false}};
  std::string cfg = WriteConfig(j);
  EXPECT_EQ(Run("run-all --config " + cfg), 3);
  EXPECT_NE(err_.find("Need more initial samples."), std::string::npos);
  // Plan alone only warns.
  EXPECT_EQ(Run("plan --config " + cfg), 0);
}

TEST_F(CliTest, UnreachableScreeningServiceExitsFour) {
  json j = BaseJson();
  j["pii"] = {{"enabled", true},
              {"base_url", "http://127.0.0.1:1"},
              {"max_attempts", 1},
              {"timeout_seconds", 1}};
  std::string cfg = WriteConfig(j);
  EXPECT_EQ(Run("run-all --config " + cfg), 4);
  // The partial screening report is kept and the run can still be reported.
  EXPECT_TRUE(fs::exists(root_ / "work" / "pii.json"));
  ASSERT_EQ(Run("report --config " + cfg), 0) << err_;
  json report = json::parse(Slurp(root_ / "work" / "report.json"));
  EXPECT_GT(report["pii"]["failed"].get<int>(), 0);
}

TEST_F(CliTest, ExplainAndCalibrate) {
  ASSERT_EQ(Run("--explain"), 0);
  EXPECT_NE(out_.find("histogram.sigma"), std::string::npos);
  ASSERT_EQ(Run("account calibrate --epsilon 6 --q 0.1 --steps 100 --delta 1e-5"), 0)
      << err_;
  json c = json::parse(out_);
  EXPECT_GT(c["sigma"].get<double>(), 0.0);
  std::ostringstream args;
  args.precision(17);
  args << "account --sigma " << c["sigma"].get<double>()
       << " --q 0.1 --steps 100 --delta 1e-5";
  ASSERT_EQ(Run(args.str()), 0) << err_;
  EXPECT_LE(json::parse(out_)["epsilon"].get<double>(), 6.0);
}

TEST_F(CliTest, StandaloneMauve) {
  Corpus a = testing::InstructionCorpus(50, 2);
  WriteCorpus(a, (root_ / "a.jsonl").string());
  std::string pa = (root_ / "a.jsonl").string();
  ASSERT_EQ(Run("mauve --rep unigram --p " + pa + " --q " + pa), 0) << err_;
  json j = json::parse(out_);
  EXPECT_NEAR(j["score"].get<double>(), 1.0, 1e-9);
  EXPECT_EQ(j["c"].get<double>(), 5.0);
  EXPECT_EQ(j["representation"], "unigram");
  EXPECT_FALSE(j["frontier"].empty());
}

}  // namespace
}  // namespace dpsynth
