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

#include "dpsynth/pipeline.h"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>

#include "dpsynth/accountant.h"
#include "dpsynth/error.h"
#include "dpsynth/resampler.h"
#include "json.hpp"
#include "support/testbed.h"

namespace dpsynth {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::optional<ErrorCode> CodeOf(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

std::string Slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json ReadJson(const std::string& path) { return json::parse(Slurp(path)); }

class PipelineTest : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = fs::path(::testing::TempDir()) /
            ("dpsynth_pipeline_" +
             std::string(
                 ::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(root_);
    fs::create_directories(root_);
    real_path_ = (root_ / "real_in.jsonl").string();
    WriteCorpus(testing::InstructionCorpus(400, 1), real_path_);
  }
  void TearDown() override { fs::remove_all(root_); }

  // Small trained run; a fixed noise multiplier skips calibration.
  json BaseJson(const std::string& work) const {
    json j = json::parse(R"({
      "seed": 3,
      "model": {"embed_dim": 4, "hidden_dim": 8, "max_len": 80},
      "train": {"batch_size": 50, "epochs": 2, "learning_rate": 0.02,
                "noise_multiplier": 1.0},
      "privacy": {"delta": 1e-5},
      "sampling": {"count": 600},
      "featurizer": {"dim": 32},
      "clustering": {"k": 6},
      "resample": {"target": 100, "with_replacement": true},
      "mauve": {"bins": 20, "grid": 50}
    })");
    j["work_dir"] = (root_ / work).string();
    j["real_corpus"] = real_path_;
    return j;
  }
  PipelineConfig Config(const json& j) const {
    return ParsePipelineConfig(j.dump());
  }
  std::string Work(const std::string& work, const std::string& file) const {
    return (root_ / work / file).string();
  }

  fs::path root_;
  std::string real_path_;
};

TEST(ConfigTest, UnknownKeysAndBadTypesAreConfigErrors) {
  EXPECT_EQ(CodeOf([] { ParsePipelineConfig(R"({"bogus": 1})"); }),
            ErrorCode::kConfig);
  EXPECT_EQ(CodeOf([] { ParsePipelineConfig(R"({"train": {"clipp": 1}})"); }),
            ErrorCode::kConfig);
  EXPECT_EQ(CodeOf([] { ParsePipelineConfig(R"({"seed": "x"})"); }),
            ErrorCode::kConfig);
  EXPECT_EQ(CodeOf([] { ParsePipelineConfig("{not json"); }),
            ErrorCode::kConfig);
  EXPECT_EQ(CodeOf([] {
              ParsePipelineConfig(R"({"sampling": {"top_p": 1.5}})");
            }),
            ErrorCode::kConfig);
  EXPECT_EQ(CodeOf([] { ReadPipelineConfig("/nonexistent/config.json"); }),
            ErrorCode::kConfig);
}

TEST(ConfigTest, DefaultsAndRoundTrip) {
  PipelineConfig c = ParsePipelineConfig("{}");
  EXPECT_EQ(c.k, 1000u);
  EXPECT_EQ(c.histogram_sigma, 10.0);
  EXPECT_EQ(c.sampling.top_p, 0.95);
  EXPECT_EQ(c.train.clip, 0.5);
  EXPECT_EQ(c.mauve_unigram_c, 5.0);
  EXPECT_EQ(c.mauve_embedding_c, 10.0);
  EXPECT_EQ(c.mauve_bins, 500u);
  EXPECT_EQ(c.preprocess.ngram, 10u);
  PipelineConfig d = ParsePipelineConfig(R"({
    "seed": 9, "clustering": {"k": 7}, "histogram": {"sigma": 3},
    "train": {"noise_multiplier": 0.7},
    "canary": {"specs": [{"id": "x", "template": "t {secret}", "secret": "1"}]}
  })");
  std::string once = SerializePipelineConfig(d);
  EXPECT_EQ(SerializePipelineConfig(ParsePipelineConfig(once)), once);
  EXPECT_EQ(d.k, 7u);
  EXPECT_EQ(*d.train_noise_multiplier, 0.7);
  EXPECT_EQ(d.canaries.size(), 1u);
}

TEST(ConfigTest, DuplicateCanaryIdsRejected) {
  EXPECT_EQ(CodeOf([] {
              ParsePipelineConfig(R"({"canary": {"specs": [
                {"id": "x", "template": "a {secret}", "secret": "1"},
                {"id": "x", "template": "b {secret}", "secret": "2"}]}})");
            }),
            ErrorCode::kConfig);
}

TEST(ConfigTest, ExplainListsOptionsWithoutCitations) {
  std::string text = ExplainDefaults();
  for (const char* key : {"clustering.k", "histogram.sigma", "train.clip",
                          "sampling.top_p", "privacy.delta", "mauve.bins"}) {
    EXPECT_NE(text.find(key), std::string::npos) << key;
  }
  for (const char* banned : {"paper", "Paper", "specification", "the spec ", "\xc2\xa7", "Appendix",
                             "Table", "Figure", "arXiv"}) {
    EXPECT_EQ(text.find(banned), std::string::npos) << banned;
  }
}

TEST(ConfigTest, DeltaGuard) {
  PipelineConfig c;
  c.delta = 1e-4;
  EXPECT_NO_THROW(CheckDelta(c, 999));
  EXPECT_EQ(CodeOf([&] { CheckDelta(c, 1000); }), ErrorCode::kConfig);
  EXPECT_EQ(CodeOf([&] { CheckDelta(c, 5000); }), ErrorCode::kConfig);
  c.allow_large_delta = true;
  EXPECT_NO_THROW(CheckDelta(c, 5000));
}

StageSpec Make(std::string name, std::vector<std::string> in,
               std::vector<std::string> out, RealAccess access,
               std::string mechanism = "") {
  StageSpec s;
  s.name = s.stage = std::move(name);
  s.inputs = std::move(in);
  s.outputs = std::move(out);
  s.access = access;
  s.mechanism = std::move(mechanism);
  return s;
}

TEST(StageGraphTest, DefaultGraphsPass) {
  PipelineConfig c;
  c.canaries.push_back({});
  c.pii_enabled = true;
  std::vector<std::string> budget = {"dp_adam", "histogram"};
  EXPECT_NO_THROW(CheckStageGraph(StageGraph(c), budget));
  c.synthetic_corpus = "x.jsonl";
  c.pii_corpus = "real";
  std::vector<std::string> hist_only = {"histogram"};
  EXPECT_NO_THROW(CheckStageGraph(StageGraph(c), hist_only));
  bool has_train = false;
  for (const auto& s : StageGraph(c)) has_train |= s.name == "train";
  EXPECT_FALSE(has_train);
}

TEST(StageGraphTest, UnledgeredStageReadingRealDataFails) {
  std::vector<StageSpec> g = {
      Make("preprocess", {kRealRawArtifact}, {"real.jsonl"},
           RealAccess::kDatasetDefinition),
      Make("peek", {"real.jsonl"}, {"stats.json"}, RealAccess::kNone)};
  EXPECT_EQ(CodeOf([&] { CheckStageGraph(g, {}); }), ErrorCode::kConfig);
}

TEST(StageGraphTest, LedgeredStageWithoutBudgetFails) {
  std::vector<StageSpec> g = {
      Make("preprocess", {kRealRawArtifact}, {"real.jsonl"},
           RealAccess::kDatasetDefinition),
      Make("histogram", {"real.jsonl"}, {"h.json"}, RealAccess::kLedgered,
           "histogram")};
  std::vector<std::string> other = {"dp_adam"};
  EXPECT_EQ(CodeOf([&] { CheckStageGraph(g, other); }), ErrorCode::kConfig);
  std::vector<std::string> ok = {"histogram"};
  EXPECT_NO_THROW(CheckStageGraph(g, ok));
}

TEST(StageGraphTest, TaintedReleaseFails) {
  std::vector<StageSpec> g = {
      Make("preprocess", {kRealRawArtifact}, {"real.jsonl"},
           RealAccess::kDatasetDefinition),
      Make("copy", {"real.jsonl"}, {kReleaseArtifact}, RealAccess::kPerRecord)};
  EXPECT_EQ(CodeOf([&] { CheckStageGraph(g, {}); }), ErrorCode::kConfig);
  // Private outputs of a ledgered stage stay tainted downstream.
  StageSpec hist = Make("histogram", {"real.jsonl"}, {"raw.json", "noised.json"},
                        RealAccess::kLedgered, "histogram");
  hist.private_outputs = {"raw.json"};
  std::vector<StageSpec> g2 = {
      g[0], hist,
      Make("resample", {"raw.json"}, {kReleaseArtifact}, RealAccess::kNone)};
  std::vector<std::string> budget = {"histogram"};
  EXPECT_EQ(CodeOf([&] { CheckStageGraph(g2, budget); }), ErrorCode::kConfig);
  g2[2].inputs = {"noised.json"};
  EXPECT_NO_THROW(CheckStageGraph(g2, budget));
}

TEST(StageGraphTest, InputBeforeProducerFails) {
  std::vector<StageSpec> g = {
      Make("cluster", {"synthetic.dpemb"}, {"c.dpcm"}, RealAccess::kNone)};
  EXPECT_EQ(CodeOf([&] { CheckStageGraph(g, {}); }), ErrorCode::kConfig);
}

TEST(FeaturizerTest, RowsAreUnitNormAndDeterministic) {
  Corpus c = testing::InstructionCorpus(20, 2);
  c.records[0].text = "ab";  // shorter than n: one gram
  EmbeddingMatrix m = HashedNgramEmbeddings(c, 64, 3);
  ASSERT_EQ(m.count(), 20u);
  ASSERT_EQ(m.dim(), 64u);
  for (size_t i = 0; i < m.count(); ++i) {
    double norm = 0;
    for (float x : m.row(i)) norm += static_cast<double>(x) * x;
    EXPECT_NEAR(norm, 1.0, 1e-6);
  }
  EXPECT_EQ(HashedNgramEmbeddings(c, 64, 3), m);
  EXPECT_EQ(m.fingerprint(), CorpusFingerprint(c));
  // Case-insensitive.
  Corpus upper = c;
  for (auto& r : upper.records) {
    for (char& ch : r.text) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  }
  EmbeddingMatrix mu = HashedNgramEmbeddings(upper, 64, 3);
  for (size_t i = 0; i < m.count(); ++i) {
    EXPECT_TRUE(std::equal(m.row(i).begin(), m.row(i).end(), mu.row(i).begin()));
  }
  EXPECT_THROW(HashedNgramEmbeddings(c, 0, 3), Error);
}

TEST_F(PipelineTest, FullRunIsDeterministicAndConsistent) {
  Pipeline a(Config(BaseJson("a")));
  a.RunAll();
  Pipeline b(Config(BaseJson("b")));
  b.RunAll();
  for (const char* f : {"real.jsonl", "model.dptm", "synthetic.jsonl",
                        "clusters.dpcm", "noised_histogram.json",
                        "selected.jsonl", "budget.json", "mauve.json",
                        "report.json"}) {
    EXPECT_EQ(Slurp(Work("a", f)), Slurp(Work("b", f))) << f;
  }
  json report = ReadJson(Work("a", "report.json"));
  EXPECT_EQ(report["tool_version"], kToolVersion);
  EXPECT_EQ(report["leakage"]["status"], "skipped");
  EXPECT_EQ(report["pii"]["status"], "skipped");
  EXPECT_EQ(report["synthetic_source"], "toy_generator");
  EXPECT_EQ(report["datasets"]["synthetic"], 600);
  EXPECT_EQ(report["datasets"]["selected"], report["selection"]["actual_size"]);
  EXPECT_TRUE(report["mauve"]["unigram"].contains("selected"));

  // The published epsilon is the accountant's answer for the recorded
  // mechanisms, recomputed here from the raw stage outputs.
  json train = ReadJson(Work("a", "train.json"));
  json hist = ReadJson(Work("a", "noised_histogram.json"));
  MechanismSpec t;
  t.kind = MechanismSpec::Kind::kSubsampledGaussian;
  t.sigma = train["sigma"];
  t.q = train["q"];
  t.repetitions = train["steps"];
  EXPECT_EQ(t.sigma, 1.0);
  EXPECT_DOUBLE_EQ(t.q, 50.0 / train["n"].get<double>());
  MechanismSpec h;
  h.kind = MechanismSpec::Kind::kGaussian;
  h.sigma = 10.0;
  h.sensitivity = 1.0;
  std::vector<MechanismSpec> mech = {t, h};
  BudgetReport expected = AccountBudget(mech, 1e-5);
  EXPECT_EQ(report["privacy"]["epsilon"].get<double>(), expected.epsilon);
  EXPECT_FALSE(hist.contains("raw"));
  EXPECT_TRUE(ReadJson(Work("a", "histogram.json")).contains("raw"));

  json manifest = ReadJson(Work("a", "manifest.json"));
  EXPECT_TRUE(manifest["nodes"].contains("embed-real"));
  EXPECT_TRUE(manifest["nodes"].contains("embed-synthetic"));
  EXPECT_EQ(manifest["nodes"]["cluster"]["inputs"]["synthetic.dpemb"],
            manifest["nodes"]["embed-synthetic"]["outputs"]["synthetic.dpemb"]);
}

TEST_F(PipelineTest, TamperedAndMissingArtifacts) {
  Pipeline p(Config(BaseJson("w")));
  for (const char* s : {"preprocess", "train", "sample", "embed-import"}) {
    p.RunStage(s);
  }
  // Stage rerun with unchanged inputs is fine.
  EXPECT_NO_THROW(p.RunStage("sample"));
  {
    std::ofstream out(Work("w", "synthetic.jsonl"), std::ios::app);
    out << R"({"id":"evil","text":"injected"})" << "\n";
  }
  EXPECT_EQ(CodeOf([&] { p.RunStage("embed-import"); }), ErrorCode::kStaleInput);
  p.RunStage("sample");
  p.RunStage("embed-import");
  EXPECT_EQ(CodeOf([&] { p.RunStage("histogram"); }),
            ErrorCode::kMissingArtifact);
  p.RunStage("cluster");
  fs::remove(Work("w", "clusters.dpcm"));
  EXPECT_EQ(CodeOf([&] { p.RunStage("histogram"); }),
            ErrorCode::kMissingArtifact);
  EXPECT_EQ(CodeOf([&] { p.RunStage("report"); }), ErrorCode::kIncompleteRun);
  EXPECT_EQ(CodeOf([&] { p.RunStage("canary"); }), ErrorCode::kConfig);
  EXPECT_EQ(CodeOf([&] { p.RunStage("nope"); }), ErrorCode::kInvalidArgument);
}

TEST_F(PipelineTest, LargeDeltaStopsTraining) {
  json j = BaseJson("d");
  j["privacy"]["delta"] = 0.01;
  Pipeline p(Config(j));
  p.RunStage("preprocess");
  EXPECT_EQ(CodeOf([&] { p.RunStage("train"); }), ErrorCode::kConfig);
  j["privacy"]["allow_large_delta"] = true;
  Pipeline q(Config(j));
  EXPECT_NO_THROW(q.RunStage("train"));
}

TEST_F(PipelineTest, InfeasiblePlanWithoutReplacement) {
  json j = BaseJson("i");
  j["resample"] = {{"target", 5000}, {"with_replacement", false}};
  Pipeline p(Config(j));
  for (const char* s : {"preprocess", "train", "sample", "embed-import",
                        "cluster", "histogram", "plan"}) {
    p.RunStage(s);
  }
  json plan = ReadJson(Work("i", "plan.json"));
  EXPECT_FALSE(plan["feasible"].get<bool>());
  try {
    p.RunStage("resample");
    FAIL() << "infeasible plan accepted";
  } catch (const InfeasiblePlanError& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInfeasible);
  }
}

TEST_F(PipelineTest, ImportedSyntheticCorpusWithCanaryAndExternalEmbeddings) {
  Corpus syn = testing::InstructionCorpus(500, 9);
  syn.role = CorpusRole::kSynthetic;
  for (size_t i = 0; i < syn.size(); ++i) syn.records[i].id = "s" + std::to_string(i);
  const std::string syn_path = (root_ / "syn.jsonl").string();
  WriteCorpus(syn, syn_path);
  const std::string emb_path = (root_ / "syn.dpemb").string();
  WriteEmbeddings(HashedNgramEmbeddings(syn, 16, 4), emb_path);
  json j = BaseJson("imp");
  j.erase("train");
  j["synthetic_corpus"] = syn_path;
  j["synthetic_embeddings"] = emb_path;
  j["featurizer"]["dim"] = 16;
  j["featurizer"]["ngram"] = 4;
  j["train"] = {{"batch_size", 50}, {"epochs", 1}, {"noise_multiplier", 1.0}};
  j["canary"] = json::parse(R"({"specs": [{"id": "pin", "template":
      "my pin is {secret}", "secret": "4242", "repetitions": 5,
      "pool_size": 50}], "scan_count": 100})");
  Pipeline p(Config(j));
  EXPECT_EQ(CodeOf([&] { p.RunStage("train"); }), ErrorCode::kConfig);
  p.RunAll();
  json report = ReadJson(Work("imp", "report.json"));
  EXPECT_EQ(report["synthetic_source"], "imported");
  EXPECT_TRUE(report["privacy"].contains("not_covered"));
  EXPECT_EQ(report["privacy"]["mechanisms"].size(), 1u);
  EXPECT_EQ(report["leakage"]["status"], "completed");
  EXPECT_EQ(report["leakage"]["private"]["canaries"][0]["pool_size"], 50);
  EXPECT_FALSE(report["leakage"]["nonprivate_reference"].is_null());
  EXPECT_EQ(Slurp(Work("imp", "synthetic.dpemb")), Slurp(emb_path));

  // Misaligned external embeddings are rejected.
  WriteEmbeddings(HashedNgramEmbeddings(testing::InstructionCorpus(499, 9), 16, 4),
                  emb_path);
  Pipeline bad(Config(j));
  EXPECT_EQ(CodeOf([&] { bad.RunStage("embed-import"); }),
            ErrorCode::kAlignment);
}

}  // namespace
}  // namespace dpsynth
