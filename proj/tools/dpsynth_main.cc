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

// Command-line driver: one subcommand per pipeline stage plus standalone
// accountant and MAUVE tools.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "dpsynth/accountant.h"
#include "dpsynth/corpus.h"
#include "dpsynth/divergence.h"
#include "dpsynth/embedding_store.h"
#include "dpsynth/error.h"
#include "dpsynth/pipeline.h"
#include "dpsynth/resampler.h"
#include "dpsynth/tokenizer.h"

namespace {

using dpsynth::Error;
using dpsynth::ErrorCode;

constexpr int kExitOk = 0;
constexpr int kExitOther = 1;
constexpr int kExitConfig = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitService = 4;

int ExitCodeFor(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfig:
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kMissingArtifact:
    case ErrorCode::kStaleInput:
    case ErrorCode::kIncompleteRun:
    case ErrorCode::kAlignment:
    case ErrorCode::kDimMismatch:
      return kExitConfig;
    case ErrorCode::kInfeasible:
      return kExitInfeasible;
    case ErrorCode::kService:
      return kExitService;
    default:
      return kExitOther;
  }
}

struct PipelineFlags {
  std::string config;
  std::string work_dir;
  std::optional<uint64_t> seed;
};

dpsynth::PipelineConfig LoadConfig(const PipelineFlags& flags) {
  dpsynth::PipelineConfig config = dpsynth::ReadPipelineConfig(flags.config);
  if (!flags.work_dir.empty()) config.work_dir = flags.work_dir;
  if (flags.seed) config.seed = *flags.seed;
  return config;
}

void AddPipelineFlags(CLI::App* cmd, PipelineFlags& flags, bool required) {
  auto* opt = cmd->add_option("--config", flags.config, "pipeline config (JSON)");
  if (required) opt->required();
  cmd->add_option("--work-dir", flags.work_dir, "override work_dir");
  cmd->add_option("--seed", flags.seed, "override the master seed");
}

struct MauveFlags {
  std::string p, q, p_emb, q_emb;
  std::string rep = "unigram";
  std::optional<double> c;
  size_t bins = 500;
  size_t grid = 500;
  uint64_t seed = 0;
};

int RunStandaloneMauve(const MauveFlags& f) {
  dpsynth::MauveOptions options;
  options.grid = f.grid;
  dpsynth::MauveReport report;
  dpsynth::Representation rep;
  if (f.rep == "unigram") {
    if (f.p.empty() || f.q.empty()) {
      throw Error(ErrorCode::kConfig, "unigram MAUVE needs --p and --q corpora");
    }
    rep = dpsynth::Representation::kUnigram;
    options.c = f.c.value_or(5.0);
    auto p = dpsynth::ReadCorpus(f.p, dpsynth::CorpusRole::kSynthetic);
    auto q = dpsynth::ReadCorpus(f.q, dpsynth::CorpusRole::kReal);
    dpsynth::SimpleTokenizer tokenizer;
    auto [hp, hq] = dpsynth::UnigramHistograms(p, q, tokenizer);
    report = dpsynth::MauveScore(hp, hq, options);
  } else if (f.rep == "embedding") {
    if (f.p_emb.empty() || f.q_emb.empty()) {
      throw Error(ErrorCode::kConfig,
                  "embedding MAUVE needs --p-emb and --q-emb files");
    }
    rep = dpsynth::Representation::kEmbeddingCluster;
    options.c = f.c.value_or(10.0);
    auto p = dpsynth::ReadEmbeddings(f.p_emb);
    auto q = dpsynth::ReadEmbeddings(f.q_emb, p.dim());
    dpsynth::QuantizeOptions quantize;
    quantize.bins = f.bins;
    quantize.seed = f.seed;
    auto [hp, hq] = dpsynth::ClusterHistograms(p, q, quantize);
    report = dpsynth::MauveScore(hp, hq, options);
  } else {
    throw Error(ErrorCode::kConfig, "--rep must be unigram or embedding");
  }
  std::cout << dpsynth::SerializeMauveReport(report, rep);
  return kExitOk;
}

struct AccountFlags {
  std::optional<double> sigma;
  double q = 1.0;
  uint64_t steps = 1;
  double delta = 5e-7;
  std::optional<double> hist_sigma;
  double epsilon = 0.0;
};

int RunStandaloneAccount(const AccountFlags& f) {
  if (!f.sigma && !f.hist_sigma) {
    throw Error(ErrorCode::kConfig,
                "account needs --config, or --sigma and/or --hist-sigma");
  }
  std::vector<dpsynth::MechanismSpec> mechanisms;
  if (f.sigma) {
    dpsynth::MechanismSpec training;
    training.kind = dpsynth::MechanismSpec::Kind::kSubsampledGaussian;
    training.sigma = *f.sigma;
    training.q = f.q;
    training.repetitions = f.steps;
    training.label = "dp_adam";
    mechanisms.push_back(training);
  }
  if (f.hist_sigma) {
    dpsynth::MechanismSpec release;
    release.kind = dpsynth::MechanismSpec::Kind::kGaussian;
    release.sigma = *f.hist_sigma;
    release.sensitivity = 1.0;
    release.label = "histogram";
    mechanisms.push_back(release);
  }
  std::cout << dpsynth::SerializeBudgetReport(
      dpsynth::AccountBudget(mechanisms, f.delta));
  return kExitOk;
}

int RunCalibrate(const AccountFlags& f) {
  double sigma = dpsynth::CalibrateSigma(f.epsilon, f.delta, f.q, f.steps);
  nlohmann::json j = {{"sigma", sigma},
                      {"epsilon", f.epsilon},
                      {"delta", f.delta},
                      {"q", f.q},
                      {"steps", f.steps}};
  std::cout << j.dump(2) << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dpsynth: private curation of synthetic instruction corpora"};
  app.require_subcommand(0, 1);
  bool explain = false;
  app.add_flag("--explain", explain, "print every config option with its default");

  PipelineFlags flags;
  std::vector<std::pair<std::string, CLI::App*>> stage_cmds;
  const std::vector<std::pair<std::string, std::string>> stages = {
      {"preprocess", "deduplicate and filter the real corpus"},
      {"train", "train the toy generator with DP-Adam"},
      {"sample", "generate (or import) the initial synthetic corpus"},
      {"embed-import", "embed or import embeddings for both corpora"},
      {"cluster", "k-means over synthetic embeddings"},
      {"histogram", "privatized cluster histogram of the real corpus"},
      {"plan", "per-cluster selection plan"},
      {"resample", "select the released synthetic corpus"},
      {"canary", "canary injection and leakage audit"},
      {"pii-scan", "LLM-based PII screen"},
      {"report", "consolidated run report"},
  };
  for (const auto& [name, help] : stages) {
    CLI::App* cmd = app.add_subcommand(name, help);
    AddPipelineFlags(cmd, flags, true);
    stage_cmds.emplace_back(name, cmd);
  }
  CLI::App* run_all = app.add_subcommand("run-all", "run every enabled stage");
  AddPipelineFlags(run_all, flags, true);

  MauveFlags mauve_flags;
  CLI::App* mauve = app.add_subcommand(
      "mauve", "MAUVE stage (--config) or standalone score of two inputs");
  AddPipelineFlags(mauve, flags, false);
  mauve->add_option("--p", mauve_flags.p, "first corpus (JSONL)");
  mauve->add_option("--q", mauve_flags.q, "second corpus (JSONL)");
  mauve->add_option("--p-emb", mauve_flags.p_emb, "first embeddings (DPEB1)");
  mauve->add_option("--q-emb", mauve_flags.q_emb, "second embeddings (DPEB1)");
  mauve->add_option("--rep", mauve_flags.rep, "unigram or embedding")
      ->check(CLI::IsMember({"unigram", "embedding"}));
  mauve->add_option("--c", mauve_flags.c,
                    "scaling constant (default 5 unigram, 10 embedding)");
  mauve->add_option("--bins", mauve_flags.bins, "quantization bins");
  mauve->add_option("--grid", mauve_flags.grid, "frontier grid size");
  mauve->add_option("--quantize-seed", mauve_flags.seed, "quantization seed");

  AccountFlags account_flags;
  CLI::App* account = app.add_subcommand(
      "account", "account stage (--config) or standalone epsilon computation");
  account->add_option("--config", flags.config, "pipeline config (JSON)");
  account->add_option("--work-dir", flags.work_dir, "override work_dir");
  account->add_option("--sigma", account_flags.sigma, "DP-Adam noise multiplier");
  account->add_option("--q", account_flags.q, "sampling rate");
  account->add_option("--steps", account_flags.steps, "training steps");
  account->add_option("--delta", account_flags.delta, "target delta");
  account->add_option("--hist-sigma", account_flags.hist_sigma,
                      "noise std of one histogram release");
  CLI::App* calibrate =
      account->add_subcommand("calibrate", "smallest sigma reaching --epsilon");
  calibrate->add_option("--epsilon", account_flags.epsilon, "target epsilon")
      ->required();
  calibrate->add_option("--q", account_flags.q, "sampling rate")->required();
  calibrate->add_option("--steps", account_flags.steps, "training steps")
      ->required();
  calibrate->add_option("--delta", account_flags.delta, "target delta");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (explain) {
      std::cout << dpsynth::ExplainDefaults();
      return kExitOk;
    }
    for (const auto& [name, cmd] : stage_cmds) {
      if (cmd->parsed()) {
        dpsynth::Pipeline(LoadConfig(flags)).RunStage(name);
        if (name == "report") {
          std::cout << dpsynth::Pipeline(LoadConfig(flags)).ArtifactPath("report.json")
                    << "\n";
        }
        return kExitOk;
      }
    }
    if (run_all->parsed()) {
      dpsynth::Pipeline(LoadConfig(flags)).RunAll();
      return kExitOk;
    }
    if (mauve->parsed()) {
      if (!flags.config.empty()) {
        dpsynth::Pipeline(LoadConfig(flags)).RunStage("mauve");
        return kExitOk;
      }
      return RunStandaloneMauve(mauve_flags);
    }
    if (account->parsed()) {
      if (calibrate->parsed()) return RunCalibrate(account_flags);
      if (!flags.config.empty()) {
        dpsynth::Pipeline pipeline(LoadConfig(flags));
        pipeline.RunStage("account");
        return kExitOk;
      }
      return RunStandaloneAccount(account_flags);
    }
    std::cout << app.help();
    return kExitConfig;
  } catch (const dpsynth::InfeasiblePlanError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const Error& e) {
    std::cerr << "error (" << dpsynth::ErrorCodeName(e.code()) << "): " << e.what()
              << "\n";
    return ExitCodeFor(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitOther;
  }
}
