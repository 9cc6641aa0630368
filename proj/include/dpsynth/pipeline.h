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

#ifndef DPSYNTH_PIPELINE_H_
#define DPSYNTH_PIPELINE_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dpsynth/accountant.h"
#include "dpsynth/corpus.h"
#include "dpsynth/embedding_store.h"
#include "dpsynth/leakage_eval.h"
#include "dpsynth/pii_screen.h"
#include "dpsynth/toy_generator.h"

namespace dpsynth {

struct PipelineConfig {
  std::string work_dir = "dpsynth_run";
  uint64_t seed = 0;

  std::string real_corpus;
  // Optional: an externally generated synthetic corpus imported at the
  // sample boundary instead of training the toy generator.
  std::string synthetic_corpus;
  // Optional DPEB1 files aligned with the preprocessed real corpus and the
  // synthetic corpus. Without them a hashed character n-gram featurizer is
  // used.
  std::string real_embeddings;
  std::string synthetic_embeddings;
  size_t featurizer_dim = 256;
  size_t featurizer_ngram = 3;

  PreprocessOptions preprocess;

  ModelShape model;
  DpAdamConfig train;
  // Noise multiplier for training; calibrated from train_epsilon when unset.
  std::optional<double> train_noise_multiplier;
  double train_epsilon = 6.0;
  double delta = 5e-7;
  // Permit delta >= 0.1 / N.
  bool allow_large_delta = false;

  SamplingConfig sampling;
  size_t sample_count = 2000;

  size_t k = 1000;
  size_t kmeans_max_iters = 100;
  double kmeans_rel_tol = 1e-4;
  bool normalize_embeddings = false;

  double histogram_sigma = 10.0;
  uint64_t target = 0;  // T; 0 means the preprocessed real corpus size
  bool with_replacement = false;

  double mauve_unigram_c = 5.0;
  double mauve_embedding_c = 10.0;
  size_t mauve_bins = 500;
  size_t mauve_grid = 500;

  std::vector<CanarySpec> canaries;
  uint64_t canary_scan_count = 100000;
  double canary_scan_top_p = 1.0;
  bool canary_nonprivate_reference = true;
  // Word list for alternative secrets; built-in list when empty.
  std::string canary_words_file;

  bool pii_enabled = false;
  // "selected" or "real".
  std::string pii_corpus = "selected";
  std::string pii_demonstrations_file;
  EndpointConfig pii_endpoint;
  ScreenOptions pii_options;
};

// Unknown keys and malformed values are kConfig errors.
PipelineConfig ParsePipelineConfig(std::string_view json_text);
PipelineConfig ReadPipelineConfig(const std::string& path);
std::string SerializePipelineConfig(const PipelineConfig& config);
// Every option with its default and a one-line description.
std::string ExplainDefaults();

// Throws kConfig unless delta < 0.1 / n or the override is set.
void CheckDelta(const PipelineConfig& config, size_t n);

enum class RealAccess {
  kNone,
  // Defines the private dataset itself (preprocessing).
  kDatasetDefinition,
  // Per-record transform of private data whose output stays private.
  kPerRecord,
  // Releases through a DP mechanism that is charged to the budget.
  kLedgered,
  // Reads private data for evaluation only; outputs never feed a release.
  kEvaluationOnly,
};

// One node of the stage graph. A CLI stage may run several nodes
// (embed-import handles the two corpora separately).
struct StageSpec {
  std::string name;
  std::string stage;
  std::vector<std::string> inputs;
  // Read when present (the report's optional sections).
  std::vector<std::string> optional_inputs;
  std::vector<std::string> outputs;
  // Outputs of a ledgered node that are not covered by its mechanism and
  // stay private (raw votes, non-private training losses).
  std::vector<std::string> private_outputs;
  RealAccess access = RealAccess::kNone;
  // Label of the budget entry for ledgered stages.
  std::string mechanism;
};

inline constexpr char kToolVersion[] = "dpsynth 0.1.0";

// Artifact names (relative to the work dir).
inline constexpr char kRealRawArtifact[] = "<real corpus>";
inline constexpr char kSyntheticRawArtifact[] = "<synthetic corpus>";
inline constexpr char kRealEmbeddingsArtifact[] = "<real embeddings>";
inline constexpr char kSyntheticEmbeddingsArtifact[] = "<synthetic embeddings>";
inline constexpr char kReleaseArtifact[] = "selected.jsonl";

std::vector<StageSpec> StageGraph(const PipelineConfig& config);

// Propagates "derived from private data" through the graph. Throws kConfig
// if private-derived data reaches a stage that is not allowed to read it or
// reaches the release without passing a ledgered stage, or if a ledgered
// stage has no budget entry.
void CheckStageGraph(std::span<const StageSpec> stages,
                     std::span<const std::string> budget_mechanisms);

// Character n-gram counts hashed into `dim` signed buckets, L2-normalized.
EmbeddingMatrix HashedNgramEmbeddings(const Corpus& corpus, size_t dim,
                                      size_t n);

class Pipeline {
 public:
  explicit Pipeline(PipelineConfig config);

  static const std::vector<std::string>& StageNames();
  // Runs one stage; upstream artifacts must exist and match the manifest.
  void RunStage(std::string_view name);
  // Every enabled stage in order. Canary and pii-scan run only when
  // configured.
  void RunAll();

  // Artifact names map into the work dir; bracketed names map to the
  // configured external files.
  std::string ArtifactPath(std::string_view name) const;
  const PipelineConfig& config() const { return config_; }
  const std::vector<StageSpec>& graph() const { return graph_; }
  uint64_t StageSeed(std::string_view stage) const;

 private:
  void RunNode(const StageSpec& node);
  void EmbedCorpus(bool real);
  void Preprocess();
  void Train();
  void SampleStage();
  void Cluster();
  void Histogram();
  void Plan();
  void Resample();
  void Account();
  void Mauve();
  void Canary();
  void PiiScan();
  void Report();

  const StageSpec& Spec(std::string_view name) const;
  void CheckInputs(const StageSpec& stage) const;
  void RecordStage(const StageSpec& stage) const;
  bool TrainsGenerator() const { return config_.synthetic_corpus.empty(); }

  PipelineConfig config_;
  std::vector<StageSpec> graph_;
  // Set by pii-scan when records failed; raised after the report is saved.
  std::string deferred_service_error_;
};

}  // namespace dpsynth

#endif  // DPSYNTH_PIPELINE_H_
