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

#ifndef DPSYNTH_TOY_GENERATOR_H_
#define DPSYNTH_TOY_GENERATOR_H_

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dpsynth/corpus.h"
#include "dpsynth/random.h"

namespace dpsynth {

// Byte-level vocabulary plus three specials.
inline constexpr int kBos = 256;
inline constexpr int kEos = 257;
inline constexpr int kPad = 258;
inline constexpr int kVocabSize = 259;

struct ModelShape {
  size_t embed_dim = 32;
  size_t hidden_dim = 64;
  // Longest text in bytes; also the divisor of every sequence loss.
  size_t max_len = 128;
  bool operator==(const ModelShape&) const = default;
};

// Text bytes as tokens, truncated to `max_len`. BOS and EOS are implicit.
std::vector<int> EncodeText(std::string_view text, size_t max_len);

// Next-token model on the previous token:
//   h = tanh(W1 E[prev] + b1),  logits = W2 h + b2.
// Parameters are one flat vector laid out as E [V x D], W1 [H x D], b1 [H],
// W2 [V x H], b2 [V].
class ToyLanguageModel {
 public:
  ToyLanguageModel() = default;
  static ToyLanguageModel Init(const ModelShape& shape, uint64_t seed);
  ToyLanguageModel(const ModelShape& shape, std::vector<double> parameters);

  const ModelShape& shape() const { return shape_; }
  size_t num_parameters() const { return params_.size(); }
  std::span<const double> parameters() const { return params_; }
  std::span<double> mutable_parameters() { return params_; }

  std::vector<double> NextTokenLogits(int prev) const;

  // (sum of token cross-entropies over the text and the final EOS) / max_len.
  double SequenceLoss(std::span<const int> tokens) const;
  // Gradient of SequenceLoss written into `grad` (overwritten); returns the
  // loss. Throws kInvalidArgument for tokens outside [0, 256) or texts
  // longer than max_len.
  double Gradient(std::span<const int> tokens, std::span<double> grad) const;

  bool operator==(const ToyLanguageModel&) const = default;

 private:
  struct Offsets {
    size_t embed, w1, b1, w2, b2, total;
  };
  Offsets offsets() const;
  void CheckTokens(std::span<const int> tokens) const;
  double Accumulate(std::span<const int> tokens, std::span<double> grad) const;

  ModelShape shape_;
  std::vector<double> params_;
};

// Checkpoint: "DPTM1\0", u32 version, u32 vocab, u32 embed, u32 hidden,
// u32 max_len, then the parameters as little-endian float32.
std::vector<uint8_t> EncodeModel(const ToyLanguageModel& model);
ToyLanguageModel DecodeModel(std::span<const uint8_t> bytes);
void SaveModel(const ToyLanguageModel& model, const std::string& path);
ToyLanguageModel LoadModel(const std::string& path);

// Log-probabilities of every (prev, next) pair; since the model only sees
// the previous token this is the whole model.
class BigramTable {
 public:
  explicit BigramTable(const ToyLanguageModel& model);
  double LogProb(int prev, int next) const {
    return log_probs_[static_cast<size_t>(prev) * kVocabSize + next];
  }
  double SequenceLoss(std::span<const int> tokens) const;
  size_t max_len() const { return max_len_; }

 private:
  std::vector<double> log_probs_;
  size_t max_len_;
};

struct DpAdamConfig {
  double clip = 0.5;
  double noise_multiplier = 0.0;
  size_t batch_size = 64;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  size_t epochs = 1;
  uint64_t seed = 0;
  bool parallel = true;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  uint64_t t = 0;
};

struct StepStats {
  uint64_t step = 0;
  double mean_loss = 0.0;
  // Largest per-example norm before and after clipping.
  double max_gradient_norm = 0.0;
  double max_contribution_norm = 0.0;
  size_t clipped = 0;
};

// One step: per-example gradients scaled by min(1, C / |g|), summed in batch
// order, plus N(0, sigma^2 C^2) per coordinate, divided by the batch size,
// then an Adam update.
StepStats DpAdamStep(ToyLanguageModel& model, AdamState& state,
                     std::span<const std::vector<int>> batch,
                     const DpAdamConfig& config, Rng& noise);

// Plain Adam update with a given gradient.
void AdamUpdate(std::span<double> params, AdamState& state,
                std::span<const double> gradient, const DpAdamConfig& config);

struct TrainResult {
  std::vector<StepStats> trace;
  // Inputs for the accountant.
  double sigma = 0.0;
  double q = 0.0;
  uint64_t steps = 0;
};

// epochs x ceil(N / B) steps of fixed-size batches over a seeded per-epoch
// permutation, wrapping around at the end of each epoch.
TrainResult Train(ToyLanguageModel& model, const Corpus& corpus,
                  const DpAdamConfig& config,
                  const std::function<void(const StepStats&)>& on_step = {});

std::string StepStatsJson(const StepStats& stats);

struct SamplingConfig {
  double top_p = 0.95;
  double temperature = 1.0;
  // 0 means the model's max_len.
  size_t max_len = 0;
  uint64_t seed = 0;
};

// Per-previous-token nucleus: tokens sorted by probability (ties by id), cut
// at the smallest prefix whose mass reaches top_p, renormalized. BOS and PAD
// are never produced.
class NucleusSampler {
 public:
  NucleusSampler(const ToyLanguageModel& model, const SamplingConfig& config);
  int Next(int prev, Rng& rng) const;
  int Greedy(int prev) const;
  std::span<const int> Nucleus(int prev) const;
  // Generates one text; tokens after `prompt`, without the prompt itself.
  std::string Generate(Rng& rng, std::string_view prompt = {}) const;
  std::string GreedyComplete(std::string_view prompt) const;
  size_t max_len() const { return max_len_; }

 private:
  struct Row {
    std::vector<int> tokens;
    std::vector<double> cumulative;  // ends at 1
  };
  std::vector<Row> rows_;
  std::vector<int> greedy_;
  size_t max_len_;
};

// M records with ids "syn-<i>"; sequence i uses stream i + 1 of the seed.
// Empty generations are redrawn from the same stream.
Corpus Sample(const ToyLanguageModel& model, const SamplingConfig& config,
              size_t count, bool parallel = true);

}  // namespace dpsynth

#endif  // DPSYNTH_TOY_GENERATOR_H_
