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

#ifndef DPSYNTH_DIVERGENCE_H_
#define DPSYNTH_DIVERGENCE_H_

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dpsynth/corpus.h"
#include "dpsynth/embedding_store.h"
#include "dpsynth/tokenizer.h"

namespace dpsynth {

enum class Representation { kUnigram, kEmbeddingCluster };

struct DistributionHistogram {
  Representation representation = Representation::kUnigram;
  std::vector<double> masses;
  // Token per bin for unigram histograms; empty for cluster histograms.
  std::vector<std::string> labels;
  size_t bins() const { return masses.size(); }
};

// Token frequencies over the corpus' own vocabulary, sorted by token.
DistributionHistogram UnigramHistogram(const Corpus& corpus,
                                       const Tokenizer& tokenizer);

// Both corpora over their union vocabulary.
std::pair<DistributionHistogram, DistributionHistogram> UnigramHistograms(
    const Corpus& p, const Corpus& q, const Tokenizer& tokenizer);

struct QuantizeOptions {
  size_t bins = 500;
  uint64_t seed = 0;
  size_t max_iters = 100;
  bool parallel = true;
};

// Joint k-means over the rows of both matrices; each side's histogram over
// the shared bins.
std::pair<DistributionHistogram, DistributionHistogram> ClusterHistograms(
    const EmbeddingMatrix& p, const EmbeddingMatrix& q,
    const QuantizeOptions& options = {});

struct MauveOptions {
  double c = 5.0;
  // Interior mixture weights k / (grid + 1), k = 1..grid.
  size_t grid = 500;
  // Added to every bin before renormalizing.
  double smoothing = 1e-9;
  bool parallel = true;
};

struct MauveReport {
  double score = 0.0;
  double c = 0.0;
  size_t grid = 0;
  // (exp(-c KL(Q||R)), exp(-c KL(P||R))) sorted by the first coordinate,
  // including the corners (0, 1) and (1, 0).
  std::vector<std::pair<double, double>> frontier;
};

// KL(p || q) in nats with 0 log 0 = 0.
double KlDivergence(std::span<const double> p, std::span<const double> q);

std::vector<double> SmoothMasses(std::span<const double> masses,
                                 double smoothing);

MauveReport MauveScore(const DistributionHistogram& p,
                       const DistributionHistogram& q,
                       const MauveOptions& options = {});
MauveReport MauveScore(std::span<const double> p, std::span<const double> q,
                       const MauveOptions& options = {});

std::string SerializeMauveReport(const MauveReport& report,
                                 Representation representation);

}  // namespace dpsynth

#endif  // DPSYNTH_DIVERGENCE_H_
