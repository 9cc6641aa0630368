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

#include "dpsynth/divergence.h"

#include <algorithm>
#include <cmath>
#include <map>

#include "dpsynth/clustering.h"
#include "dpsynth/error.h"
#include "json.hpp"

namespace dpsynth {
namespace {

void CountTokens(const Corpus& corpus, const Tokenizer& tokenizer,
                 std::map<std::string, uint64_t>& counts) {
  for (const auto& record : corpus.records) {
    for (auto& token : tokenizer.Tokenize(record.text)) ++counts[token];
  }
}

void RequireNonEmpty(const Corpus& corpus) {
  if (corpus.empty()) {
    throw Error(ErrorCode::kInvalidArgument,
                "unigram histogram of an empty corpus");
  }
}

DistributionHistogram Project(const std::map<std::string, uint64_t>& vocab,
                              const std::map<std::string, uint64_t>& counts) {
  DistributionHistogram h;
  h.representation = Representation::kUnigram;
  uint64_t total = 0;
  for (const auto& [token, n] : counts) total += n;
  if (total == 0) {
    throw Error(ErrorCode::kInvalidArgument, "corpus has no tokens");
  }
  for (const auto& [token, unused] : vocab) {
    auto it = counts.find(token);
    uint64_t n = it == counts.end() ? 0 : it->second;
    h.labels.push_back(token);
    h.masses.push_back(static_cast<double>(n) / static_cast<double>(total));
  }
  return h;
}

DistributionHistogram CountBins(std::span<const uint32_t> labels,
                                size_t bins) {
  DistributionHistogram h;
  h.representation = Representation::kEmbeddingCluster;
  h.masses.assign(bins, 0.0);
  for (uint32_t label : labels) h.masses[label] += 1.0;
  for (double& m : h.masses) m /= static_cast<double>(labels.size());
  return h;
}

}  // namespace

DistributionHistogram UnigramHistogram(const Corpus& corpus,
                                       const Tokenizer& tokenizer) {
  RequireNonEmpty(corpus);
  std::map<std::string, uint64_t> counts;
  CountTokens(corpus, tokenizer, counts);
  return Project(counts, counts);
}

std::pair<DistributionHistogram, DistributionHistogram> UnigramHistograms(
    const Corpus& p, const Corpus& q, const Tokenizer& tokenizer) {
  RequireNonEmpty(p);
  RequireNonEmpty(q);
  std::map<std::string, uint64_t> pc, qc;
  CountTokens(p, tokenizer, pc);
  CountTokens(q, tokenizer, qc);
  std::map<std::string, uint64_t> vocab = pc;
  for (const auto& [token, n] : qc) vocab[token] += n;
  return {Project(vocab, pc), Project(vocab, qc)};
}

std::pair<DistributionHistogram, DistributionHistogram> ClusterHistograms(
    const EmbeddingMatrix& p, const EmbeddingMatrix& q,
    const QuantizeOptions& options) {
  if (p.dim() != q.dim()) {
    throw Error(ErrorCode::kDimMismatch,
                "cannot quantize embeddings of dim " + std::to_string(p.dim()) +
                    " and " + std::to_string(q.dim()) + " together");
  }
  if (p.count() == 0 || q.count() == 0) {
    throw Error(ErrorCode::kInvalidArgument, "cannot quantize an empty set");
  }
  const size_t total = p.count() + q.count();
  if (options.bins == 0 || options.bins > total) {
    throw Error(ErrorCode::kInvalidArgument,
                "bins must lie in [1, " + std::to_string(total) + "], got " +
                    std::to_string(options.bins));
  }
  std::vector<float> joint(p.data().begin(), p.data().end());
  joint.insert(joint.end(), q.data().begin(), q.data().end());
  EmbeddingMatrix both(total, p.dim(), std::move(joint));
  KMeansOptions km;
  km.k = options.bins;
  km.seed = options.seed;
  km.max_iters = options.max_iters;
  km.parallel = options.parallel;
  ClusterModel model = KMeansFit(both, km);
  std::span<const uint32_t> labels = model.assignments;
  return {CountBins(labels.subspan(0, p.count()), options.bins),
          CountBins(labels.subspan(p.count()), options.bins)};
}

double KlDivergence(std::span<const double> p, std::span<const double> q) {
  double kl = 0.0;
  for (size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) kl += p[i] * std::log(p[i] / q[i]);
  }
  return std::max(kl, 0.0);
}

std::vector<double> SmoothMasses(std::span<const double> masses,
                                 double smoothing) {
  std::vector<double> out(masses.begin(), masses.end());
  double total = 0.0;
  for (double& m : out) {
    if (!(m >= 0.0)) {
      throw Error(ErrorCode::kInvalidArgument, "negative histogram mass");
    }
    m += smoothing;
    total += m;
  }
  for (double& m : out) m /= total;
  return out;
}

MauveReport MauveScore(std::span<const double> p_raw,
                       std::span<const double> q_raw,
                       const MauveOptions& options) {
  if (p_raw.size() != q_raw.size() || p_raw.empty()) {
    throw Error(ErrorCode::kInvalidArgument,
                "MAUVE needs two histograms over the same non-empty bins");
  }
  if (!(options.c > 0.0) || options.grid == 0) {
    throw Error(ErrorCode::kInvalidArgument, "MAUVE needs c > 0 and grid >= 1");
  }
  const std::vector<double> p = SmoothMasses(p_raw, options.smoothing);
  const std::vector<double> q = SmoothMasses(q_raw, options.smoothing);
  const size_t g = options.grid;
  const size_t bins = p.size();
  const double c = options.c;

  // Slots 0 and g+1 are the mixture endpoints R = Q and R = P.
  std::vector<std::pair<double, double>> points(g + 2);
  points[0] = {1.0, std::exp(-c * KlDivergence(p, q))};
  points[g + 1] = {std::exp(-c * KlDivergence(q, p)), 1.0};
#pragma omp parallel for schedule(static) if (options.parallel)
  for (size_t k = 1; k <= g; ++k) {
    double lambda = static_cast<double>(k) / static_cast<double>(g + 1);
    std::vector<double> r(bins);
    for (size_t i = 0; i < bins; ++i) r[i] = lambda * p[i] + (1 - lambda) * q[i];
    points[k] = {std::exp(-c * KlDivergence(q, r)),
                 std::exp(-c * KlDivergence(p, r))};
  }
  points.emplace_back(0.0, 1.0);
  points.emplace_back(1.0, 0.0);
  std::stable_sort(points.begin(), points.end(),
                   [](const auto& a, const auto& b) {
                     if (a.first != b.first) return a.first < b.first;
                     return a.second > b.second;
                   });
  double area = 0.0;
  for (size_t i = 1; i < points.size(); ++i) {
    area += 0.5 * (points[i].first - points[i - 1].first) *
            (points[i].second + points[i - 1].second);
  }
  MauveReport report;
  report.score = area;
  report.c = c;
  report.grid = g;
  report.frontier = std::move(points);
  return report;
}

MauveReport MauveScore(const DistributionHistogram& p,
                       const DistributionHistogram& q,
                       const MauveOptions& options) {
  if (p.bins() != q.bins() || p.labels != q.labels) {
    throw Error(ErrorCode::kInvalidArgument,
                "MAUVE histograms are over different bins");
  }
  return MauveScore(p.masses, q.masses, options);
}

std::string SerializeMauveReport(const MauveReport& report,
                                 Representation representation) {
  nlohmann::json j;
  j["representation"] =
      representation == Representation::kUnigram ? "unigram" : "embedding";
  j["score"] = report.score;
  j["c"] = report.c;
  j["grid"] = report.grid;
  nlohmann::json frontier = nlohmann::json::array();
  for (auto [x, y] : report.frontier) frontier.push_back({x, y});
  j["frontier"] = std::move(frontier);
  return j.dump() + "\n";
}

}  // namespace dpsynth
