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

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "dpsynth/error.h"
#include "dpsynth/random.h"
#include "json.hpp"
#include "support/oracles.h"
#include "support/testbed.h"

namespace dpsynth {
namespace {

Corpus MakeCorpus(const std::vector<std::string>& texts) {
  Corpus c;
  for (size_t i = 0; i < texts.size(); ++i) {
    c.records.push_back({"r" + std::to_string(i), texts[i], {}});
  }
  return c;
}

using testing::FrontierIntegral;

const std::vector<double> kP = {0.7, 0.2, 0.1};
const std::vector<double> kQ = {0.1, 0.2, 0.7};

TEST(MauveTest, ThreeBinExampleMatchesIntegrationOracle) {
  double oracle = FrontierIntegral(kP, kQ, 5.0, 100000);
  MauveOptions opt;
  opt.c = 5.0;
  MauveReport r = MauveScore(kP, kQ, opt);
  EXPECT_NEAR(r.score, oracle, 1e-4);
  EXPECT_EQ(r.grid, 500u);
  EXPECT_EQ(r.frontier.size(), 504u);
}

TEST(MauveTest, GridRefinementIsStable) {
  MauveOptions coarse, fine;
  fine.grid = 5000;
  EXPECT_LT(std::abs(MauveScore(kP, kQ, coarse).score -
                     MauveScore(kP, kQ, fine).score),
            1e-4);
}

TEST(MauveTest, IdenticalDistributionsScoreOne) {
  EXPECT_NEAR(MauveScore(kP, kP).score, 1.0, 1e-9);
  std::vector<double> sparse = {0.0, 0.5, 0.0, 0.5};
  EXPECT_NEAR(MauveScore(sparse, sparse).score, 1.0, 1e-9);
}

TEST(MauveTest, SymmetricUnderSwap) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> p(12), q(12);
    for (size_t i = 0; i < p.size(); ++i) {
      p[i] = rng.Uniform() * (i % 3 == 0 ? 0.0 : 1.0);
      q[i] = rng.Uniform();
    }
    for (double c : {1.0, 5.0, 10.0}) {
      MauveOptions opt;
      opt.c = c;
      EXPECT_NEAR(MauveScore(p, q, opt).score, MauveScore(q, p, opt).score,
                  1e-9);
    }
  }
}

TEST(MauveTest, LargerScalingGivesStrictlySmallerScore) {
  double last = 2.0;
  for (double c : {0.5, 1.0, 2.0, 5.0, 10.0, 20.0}) {
    MauveOptions opt;
    opt.c = c;
    double s = MauveScore(kP, kQ, opt).score;
    EXPECT_LT(s, last) << "c=" << c;
    last = s;
  }
}

TEST(MauveTest, DisjointSupportsScoreNearZero) {
  std::vector<double> p = {0.5, 0.5, 0.0, 0.0};
  std::vector<double> q = {0.0, 0.0, 0.5, 0.5};
  MauveOptions opt;
  opt.c = 10.0;
  double s = MauveScore(p, q, opt).score;
  EXPECT_LT(s, 0.01);
  EXPECT_GT(s, 0.0);
  EXPECT_NEAR(s, FrontierIntegral(p, q, 10.0, 100000), 1e-4);
}

TEST(MauveTest, FrontierPointsLieInUnitSquareAndAreSorted) {
  MauveReport r = MauveScore(kP, kQ);
  EXPECT_EQ(r.frontier.front(), std::make_pair(0.0, 1.0));
  EXPECT_EQ(r.frontier.back(), std::make_pair(1.0, 0.0));
  for (size_t i = 0; i < r.frontier.size(); ++i) {
    EXPECT_GE(r.frontier[i].first, 0.0);
    EXPECT_LE(r.frontier[i].first, 1.0);
    EXPECT_LE(r.frontier[i].second, 1.0);
    if (i > 0) {
      EXPECT_LE(r.frontier[i - 1].first, r.frontier[i].first);
    }
  }
}

TEST(MauveTest, SerialAndParallelAgree) {
  MauveOptions a, b;
  b.parallel = false;
  EXPECT_EQ(MauveScore(kP, kQ, a).score, MauveScore(kP, kQ, b).score);
}

TEST(MauveTest, RejectsMismatchedOrBadInput) {
  std::vector<double> two = {0.5, 0.5};
  EXPECT_THROW(MauveScore(kP, two), Error);
  MauveOptions opt;
  opt.c = 0.0;
  EXPECT_THROW(MauveScore(kP, kQ, opt), Error);
  std::vector<double> neg = {1.2, -0.2, 0.0};
  EXPECT_THROW(MauveScore(neg, kQ), Error);
}

TEST(MauveTest, SerializedReportParses) {
  auto j = nlohmann::json::parse(
      SerializeMauveReport(MauveScore(kP, kQ), Representation::kEmbeddingCluster));
  EXPECT_EQ(j["representation"], "embedding");
  EXPECT_EQ(j["frontier"].size(), 504u);
  EXPECT_DOUBLE_EQ(j["c"].get<double>(), 5.0);
}

TEST(KlTest, HandValues) {
  std::vector<double> p = {0.5, 0.5}, q = {0.25, 0.75};
  EXPECT_NEAR(KlDivergence(p, q),
              0.5 * std::log(2.0) + 0.5 * std::log(2.0 / 3.0), 1e-15);
  EXPECT_EQ(KlDivergence(p, p), 0.0);
  std::vector<double> z = {1.0, 0.0};
  EXPECT_NEAR(KlDivergence(z, q), std::log(4.0), 1e-15);
}

TEST(UnigramTest, CountsTokens) {
  SimpleTokenizer tok;
  DistributionHistogram h = UnigramHistogram(MakeCorpus({"a a b"}), tok);
  EXPECT_EQ(h.labels, (std::vector<std::string>{"a", "b"}));
  EXPECT_NEAR(h.masses[0], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(h.masses[1], 1.0 / 3.0, 1e-15);
  EXPECT_THROW(UnigramHistogram(Corpus{}, tok), Error);
}

TEST(UnigramTest, UnionVocabulary) {
  SimpleTokenizer tok;
  auto [hp, hq] = UnigramHistograms(MakeCorpus({"x y"}), MakeCorpus({"z z"}),
                                    tok);
  EXPECT_EQ(hp.labels, hq.labels);
  EXPECT_EQ(hp.labels.size(), 3u);
  double overlap = 0;
  for (size_t i = 0; i < hp.bins(); ++i) {
    overlap += std::min(hp.masses[i], hq.masses[i]);
  }
  EXPECT_EQ(overlap, 0.0);
  auto [a, b] = UnigramHistograms(MakeCorpus({"x y"}), MakeCorpus({"y x"}),
                                  tok);
  EXPECT_EQ(a.masses, b.masses);
}

TEST(ClusterHistogramTest, IdenticalSetsGiveIdenticalHistograms) {
  EmbeddingMatrix m = testing::SampleMixture(testing::RealMixture(1), 400, 2);
  QuantizeOptions opt;
  opt.bins = 10;
  auto [hp, hq] = ClusterHistograms(m, m, opt);
  EXPECT_EQ(hp.masses, hq.masses);
}

TEST(ClusterHistogramTest, SeparatedBlobsLandInOwnBins) {
  std::vector<float> a, b;
  Rng rng(5);
  for (int i = 0; i < 50; ++i) {
    a.push_back(static_cast<float>(-10 + rng.Normal()));
    a.push_back(static_cast<float>(rng.Normal()));
    b.push_back(static_cast<float>(10 + rng.Normal()));
    b.push_back(static_cast<float>(rng.Normal()));
  }
  QuantizeOptions opt;
  opt.bins = 2;
  auto [hp, hq] = ClusterHistograms(EmbeddingMatrix(50, 2, a),
                                    EmbeddingMatrix(50, 2, b), opt);
  EXPECT_DOUBLE_EQ(std::max(hp.masses[0], hp.masses[1]), 1.0);
  EXPECT_DOUBLE_EQ(std::max(hq.masses[0], hq.masses[1]), 1.0);
  EXPECT_NE(hp.masses, hq.masses);
}

TEST(ClusterHistogramTest, RandomSplitWithinSamplingNoise) {
  EmbeddingMatrix m = testing::SampleMixture(testing::RealMixture(4), 4000, 6);
  std::vector<size_t> idx(m.count());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  Rng rng(8);
  Shuffle(std::span<size_t>(idx), rng);
  std::vector<size_t> left(idx.begin(), idx.begin() + 2000);
  std::vector<size_t> right(idx.begin() + 2000, idx.end());
  QuantizeOptions opt;
  opt.bins = 20;
  auto [hp, hq] = ClusterHistograms(m.Rows(left), m.Rows(right), opt);
  double tv = 0;
  for (size_t i = 0; i < hp.bins(); ++i) {
    tv += 0.5 * std::abs(hp.masses[i] - hq.masses[i]);
  }
  EXPECT_LE(tv, 3.0 * std::sqrt(20.0 / 2000.0));
}

TEST(ClusterHistogramTest, Errors) {
  EmbeddingMatrix a(2, 2, {0, 0, 1, 1});
  EmbeddingMatrix b(1, 3, {0, 0, 0});
  EXPECT_THROW(ClusterHistograms(a, b), Error);
  QuantizeOptions opt;
  opt.bins = 5;
  EXPECT_THROW(ClusterHistograms(a, a, opt), Error);
}

}  // namespace
}  // namespace dpsynth
