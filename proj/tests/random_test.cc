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

#include "dpsynth/random.h"

#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <vector>

namespace dpsynth {
namespace {

TEST(RngTest, SameSeedAndStreamRepeat) {
  Rng a(42, 3), b(42, 3);
  for (int i = 0; i < 1000; ++i) EXPECT_EQ(a.NextU64(), b.NextU64());
}

TEST(RngTest, StreamsDiffer) {
  Rng a(42, 0), b(42, 1);
  int equal = 0;
  for (int i = 0; i < 1000; ++i) equal += a.NextU64() == b.NextU64();
  EXPECT_EQ(equal, 0);
}

TEST(RngTest, UniformInUnitInterval) {
  Rng rng(1);
  for (int i = 0; i < 100000; ++i) {
    double u = rng.Uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    double v = rng.UniformOpen();
    ASSERT_GT(v, 0.0);
    ASSERT_LT(v, 1.0);
  }
}

TEST(RngTest, NormalMoments) {
  Rng rng(7);
  const int n = 400000;
  double sum = 0, sum2 = 0, sum4 = 0;
  for (int i = 0; i < n; ++i) {
    double x = rng.Normal();
    sum += x;
    sum2 += x * x;
    sum4 += x * x * x * x;
  }
  // Standard errors: mean 1/sqrt(n), variance sqrt(2/n), fourth moment ~sqrt(96/n).
  EXPECT_NEAR(sum / n, 0.0, 5.0 / std::sqrt(n));
  EXPECT_NEAR(sum2 / n, 1.0, 5.0 * std::sqrt(2.0 / n));
  EXPECT_NEAR(sum4 / n, 3.0, 5.0 * std::sqrt(96.0 / n));
}

TEST(RngTest, UniformIndexChiSquare) {
  Rng rng(11);
  const int k = 17, n = 170000;
  std::vector<int> counts(k, 0);
  for (int i = 0; i < n; ++i) ++counts[rng.UniformIndex(k)];
  double chi2 = 0.0, expected = static_cast<double>(n) / k;
  for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
  // 16 degrees of freedom; the 0.999 quantile is 39.25.
  EXPECT_LT(chi2, 39.25);
}

TEST(RngTest, ShuffleIsPermutationAndUniformish) {
  Rng rng(5);
  std::vector<int> first_position(4, 0);
  for (int t = 0; t < 40000; ++t) {
    std::vector<int> v = {0, 1, 2, 3};
    Shuffle(std::span<int>(v), rng);
    std::multiset<int> s(v.begin(), v.end());
    ASSERT_EQ(s, (std::multiset<int>{0, 1, 2, 3}));
    ++first_position[v[0]];
  }
  for (int c : first_position) EXPECT_NEAR(c, 10000, 600);
}

TEST(RngTest, DeriveSeedSeparatesStreams) {
  std::set<uint64_t> seeds;
  for (uint64_t s = 0; s < 100; ++s) {
    for (uint64_t stream = 0; stream < 100; ++stream) {
      seeds.insert(Rng::DeriveSeed(s, stream));
    }
  }
  EXPECT_EQ(seeds.size(), 10000u);
}

}  // namespace
}  // namespace dpsynth
