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

#include "dpsynth/resampler.h"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "dpsynth/error.h"
#include "dpsynth/random.h"

namespace dpsynth {
namespace {

ClusterModel ModelWithSizes(const std::vector<uint64_t>& sizes) {
  ClusterModel m;
  m.k = sizes.size();
  m.dim = 1;
  m.centroids.assign(m.k, 0.0f);
  for (size_t j = 0; j < sizes.size(); ++j) {
    for (uint64_t t = 0; t < sizes[j]; ++t) {
      m.assignments.push_back(static_cast<uint32_t>(j));
    }
  }
  // Interleave so that group members are not contiguous.
  Rng rng(1);
  Shuffle(std::span<uint32_t>(m.assignments), rng);
  return m;
}

TEST(ClampedCeilTest, Values) {
  EXPECT_EQ(ClampedCeil(2.0), 2);
  EXPECT_EQ(ClampedCeil(2.1), 3);
  EXPECT_EQ(ClampedCeil(-0.5), 0);
  EXPECT_EQ(ClampedCeil(-7.0), 0);
  EXPECT_EQ(ClampedCeil(0.0), 0);
  EXPECT_EQ(ClampedCeil(5000 * (3 / 5000.0)), 3);
  EXPECT_EQ(ClampedCeil(0.1 * 30), 3);
}

TEST(MakePlanTest, MatchesFormula) {
  std::vector<double> p = {0.5, 0.25, -0.1, 0.35, 0.0};
  std::vector<uint64_t> sizes = {100, 10, 5, 20, 0};
  SelectionPlan plan = MakePlan(p, sizes, 40);
  EXPECT_EQ(plan.per_cluster, (std::vector<int64_t>{20, 10, 0, 14, 0}));
  EXPECT_EQ(plan.deficits, (std::vector<uint64_t>{0, 0, 0, 0, 0}));
  EXPECT_TRUE(plan.feasible);
  EXPECT_EQ(plan.total_selected, 44u);
  plan = MakePlan(p, sizes, 100);
  EXPECT_EQ(plan.per_cluster, (std::vector<int64_t>{50, 25, 0, 35, 0}));
  EXPECT_EQ(plan.deficits, (std::vector<uint64_t>{0, 15, 0, 15, 0}));
  EXPECT_FALSE(plan.feasible);
}

TEST(MakePlanTest, LengthMismatch) {
  std::vector<double> p = {1.0};
  std::vector<uint64_t> sizes = {1, 2};
  EXPECT_THROW(MakePlan(p, sizes, 1), Error);
}

TEST(ResampleTest, SelectsQuotaFromEachClusterWithoutRepeats) {
  std::vector<uint64_t> sizes = {30, 10, 50};
  ClusterModel model = ModelWithSizes(sizes);
  std::vector<double> p = {0.2, 0.1, 0.7};
  SelectionPlan plan = MakePlan(p, sizes, 50);
  SelectionResult r = Resample(plan, model, 3);
  ASSERT_EQ(r.selected.size(), 3u);
  for (size_t j = 0; j < 3; ++j) {
    EXPECT_EQ(static_cast<int64_t>(r.selected[j].size()), plan.per_cluster[j]);
    std::set<uint32_t> unique(r.selected[j].begin(), r.selected[j].end());
    EXPECT_EQ(unique.size(), r.selected[j].size());
    for (auto idx : r.selected[j]) EXPECT_EQ(model.assignments[idx], j);
  }
  EXPECT_EQ(r.actual_size, plan.total_selected);
  EXPECT_FALSE(r.replacement_used);
  EXPECT_EQ(r.Flatten().size(), r.actual_size);
}

TEST(ResampleTest, DeterministicPerSeed) {
  std::vector<uint64_t> sizes = {40, 40};
  ClusterModel model = ModelWithSizes(sizes);
  std::vector<double> p = {0.5, 0.5};
  SelectionPlan plan = MakePlan(p, sizes, 20);
  EXPECT_EQ(Resample(plan, model, 9).selected, Resample(plan, model, 9).selected);
  EXPECT_NE(Resample(plan, model, 9).selected, Resample(plan, model, 10).selected);
}

TEST(ResampleTest, UniformWithinCluster) {
  std::vector<uint64_t> sizes = {10};
  ClusterModel model = ModelWithSizes(sizes);
  std::vector<double> p = {0.3};
  SelectionPlan plan = MakePlan(p, sizes, 10);
  ASSERT_EQ(plan.per_cluster[0], 3);
  std::vector<int> hits(10, 0);
  const int trials = 20000;
  for (int s = 0; s < trials; ++s) {
    SelectionResult r = Resample(plan, model, s);
    for (auto idx : r.selected[0]) ++hits[idx];
  }
  // Each member has inclusion probability 3/10.
  double chi2 = 0, expected = trials * 0.3;
  for (int h : hits) chi2 += (h - expected) * (h - expected) / expected;
  EXPECT_LT(chi2, 27.88);  // 0.999 quantile with 9 degrees of freedom
}

TEST(ResampleTest, InfeasiblePlanThrowsWithMessage) {
  std::vector<uint64_t> sizes = {5, 100};
  ClusterModel model = ModelWithSizes(sizes);
  std::vector<double> p = {0.5, 0.5};
  SelectionPlan plan = MakePlan(p, sizes, 40);
  try {
    Resample(plan, model, 1);
    FAIL() << "infeasible plan accepted";
  } catch (const InfeasiblePlanError& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInfeasible);
    EXPECT_NE(std::string(e.what()).find(kNeedMoreSamples), std::string::npos);
    EXPECT_EQ(e.deficits(), (std::vector<uint64_t>{15, 0}));
  }
}

TEST(ResampleTest, WithReplacementFillsSmallClusters) {
  std::vector<uint64_t> sizes = {5, 100, 0};
  ClusterModel model = ModelWithSizes(sizes);
  std::vector<double> p = {0.5, 0.5, 0.0};
  SelectionPlan plan = MakePlan(p, sizes, 40);
  SelectionResult r = Resample(plan, model, 1, true);
  EXPECT_TRUE(r.replacement_used);
  EXPECT_EQ(r.selected[0].size(), 20u);
  EXPECT_EQ(r.actual_size, 40u);
  std::vector<double> q = {0.5, 0.0, 0.5};
  SelectionPlan empty_cluster = MakePlan(q, sizes, 40);
  EXPECT_THROW(Resample(empty_cluster, model, 1, true), InfeasiblePlanError);
}

TEST(ResampleTest, ZeroSigmaDensitiesReproduceRealProportions) {
  // With exact votes the selected cluster shares are ceil(T h_i / N) / size.
  std::vector<uint64_t> votes = {13, 0, 7, 30};
  const double n = 50;
  std::vector<double> p;
  for (auto v : votes) p.push_back(v / n);
  std::vector<uint64_t> sizes = {100, 100, 100, 100};
  ClusterModel model = ModelWithSizes(sizes);
  SelectionPlan plan = MakePlan(p, sizes, 50);
  SelectionResult r = Resample(plan, model, 2);
  for (size_t j = 0; j < votes.size(); ++j) {
    EXPECT_EQ(r.selected[j].size(), votes[j]);
  }
}

TEST(RequiredPoolTest, MaxOfQuotaOverFraction) {
  std::vector<double> p = {0.5, 0.3, 0.2, -0.1};
  std::vector<double> q = {0.25, 0.25, 0.25, 0.25};
  PoolSizeEstimate e = RequiredInitialPool(p, q, 100);
  EXPECT_DOUBLE_EQ(e.estimate, 50 / 0.25);
  EXPECT_TRUE(e.unsatisfiable.empty());
  std::vector<double> q2 = {0.5, 0.5, 0.0, 0.0};
  PoolSizeEstimate e2 = RequiredInitialPool(p, q2, 100);
  EXPECT_TRUE(std::isinf(e2.estimate));
  EXPECT_EQ(e2.unsatisfiable, (std::vector<size_t>{2}));
}

TEST(RequiredPoolTest, ChecksGivenSizes) {
  std::vector<double> p = {0.5, 0.5};
  std::vector<double> q = {0.9, 0.1};
  std::vector<uint64_t> sizes = {90, 10};
  PoolSizeEstimate e = RequiredInitialPool(p, q, 40, sizes);
  EXPECT_FALSE(e.feasible_with_given_sizes);
  EXPECT_EQ(e.deficits, (std::vector<uint64_t>{0, 10}));
  EXPECT_DOUBLE_EQ(e.estimate, 200.0);
  std::vector<double> bad = {0.5, 0.6};
  EXPECT_THROW(RequiredInitialPool(p, bad, 40), Error);
}

TEST(SelectedCorpusTest, RepeatsGetSuffixes) {
  Corpus syn;
  syn.records = {{"a", "x", {}}, {"b", "y", {}}};
  SelectionResult r;
  r.selected = {{0, 1, 0, 0}};
  Corpus sel = SelectedCorpus(syn, r);
  std::vector<std::string> ids;
  for (const auto& rec : sel.records) ids.push_back(rec.id);
  EXPECT_EQ(ids, (std::vector<std::string>{"a", "b", "a~r2", "a~r3"}));
  EXPECT_EQ(sel.role, CorpusRole::kSelected);
  r.selected = {{5}};
  EXPECT_THROW(SelectedCorpus(syn, r), Error);
}

TEST(SelectionReportTest, ContainsPlanAndResult) {
  std::vector<uint64_t> sizes = {10, 10};
  ClusterModel model = ModelWithSizes(sizes);
  std::vector<double> p = {0.5, 0.5};
  SelectionPlan plan = MakePlan(p, sizes, 10);
  SelectionResult r = Resample(plan, model, 1);
  std::string s = SerializeSelectionReport(plan, &r);
  EXPECT_NE(s.find("\"actual_size\""), std::string::npos);
  EXPECT_NE(s.find("\"deficits\""), std::string::npos);
  std::string plan_only = SerializeSelectionReport(plan, nullptr);
  EXPECT_EQ(plan_only.find("\"actual_size\""), std::string::npos);
}

}  // namespace
}  // namespace dpsynth
