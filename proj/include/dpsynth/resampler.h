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

#ifndef DPSYNTH_RESAMPLER_H_
#define DPSYNTH_RESAMPLER_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dpsynth/clustering.h"
#include "dpsynth/corpus.h"
#include "dpsynth/error.h"

namespace dpsynth {

inline constexpr char kNeedMoreSamples[] = "Need more initial samples.";

// max(ceil(x), 0), treating x within floating rounding (1e-12 relative) of
// an integer as that integer so that e.g. 5000 * (3 / 5000.0) gives 3.
int64_t ClampedCeil(double x);

struct SelectionPlan {
  uint64_t target = 0;                // T
  std::vector<int64_t> per_cluster;   // n_i = max(ceil(T * p_i), 0)
  std::vector<uint64_t> group_sizes;  // |G_i|
  std::vector<uint64_t> deficits;     // max(n_i - |G_i|, 0)
  bool feasible = true;
  uint64_t total_selected = 0;        // sum n_i; not trimmed to T
};

SelectionPlan MakePlan(std::span<const double> densities,
                       std::span<const uint64_t> group_sizes, uint64_t target);

struct SelectionResult {
  // Synthetic point indices chosen from each cluster.
  std::vector<std::vector<uint32_t>> selected;
  bool replacement_used = false;
  uint64_t actual_size = 0;

  std::vector<uint32_t> Flatten() const;
};

class InfeasiblePlanError : public Error {
 public:
  explicit InfeasiblePlanError(std::vector<uint64_t> deficits);
  const std::vector<uint64_t>& deficits() const { return deficits_; }

 private:
  std::vector<uint64_t> deficits_;
};

// Uniform per-cluster sampling. Cluster i draws from its own stream
// derived from (seed, i). Without replacement an infeasible plan throws
// InfeasiblePlanError; with replacement only clusters that are empty but
// have a positive quota are infeasible.
SelectionResult Resample(const SelectionPlan& plan, const ClusterModel& model,
                         uint64_t seed, bool with_replacement = false);

struct PoolSizeEstimate {
  // max over clusters with n_i > 0 of n_i / q_i; +inf if some such
  // cluster has q_i = 0.
  double estimate = 0.0;
  std::vector<size_t> unsatisfiable;
  // Exact check against `group_sizes` when those were supplied.
  bool feasible_with_given_sizes = true;
  std::vector<uint64_t> deficits;
};

// q are the empirical cluster fractions of the synthetic pool (sum 1).
PoolSizeEstimate RequiredInitialPool(std::span<const double> densities,
                                     std::span<const double> fractions,
                                     uint64_t target,
                                     std::span<const uint64_t> group_sizes = {});

// Records of `synthetic` picked by `result`, role kSelected. Repeated picks
// (sampling with replacement) get an "~r<k>" id suffix to stay unique.
Corpus SelectedCorpus(const Corpus& synthetic, const SelectionResult& result);

std::string SerializeSelectionReport(const SelectionPlan& plan,
                                     const SelectionResult* result);

}  // namespace dpsynth

#endif  // DPSYNTH_RESAMPLER_H_
