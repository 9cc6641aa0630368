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

#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "dpsynth/random.h"
#include "json.hpp"

namespace dpsynth {

int64_t ClampedCeil(double x) {
  double nearest = std::round(x);
  if (std::abs(x - nearest) <= 1e-12 * std::max(1.0, std::abs(x))) x = nearest;
  double c = std::ceil(x);
  return c > 0.0 ? static_cast<int64_t>(c) : 0;
}

SelectionPlan MakePlan(std::span<const double> densities,
                       std::span<const uint64_t> group_sizes, uint64_t target) {
  if (densities.size() != group_sizes.size()) {
    throw Error(ErrorCode::kDimMismatch,
                "densities and group sizes have different lengths");
  }
  SelectionPlan plan;
  plan.target = target;
  plan.group_sizes.assign(group_sizes.begin(), group_sizes.end());
  plan.per_cluster.resize(densities.size());
  plan.deficits.resize(densities.size());
  for (size_t i = 0; i < densities.size(); ++i) {
    int64_t n = ClampedCeil(static_cast<double>(target) * densities[i]);
    plan.per_cluster[i] = n;
    plan.total_selected += static_cast<uint64_t>(n);
    uint64_t need = static_cast<uint64_t>(n);
    plan.deficits[i] = need > group_sizes[i] ? need - group_sizes[i] : 0;
    if (plan.deficits[i] > 0) plan.feasible = false;
  }
  return plan;
}

std::vector<uint32_t> SelectionResult::Flatten() const {
  std::vector<uint32_t> out;
  out.reserve(actual_size);
  for (const auto& g : selected) out.insert(out.end(), g.begin(), g.end());
  return out;
}

InfeasiblePlanError::InfeasiblePlanError(std::vector<uint64_t> deficits)
    : Error(ErrorCode::kInfeasible,
            [&] {
              std::string msg = kNeedMoreSamples;
              uint64_t total = 0;
              size_t clusters = 0;
              for (uint64_t d : deficits) {
                total += d;
                clusters += d > 0;
              }
              msg += " Deficit of " + std::to_string(total) + " samples over " +
                     std::to_string(clusters) + " clusters.";
              return msg;
            }()),
      deficits_(std::move(deficits)) {}

SelectionResult Resample(const SelectionPlan& plan, const ClusterModel& model,
                         uint64_t seed, bool with_replacement) {
  std::vector<std::vector<uint32_t>> groups = Groups(model);
  if (groups.size() != plan.per_cluster.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "plan has " + std::to_string(plan.per_cluster.size()) +
                    " clusters, model has " + std::to_string(groups.size()));
  }
  for (size_t i = 0; i < groups.size(); ++i) {
    if (groups[i].size() != plan.group_sizes[i]) {
      throw Error(ErrorCode::kInvalidArgument,
                  "plan was computed against a different cluster model");
    }
  }
  if (!with_replacement && !plan.feasible) throw InfeasiblePlanError(plan.deficits);
  if (with_replacement) {
    std::vector<uint64_t> deficits(groups.size(), 0);
    bool bad = false;
    for (size_t i = 0; i < groups.size(); ++i) {
      if (groups[i].empty() && plan.per_cluster[i] > 0) {
        deficits[i] = static_cast<uint64_t>(plan.per_cluster[i]);
        bad = true;
      }
    }
    if (bad) throw InfeasiblePlanError(std::move(deficits));
  }

  SelectionResult result;
  result.replacement_used = with_replacement;
  result.selected.resize(groups.size());
  for (size_t i = 0; i < groups.size(); ++i) {
    const auto n = static_cast<size_t>(plan.per_cluster[i]);
    if (n == 0) continue;
    Rng rng(seed, i + 1);
    std::vector<uint32_t>& members = groups[i];
    std::vector<uint32_t>& out = result.selected[i];
    out.reserve(n);
    if (with_replacement) {
      for (size_t j = 0; j < n; ++j) {
        out.push_back(members[rng.UniformIndex(members.size())]);
      }
    } else {
      // Partial Fisher-Yates: the first n slots end up a uniform n-subset.
      for (size_t j = 0; j < n; ++j) {
        size_t pick = j + rng.UniformIndex(members.size() - j);
        std::swap(members[j], members[pick]);
        out.push_back(members[j]);
      }
    }
    result.actual_size += n;
  }
  return result;
}

PoolSizeEstimate RequiredInitialPool(std::span<const double> densities,
                                     std::span<const double> fractions,
                                     uint64_t target,
                                     std::span<const uint64_t> group_sizes) {
  if (densities.size() != fractions.size()) {
    throw Error(ErrorCode::kDimMismatch,
                "densities and fractions have different lengths");
  }
  double total = 0.0;
  for (double q : fractions) {
    if (!(q >= 0.0)) {
      throw Error(ErrorCode::kInvalidArgument, "fractions must be >= 0");
    }
    total += q;
  }
  if (!fractions.empty() && std::abs(total - 1.0) > 1e-9) {
    throw Error(ErrorCode::kInvalidArgument, "fractions must sum to 1");
  }
  PoolSizeEstimate est;
  for (size_t i = 0; i < densities.size(); ++i) {
    int64_t n = ClampedCeil(static_cast<double>(target) * densities[i]);
    if (n == 0) continue;
    if (fractions[i] == 0.0) {
      est.unsatisfiable.push_back(i);
      est.estimate = std::numeric_limits<double>::infinity();
      continue;
    }
    est.estimate = std::max(est.estimate, static_cast<double>(n) / fractions[i]);
  }
  if (!group_sizes.empty()) {
    SelectionPlan plan = MakePlan(densities, group_sizes, target);
    est.feasible_with_given_sizes = plan.feasible;
    est.deficits = plan.deficits;
  }
  return est;
}

Corpus SelectedCorpus(const Corpus& synthetic, const SelectionResult& result) {
  Corpus out;
  out.role = CorpusRole::kSelected;
  std::map<uint32_t, int> picks;
  for (uint32_t idx : result.Flatten()) {
    if (idx >= synthetic.size()) {
      throw Error(ErrorCode::kAlignment,
                  "selection index beyond synthetic corpus size");
    }
    InstructionRecord record = synthetic.records[idx];
    int k = ++picks[idx];
    if (k > 1) record.id += "~r" + std::to_string(k);
    out.records.push_back(std::move(record));
  }
  return out;
}

std::string SerializeSelectionReport(const SelectionPlan& plan,
                                     const SelectionResult* result) {
  nlohmann::json j;
  j["target"] = plan.target;
  j["per_cluster"] = plan.per_cluster;
  j["group_sizes"] = plan.group_sizes;
  j["deficits"] = plan.deficits;
  j["feasible"] = plan.feasible;
  j["total_selected"] = plan.total_selected;
  if (result != nullptr) {
    j["actual_size"] = result->actual_size;
    j["replacement_used"] = result->replacement_used;
  }
  return j.dump(2) + "\n";
}

}  // namespace dpsynth
