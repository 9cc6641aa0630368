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

#ifndef DPSYNTH_PRIVATE_HISTOGRAM_H_
#define DPSYNTH_PRIVATE_HISTOGRAM_H_

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dpsynth/clustering.h"
#include "dpsynth/embedding_store.h"

namespace dpsynth {

struct PrivateHistogram {
  size_t k = 0;
  std::vector<uint64_t> raw_counts;
  // raw + N(0, sigma^2) per bin; never rounded or clipped here.
  std::vector<double> noised_counts;
  double sigma = 0.0;
  // noised_counts / n_real (all zero when n_real is 0).
  std::vector<double> densities;
  uint64_t n_real = 0;
  uint64_t seed = 0;

  bool operator==(const PrivateHistogram&) const = default;
};

// Nearest-centroid votes of the real embeddings. Only the centroids of
// `model` are read, so the synthetic points never reach this function.
std::vector<uint64_t> BuildHistogram(const ClusterModel& model,
                                     const EmbeddingMatrix& real_embeddings,
                                     bool parallel = true);

// Adds i.i.d. Gaussian noise, one draw per bin in bin order. Throws
// kInvalidArgument for negative or non-finite sigma.
PrivateHistogram Privatize(std::span<const uint64_t> raw, double sigma,
                           uint64_t seed);

// JSON report; noised counts and densities carry 17 significant digits so
// the report round-trips exactly.
std::string SerializeHistogramReport(const PrivateHistogram& histogram);
// The same without raw votes: the part that may leave the private side.
std::string SerializeHistogramRelease(const PrivateHistogram& histogram);
// Accepts both forms; raw_counts stays empty for a release.
PrivateHistogram ParseHistogramReport(std::string_view text);
void WriteHistogramReport(const PrivateHistogram& histogram,
                          const std::string& path);
PrivateHistogram ReadHistogramReport(const std::string& path);

}  // namespace dpsynth

#endif  // DPSYNTH_PRIVATE_HISTOGRAM_H_
