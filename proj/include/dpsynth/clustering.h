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

#ifndef DPSYNTH_CLUSTERING_H_
#define DPSYNTH_CLUSTERING_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dpsynth/embedding_store.h"

namespace dpsynth {

struct KMeansOptions {
  size_t k = 0;
  uint64_t seed = 0;
  size_t max_iters = 100;
  // Stop once a Lloyd step improves inertia by less than this fraction.
  double rel_tol = 1e-4;
  // L2-normalize rows (and later queries) before clustering.
  bool normalize = false;
  // Use the OpenMP kernels; results are identical either way.
  bool parallel = true;
};

struct ClusterModel {
  size_t k = 0;
  size_t dim = 0;
  std::vector<float> centroids;        // k x dim, row-major
  std::vector<uint32_t> assignments;   // one per clustered point
  double inertia = 0.0;
  uint64_t seed = 0;
  bool normalized = false;
  // Inertia after every assignment pass, starting with the seeding.
  std::vector<double> inertia_trace;

  std::span<const float> centroid(size_t j) const {
    return {centroids.data() + j * dim, dim};
  }
  bool operator==(const ClusterModel&) const = default;
};

// k-means++ seeding followed by Lloyd iterations. Empty clusters are
// reseeded with the point farthest from its current centroid.
// Throws kInvalidArgument unless 1 <= k <= count and max_iters >= 1.
ClusterModel KMeansFit(const EmbeddingMatrix& embeddings,
                       const KMeansOptions& options);

// argmin_j |e - c_j|_2 with ties to the lowest index; kDimMismatch on a
// wrong-sized query.
uint32_t AssignNearest(const ClusterModel& model,
                       std::span<const float> embedding);
std::vector<uint32_t> AssignNearestBatch(const ClusterModel& model,
                                         const EmbeddingMatrix& embeddings,
                                         bool parallel = true);

// |G_i| for every cluster; sums to the number of clustered points.
std::vector<uint64_t> GroupSizes(const ClusterModel& model);
// Member indices of every cluster, ascending.
std::vector<std::vector<uint32_t>> Groups(const ClusterModel& model);

// "DPCM1\0" | u32 version | u32 k | u32 dim | u64 seed | u8 normalized |
// u32 count | k*dim f32 centroids | count u32 assignments | f64 inertia
std::vector<uint8_t> EncodeClusterModel(const ClusterModel& model);
ClusterModel DecodeClusterModel(std::span<const uint8_t> bytes);
void WriteClusterModel(const ClusterModel& model, const std::string& path);
ClusterModel ReadClusterModel(const std::string& path);

}  // namespace dpsynth

#endif  // DPSYNTH_CLUSTERING_H_
