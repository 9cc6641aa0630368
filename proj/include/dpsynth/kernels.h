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

#ifndef DPSYNTH_KERNELS_H_
#define DPSYNTH_KERNELS_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

// Data-parallel inner loops shared by clustering and histogram voting.
// Every kernel has a straightforward serial reference and an OpenMP
// variant; the OpenMP variants are bitwise identical to the references for
// any thread count (per-point work is independent and per-cluster sums are
// accumulated in ascending point order).
namespace dpsynth::kernels {

// Squared Euclidean distance, float inputs with double accumulation.
inline double SquaredDistance(const float* a, const float* b, size_t dim) {
  double sum = 0.0;
  for (size_t i = 0; i < dim; ++i) {
    double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    sum += d * d;
  }
  return sum;
}

// Index of the nearest centroid; ties resolve to the lowest index.
inline uint32_t NearestCentroid(const float* point, const float* centroids,
                                size_t k, size_t dim, double* best_dist) {
  uint32_t best = 0;
  double best_d = SquaredDistance(point, centroids, dim);
  for (size_t j = 1; j < k; ++j) {
    double d = SquaredDistance(point, centroids + j * dim, dim);
    if (d < best_d) {
      best_d = d;
      best = static_cast<uint32_t>(j);
    }
  }
  if (best_dist) *best_dist = best_d;
  return best;
}

namespace serial {

void AssignNearest(std::span<const float> points,
                   std::span<const float> centroids, size_t dim,
                   std::span<uint32_t> labels, std::span<double> distances);

// sums is k*dim, counts is k; both are overwritten.
void AccumulateCentroids(std::span<const float> points,
                         std::span<const uint32_t> labels, size_t k,
                         size_t dim, std::span<double> sums,
                         std::span<uint64_t> counts);

std::vector<uint64_t> CountVotes(std::span<const uint32_t> labels, size_t k);

// min_dist[i] = min(min_dist[i], |x_i - c|^2)
void UpdateMinDistances(std::span<const float> points,
                        std::span<const float> centroid, size_t dim,
                        std::span<double> min_dist);

}  // namespace serial

namespace omp {

void AssignNearest(std::span<const float> points,
                   std::span<const float> centroids, size_t dim,
                   std::span<uint32_t> labels, std::span<double> distances);

void AccumulateCentroids(std::span<const float> points,
                         std::span<const uint32_t> labels, size_t k,
                         size_t dim, std::span<double> sums,
                         std::span<uint64_t> counts);

std::vector<uint64_t> CountVotes(std::span<const uint32_t> labels, size_t k);

void UpdateMinDistances(std::span<const float> points,
                        std::span<const float> centroid, size_t dim,
                        std::span<double> min_dist);

}  // namespace omp

// Sum in index order; used wherever a reduction must not depend on the
// thread count.
double OrderedSum(std::span<const double> values);

}  // namespace dpsynth::kernels

#endif  // DPSYNTH_KERNELS_H_
