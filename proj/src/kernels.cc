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

#include "dpsynth/kernels.h"

#include <algorithm>

namespace dpsynth::kernels {

namespace serial {

void AssignNearest(std::span<const float> points,
                   std::span<const float> centroids, size_t dim,
                   std::span<uint32_t> labels, std::span<double> distances) {
  const size_t n = labels.size();
  const size_t k = centroids.size() / dim;
  for (size_t i = 0; i < n; ++i) {
    double d = 0.0;
    labels[i] = NearestCentroid(points.data() + i * dim, centroids.data(), k,
                                dim, &d);
    if (!distances.empty()) distances[i] = d;
  }
}

void AccumulateCentroids(std::span<const float> points,
                         std::span<const uint32_t> labels, size_t /*k*/,
                         size_t dim, std::span<double> sums,
                         std::span<uint64_t> counts) {
  std::fill(sums.begin(), sums.end(), 0.0);
  std::fill(counts.begin(), counts.end(), 0);
  for (size_t i = 0; i < labels.size(); ++i) {
    uint32_t c = labels[i];
    ++counts[c];
    const float* x = points.data() + i * dim;
    double* s = sums.data() + static_cast<size_t>(c) * dim;
    for (size_t d = 0; d < dim; ++d) s[d] += x[d];
  }
}

std::vector<uint64_t> CountVotes(std::span<const uint32_t> labels, size_t k) {
  std::vector<uint64_t> votes(k, 0);
  for (uint32_t l : labels) ++votes[l];
  return votes;
}

void UpdateMinDistances(std::span<const float> points,
                        std::span<const float> centroid, size_t dim,
                        std::span<double> min_dist) {
  for (size_t i = 0; i < min_dist.size(); ++i) {
    double d = SquaredDistance(points.data() + i * dim, centroid.data(), dim);
    if (d < min_dist[i]) min_dist[i] = d;
  }
}

}  // namespace serial

namespace omp {

void AssignNearest(std::span<const float> points,
                   std::span<const float> centroids, size_t dim,
                   std::span<uint32_t> labels, std::span<double> distances) {
  const auto n = static_cast<int64_t>(labels.size());
  const size_t k = centroids.size() / dim;
  const bool want_dist = !distances.empty();
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) {
    double d = 0.0;
    labels[i] = NearestCentroid(points.data() + i * dim, centroids.data(), k,
                                dim, &d);
    if (want_dist) distances[i] = d;
  }
}

void AccumulateCentroids(std::span<const float> points,
                         std::span<const uint32_t> labels, size_t k,
                         size_t dim, std::span<double> sums,
                         std::span<uint64_t> counts) {
  // Counting sort by label keeps each cluster's members in ascending point
  // order, so per-cluster sums match the serial loop bit for bit.
  std::vector<uint64_t> offsets(k + 1, 0);
  for (uint32_t l : labels) ++offsets[l + 1];
  for (size_t c = 0; c < k; ++c) offsets[c + 1] += offsets[c];
  std::vector<uint32_t> members(labels.size());
  {
    std::vector<uint64_t> cursor(offsets.begin(), offsets.end() - 1);
    for (size_t i = 0; i < labels.size(); ++i) {
      members[cursor[labels[i]]++] = static_cast<uint32_t>(i);
    }
  }
  const auto kk = static_cast<int64_t>(k);
#pragma omp parallel for schedule(dynamic, 16)
  for (int64_t c = 0; c < kk; ++c) {
    double* s = sums.data() + c * dim;
    std::fill(s, s + dim, 0.0);
    for (uint64_t m = offsets[c]; m < offsets[c + 1]; ++m) {
      const float* x = points.data() + static_cast<size_t>(members[m]) * dim;
      for (size_t d = 0; d < dim; ++d) s[d] += x[d];
    }
    counts[c] = offsets[c + 1] - offsets[c];
  }
}

std::vector<uint64_t> CountVotes(std::span<const uint32_t> labels, size_t k) {
  std::vector<uint64_t> votes(k, 0);
  const auto n = static_cast<int64_t>(labels.size());
#pragma omp parallel
  {
    std::vector<uint64_t> local(k, 0);
#pragma omp for schedule(static) nowait
    for (int64_t i = 0; i < n; ++i) ++local[labels[i]];
#pragma omp critical
    for (size_t c = 0; c < k; ++c) votes[c] += local[c];
  }
  return votes;
}

void UpdateMinDistances(std::span<const float> points,
                        std::span<const float> centroid, size_t dim,
                        std::span<double> min_dist) {
  const auto n = static_cast<int64_t>(min_dist.size());
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) {
    double d = SquaredDistance(points.data() + i * dim, centroid.data(), dim);
    if (d < min_dist[i]) min_dist[i] = d;
  }
}

}  // namespace omp

double OrderedSum(std::span<const double> values) {
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum;
}

}  // namespace dpsynth::kernels
