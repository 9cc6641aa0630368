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

#include "dpsynth/clustering.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "byte_io.h"
#include "dpsynth/error.h"
#include "dpsynth/kernels.h"
#include "dpsynth/random.h"

namespace dpsynth {
namespace {

constexpr std::string_view kMagic{"DPCM1\0", 6};
constexpr uint32_t kVersion = 1;

void NormalizeRows(std::span<float> data, size_t dim) {
  for (size_t off = 0; off < data.size(); off += dim) {
    double norm = 0.0;
    for (size_t d = 0; d < dim; ++d) norm += double(data[off + d]) * data[off + d];
    norm = std::sqrt(norm);
    if (norm == 0.0) continue;
    for (size_t d = 0; d < dim; ++d) {
      data[off + d] = static_cast<float>(data[off + d] / norm);
    }
  }
}

struct Kernels {
  bool parallel;
  void Assign(std::span<const float> pts, std::span<const float> cents,
              size_t dim, std::span<uint32_t> labels,
              std::span<double> dist) const {
    if (parallel) {
      kernels::omp::AssignNearest(pts, cents, dim, labels, dist);
    } else {
      kernels::serial::AssignNearest(pts, cents, dim, labels, dist);
    }
  }
  void Accumulate(std::span<const float> pts, std::span<const uint32_t> labels,
                  size_t k, size_t dim, std::span<double> sums,
                  std::span<uint64_t> counts) const {
    if (parallel) {
      kernels::omp::AccumulateCentroids(pts, labels, k, dim, sums, counts);
    } else {
      kernels::serial::AccumulateCentroids(pts, labels, k, dim, sums, counts);
    }
  }
  void MinDist(std::span<const float> pts, std::span<const float> c,
               size_t dim, std::span<double> min_dist) const {
    if (parallel) {
      kernels::omp::UpdateMinDistances(pts, c, dim, min_dist);
    } else {
      kernels::serial::UpdateMinDistances(pts, c, dim, min_dist);
    }
  }
};

std::vector<float> SeedPlusPlus(std::span<const float> points, size_t n,
                                size_t dim, size_t k, Rng& rng,
                                const Kernels& kern) {
  std::vector<float> centroids;
  centroids.reserve(k * dim);
  auto add = [&](size_t i) {
    centroids.insert(centroids.end(), points.begin() + i * dim,
                     points.begin() + (i + 1) * dim);
  };
  add(rng.UniformIndex(n));
  std::vector<double> min_dist(n, std::numeric_limits<double>::infinity());
  for (size_t c = 1; c < k; ++c) {
    kern.MinDist(points, {centroids.data() + (c - 1) * dim, dim}, dim,
                 min_dist);
    double total = kernels::OrderedSum(min_dist);
    size_t pick = n - 1;
    if (total > 0.0) {
      double target = rng.Uniform() * total;
      double cumulative = 0.0;
      for (size_t i = 0; i < n; ++i) {
        if (min_dist[i] <= 0.0) continue;
        cumulative += min_dist[i];
        pick = i;
        if (cumulative > target) break;
      }
    } else {
      pick = rng.UniformIndex(n);
    }
    add(pick);
  }
  return centroids;
}

}  // namespace

ClusterModel KMeansFit(const EmbeddingMatrix& embeddings,
                       const KMeansOptions& options) {
  const size_t n = embeddings.count();
  const size_t dim = embeddings.dim();
  const size_t k = options.k;
  if (k == 0) throw Error(ErrorCode::kInvalidArgument, "k-means needs K >= 1");
  if (k > n) {
    throw Error(ErrorCode::kInvalidArgument,
                "K = " + std::to_string(k) + " exceeds point count " +
                    std::to_string(n));
  }
  if (options.max_iters == 0) {
    throw Error(ErrorCode::kInvalidArgument, "max_iters must be >= 1");
  }
  if (!embeddings.AllFinite()) {
    throw Error(ErrorCode::kInvalidArgument, "embeddings contain NaN or Inf");
  }

  std::vector<float> normalized;
  std::span<const float> points = embeddings.data();
  if (options.normalize) {
    normalized.assign(points.begin(), points.end());
    NormalizeRows(normalized, dim);
    points = normalized;
  }

  Kernels kern{options.parallel};
  Rng rng(options.seed, /*stream=*/0x6b6d);

  ClusterModel model;
  model.k = k;
  model.dim = dim;
  model.seed = options.seed;
  model.normalized = options.normalize;
  model.centroids = SeedPlusPlus(points, n, dim, k, rng, kern);
  model.assignments.assign(n, 0);

  std::vector<double> dist(n);
  kern.Assign(points, model.centroids, dim, model.assignments, dist);
  double inertia = kernels::OrderedSum(dist);
  model.inertia_trace.push_back(inertia);

  std::vector<double> sums(k * dim);
  std::vector<uint64_t> counts(k);
  for (size_t iter = 0; iter < options.max_iters; ++iter) {
    kern.Accumulate(points, model.assignments, k, dim, sums, counts);
    std::vector<size_t> empty;
    for (size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) {
        empty.push_back(c);
        continue;
      }
      for (size_t d = 0; d < dim; ++d) {
        model.centroids[c * dim + d] =
            static_cast<float>(sums[c * dim + d] / static_cast<double>(counts[c]));
      }
    }
    if (!empty.empty()) {
      // Distances to the updated centroids of each point's own cluster.
      std::vector<double> own(n);
      for (size_t i = 0; i < n; ++i) {
        own[i] = kernels::SquaredDistance(
            points.data() + i * dim,
            model.centroids.data() + size_t(model.assignments[i]) * dim, dim);
      }
      for (size_t c : empty) {
        size_t far = static_cast<size_t>(
            std::max_element(own.begin(), own.end()) - own.begin());
        std::copy(points.begin() + far * dim, points.begin() + (far + 1) * dim,
                  model.centroids.begin() + c * dim);
        own[far] = -1.0;
      }
    }
    kern.Assign(points, model.centroids, dim, model.assignments, dist);
    double next = kernels::OrderedSum(dist);
    model.inertia_trace.push_back(next);
    double improvement = inertia > 0.0 ? (inertia - next) / inertia : 0.0;
    inertia = next;
    if (improvement < options.rel_tol) break;
  }
  model.inertia = inertia;
  return model;
}

uint32_t AssignNearest(const ClusterModel& model,
                       std::span<const float> embedding) {
  if (embedding.size() != model.dim) {
    throw Error(ErrorCode::kDimMismatch,
                "query dim " + std::to_string(embedding.size()) +
                    ", model dim " + std::to_string(model.dim));
  }
  std::vector<float> query(embedding.begin(), embedding.end());
  if (model.normalized) NormalizeRows(query, model.dim);
  return kernels::NearestCentroid(query.data(), model.centroids.data(),
                                  model.k, model.dim, nullptr);
}

std::vector<uint32_t> AssignNearestBatch(const ClusterModel& model,
                                         const EmbeddingMatrix& embeddings,
                                         bool parallel) {
  if (embeddings.dim() != model.dim) {
    throw Error(ErrorCode::kDimMismatch,
                "embedding dim " + std::to_string(embeddings.dim()) +
                    ", model dim " + std::to_string(model.dim));
  }
  std::vector<float> normalized;
  std::span<const float> points = embeddings.data();
  if (model.normalized) {
    normalized.assign(points.begin(), points.end());
    NormalizeRows(normalized, model.dim);
    points = normalized;
  }
  std::vector<uint32_t> labels(embeddings.count());
  Kernels{parallel}.Assign(points, model.centroids, model.dim, labels, {});
  return labels;
}

std::vector<uint64_t> GroupSizes(const ClusterModel& model) {
  return kernels::serial::CountVotes(model.assignments, model.k);
}

std::vector<std::vector<uint32_t>> Groups(const ClusterModel& model) {
  std::vector<std::vector<uint32_t>> groups(model.k);
  for (size_t i = 0; i < model.assignments.size(); ++i) {
    groups[model.assignments[i]].push_back(static_cast<uint32_t>(i));
  }
  return groups;
}

std::vector<uint8_t> EncodeClusterModel(const ClusterModel& model) {
  internal::ByteWriter w;
  w.Bytes(kMagic);
  w.U32(kVersion);
  w.U32(static_cast<uint32_t>(model.k));
  w.U32(static_cast<uint32_t>(model.dim));
  w.U64(model.seed);
  w.U8(model.normalized ? 1 : 0);
  w.U32(static_cast<uint32_t>(model.assignments.size()));
  for (float v : model.centroids) w.F32(v);
  for (uint32_t a : model.assignments) w.U32(a);
  w.F64(model.inertia);
  return std::move(w.bytes());
}

ClusterModel DecodeClusterModel(std::span<const uint8_t> bytes) {
  internal::ByteReader r(bytes, "cluster model");
  r.ExpectMagic(kMagic);
  if (r.U32() != kVersion) {
    throw Error(ErrorCode::kFormat, "unsupported cluster model version");
  }
  ClusterModel model;
  model.k = r.U32();
  model.dim = r.U32();
  model.seed = r.U64();
  model.normalized = r.U8() != 0;
  uint32_t count = r.U32();
  if (r.remaining() < (model.k * model.dim + count) * 4ull + 8) {
    throw Error(ErrorCode::kTruncated, "cluster model is truncated");
  }
  model.centroids.resize(model.k * model.dim);
  for (float& v : model.centroids) v = r.F32();
  model.assignments.resize(count);
  for (uint32_t& a : model.assignments) {
    a = r.U32();
    if (a >= model.k) {
      throw Error(ErrorCode::kFormat, "assignment out of range in cluster model");
    }
  }
  model.inertia = r.F64();
  r.ExpectEnd();
  return model;
}

void WriteClusterModel(const ClusterModel& model, const std::string& path) {
  internal::WriteFileBytes(path, EncodeClusterModel(model));
}

ClusterModel ReadClusterModel(const std::string& path) {
  return DecodeClusterModel(internal::ReadFileBytes(path));
}

}  // namespace dpsynth
