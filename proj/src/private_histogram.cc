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

#include "dpsynth/private_histogram.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "dpsynth/error.h"
#include "dpsynth/kernels.h"
#include "dpsynth/random.h"
#include "json.hpp"

namespace dpsynth {
namespace {

constexpr uint64_t kNoiseStream = 0x6869'7374;  // "hist"

std::string Decimal17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

template <typename T, typename F>
std::string JsonArray(const std::vector<T>& values, F format) {
  std::string out = "[";
  for (size_t i = 0; i < values.size(); ++i) {
    if (i) out += ", ";
    out += format(values[i]);
  }
  return out + "]";
}

}  // namespace

std::vector<uint64_t> BuildHistogram(const ClusterModel& model,
                                     const EmbeddingMatrix& real_embeddings,
                                     bool parallel) {
  std::vector<uint32_t> labels =
      AssignNearestBatch(model, real_embeddings, parallel);
  return parallel ? kernels::omp::CountVotes(labels, model.k)
                  : kernels::serial::CountVotes(labels, model.k);
}

PrivateHistogram Privatize(std::span<const uint64_t> raw, double sigma,
                           uint64_t seed) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
    throw Error(ErrorCode::kInvalidArgument, "sigma must be finite and >= 0");
  }
  PrivateHistogram h;
  h.k = raw.size();
  h.raw_counts.assign(raw.begin(), raw.end());
  h.sigma = sigma;
  h.seed = seed;
  for (uint64_t c : raw) h.n_real += c;
  Rng rng(seed, kNoiseStream);
  h.noised_counts.resize(h.k);
  h.densities.resize(h.k);
  for (size_t i = 0; i < h.k; ++i) {
    double z = rng.Normal();
    h.noised_counts[i] = static_cast<double>(raw[i]) + sigma * z;
    h.densities[i] =
        h.n_real > 0 ? h.noised_counts[i] / static_cast<double>(h.n_real) : 0.0;
  }
  return h;
}

namespace {

std::string Serialize(const PrivateHistogram& h, bool with_raw) {
  std::ostringstream out;
  out << "{\n";
  out << "  \"k\": " << h.k << ",\n";
  out << "  \"sigma\": " << Decimal17(h.sigma) << ",\n";
  out << "  \"seed\": " << h.seed << ",\n";
  out << "  \"n_real\": " << h.n_real << ",\n";
  if (with_raw) {
    out << "  \"raw\": "
        << JsonArray(h.raw_counts, [](uint64_t v) { return std::to_string(v); })
        << ",\n";
  }
  out << "  \"noised\": " << JsonArray(h.noised_counts, Decimal17) << ",\n";
  out << "  \"densities\": " << JsonArray(h.densities, Decimal17) << "\n";
  out << "}\n";
  return out.str();
}

}  // namespace

std::string SerializeHistogramReport(const PrivateHistogram& h) {
  return Serialize(h, true);
}

std::string SerializeHistogramRelease(const PrivateHistogram& h) {
  return Serialize(h, false);
}

PrivateHistogram ParseHistogramReport(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
    PrivateHistogram h;
    h.k = j.at("k").get<size_t>();
    h.sigma = j.at("sigma").get<double>();
    h.seed = j.at("seed").get<uint64_t>();
    h.n_real = j.at("n_real").get<uint64_t>();
    if (j.contains("raw")) {
      h.raw_counts = j.at("raw").get<std::vector<uint64_t>>();
      if (h.raw_counts.size() != h.k) {
        throw Error(ErrorCode::kFormat, "histogram report vectors disagree with k");
      }
    }
    h.noised_counts = j.at("noised").get<std::vector<double>>();
    h.densities = j.at("densities").get<std::vector<double>>();
    if (h.noised_counts.size() != h.k ||
        h.densities.size() != h.k) {
      throw Error(ErrorCode::kFormat, "histogram report vectors disagree with k");
    }
    return h;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormat, std::string("histogram report: ") + e.what());
  }
}

void WriteHistogramReport(const PrivateHistogram& histogram,
                          const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  out << SerializeHistogramReport(histogram);
}

PrivateHistogram ReadHistogramReport(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return ParseHistogramReport(buffer.str());
}

}  // namespace dpsynth
