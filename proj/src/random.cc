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

#include <cmath>
#include <numbers>

namespace dpsynth {
namespace {

constexpr uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

}  // namespace

uint64_t Mix64(uint64_t x) {
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ULL;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBULL;
  x ^= x >> 31;
  return x;
}

Rng::Rng(uint64_t seed, uint64_t stream)
    : key_(Mix64(seed ^ Mix64(stream * kGolden + 0x632BE59BD9B4E019ULL))) {}

uint64_t Rng::DeriveSeed(uint64_t seed, uint64_t stream) {
  return Mix64(Mix64(seed + kGolden) ^ (stream * 0xD1B54A32D192ED03ULL));
}

uint64_t Rng::NextU64() {
  ++counter_;
  return Mix64(key_ + counter_ * kGolden);
}

double Rng::Uniform() {
  return static_cast<double>(NextU64() >> 11) * 0x1.0p-53;
}

double Rng::UniformOpen() {
  return (static_cast<double>(NextU64() >> 12) + 0.5) * 0x1.0p-52;
}

double Rng::Normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = UniformOpen();
  double u2 = Uniform();
  double radius = std::sqrt(-2.0 * std::log(u1));
  double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

uint64_t Rng::UniformIndex(uint64_t n) {
  // Lemire's multiply-shift with rejection of the biased low region.
  __uint128_t product = static_cast<__uint128_t>(NextU64()) * n;
  auto low = static_cast<uint64_t>(product);
  if (low < n) {
    uint64_t threshold = -n % n;
    while (low < threshold) {
      product = static_cast<__uint128_t>(NextU64()) * n;
      low = static_cast<uint64_t>(product);
    }
  }
  return static_cast<uint64_t>(product >> 64);
}

}  // namespace dpsynth
