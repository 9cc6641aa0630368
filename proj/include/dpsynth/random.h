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

#ifndef DPSYNTH_RANDOM_H_
#define DPSYNTH_RANDOM_H_

#include <cstdint>
#include <span>
#include <utility>

namespace dpsynth {

// Counter-based generator: the n-th output is a pure function of
// (key, n), so streams are reproducible across platforms and can be split
// per cluster / per sequence without sharing state. The mixing function is
// the SplitMix64 finalizer. Distributions are implemented here rather than
// taken from <random>, whose distributions are implementation-defined.
class Rng {
 public:
  explicit Rng(uint64_t seed, uint64_t stream = 0);

  uint64_t NextU64();
  // Uniform on [0, 1) with 53 random bits.
  double Uniform();
  // Uniform on (0, 1).
  double UniformOpen();
  // Standard normal via Box-Muller. The second variate of each pair is
  // cached and returned by the next call.
  double Normal();
  // Uniform on [0, n); n must be positive.
  uint64_t UniformIndex(uint64_t n);

  uint64_t counter() const { return counter_; }

  // Seed for an independent child stream, e.g. one per pipeline stage.
  static uint64_t DeriveSeed(uint64_t seed, uint64_t stream);

 private:
  uint64_t key_;
  uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

uint64_t Mix64(uint64_t x);

// In-place Fisher-Yates shuffle.
template <typename T>
void Shuffle(std::span<T> values, Rng& rng) {
  for (size_t i = values.size(); i > 1; --i) {
    size_t j = static_cast<size_t>(rng.UniformIndex(i));
    std::swap(values[i - 1], values[j]);
  }
}

}  // namespace dpsynth

#endif  // DPSYNTH_RANDOM_H_
