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

#ifndef DPSYNTH_TESTS_SUPPORT_TESTBED_H_
#define DPSYNTH_TESTS_SUPPORT_TESTBED_H_

#include <cstdint>
#include <vector>

#include "dpsynth/corpus.h"
#include "dpsynth/embedding_store.h"

namespace dpsynth::testing {

// Templated English instructions without digits, ids "real-<i>".
Corpus InstructionCorpus(size_t n, uint64_t seed);

// Instructions whose lengths are either short (< 30 bytes) or long
// (> 80 bytes), half each.
Corpus BimodalLengthCorpus(size_t n, uint64_t seed);

struct Mixture {
  std::vector<double> weights;
  std::vector<std::vector<double>> means;
  std::vector<double> stddevs;
  size_t dim() const { return means.empty() ? 0 : means[0].size(); }
};

// 20 isotropic components in `dim` dimensions with uneven weights.
Mixture RealMixture(uint64_t seed, size_t components = 20, size_t dim = 8);

// The real mixture with reweighted components, shifted means, scaled
// spreads and extra components far from the real data.
Mixture PerturbedMixture(const Mixture& real, uint64_t seed,
                         size_t junk_components = 10);

EmbeddingMatrix SampleMixture(const Mixture& mixture, size_t n, uint64_t seed);

struct MixtureTestbed {
  EmbeddingMatrix real;       // 5,000 points
  EmbeddingMatrix synthetic;  // 50,000 points
};

MixtureTestbed MakeTestbed(uint64_t seed, size_t n_real = 5000,
                           size_t n_synthetic = 50000);

}  // namespace dpsynth::testing

#endif  // DPSYNTH_TESTS_SUPPORT_TESTBED_H_
