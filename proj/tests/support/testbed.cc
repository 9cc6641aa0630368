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

#include "testbed.h"

#include <cmath>
#include <string>

#include "dpsynth/random.h"

namespace dpsynth::testing {
namespace {

using Words = std::vector<std::string>;

const Words kAdjectives = {"short", "funny", "clear", "formal", "simple",
                           "detailed", "creative", "friendly", "brief",
                           "persuasive", "gentle", "honest", "modern"};
const Words kNouns = {"poem", "story", "essay", "email", "summary", "letter",
                      "speech", "review", "outline", "guide", "report",
                      "article", "song"};
const Words kTopics = {"climate change", "coffee", "machine learning",
                       "the ocean", "city gardens", "ancient history",
                       "healthy sleep", "electric cars", "jazz music",
                       "remote work", "volcanoes", "chess openings",
                       "bread baking", "space travel", "honey bees"};
const Words kVerbs = {"organize", "clean", "learn", "plan", "improve",
                      "fix", "design", "explain", "compare", "teach"};
const Words kObjects = {"my kitchen", "a small garden", "a new language",
                        "a family trip", "my morning routine", "a bicycle",
                        "a website", "a budget", "a study schedule",
                        "a birthday party"};
const Words kLanguages = {"French", "Spanish", "German", "Italian",
                          "Japanese", "Korean", "Dutch"};
const Words kSkills = {"writing", "public speaking", "cooking", "drawing",
                       "time management", "focus", "memory", "typing"};
const Words kCounts = {"three", "five", "seven", "ten", "a few", "some"};

const std::string& Pick(const Words& words, Rng& rng) {
  return words[rng.UniformIndex(words.size())];
}

std::string Instruction(Rng& rng) {
  switch (rng.UniformIndex(10)) {
    case 0:
      return "Write a " + Pick(kAdjectives, rng) + " " + Pick(kNouns, rng) +
             " about " + Pick(kTopics, rng) + ".";
    case 1:
      return "Explain how " + Pick(kTopics, rng) + " affects " +
             Pick(kObjects, rng) + ".";
    case 2:
      return "Give me " + Pick(kCounts, rng) + " tips to " + Pick(kVerbs, rng) +
             " " + Pick(kObjects, rng) + ".";
    case 3:
      return "Summarize the " + Pick(kNouns, rng) + " on " + Pick(kTopics, rng) +
             ".";
    case 4:
      return "What is the best way to " + Pick(kVerbs, rng) + " " +
             Pick(kObjects, rng) + "?";
    case 5:
      return "Translate this " + Pick(kNouns, rng) + " into " +
             Pick(kLanguages, rng) + ".";
    case 6:
      return "List " + Pick(kCounts, rng) + " " + Pick(kAdjectives, rng) +
             " ideas about " + Pick(kTopics, rng) + ".";
    case 7:
      return "How can I improve my " + Pick(kSkills, rng) + "?";
    case 8:
      return "Describe " + Pick(kTopics, rng) + " in " + Pick(kAdjectives, rng) +
             " terms.";
    default:
      return "Create a " + Pick(kAdjectives, rng) + " plan to " +
             Pick(kVerbs, rng) + " " + Pick(kObjects, rng) + ".";
  }
}

}  // namespace

Corpus InstructionCorpus(size_t n, uint64_t seed) {
  Corpus corpus;
  corpus.role = CorpusRole::kReal;
  Rng rng(seed, 0x636f72707573);
  for (size_t i = 0; i < n; ++i) {
    corpus.records.push_back({"real-" + std::to_string(i), Instruction(rng), {}});
  }
  return corpus;
}

Corpus BimodalLengthCorpus(size_t n, uint64_t seed) {
  Corpus corpus;
  Rng rng(seed, 0x62696d6f64);
  for (size_t i = 0; i < n; ++i) {
    std::string text;
    if (i % 2 == 0) {
      text = "How can I improve my " + Pick(kSkills, rng) + "?";
    } else {
      text = Instruction(rng);
      while (text.size() <= 80) text += " " + Instruction(rng);
    }
    corpus.records.push_back({"real-" + std::to_string(i), text, {}});
  }
  return corpus;
}

Mixture RealMixture(uint64_t seed, size_t components, size_t dim) {
  Rng rng(seed, 0x7265616c);
  Mixture m;
  double total = 0.0;
  for (size_t c = 0; c < components; ++c) {
    double w = 0.2 + rng.Uniform();
    m.weights.push_back(w);
    total += w;
    std::vector<double> mean(dim);
    for (double& x : mean) x = 6.0 * rng.Normal();
    m.means.push_back(mean);
    m.stddevs.push_back(0.6 + 0.8 * rng.Uniform());
  }
  for (double& w : m.weights) w /= total;
  return m;
}

Mixture PerturbedMixture(const Mixture& real, uint64_t seed,
                         size_t junk_components) {
  Rng rng(seed, 0x70657274);
  Mixture m;
  const size_t dim = real.dim();
  double total = 0.0;
  for (size_t c = 0; c < real.weights.size(); ++c) {
    // Log-uniform reweighting over a factor of 20.
    double w = real.weights[c] * std::exp(std::log(20.0) * (rng.Uniform() - 0.5));
    m.weights.push_back(w);
    total += w;
    std::vector<double> mean = real.means[c];
    for (double& x : mean) x += 0.5 * rng.Normal();
    m.means.push_back(mean);
    m.stddevs.push_back(real.stddevs[c] * (1.0 + 0.5 * rng.Uniform()));
  }
  // Junk: 30% of the synthetic mass on components the real data lacks.
  const double junk_mass = total * 0.3 / 0.7;
  for (size_t c = 0; c < junk_components; ++c) {
    m.weights.push_back(junk_mass / static_cast<double>(junk_components));
    total += junk_mass / static_cast<double>(junk_components);
    std::vector<double> mean(dim);
    for (double& x : mean) x = 6.0 * rng.Normal();
    m.means.push_back(mean);
    m.stddevs.push_back(0.6 + 0.8 * rng.Uniform());
  }
  for (double& w : m.weights) w /= total;
  return m;
}

EmbeddingMatrix SampleMixture(const Mixture& mixture, size_t n, uint64_t seed) {
  Rng rng(seed, 0x73616d70);
  const size_t dim = mixture.dim();
  std::vector<double> cumulative;
  double c = 0.0;
  for (double w : mixture.weights) cumulative.push_back(c += w);
  std::vector<float> data(n * dim);
  for (size_t i = 0; i < n; ++i) {
    double u = rng.Uniform() * c;
    size_t k = 0;
    while (k + 1 < cumulative.size() && cumulative[k] <= u) ++k;
    for (size_t d = 0; d < dim; ++d) {
      data[i * dim + d] = static_cast<float>(mixture.means[k][d] +
                                             mixture.stddevs[k] * rng.Normal());
    }
  }
  return EmbeddingMatrix(n, dim, std::move(data));
}

MixtureTestbed MakeTestbed(uint64_t seed, size_t n_real, size_t n_synthetic) {
  Mixture real = RealMixture(seed);
  Mixture synthetic = PerturbedMixture(real, seed);
  return {SampleMixture(real, n_real, Rng::DeriveSeed(seed, 1)),
          SampleMixture(synthetic, n_synthetic, Rng::DeriveSeed(seed, 2))};
}

}  // namespace dpsynth::testing
