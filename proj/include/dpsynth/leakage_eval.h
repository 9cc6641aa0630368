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

#ifndef DPSYNTH_LEAKAGE_EVAL_H_
#define DPSYNTH_LEAKAGE_EVAL_H_

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dpsynth/corpus.h"
#include "dpsynth/toy_generator.h"

namespace dpsynth {

inline constexpr char kSecretPlaceholder[] = "{secret}";

struct CanarySpec {
  std::string id = "canary";
  // Text with exactly one "{secret}".
  std::string template_text;
  std::string secret;
  uint64_t repetitions = 1;
  uint64_t pool_size = 10000;
  // Prompt for the prompted scan; defaults to the text before the secret.
  std::string prompt;
  bool has_prompt = false;
};

// Throws kConfig on a malformed spec, including a prompt that already
// contains the secret.
void ValidateCanary(const CanarySpec& spec);
std::string FillTemplate(const CanarySpec& spec, std::string_view secret);
std::string CanaryPrompt(const CanarySpec& spec);

std::vector<CanarySpec> ParseCanarySpecs(std::string_view json_text);
std::vector<CanarySpec> ReadCanarySpecs(const std::string& path);

// Appends `repetitions` filled copies (ids "<spec id>-<k>", meta
// canary=<spec id>) and shuffles the result with the seed.
Corpus InjectCanary(const Corpus& corpus, const CanarySpec& spec,
                    uint64_t seed);

// Words used to replace letter runs of a secret. Each run is replaced by a
// word of the same length, keeping the case pattern; runs with no word of
// that length get random letters.
class SecretGrammar {
 public:
  SecretGrammar();
  explicit SecretGrammar(std::vector<std::string> words);
  static SecretGrammar FromFile(const std::string& path);

  // Digits become random digits and letter runs random words, so the
  // result has the same byte length and shape as `secret`.
  std::string Alternative(std::string_view secret, Rng& rng) const;

 private:
  std::vector<std::vector<std::string>> by_length_;
};

// `count` distinct alternatives different from the secret (fewer if the
// format cannot produce that many).
std::vector<std::string> AlternativeSecrets(std::string_view secret,
                                            size_t count, uint64_t seed,
                                            const SecretGrammar& grammar = {});

struct LossRankResult {
  uint64_t rank = 0;  // 1 + number of strictly lower-loss alternatives
  uint64_t pool_size = 0;
  double canary_loss = 0.0;
};

LossRankResult LossRank(const ToyLanguageModel& model, const CanarySpec& spec,
                        uint64_t seed, const SecretGrammar& grammar = {});

struct ScanResult {
  std::vector<bool> found;
  // Generation index of the first hit per secret, or -1.
  std::vector<int64_t> first_hit;
  uint64_t generations = 0;
};

// Samples up to `count` texts (stream i + 1 of sampling.seed for text i) and
// checks each secret as a substring. Stops early once every secret is found.
ScanResult ScanUnprompted(const ToyLanguageModel& model,
                          const SamplingConfig& sampling, uint64_t count,
                          std::span<const std::string> secrets,
                          bool parallel = true);

// Greedy completion of the canary prompt; true iff it contains the secret.
bool ScanPrompted(const ToyLanguageModel& model, const CanarySpec& spec);

struct LeakageReport {
  std::string canary_id;
  uint64_t repetitions = 0;
  LossRankResult rank;
  bool leaked_unprompted = false;
  uint64_t generations = 0;
  bool leaked_prompted = false;
};

std::string SerializeLeakageReports(std::span<const LeakageReport> reports);

}  // namespace dpsynth

#endif  // DPSYNTH_LEAKAGE_EVAL_H_
