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

#include "dpsynth/leakage_eval.h"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_set>

#include "dpsynth/error.h"
#include "json.hpp"

namespace dpsynth {
namespace {

using json = nlohmann::json;

constexpr uint64_t kInjectStream = 0x696e6a656374;
constexpr size_t kScanBlock = 8192;

const char* const kDefaultWords[] = {
    "Oak",     "Elm",     "Ash",     "Bay",     "Fir",     "Way",
    "Main",    "Park",    "Lake",    "Hill",    "Pine",    "Mill",
    "Road",    "Lane",    "Rose",    "West",    "East",    "View",
    "Maple",   "Cedar",   "Birch",   "River",   "North",   "South",
    "Ridge",   "Grove",   "Drive",   "Court",   "Place",   "Creek",
    "Street",  "Avenue",  "Spring",  "Church",  "Sunset",  "Forest",
    "Meadow",  "Circle",  "Garden",  "Valley",  "Harbor",  "Willow",
    "Lincoln", "Highway", "Orchard", "Terrace", "Chester", "Madison",
    "Franklin", "Magnolia", "Crescent", "Parkview", "Lakeside", "Hillside",
};

std::string JoinPrefix(const CanarySpec& spec) {
  return spec.template_text.substr(0, spec.template_text.find(kSecretPlaceholder));
}

CanarySpec SpecFromJson(const json& j) {
  CanarySpec spec;
  spec.id = j.value("id", spec.id);
  spec.template_text = j.at("template").get<std::string>();
  spec.secret = j.at("secret").get<std::string>();
  spec.repetitions = j.value("repetitions", spec.repetitions);
  spec.pool_size = j.value("pool_size", spec.pool_size);
  if (j.contains("prompt")) {
    spec.prompt = j.at("prompt").get<std::string>();
    spec.has_prompt = true;
  }
  ValidateCanary(spec);
  return spec;
}

}  // namespace

void ValidateCanary(const CanarySpec& spec) {
  auto fail = [&](const std::string& why) {
    throw Error(ErrorCode::kConfig, "canary " + spec.id + ": " + why);
  };
  const std::string_view placeholder = kSecretPlaceholder;
  size_t first = spec.template_text.find(placeholder);
  if (first == std::string::npos ||
      spec.template_text.find(placeholder, first + 1) != std::string::npos) {
    fail("template must contain exactly one {secret}");
  }
  if (spec.secret.empty()) fail("secret is empty");
  if (spec.secret.find(placeholder) != std::string::npos) {
    fail("secret contains the placeholder");
  }
  if (spec.repetitions == 0) fail("repetitions must be >= 1");
  if (spec.pool_size == 0) fail("pool size must be >= 1");
  if (CanaryPrompt(spec).find(spec.secret) != std::string::npos) {
    fail("prompt already contains the secret");
  }
}

std::string FillTemplate(const CanarySpec& spec, std::string_view secret) {
  std::string text = spec.template_text;
  size_t pos = text.find(kSecretPlaceholder);
  if (pos == std::string::npos) {
    throw Error(ErrorCode::kConfig, "canary template lacks {secret}");
  }
  text.replace(pos, std::string_view(kSecretPlaceholder).size(), secret);
  return text;
}

std::string CanaryPrompt(const CanarySpec& spec) {
  return spec.has_prompt ? spec.prompt : JoinPrefix(spec);
}

std::vector<CanarySpec> ParseCanarySpecs(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfig, std::string("canary specs: ") + e.what());
  }
  std::vector<CanarySpec> specs;
  try {
    if (j.is_array()) {
      for (const auto& item : j) specs.push_back(SpecFromJson(item));
    } else {
      specs.push_back(SpecFromJson(j));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfig, std::string("canary specs: ") + e.what());
  }
  return specs;
}

std::vector<CanarySpec> ReadCanarySpecs(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ParseCanarySpecs(ss.str());
}

Corpus InjectCanary(const Corpus& corpus, const CanarySpec& spec,
                    uint64_t seed) {
  ValidateCanary(spec);
  Corpus out = corpus;
  const std::string text = FillTemplate(spec, spec.secret);
  for (uint64_t k = 0; k < spec.repetitions; ++k) {
    InstructionRecord record;
    record.id = spec.id + "-" + std::to_string(k);
    record.text = text;
    record.meta["canary"] = spec.id;
    out.records.push_back(std::move(record));
  }
  Rng rng(seed, kInjectStream);
  Shuffle(std::span<InstructionRecord>(out.records), rng);
  ValidateCorpus(out);
  return out;
}

SecretGrammar::SecretGrammar() {
  std::vector<std::string> words(std::begin(kDefaultWords),
                                 std::end(kDefaultWords));
  *this = SecretGrammar(std::move(words));
}

SecretGrammar::SecretGrammar(std::vector<std::string> words) {
  std::sort(words.begin(), words.end());
  words.erase(std::unique(words.begin(), words.end()), words.end());
  for (auto& w : words) {
    bool letters = !w.empty() && std::all_of(w.begin(), w.end(), [](char c) {
      return std::isalpha(static_cast<unsigned char>(c));
    });
    if (!letters) continue;
    if (by_length_.size() <= w.size()) by_length_.resize(w.size() + 1);
    by_length_[w.size()].push_back(std::move(w));
  }
}

SecretGrammar SecretGrammar::FromFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  std::vector<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) {
      line.pop_back();
    }
    if (!line.empty()) words.push_back(line);
  }
  return SecretGrammar(std::move(words));
}

std::string SecretGrammar::Alternative(std::string_view secret, Rng& rng) const {
  std::string out(secret);
  size_t i = 0;
  while (i < out.size()) {
    unsigned char c = static_cast<unsigned char>(out[i]);
    if (std::isdigit(c)) {
      out[i] = static_cast<char>('0' + rng.UniformIndex(10));
      ++i;
    } else if (std::isalpha(c)) {
      size_t j = i;
      while (j < out.size() && std::isalpha(static_cast<unsigned char>(out[j]))) ++j;
      const size_t len = j - i;
      const std::vector<std::string>* pool =
          len < by_length_.size() && !by_length_[len].empty() ? &by_length_[len]
                                                              : nullptr;
      const std::string word =
          pool ? (*pool)[rng.UniformIndex(pool->size())] : std::string(len, 'a');
      for (size_t k = 0; k < len; ++k) {
        char w = pool ? word[k] : static_cast<char>('a' + rng.UniformIndex(26));
        bool upper = std::isupper(static_cast<unsigned char>(secret[i + k]));
        out[i + k] = static_cast<char>(
            upper ? std::toupper(static_cast<unsigned char>(w))
                  : std::tolower(static_cast<unsigned char>(w)));
      }
      i = j;
    } else {
      ++i;
    }
  }
  return out;
}

std::vector<std::string> AlternativeSecrets(std::string_view secret,
                                            size_t count, uint64_t seed,
                                            const SecretGrammar& grammar) {
  std::unordered_set<std::string> seen{std::string(secret)};
  std::vector<std::string> out;
  out.reserve(count);
  Rng rng(seed, 0);
  const size_t max_attempts = 50 * count + 1000;
  for (size_t attempt = 0; attempt < max_attempts && out.size() < count;
       ++attempt) {
    std::string alt = grammar.Alternative(secret, rng);
    if (seen.insert(alt).second) out.push_back(std::move(alt));
  }
  return out;
}

LossRankResult LossRank(const ToyLanguageModel& model, const CanarySpec& spec,
                        uint64_t seed, const SecretGrammar& grammar) {
  ValidateCanary(spec);
  const size_t max_len = model.shape().max_len;
  const std::string canary = FillTemplate(spec, spec.secret);
  if (canary.size() > max_len) {
    throw Error(ErrorCode::kConfig, "canary " + spec.id + " is longer than the "
                                    "model's max_len");
  }
  BigramTable table(model);
  LossRankResult result;
  result.canary_loss = table.SequenceLoss(EncodeText(canary, max_len));
  std::vector<std::string> alternatives =
      AlternativeSecrets(spec.secret, spec.pool_size - 1, seed, grammar);
  result.pool_size = alternatives.size() + 1;
  result.rank = 1;
  for (const auto& alt : alternatives) {
    double loss = table.SequenceLoss(EncodeText(FillTemplate(spec, alt), max_len));
    if (loss < result.canary_loss) ++result.rank;
  }
  return result;
}

ScanResult ScanUnprompted(const ToyLanguageModel& model,
                          const SamplingConfig& sampling, uint64_t count,
                          std::span<const std::string> secrets, bool parallel) {
  ScanResult result;
  result.found.assign(secrets.size(), false);
  result.first_hit.assign(secrets.size(), -1);
  if (count == 0 || secrets.empty()) return result;
  NucleusSampler sampler(model, sampling);
  std::vector<std::string> texts;
  size_t remaining = secrets.size();
  for (uint64_t start = 0; start < count && remaining > 0; start += kScanBlock) {
    const uint64_t end = std::min<uint64_t>(count, start + kScanBlock);
    texts.assign(end - start, {});
#pragma omp parallel for schedule(dynamic, 256) if (parallel)
    for (ptrdiff_t i = 0; i < static_cast<ptrdiff_t>(end - start); ++i) {
      Rng rng(sampling.seed, start + static_cast<uint64_t>(i) + 1);
      texts[i] = sampler.Generate(rng);
    }
    for (size_t i = 0; i < texts.size(); ++i) {
      for (size_t s = 0; s < secrets.size(); ++s) {
        if (!result.found[s] && texts[i].find(secrets[s]) != std::string::npos) {
          result.found[s] = true;
          result.first_hit[s] = static_cast<int64_t>(start + i);
          --remaining;
        }
      }
    }
    result.generations = end;
  }
  return result;
}

bool ScanPrompted(const ToyLanguageModel& model, const CanarySpec& spec) {
  ValidateCanary(spec);
  SamplingConfig greedy;
  greedy.top_p = 1.0;
  NucleusSampler sampler(model, greedy);
  const std::string prompt = CanaryPrompt(spec);
  return sampler.GreedyComplete(prompt).find(spec.secret) != std::string::npos;
}

std::string SerializeLeakageReports(std::span<const LeakageReport> reports) {
  json j;
  j["canaries"] = json::array();
  std::map<uint64_t, uint64_t> min_rank;
  for (const auto& r : reports) {
    json c;
    c["id"] = r.canary_id;
    c["repetitions"] = r.repetitions;
    c["loss_rank"] = r.rank.rank;
    c["pool_size"] = r.rank.pool_size;
    c["canary_loss"] = r.rank.canary_loss;
    c["leaked_unprompted"] = r.leaked_unprompted;
    c["generations"] = r.generations;
    c["leaked_prompted"] = r.leaked_prompted;
    j["canaries"].push_back(c);
    auto [it, inserted] = min_rank.emplace(r.repetitions, r.rank.rank);
    if (!inserted) it->second = std::min(it->second, r.rank.rank);
  }
  j["min_rank_by_repetitions"] = json::object();
  for (auto [reps, rank] : min_rank) {
    j["min_rank_by_repetitions"][std::to_string(reps)] = rank;
  }
  return j.dump(2) + "\n";
}

}  // namespace dpsynth
