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

#include "dpsynth/pipeline.h"

#include <openssl/evp.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <type_traits>
#include <unordered_map>

#include "byte_io.h"
#include "dpsynth/clustering.h"
#include "dpsynth/divergence.h"
#include "dpsynth/private_histogram.h"
#include "dpsynth/random.h"
#include "dpsynth/resampler.h"
#include "dpsynth/tokenizer.h"
#include "json.hpp"

namespace dpsynth {
namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

constexpr char kManifest[] = "manifest.json";

uint64_t Fnv1a64(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string Sha256Hex(std::span<const uint8_t> bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(),
                 nullptr) != 1) {
    throw Error(ErrorCode::kIo, "SHA-256 failed");
  }
  static const char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 15]);
  }
  return out;
}

std::string FileSha256(const std::string& path) {
  return Sha256Hex(internal::ReadFileBytes(path));
}

std::string ReadText(const std::string& path) {
  auto bytes = internal::ReadFileBytes(path);
  return std::string(bytes.begin(), bytes.end());
}

void WriteText(const std::string& path, std::string_view text) {
  internal::WriteFileBytes(
      path, std::span<const uint8_t>(
                reinterpret_cast<const uint8_t*>(text.data()), text.size()));
}

json ParseJsonFile(const std::string& path) {
  try {
    return json::parse(ReadText(path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kFormat, path + ": " + e.what());
  }
}

// Reads the keys of one config object and rejects the ones nobody asked for.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) {
      throw Error(ErrorCode::kConfig, Where() + " must be an object");
    }
  }

  template <typename T>
  void Get(const std::string& key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    if constexpr (std::is_same_v<T, bool>) {
      if (!it->is_boolean()) Bad(key, "a boolean");
    } else if constexpr (std::is_unsigned_v<T>) {
      if (!it->is_number_unsigned()) Bad(key, "a non-negative integer");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!it->is_number()) Bad(key, "a number");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!it->is_string()) Bad(key, "a string");
    }
    try {
      out = it->get<T>();
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kConfig, Where() + "." + key + ": " + e.what());
    }
  }

  template <typename T>
  void Get(const std::string& key, std::optional<T>& out) {
    if (!j_.contains(key) || j_.at(key).is_null()) {
      seen_.insert(key);
      return;
    }
    T value{};
    Get(key, value);
    out = value;
  }

  std::optional<Section> Child(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return std::nullopt;
    return Section(*it, path_ + "." + key);
  }

  const json* Raw(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void Finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) {
        throw Error(ErrorCode::kConfig,
                    "unknown config key " + path_ + "." + item.key());
      }
    }
  }

 private:
  std::string Where() const { return path_; }
  [[noreturn]] void Bad(const std::string& key, const char* what) const {
    throw Error(ErrorCode::kConfig, path_ + "." + key + " must be " + what);
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

json CanaryToJson(const CanarySpec& spec) {
  json j;
  j["id"] = spec.id;
  j["template"] = spec.template_text;
  j["secret"] = spec.secret;
  j["repetitions"] = spec.repetitions;
  j["pool_size"] = spec.pool_size;
  if (spec.has_prompt) j["prompt"] = spec.prompt;
  return j;
}

json ConfigToJson(const PipelineConfig& c) {
  json j;
  j["work_dir"] = c.work_dir;
  j["seed"] = c.seed;
  j["real_corpus"] = c.real_corpus;
  j["synthetic_corpus"] = c.synthetic_corpus;
  j["real_embeddings"] = c.real_embeddings;
  j["synthetic_embeddings"] = c.synthetic_embeddings;
  j["featurizer"] = {{"dim", c.featurizer_dim}, {"ngram", c.featurizer_ngram}};
  j["preprocess"] = {{"ngram", c.preprocess.ngram},
                     {"min_tokens", c.preprocess.min_tokens},
                     {"patterns", c.preprocess.patterns},
                     {"language_key", c.preprocess.language_key},
                     {"languages", c.preprocess.languages},
                     {"moderation_key", c.preprocess.moderation_key},
                     {"moderation_reject", c.preprocess.moderation_reject}};
  j["model"] = {{"embed_dim", c.model.embed_dim},
                {"hidden_dim", c.model.hidden_dim},
                {"max_len", c.model.max_len}};
  json train = {{"clip", c.train.clip},
                {"batch_size", c.train.batch_size},
                {"learning_rate", c.train.learning_rate},
                {"beta1", c.train.beta1},
                {"beta2", c.train.beta2},
                {"adam_eps", c.train.adam_eps},
                {"epochs", c.train.epochs},
                {"epsilon", c.train_epsilon}};
  train["noise_multiplier"] =
      c.train_noise_multiplier ? json(*c.train_noise_multiplier) : json(nullptr);
  j["train"] = train;
  j["privacy"] = {{"delta", c.delta},
                  {"allow_large_delta", c.allow_large_delta}};
  j["sampling"] = {{"top_p", c.sampling.top_p},
                   {"temperature", c.sampling.temperature},
                   {"max_len", c.sampling.max_len},
                   {"count", c.sample_count}};
  j["clustering"] = {{"k", c.k},
                     {"max_iters", c.kmeans_max_iters},
                     {"rel_tol", c.kmeans_rel_tol},
                     {"normalize", c.normalize_embeddings}};
  j["histogram"] = {{"sigma", c.histogram_sigma}};
  j["resample"] = {{"target", c.target},
                   {"with_replacement", c.with_replacement}};
  j["mauve"] = {{"unigram_c", c.mauve_unigram_c},
                {"embedding_c", c.mauve_embedding_c},
                {"bins", c.mauve_bins},
                {"grid", c.mauve_grid}};
  json specs = json::array();
  for (const auto& spec : c.canaries) specs.push_back(CanaryToJson(spec));
  j["canary"] = {{"specs", specs},
                 {"scan_count", c.canary_scan_count},
                 {"scan_top_p", c.canary_scan_top_p},
                 {"nonprivate_reference", c.canary_nonprivate_reference},
                 {"words_file", c.canary_words_file}};
  j["pii"] = {{"enabled", c.pii_enabled},
              {"corpus", c.pii_corpus},
              {"demonstrations_file", c.pii_demonstrations_file},
              {"base_url", c.pii_endpoint.base_url},
              {"model", c.pii_endpoint.model},
              {"api_key_env", c.pii_endpoint.api_key_env},
              {"timeout_seconds", c.pii_endpoint.timeout_seconds},
              {"max_concurrency", c.pii_options.max_concurrency},
              {"requests_per_second", c.pii_options.requests_per_second},
              {"max_attempts", c.pii_options.retry.max_attempts},
              {"initial_backoff_ms", c.pii_options.retry.initial_backoff_ms},
              {"max_backoff_ms", c.pii_options.retry.max_backoff_ms}};
  return j;
}

void ValidateConfig(const PipelineConfig& c) {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::kConfig, m); };
  if (c.work_dir.empty()) fail("work_dir is empty");
  if (c.featurizer_dim == 0 || c.featurizer_ngram == 0) {
    fail("featurizer dim and ngram must be positive");
  }
  if (c.k == 0) fail("clustering.k must be positive");
  if (!(c.histogram_sigma >= 0.0) || !std::isfinite(c.histogram_sigma)) {
    fail("histogram.sigma must be a finite non-negative number");
  }
  if (!(c.delta > 0.0 && c.delta < 1.0)) fail("privacy.delta must be in (0, 1)");
  if (!(c.train_epsilon > 0.0)) fail("train.epsilon must be positive");
  if (c.train_noise_multiplier && !(*c.train_noise_multiplier >= 0.0)) {
    fail("train.noise_multiplier must be non-negative");
  }
  if (!(c.train.clip > 0.0)) fail("train.clip must be positive");
  if (c.train.batch_size == 0 || c.train.epochs == 0) {
    fail("train.batch_size and train.epochs must be positive");
  }
  if (!(c.sampling.top_p > 0.0 && c.sampling.top_p <= 1.0)) {
    fail("sampling.top_p must be in (0, 1]");
  }
  if (!(c.canary_scan_top_p > 0.0 && c.canary_scan_top_p <= 1.0)) {
    fail("canary.scan_top_p must be in (0, 1]");
  }
  if (c.sample_count == 0) fail("sampling.count must be positive");
  if (!(c.mauve_unigram_c > 0.0) || !(c.mauve_embedding_c > 0.0)) {
    fail("mauve scaling constants must be positive");
  }
  if (c.mauve_bins == 0 || c.mauve_grid == 0) {
    fail("mauve bins and grid must be positive");
  }
  if (c.pii_corpus != "selected" && c.pii_corpus != "real") {
    fail("pii.corpus must be \"selected\" or \"real\"");
  }
  for (const auto& spec : c.canaries) ValidateCanary(spec);
}

}  // namespace

PipelineConfig ParsePipelineConfig(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfig, std::string("config: ") + e.what());
  }
  PipelineConfig c;
  Section top(j, "config");
  top.Get("work_dir", c.work_dir);
  top.Get("seed", c.seed);
  top.Get("real_corpus", c.real_corpus);
  top.Get("synthetic_corpus", c.synthetic_corpus);
  top.Get("real_embeddings", c.real_embeddings);
  top.Get("synthetic_embeddings", c.synthetic_embeddings);
  if (auto s = top.Child("featurizer")) {
    s->Get("dim", c.featurizer_dim);
    s->Get("ngram", c.featurizer_ngram);
    s->Finish();
  }
  if (auto s = top.Child("preprocess")) {
    s->Get("ngram", c.preprocess.ngram);
    s->Get("min_tokens", c.preprocess.min_tokens);
    s->Get("patterns", c.preprocess.patterns);
    s->Get("language_key", c.preprocess.language_key);
    s->Get("languages", c.preprocess.languages);
    s->Get("moderation_key", c.preprocess.moderation_key);
    s->Get("moderation_reject", c.preprocess.moderation_reject);
    s->Finish();
  }
  if (auto s = top.Child("model")) {
    s->Get("embed_dim", c.model.embed_dim);
    s->Get("hidden_dim", c.model.hidden_dim);
    s->Get("max_len", c.model.max_len);
    s->Finish();
  }
  if (auto s = top.Child("train")) {
    s->Get("clip", c.train.clip);
    s->Get("noise_multiplier", c.train_noise_multiplier);
    s->Get("batch_size", c.train.batch_size);
    s->Get("learning_rate", c.train.learning_rate);
    s->Get("beta1", c.train.beta1);
    s->Get("beta2", c.train.beta2);
    s->Get("adam_eps", c.train.adam_eps);
    s->Get("epochs", c.train.epochs);
    s->Get("epsilon", c.train_epsilon);
    s->Finish();
  }
  if (auto s = top.Child("privacy")) {
    s->Get("delta", c.delta);
    s->Get("allow_large_delta", c.allow_large_delta);
    s->Finish();
  }
  if (auto s = top.Child("sampling")) {
    s->Get("top_p", c.sampling.top_p);
    s->Get("temperature", c.sampling.temperature);
    s->Get("max_len", c.sampling.max_len);
    s->Get("count", c.sample_count);
    s->Finish();
  }
  if (auto s = top.Child("clustering")) {
    s->Get("k", c.k);
    s->Get("max_iters", c.kmeans_max_iters);
    s->Get("rel_tol", c.kmeans_rel_tol);
    s->Get("normalize", c.normalize_embeddings);
    s->Finish();
  }
  if (auto s = top.Child("histogram")) {
    s->Get("sigma", c.histogram_sigma);
    s->Finish();
  }
  if (auto s = top.Child("resample")) {
    s->Get("target", c.target);
    s->Get("with_replacement", c.with_replacement);
    s->Finish();
  }
  if (auto s = top.Child("mauve")) {
    s->Get("unigram_c", c.mauve_unigram_c);
    s->Get("embedding_c", c.mauve_embedding_c);
    s->Get("bins", c.mauve_bins);
    s->Get("grid", c.mauve_grid);
    s->Finish();
  }
  if (auto s = top.Child("canary")) {
    if (const json* specs = s->Raw("specs")) {
      c.canaries = ParseCanarySpecs(specs->dump());
    }
    std::string specs_file;
    s->Get("specs_file", specs_file);
    if (!specs_file.empty()) {
      for (auto& spec : ReadCanarySpecs(specs_file)) {
        c.canaries.push_back(std::move(spec));
      }
    }
    s->Get("scan_count", c.canary_scan_count);
    s->Get("scan_top_p", c.canary_scan_top_p);
    s->Get("nonprivate_reference", c.canary_nonprivate_reference);
    s->Get("words_file", c.canary_words_file);
    s->Finish();
  }
  if (auto s = top.Child("pii")) {
    s->Get("enabled", c.pii_enabled);
    s->Get("corpus", c.pii_corpus);
    s->Get("demonstrations_file", c.pii_demonstrations_file);
    s->Get("base_url", c.pii_endpoint.base_url);
    s->Get("model", c.pii_endpoint.model);
    s->Get("api_key_env", c.pii_endpoint.api_key_env);
    s->Get("timeout_seconds", c.pii_endpoint.timeout_seconds);
    s->Get("max_concurrency", c.pii_options.max_concurrency);
    s->Get("requests_per_second", c.pii_options.requests_per_second);
    s->Get("max_attempts", c.pii_options.retry.max_attempts);
    s->Get("initial_backoff_ms", c.pii_options.retry.initial_backoff_ms);
    s->Get("max_backoff_ms", c.pii_options.retry.max_backoff_ms);
    s->Finish();
  }
  top.Finish();
  std::set<std::string> ids;
  for (const auto& spec : c.canaries) {
    if (!ids.insert(spec.id).second) {
      throw Error(ErrorCode::kConfig, "duplicate canary id " + spec.id);
    }
  }
  ValidateConfig(c);
  return c;
}

PipelineConfig ReadPipelineConfig(const std::string& path) {
  std::string text;
  try {
    text = ReadText(path);
  } catch (const Error& e) {
    throw Error(ErrorCode::kConfig, e.what());
  }
  return ParsePipelineConfig(text);
}

std::string SerializePipelineConfig(const PipelineConfig& config) {
  return ConfigToJson(config).dump(2) + "\n";
}

std::string ExplainDefaults() {
  struct Row {
    const char* key;
    std::string value;
    const char* help;
  };
  const json d = ConfigToJson(PipelineConfig{});
  auto v = [&](const char* section, const char* key) {
    return d.at(section).at(key).dump();
  };
  const std::vector<Row> rows = {
      {"seed", d.at("seed").dump(), "master seed; every stage seed derives from it"},
      {"work_dir", d.at("work_dir").dump(), "directory for stage artifacts and manifest.json"},
      {"real_corpus", "\"\"", "private instruction corpus (JSONL)"},
      {"synthetic_corpus", "\"\"", "import an external synthetic corpus instead of training the toy generator"},
      {"real_embeddings", "\"\"", "DPEB1 embeddings of the preprocessed real corpus"},
      {"synthetic_embeddings", "\"\"", "DPEB1 embeddings of the synthetic corpus"},
      {"featurizer.dim", v("featurizer", "dim"), "hashed n-gram featurizer width when no embeddings are given"},
      {"featurizer.ngram", v("featurizer", "ngram"), "character n-gram length of the featurizer"},
      {"preprocess.ngram", v("preprocess", "ngram"), "token n-gram length for near-duplicate removal"},
      {"preprocess.min_tokens", v("preprocess", "min_tokens"), "drop records with fewer tokens"},
      {"preprocess.patterns", v("preprocess", "patterns"), "wildcard patterns whose matches are dropped"},
      {"preprocess.languages", v("preprocess", "languages"), "accepted values of the language field (empty: all)"},
      {"preprocess.moderation_reject", v("preprocess", "moderation_reject"), "rejected values of the moderation field"},
      {"model.embed_dim", v("model", "embed_dim"), "toy generator embedding width"},
      {"model.hidden_dim", v("model", "hidden_dim"), "toy generator hidden width"},
      {"model.max_len", v("model", "max_len"), "maximum record length in bytes; loss divisor"},
      {"train.clip", v("train", "clip"), "per-example gradient clipping norm C"},
      {"train.noise_multiplier", "null", "DP-Adam noise multiplier; calibrated from train.epsilon when null"},
      {"train.epsilon", v("train", "epsilon"), "target epsilon for the generator when calibrating"},
      {"train.batch_size", v("train", "batch_size"), "records per step"},
      {"train.learning_rate", v("train", "learning_rate"), "Adam learning rate"},
      {"train.epochs", v("train", "epochs"), "passes over the corpus"},
      {"privacy.delta", v("privacy", "delta"), "delta of every reported guarantee; must stay below 0.1/N"},
      {"privacy.allow_large_delta", v("privacy", "allow_large_delta"), "accept delta >= 0.1/N"},
      {"sampling.top_p", v("sampling", "top_p"), "nucleus sampling threshold for synthetic generation"},
      {"sampling.temperature", v("sampling", "temperature"), "softmax temperature"},
      {"sampling.count", v("sampling", "count"), "number of synthetic records to generate"},
      {"clustering.k", v("clustering", "k"), "number of k-means clusters K"},
      {"clustering.max_iters", v("clustering", "max_iters"), "Lloyd iteration cap"},
      {"clustering.rel_tol", v("clustering", "rel_tol"), "stop when inertia improves by less than this fraction"},
      {"clustering.normalize", v("clustering", "normalize"), "L2-normalize embeddings before clustering"},
      {"histogram.sigma", v("histogram", "sigma"), "std of the Gaussian noise on each cluster vote count"},
      {"resample.target", v("resample", "target"), "target size T (0: size of the preprocessed real corpus)"},
      {"resample.with_replacement", v("resample", "with_replacement"), "repeat records of undersized clusters instead of failing"},
      {"mauve.unigram_c", v("mauve", "unigram_c"), "MAUVE scaling constant for the unigram representation"},
      {"mauve.embedding_c", v("mauve", "embedding_c"), "MAUVE scaling constant for the embedding representation"},
      {"mauve.bins", v("mauve", "bins"), "k-means quantization bins for the embedding representation"},
      {"mauve.grid", v("mauve", "grid"), "number of mixture weights on the divergence frontier"},
      {"canary.specs", "[]", "canaries to inject (template with {secret}, secret, repetitions)"},
      {"canary.scan_count", v("canary", "scan_count"), "unprompted generations searched for each secret"},
      {"canary.scan_top_p", v("canary", "scan_top_p"), "nucleus threshold used for the scan"},
      {"canary.nonprivate_reference", v("canary", "nonprivate_reference"), "also train a non-private reference model"},
      {"pii.enabled", v("pii", "enabled"), "run the LLM-based PII screen in run-all"},
      {"pii.corpus", v("pii", "corpus"), "corpus to screen: selected or real"},
      {"pii.base_url", v("pii", "base_url"), "chat-completions endpoint"},
      {"pii.model", v("pii", "model"), "chat model name"},
      {"pii.max_concurrency", v("pii", "max_concurrency"), "parallel requests"},
      {"pii.max_attempts", v("pii", "max_attempts"), "attempts per record for transient failures"},
  };
  size_t key_width = 0, value_width = 0;
  for (const auto& r : rows) {
    key_width = std::max(key_width, std::string_view(r.key).size());
    value_width = std::max(value_width, r.value.size());
  }
  std::ostringstream out;
  for (const auto& r : rows) {
    std::string key = r.key, value = r.value;
    key.resize(key_width, ' ');
    value.resize(value_width, ' ');
    out << key << "  " << value << "  " << r.help << "\n";
  }
  return out.str();
}

void CheckDelta(const PipelineConfig& config, size_t n) {
  if (n == 0) return;
  if (config.delta < 0.1 / static_cast<double>(n) || config.allow_large_delta) {
    return;
  }
  std::ostringstream m;
  m << "delta " << config.delta << " is not below 0.1/N = "
    << 0.1 / static_cast<double>(n) << " for N = " << n
    << "; lower privacy.delta or set privacy.allow_large_delta";
  throw Error(ErrorCode::kConfig, m.str());
}

namespace {

StageSpec Node(std::string name, std::vector<std::string> inputs,
               std::vector<std::string> outputs,
               RealAccess access = RealAccess::kNone) {
  StageSpec s;
  s.stage = name;
  s.name = std::move(name);
  s.inputs = std::move(inputs);
  s.outputs = std::move(outputs);
  s.access = access;
  return s;
}

}  // namespace

std::vector<StageSpec> StageGraph(const PipelineConfig& config) {
  const bool trains = config.synthetic_corpus.empty();
  std::vector<StageSpec> g;
  g.push_back(Node("preprocess", {kRealRawArtifact},
                   {"real.jsonl", "preprocess.json"},
                   RealAccess::kDatasetDefinition));
  if (trains) {
    StageSpec train = Node("train", {"real.jsonl"},
                           {"model.dptm", "train.json", "train_metrics.jsonl"},
                           RealAccess::kLedgered);
    train.private_outputs = {"train_metrics.jsonl"};
    train.mechanism = "dp_adam";
    g.push_back(train);
  }
  g.push_back(Node("sample", {trains ? "model.dptm" : kSyntheticRawArtifact},
                   {"synthetic.jsonl"}));
  StageSpec embed_syn =
      Node("embed-synthetic", {"synthetic.jsonl"}, {"synthetic.dpemb"});
  embed_syn.stage = "embed-import";
  if (!config.synthetic_embeddings.empty()) {
    embed_syn.inputs.push_back(kSyntheticEmbeddingsArtifact);
  }
  g.push_back(embed_syn);
  StageSpec embed_real = Node("embed-real", {"real.jsonl"}, {"real.dpemb"},
                              RealAccess::kPerRecord);
  embed_real.stage = "embed-import";
  if (!config.real_embeddings.empty()) {
    embed_real.inputs.push_back(kRealEmbeddingsArtifact);
  }
  g.push_back(embed_real);
  g.push_back(Node("cluster", {"synthetic.dpemb"}, {"clusters.dpcm"}));
  StageSpec histogram =
      Node("histogram", {"clusters.dpcm", "real.dpemb"},
           {"histogram.json", "noised_histogram.json"}, RealAccess::kLedgered);
  histogram.private_outputs = {"histogram.json"};
  histogram.mechanism = "histogram";
  g.push_back(histogram);
  g.push_back(Node("plan", {"noised_histogram.json", "clusters.dpcm"},
                   {"plan.json"}));
  g.push_back(Node("resample",
                   {"plan.json", "noised_histogram.json", "clusters.dpcm",
                    "synthetic.jsonl"},
                   {kReleaseArtifact, "selection.json"}));
  StageSpec account = Node("account", {"noised_histogram.json"}, {"budget.json"});
  if (trains) account.inputs.push_back("train.json");
  g.push_back(account);
  g.push_back(Node("mauve",
                   {"real.jsonl", "real.dpemb", "synthetic.jsonl",
                    "synthetic.dpemb", kReleaseArtifact},
                   {"mauve.json"}, RealAccess::kEvaluationOnly));
  if (!config.canaries.empty()) {
    g.push_back(Node("canary", {"real.jsonl"}, {"leakage.json"},
                     RealAccess::kEvaluationOnly));
  }
  if (config.pii_enabled) {
    g.push_back(Node("pii-scan",
                     {config.pii_corpus == "real" ? "real.jsonl" : kReleaseArtifact},
                     {"pii.json"}, RealAccess::kEvaluationOnly));
  }
  StageSpec report = Node("report",
                          {"preprocess.json", "synthetic.jsonl", "plan.json",
                           "selection.json", "budget.json", "mauve.json"},
                          {"report.json"}, RealAccess::kEvaluationOnly);
  report.optional_inputs = {"leakage.json", "pii.json"};
  g.push_back(report);
  return g;
}

void CheckStageGraph(std::span<const StageSpec> stages,
                     std::span<const std::string> budget_mechanisms) {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::kConfig, m); };
  std::set<std::string> tainted = {kRealRawArtifact};
  std::set<std::string> produced = {kRealRawArtifact, kSyntheticRawArtifact,
                                    kRealEmbeddingsArtifact,
                                    kSyntheticEmbeddingsArtifact};
  for (const auto& s : stages) {
    bool reads_private = false;
    auto scan = [&](const std::vector<std::string>& inputs, bool required) {
      for (const auto& in : inputs) {
        if (required && !produced.count(in)) {
          fail("stage " + s.name + " reads " + in +
               " before any stage produces it");
        }
        if (tainted.count(in)) reads_private = true;
      }
    };
    scan(s.inputs, true);
    scan(s.optional_inputs, false);
    if (reads_private && s.access == RealAccess::kNone) {
      fail("stage " + s.name + " reads private data outside a ledgered stage");
    }
    if (s.access == RealAccess::kLedgered) {
      if (std::find(budget_mechanisms.begin(), budget_mechanisms.end(),
                    s.mechanism) == budget_mechanisms.end()) {
        fail("ledgered stage " + s.name + " has no budget entry \"" +
             s.mechanism + "\"");
      }
    }
    for (const auto& out : s.outputs) {
      produced.insert(out);
      bool is_private;
      switch (s.access) {
        case RealAccess::kLedgered:
          is_private = std::find(s.private_outputs.begin(),
                                 s.private_outputs.end(),
                                 out) != s.private_outputs.end();
          break;
        case RealAccess::kNone:
          is_private = false;
          break;
        default:
          is_private = reads_private;
      }
      if (is_private) {
        tainted.insert(out);
      } else {
        tainted.erase(out);
      }
    }
  }
  if (tainted.count(kReleaseArtifact)) {
    fail(std::string("released artifact ") + kReleaseArtifact +
         " depends on private data without a ledgered stage");
  }
}

EmbeddingMatrix HashedNgramEmbeddings(const Corpus& corpus, size_t dim,
                                      size_t n) {
  if (dim == 0 || n == 0) {
    throw Error(ErrorCode::kInvalidArgument, "featurizer dim and n must be positive");
  }
  std::vector<float> data(corpus.size() * dim, 0.0f);
  for (size_t r = 0; r < corpus.size(); ++r) {
    std::string text = corpus.records[r].text;
    for (char& ch : text) {
      ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    }
    std::vector<double> row(dim, 0.0);
    size_t grams = text.size() >= n ? text.size() - n + 1 : 1;
    for (size_t i = 0; i < grams; ++i) {
      uint64_t h = Fnv1a64(std::string_view(text).substr(i, n));
      double sign = (Mix64(h) >> 63) ? -1.0 : 1.0;
      row[h % dim] += sign;
    }
    double norm = 0.0;
    for (double x : row) norm += x * x;
    norm = std::sqrt(norm);
    for (size_t j = 0; j < dim; ++j) {
      data[r * dim + j] = static_cast<float>(norm > 0.0 ? row[j] / norm : 0.0);
    }
  }
  return EmbeddingMatrix(corpus.size(), dim, std::move(data),
                         CorpusFingerprint(corpus));
}

namespace {

std::vector<std::string> BudgetMechanismLabels(const PipelineConfig& config) {
  std::vector<std::string> labels;
  if (config.synthetic_corpus.empty()) labels.push_back("dp_adam");
  labels.push_back("histogram");
  return labels;
}

json LoadManifest(const std::string& path) {
  if (!fs::exists(path)) return json{{"version", 1}, {"nodes", json::object()}};
  json j = ParseJsonFile(path);
  if (!j.is_object() || !j.contains("nodes")) {
    throw Error(ErrorCode::kFormat, path + " is not a dpsynth manifest");
  }
  return j;
}

// Strips the "~r<k>" suffix that marks repeated picks.
std::string BaseId(const std::string& id) {
  size_t pos = id.rfind("~r");
  if (pos == std::string::npos || pos + 2 == id.size()) return id;
  for (size_t i = pos + 2; i < id.size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>(id[i]))) return id;
  }
  return id.substr(0, pos);
}

DpAdamConfig TrainConfigFor(const PipelineConfig& config, size_t n,
                            uint64_t seed) {
  DpAdamConfig tc = config.train;
  tc.seed = seed;
  if (tc.batch_size > n) {
    throw Error(ErrorCode::kConfig,
                "train.batch_size " + std::to_string(tc.batch_size) +
                    " exceeds the corpus size " + std::to_string(n));
  }
  return tc;
}

double NoiseFor(const PipelineConfig& config, size_t n, const DpAdamConfig& tc) {
  if (config.train_noise_multiplier) return *config.train_noise_multiplier;
  uint64_t steps = TrainingSteps(tc.epochs, n, tc.batch_size);
  double q = static_cast<double>(tc.batch_size) / static_cast<double>(n);
  return CalibrateSigma(config.train_epsilon, config.delta, q, steps);
}

}  // namespace

Pipeline::Pipeline(PipelineConfig config) : config_(std::move(config)) {
  ValidateConfig(config_);
  graph_ = StageGraph(config_);
  CheckStageGraph(graph_, BudgetMechanismLabels(config_));
}

const std::vector<std::string>& Pipeline::StageNames() {
  static const std::vector<std::string> names = {
      "preprocess", "train",   "sample", "embed-import", "cluster",
      "histogram",  "plan",    "resample", "account",    "mauve",
      "canary",     "pii-scan", "report"};
  return names;
}

std::string Pipeline::ArtifactPath(std::string_view name) const {
  if (name == kRealRawArtifact) return config_.real_corpus;
  if (name == kSyntheticRawArtifact) return config_.synthetic_corpus;
  if (name == kRealEmbeddingsArtifact) return config_.real_embeddings;
  if (name == kSyntheticEmbeddingsArtifact) return config_.synthetic_embeddings;
  return (fs::path(config_.work_dir) / std::string(name)).string();
}

uint64_t Pipeline::StageSeed(std::string_view stage) const {
  return Rng::DeriveSeed(config_.seed, Fnv1a64(stage));
}

const StageSpec& Pipeline::Spec(std::string_view name) const {
  for (const auto& node : graph_) {
    if (node.name == name) return node;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown stage node " + std::string(name));
}

void Pipeline::CheckInputs(const StageSpec& stage) const {
  const json manifest = LoadManifest(ArtifactPath(kManifest));
  auto check = [&](const std::string& input, bool required) {
    const std::string path = ArtifactPath(input);
    if (input.front() == '<') {
      if (path.empty()) {
        throw Error(ErrorCode::kConfig, "stage " + stage.stage + " needs " +
                                            input + " but none is configured");
      }
      if (!fs::exists(path)) {
        throw Error(ErrorCode::kMissingArtifact,
                    input + " not found at " + path);
      }
      return;
    }
    const StageSpec* producer = nullptr;
    for (const auto& node : graph_) {
      if (std::find(node.outputs.begin(), node.outputs.end(), input) !=
          node.outputs.end()) {
        producer = &node;
      }
    }
    if (!fs::exists(path)) {
      if (!required) return;
      throw Error(ErrorCode::kMissingArtifact,
                  "missing artifact " + input + "; run stage " +
                      (producer ? producer->stage : std::string("?")) + " first");
    }
    if (producer == nullptr) return;
    const json& nodes = manifest.at("nodes");
    if (!nodes.contains(producer->name)) {
      if (!required) return;
      throw Error(ErrorCode::kMissingArtifact,
                  input + " exists but stage " + producer->stage +
                      " has no manifest entry; rerun it");
    }
    const json& outputs = nodes.at(producer->name).at("outputs");
    if (!outputs.contains(input) ||
        outputs.at(input).get<std::string>() != FileSha256(path)) {
      throw Error(ErrorCode::kStaleInput,
                  input + " does not match the hash recorded by stage " +
                      producer->stage + "; rerun " + producer->stage +
                      " and its downstream stages");
    }
  };
  for (const auto& input : stage.inputs) check(input, true);
  for (const auto& input : stage.optional_inputs) check(input, false);
}

void Pipeline::RecordStage(const StageSpec& stage) const {
  const std::string manifest_path = ArtifactPath(kManifest);
  json manifest = LoadManifest(manifest_path);
  json entry;
  entry["stage"] = stage.stage;
  entry["seed"] = StageSeed(stage.stage);
  entry["tool_version"] = kToolVersion;
  const std::string config_text = SerializePipelineConfig(config_);
  entry["config_sha256"] = Sha256Hex(std::span<const uint8_t>(
      reinterpret_cast<const uint8_t*>(config_text.data()), config_text.size()));
  json inputs = json::object();
  auto add_input = [&](const std::string& input) {
    const std::string path = ArtifactPath(input);
    if (!path.empty() && fs::exists(path)) inputs[input] = FileSha256(path);
  };
  for (const auto& input : stage.inputs) add_input(input);
  for (const auto& input : stage.optional_inputs) add_input(input);
  entry["inputs"] = inputs;
  json outputs = json::object();
  for (const auto& output : stage.outputs) {
    outputs[output] = FileSha256(ArtifactPath(output));
  }
  entry["outputs"] = outputs;
  manifest["nodes"][stage.name] = entry;
  WriteText(manifest_path, manifest.dump(2) + "\n");
}

void Pipeline::RunStage(std::string_view name) {
  const auto& names = StageNames();
  if (std::find(names.begin(), names.end(), name) == names.end()) {
    throw Error(ErrorCode::kInvalidArgument, "unknown stage " + std::string(name));
  }
  std::vector<const StageSpec*> nodes;
  for (const auto& node : graph_) {
    if (node.stage == name) nodes.push_back(&node);
  }
  if (nodes.empty()) {
    std::string why = name == "train"   ? "a synthetic corpus is imported"
                      : name == "canary" ? "no canaries are configured"
                                         : "pii.enabled is false";
    throw Error(ErrorCode::kConfig,
                "stage " + std::string(name) + " is disabled: " + why);
  }
  fs::create_directories(config_.work_dir);
  for (const StageSpec* node : nodes) {
    if (node->name == "report") {
      try {
        CheckInputs(*node);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kMissingArtifact) throw;
        throw Error(ErrorCode::kIncompleteRun,
                    std::string("run is incomplete: ") + e.what());
      }
    } else {
      CheckInputs(*node);
    }
    deferred_service_error_.clear();
    RunNode(*node);
    RecordStage(*node);
    if (!deferred_service_error_.empty()) {
      throw ServiceError(ServiceError::Kind::kTransient, deferred_service_error_);
    }
  }
}

void Pipeline::RunAll() {
  for (const auto& name : StageNames()) {
    bool enabled = std::any_of(graph_.begin(), graph_.end(),
                               [&](const StageSpec& n) { return n.stage == name; });
    if (enabled) RunStage(name);
  }
}

void Pipeline::RunNode(const StageSpec& node) {
  const std::string& n = node.name;
  if (n == "preprocess") return Preprocess();
  if (n == "train") return Train();
  if (n == "sample") return SampleStage();
  if (n == "embed-synthetic") return EmbedCorpus(false);
  if (n == "embed-real") return EmbedCorpus(true);
  if (n == "cluster") return Cluster();
  if (n == "histogram") return Histogram();
  if (n == "plan") return Plan();
  if (n == "resample") return Resample();
  if (n == "account") return Account();
  if (n == "mauve") return Mauve();
  if (n == "canary") return Canary();
  if (n == "pii-scan") return PiiScan();
  if (n == "report") return Report();
  throw Error(ErrorCode::kInvalidArgument, "no runner for stage node " + n);
}

void Pipeline::Preprocess() {
  Corpus raw = ReadCorpus(config_.real_corpus, CorpusRole::kReal);
  SimpleTokenizer tokenizer;
  Corpus out = ::dpsynth::Preprocess(raw, config_.preprocess, tokenizer);
  if (out.empty()) {
    throw Error(ErrorCode::kConfig, "preprocessing removed every record");
  }
  WriteCorpus(out, ArtifactPath("real.jsonl"));
  json j = {{"input_records", raw.size()}, {"output_records", out.size()}};
  WriteText(ArtifactPath("preprocess.json"), j.dump(2) + "\n");
}

void Pipeline::Train() {
  Corpus real = ReadCorpus(ArtifactPath("real.jsonl"), CorpusRole::kReal);
  const size_t n = real.size();
  CheckDelta(config_, n);
  DpAdamConfig tc = TrainConfigFor(config_, n, StageSeed("train"));
  tc.noise_multiplier = NoiseFor(config_, n, tc);
  ToyLanguageModel model = ToyLanguageModel::Init(config_.model, tc.seed);
  std::ostringstream metrics;
  TrainResult result = ::dpsynth::Train(
      model, real, tc,
      [&](const StepStats& s) { metrics << StepStatsJson(s) << "\n"; });
  SaveModel(model, ArtifactPath("model.dptm"));
  WriteText(ArtifactPath("train_metrics.jsonl"), metrics.str());
  json j = {{"sigma", result.sigma},
            {"q", result.q},
            {"steps", result.steps},
            {"n", n},
            {"batch_size", tc.batch_size},
            {"epochs", tc.epochs},
            {"clip", tc.clip},
            {"calibrated", !config_.train_noise_multiplier.has_value()}};
  if (!config_.train_noise_multiplier) j["target_epsilon"] = config_.train_epsilon;
  WriteText(ArtifactPath("train.json"), j.dump(2) + "\n");
}

void Pipeline::SampleStage() {
  Corpus synthetic;
  if (TrainsGenerator()) {
    ToyLanguageModel model = LoadModel(ArtifactPath("model.dptm"));
    SamplingConfig sc = config_.sampling;
    sc.seed = StageSeed("sample");
    synthetic = Sample(model, sc, config_.sample_count);
  } else {
    synthetic = ReadCorpus(config_.synthetic_corpus, CorpusRole::kSynthetic);
    if (synthetic.empty()) {
      throw Error(ErrorCode::kConfig, "imported synthetic corpus is empty");
    }
  }
  WriteCorpus(synthetic, ArtifactPath("synthetic.jsonl"));
}

void Pipeline::EmbedCorpus(bool real) {
  const std::string corpus_name = real ? "real.jsonl" : "synthetic.jsonl";
  Corpus corpus = ReadCorpus(ArtifactPath(corpus_name),
                             real ? CorpusRole::kReal : CorpusRole::kSynthetic);
  const std::string& external =
      real ? config_.real_embeddings : config_.synthetic_embeddings;
  EmbeddingMatrix m;
  if (external.empty()) {
    m = HashedNgramEmbeddings(corpus, config_.featurizer_dim,
                              config_.featurizer_ngram);
  } else {
    m = ReadEmbeddings(external);
    ValidateAlignment(m, corpus);
    if (!m.AllFinite()) {
      throw Error(ErrorCode::kFormat, external + " contains non-finite values");
    }
  }
  WriteEmbeddings(m, ArtifactPath(real ? "real.dpemb" : "synthetic.dpemb"));
}

void Pipeline::Cluster() {
  EmbeddingMatrix embeddings = ReadEmbeddings(ArtifactPath("synthetic.dpemb"));
  if (config_.k > embeddings.count()) {
    throw Error(ErrorCode::kConfig,
                "clustering.k = " + std::to_string(config_.k) +
                    " exceeds the " + std::to_string(embeddings.count()) +
                    " synthetic records");
  }
  KMeansOptions options;
  options.k = config_.k;
  options.seed = StageSeed("cluster");
  options.max_iters = config_.kmeans_max_iters;
  options.rel_tol = config_.kmeans_rel_tol;
  options.normalize = config_.normalize_embeddings;
  WriteClusterModel(KMeansFit(embeddings, options),
                    ArtifactPath("clusters.dpcm"));
}

void Pipeline::Histogram() {
  ClusterModel model = ReadClusterModel(ArtifactPath("clusters.dpcm"));
  EmbeddingMatrix real = ReadEmbeddings(ArtifactPath("real.dpemb"), model.dim);
  std::vector<uint64_t> raw = BuildHistogram(model, real);
  PrivateHistogram h =
      Privatize(raw, config_.histogram_sigma, StageSeed("histogram"));
  WriteText(ArtifactPath("histogram.json"), SerializeHistogramReport(h));
  WriteText(ArtifactPath("noised_histogram.json"), SerializeHistogramRelease(h));
}

namespace {

struct PlanInputs {
  PrivateHistogram histogram;
  ClusterModel model;
  SelectionPlan plan;
};

PlanInputs LoadPlanInputs(const Pipeline& p) {
  PlanInputs in;
  in.histogram = ReadHistogramReport(p.ArtifactPath("noised_histogram.json"));
  in.model = ReadClusterModel(p.ArtifactPath("clusters.dpcm"));
  if (in.histogram.k != in.model.k) {
    throw Error(ErrorCode::kAlignment,
                "histogram and cluster model disagree on K");
  }
  uint64_t target = p.config().target ? p.config().target : in.histogram.n_real;
  in.plan = MakePlan(in.histogram.densities, GroupSizes(in.model), target);
  return in;
}

}  // namespace

void Pipeline::Plan() {
  PlanInputs in = LoadPlanInputs(*this);
  std::vector<uint64_t> sizes = GroupSizes(in.model);
  const double total = static_cast<double>(in.model.assignments.size());
  std::vector<double> fractions;
  for (uint64_t s : sizes) fractions.push_back(static_cast<double>(s) / total);
  PoolSizeEstimate estimate = RequiredInitialPool(
      in.histogram.densities, fractions, in.plan.target, sizes);
  json j = json::parse(SerializeSelectionReport(in.plan, nullptr));
  j["synthetic_count"] = in.model.assignments.size();
  j["required_initial_pool"] =
      std::isfinite(estimate.estimate) ? json(estimate.estimate) : json(nullptr);
  j["unsatisfiable_clusters"] = estimate.unsatisfiable;
  j["with_replacement"] = config_.with_replacement;
  WriteText(ArtifactPath("plan.json"), j.dump(2) + "\n");
  if (!in.plan.feasible) {
    uint64_t missing = 0;
    for (uint64_t d : in.plan.deficits) missing += d;
    std::cerr << "warning: " << kNeedMoreSamples << " " << missing
              << " records short across clusters\n";
  }
}

void Pipeline::Resample() {
  PlanInputs in = LoadPlanInputs(*this);
  Corpus synthetic =
      ReadCorpus(ArtifactPath("synthetic.jsonl"), CorpusRole::kSynthetic);
  if (synthetic.size() != in.model.assignments.size()) {
    throw Error(ErrorCode::kAlignment,
                "synthetic corpus size differs from the clustered point count");
  }
  SelectionResult result = ::dpsynth::Resample(
      in.plan, in.model, StageSeed("resample"), config_.with_replacement);
  WriteCorpus(SelectedCorpus(synthetic, result), ArtifactPath(kReleaseArtifact));
  WriteText(ArtifactPath("selection.json"),
            SerializeSelectionReport(in.plan, &result));
}

void Pipeline::Account() {
  PrivateHistogram h = ReadHistogramReport(ArtifactPath("noised_histogram.json"));
  CheckDelta(config_, h.n_real);
  std::vector<MechanismSpec> mechanisms;
  if (TrainsGenerator()) {
    json t = ParseJsonFile(ArtifactPath("train.json"));
    double sigma = t.at("sigma").get<double>();
    if (!(sigma > 0.0)) {
      throw Error(ErrorCode::kConfig,
                  "the generator was trained without noise; no finite epsilon");
    }
    MechanismSpec training;
    training.kind = MechanismSpec::Kind::kSubsampledGaussian;
    training.sigma = sigma;
    training.q = t.at("q").get<double>();
    training.repetitions = t.at("steps").get<uint64_t>();
    training.label = "dp_adam";
    mechanisms.push_back(training);
  }
  if (!(h.sigma > 0.0)) {
    throw Error(ErrorCode::kConfig,
                "histogram released without noise; no finite epsilon");
  }
  MechanismSpec release;
  release.kind = MechanismSpec::Kind::kGaussian;
  release.sigma = h.sigma;
  release.sensitivity = 1.0;
  release.label = "histogram";
  mechanisms.push_back(release);
  BudgetReport report = AccountBudget(mechanisms, config_.delta);
  WriteText(ArtifactPath("budget.json"), SerializeBudgetReport(report));
}

void Pipeline::Mauve() {
  Corpus real = ReadCorpus(ArtifactPath("real.jsonl"), CorpusRole::kReal);
  Corpus synthetic =
      ReadCorpus(ArtifactPath("synthetic.jsonl"), CorpusRole::kSynthetic);
  Corpus selected =
      ReadCorpus(ArtifactPath(kReleaseArtifact), CorpusRole::kSelected);
  EmbeddingMatrix real_emb = ReadEmbeddings(ArtifactPath("real.dpemb"));
  EmbeddingMatrix syn_emb =
      ReadEmbeddings(ArtifactPath("synthetic.dpemb"), real_emb.dim());
  if (selected.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "selected corpus is empty");
  }

  std::unordered_map<std::string, size_t> index;
  for (size_t i = 0; i < synthetic.size(); ++i) {
    index.emplace(synthetic.records[i].id, i);
  }
  std::vector<size_t> selected_rows;
  for (const auto& r : selected.records) {
    auto it = index.find(BaseId(r.id));
    if (it == index.end()) {
      throw Error(ErrorCode::kAlignment,
                  "selected record " + r.id + " is not in the synthetic corpus");
    }
    selected_rows.push_back(it->second);
  }

  // Initial corpus subsampled to the selected size.
  const uint64_t seed = StageSeed("mauve");
  std::vector<size_t> perm(synthetic.size());
  for (size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  Rng rng(seed, 1);
  Shuffle(std::span<size_t>(perm), rng);
  perm.resize(std::min(selected.size(), synthetic.size()));
  Corpus initial;
  initial.role = CorpusRole::kSynthetic;
  for (size_t i : perm) initial.records.push_back(synthetic.records[i]);

  SimpleTokenizer tokenizer;
  MauveOptions uni, emb;
  uni.c = config_.mauve_unigram_c;
  emb.c = config_.mauve_embedding_c;
  uni.grid = emb.grid = config_.mauve_grid;
  auto unigram = [&](const Corpus& c) {
    auto [p, q] = UnigramHistograms(c, real, tokenizer);
    return MauveScore(p, q, uni).score;
  };
  auto embedding = [&](const EmbeddingMatrix& m, size_t* bins_used) {
    size_t auto_bins = std::max<size_t>(1, (m.count() + real_emb.count()) / 10);
    QuantizeOptions qo;
    qo.bins = std::min(config_.mauve_bins, auto_bins);
    qo.seed = seed;
    *bins_used = qo.bins;
    auto [p, q] = ClusterHistograms(m, real_emb, qo);
    return MauveScore(p, q, emb).score;
  };
  size_t bins_selected = 0, bins_initial = 0;
  json j;
  j["sizes"] = {{"real", real.size()},
                {"selected", selected.size()},
                {"initial_subsample", initial.size()}};
  j["unigram"] = {{"c", config_.mauve_unigram_c},
                  {"selected", unigram(selected)},
                  {"initial", unigram(initial)}};
  double emb_selected = embedding(syn_emb.Rows(selected_rows), &bins_selected);
  double emb_initial = embedding(syn_emb.Rows(perm), &bins_initial);
  j["embedding"] = {{"c", config_.mauve_embedding_c},
                    {"bins", bins_selected},
                    {"selected", emb_selected},
                    {"initial", emb_initial}};
  j["grid"] = config_.mauve_grid;
  WriteText(ArtifactPath("mauve.json"), j.dump(2) + "\n");
}

void Pipeline::Canary() {
  Corpus real = ReadCorpus(ArtifactPath("real.jsonl"), CorpusRole::kReal);
  if (DedupExact(real).size() != real.size()) {
    throw Error(ErrorCode::kConfig,
                "canary injection needs an exactly deduplicated corpus; "
                "run preprocess first");
  }
  SecretGrammar grammar = config_.canary_words_file.empty()
                              ? SecretGrammar()
                              : SecretGrammar::FromFile(config_.canary_words_file);
  const uint64_t base = StageSeed("canary");
  std::vector<LeakageReport> dp_reports, reference_reports;
  for (size_t i = 0; i < config_.canaries.size(); ++i) {
    const CanarySpec& spec = config_.canaries[i];
    const uint64_t seed = Rng::DeriveSeed(base, i);
    Corpus injected = InjectCanary(real, spec, seed);
    auto evaluate = [&](bool private_model) {
      DpAdamConfig tc = TrainConfigFor(config_, injected.size(),
                                       Rng::DeriveSeed(seed, private_model ? 1 : 2));
      if (private_model) {
        tc.noise_multiplier = NoiseFor(config_, injected.size(), tc);
      } else {
        tc.noise_multiplier = 0.0;
        tc.clip = 1e9;
      }
      ToyLanguageModel model = ToyLanguageModel::Init(config_.model, tc.seed);
      ::dpsynth::Train(model, injected, tc);
      LeakageReport r;
      r.canary_id = spec.id;
      r.repetitions = spec.repetitions;
      r.rank = LossRank(model, spec, seed, grammar);
      SamplingConfig sc = config_.sampling;
      sc.top_p = config_.canary_scan_top_p;
      sc.seed = Rng::DeriveSeed(seed, 3);
      std::vector<std::string> secrets = {spec.secret};
      ScanResult scan =
          ScanUnprompted(model, sc, config_.canary_scan_count, secrets);
      r.leaked_unprompted = scan.found[0];
      r.generations = scan.generations;
      r.leaked_prompted = ScanPrompted(model, spec);
      return r;
    };
    dp_reports.push_back(evaluate(true));
    if (config_.canary_nonprivate_reference) {
      reference_reports.push_back(evaluate(false));
    }
  }
  json j;
  j["private"] = json::parse(SerializeLeakageReports(dp_reports));
  j["nonprivate_reference"] =
      config_.canary_nonprivate_reference
          ? json::parse(SerializeLeakageReports(reference_reports))
          : json(nullptr);
  j["scan_top_p"] = config_.canary_scan_top_p;
  WriteText(ArtifactPath("leakage.json"), j.dump(2) + "\n");
}

void Pipeline::PiiScan() {
  const std::string input =
      config_.pii_corpus == "real" ? "real.jsonl" : kReleaseArtifact;
  Corpus corpus = ReadCorpus(ArtifactPath(input), config_.pii_corpus == "real"
                                                      ? CorpusRole::kReal
                                                      : CorpusRole::kSelected);
  ScreenOptions options = config_.pii_options;
  if (!config_.pii_demonstrations_file.empty()) {
    options.demonstrations = ReadText(config_.pii_demonstrations_file);
  }
  std::optional<ScreenReport> previous;
  const std::string out_path = ArtifactPath("pii.json");
  if (fs::exists(out_path)) previous = ParseScreenReport(ReadText(out_path));
  HttpChatClient client(config_.pii_endpoint);
  ScreenReport report = ScreenCorpus(corpus, client, options,
                                     previous ? &*previous : nullptr);
  WriteText(out_path, SerializeScreenReport(report));
  if (report.failed > 0) {
    deferred_service_error_ =
        std::to_string(report.failed) + " of " +
        std::to_string(report.records.size()) +
        " records could not be screened; rerun pii-scan to resume";
  }
}

void Pipeline::Report() {
  json pre = ParseJsonFile(ArtifactPath("preprocess.json"));
  json plan = ParseJsonFile(ArtifactPath("plan.json"));
  json selection = ParseJsonFile(ArtifactPath("selection.json"));
  json budget = ParseJsonFile(ArtifactPath("budget.json"));
  json mauve = ParseJsonFile(ArtifactPath("mauve.json"));
  Corpus synthetic =
      ReadCorpus(ArtifactPath("synthetic.jsonl"), CorpusRole::kSynthetic);

  json r;
  r["tool_version"] = kToolVersion;
  r["seed"] = config_.seed;
  r["datasets"] = {{"real_input", pre.at("input_records")},
                   {"real", pre.at("output_records")},
                   {"synthetic", synthetic.size()},
                   {"selected", selection.at("actual_size")}};
  r["synthetic_source"] = TrainsGenerator() ? "toy_generator" : "imported";

  const auto deficits = plan.at("deficits").get<std::vector<uint64_t>>();
  uint64_t deficit_total = 0, clusters_short = 0;
  for (uint64_t d : deficits) {
    deficit_total += d;
    if (d > 0) ++clusters_short;
  }
  r["plan"] = {{"target", plan.at("target")},
               {"k", deficits.size()},
               {"feasible", plan.at("feasible")},
               {"total_selected", plan.at("total_selected")},
               {"deficit_total", deficit_total},
               {"clusters_with_deficit", clusters_short},
               {"deficits", deficits},
               {"required_initial_pool", plan.at("required_initial_pool")}};
  r["selection"] = {{"actual_size", selection.at("actual_size")},
                    {"replacement_used", selection.at("replacement_used")}};
  r["mauve"] = mauve;
  r["privacy"] = budget;
  if (!TrainsGenerator()) {
    r["privacy"]["not_covered"] =
        "generation of the imported synthetic corpus is accounted elsewhere";
  }
  const bool has_canary =
      std::any_of(graph_.begin(), graph_.end(),
                  [](const StageSpec& s) { return s.name == "canary"; });
  if (has_canary && fs::exists(ArtifactPath("leakage.json"))) {
    r["leakage"] = ParseJsonFile(ArtifactPath("leakage.json"));
    r["leakage"]["status"] = "completed";
  } else {
    r["leakage"] = {{"status", "skipped"}};
  }
  if (config_.pii_enabled && fs::exists(ArtifactPath("pii.json"))) {
    json pii = ParseJsonFile(ArtifactPath("pii.json"));
    r["pii"] = {{"status", "completed"},
                {"corpus", config_.pii_corpus},
                {"category_counts", pii.at("category_counts")},
                {"instructions_with_findings", pii.at("instructions_with_findings")},
                {"failed", pii.at("failed")}};
  } else {
    r["pii"] = {{"status", "skipped"}};
  }
  WriteText(ArtifactPath("report.json"), r.dump(2) + "\n");
}

}  // namespace dpsynth
