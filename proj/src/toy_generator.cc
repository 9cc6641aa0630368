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

#include "dpsynth/toy_generator.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "byte_io.h"
#include "dpsynth/error.h"
#include "json.hpp"

namespace dpsynth {
namespace {

constexpr std::string_view kMagic{"DPTM1\0", 6};
constexpr uint32_t kVersion = 1;
constexpr uint64_t kInitStream = 0x696e6974;
constexpr uint64_t kNoiseStream = 0x6e6f697365;
constexpr uint64_t kOrderStream = 0x6f72646572;
// Examples whose gradients are held in memory at once inside a step.
constexpr size_t kGradientChunk = 64;

double Norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

std::vector<int> EncodeText(std::string_view text, size_t max_len) {
  size_t n = std::min(text.size(), max_len);
  std::vector<int> tokens(n);
  for (size_t i = 0; i < n; ++i) tokens[i] = static_cast<unsigned char>(text[i]);
  return tokens;
}

ToyLanguageModel::ToyLanguageModel(const ModelShape& shape,
                                   std::vector<double> parameters)
    : shape_(shape), params_(std::move(parameters)) {
  if (shape_.embed_dim == 0 || shape_.hidden_dim == 0 || shape_.max_len == 0) {
    throw Error(ErrorCode::kInvalidArgument, "model dimensions must be positive");
  }
  if (params_.size() != offsets().total) {
    throw Error(ErrorCode::kInvalidArgument,
                "expected " + std::to_string(offsets().total) +
                    " parameters, got " + std::to_string(params_.size()));
  }
}

ToyLanguageModel::Offsets ToyLanguageModel::offsets() const {
  const size_t d = shape_.embed_dim, h = shape_.hidden_dim, v = kVocabSize;
  Offsets o;
  o.embed = 0;
  o.w1 = o.embed + v * d;
  o.b1 = o.w1 + h * d;
  o.w2 = o.b1 + h;
  o.b2 = o.w2 + v * h;
  o.total = o.b2 + v;
  return o;
}

ToyLanguageModel ToyLanguageModel::Init(const ModelShape& shape,
                                        uint64_t seed) {
  const size_t d = shape.embed_dim, h = shape.hidden_dim, v = kVocabSize;
  std::vector<double> p(v * d + h * d + h + v * h + v, 0.0);
  Rng rng(seed, kInitStream);
  size_t i = 0;
  for (size_t k = 0; k < v * d; ++k) p[i++] = rng.Normal();
  const double s1 = 1.0 / std::sqrt(static_cast<double>(d));
  for (size_t k = 0; k < h * d; ++k) p[i++] = s1 * rng.Normal();
  i += h;
  const double s2 = 1.0 / std::sqrt(static_cast<double>(h));
  for (size_t k = 0; k < v * h; ++k) p[i++] = s2 * rng.Normal();
  return ToyLanguageModel(shape, std::move(p));
}

std::vector<double> ToyLanguageModel::NextTokenLogits(int prev) const {
  if (prev < 0 || prev >= kVocabSize) {
    throw Error(ErrorCode::kInvalidArgument, "unknown token " + std::to_string(prev));
  }
  const Offsets o = offsets();
  const size_t d = shape_.embed_dim, hd = shape_.hidden_dim;
  const double* e = params_.data() + o.embed + static_cast<size_t>(prev) * d;
  std::vector<double> h(hd);
  for (size_t r = 0; r < hd; ++r) {
    const double* w = params_.data() + o.w1 + r * d;
    double s = params_[o.b1 + r];
    for (size_t c = 0; c < d; ++c) s += w[c] * e[c];
    h[r] = std::tanh(s);
  }
  std::vector<double> logits(kVocabSize);
  for (size_t v = 0; v < kVocabSize; ++v) {
    const double* w = params_.data() + o.w2 + v * hd;
    double s = params_[o.b2 + v];
    for (size_t r = 0; r < hd; ++r) s += w[r] * h[r];
    logits[v] = s;
  }
  return logits;
}

void ToyLanguageModel::CheckTokens(std::span<const int> tokens) const {
  if (tokens.size() > shape_.max_len) {
    throw Error(ErrorCode::kInvalidArgument,
                "sequence of " + std::to_string(tokens.size()) +
                    " tokens exceeds max_len " + std::to_string(shape_.max_len));
  }
  for (int t : tokens) {
    if (t < 0 || t >= 256) {
      throw Error(ErrorCode::kInvalidArgument, "unknown token " + std::to_string(t));
    }
  }
}

double ToyLanguageModel::Accumulate(std::span<const int> tokens,
                                    std::span<double> grad) const {
  const Offsets o = offsets();
  const size_t d = shape_.embed_dim, hd = shape_.hidden_dim;
  const double inv_len = 1.0 / static_cast<double>(shape_.max_len);
  const double* p = params_.data();

  // The loss only depends on (prev, next) pairs, so work per distinct prev.
  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(tokens.size() + 1);
  int prev = kBos;
  for (int t : tokens) {
    pairs.emplace_back(prev, t);
    prev = t;
  }
  pairs.emplace_back(prev, kEos);
  std::sort(pairs.begin(), pairs.end());

  std::vector<double> h(hd), logits(kVocabSize), g(kVocabSize), dh(hd);
  double loss = 0.0;
  for (size_t i = 0; i < pairs.size();) {
    const int a = pairs[i].first;
    size_t j = i;
    while (j < pairs.size() && pairs[j].first == a) ++j;
    const double* e = p + o.embed + static_cast<size_t>(a) * d;
    for (size_t r = 0; r < hd; ++r) {
      const double* w = p + o.w1 + r * d;
      double s = p[o.b1 + r];
      for (size_t c = 0; c < d; ++c) s += w[c] * e[c];
      h[r] = std::tanh(s);
    }
    double mx = -std::numeric_limits<double>::infinity();
    for (size_t v = 0; v < kVocabSize; ++v) {
      const double* w = p + o.w2 + v * hd;
      double s = p[o.b2 + v];
      for (size_t r = 0; r < hd; ++r) s += w[r] * h[r];
      logits[v] = s;
      mx = std::max(mx, s);
    }
    double z = 0.0;
    for (size_t v = 0; v < kVocabSize; ++v) z += std::exp(logits[v] - mx);
    const double lse = mx + std::log(z);
    for (size_t k = i; k < j; ++k) loss += lse - logits[pairs[k].second];

    if (!grad.empty()) {
      const double count = static_cast<double>(j - i);
      for (size_t v = 0; v < kVocabSize; ++v) {
        g[v] = count * std::exp(logits[v] - lse) * inv_len;
      }
      for (size_t k = i; k < j; ++k) g[pairs[k].second] -= inv_len;
      std::fill(dh.begin(), dh.end(), 0.0);
      for (size_t v = 0; v < kVocabSize; ++v) {
        grad[o.b2 + v] += g[v];
        const double* w = p + o.w2 + v * hd;
        double* gw = grad.data() + o.w2 + v * hd;
        for (size_t r = 0; r < hd; ++r) {
          gw[r] += g[v] * h[r];
          dh[r] += w[r] * g[v];
        }
      }
      double* ge = grad.data() + o.embed + static_cast<size_t>(a) * d;
      for (size_t r = 0; r < hd; ++r) {
        const double pre = dh[r] * (1.0 - h[r] * h[r]);
        grad[o.b1 + r] += pre;
        const double* w = p + o.w1 + r * d;
        double* gw = grad.data() + o.w1 + r * d;
        for (size_t c = 0; c < d; ++c) {
          gw[c] += pre * e[c];
          ge[c] += w[c] * pre;
        }
      }
    }
    i = j;
  }
  return loss * inv_len;
}

double ToyLanguageModel::SequenceLoss(std::span<const int> tokens) const {
  CheckTokens(tokens);
  return Accumulate(tokens, {});
}

double ToyLanguageModel::Gradient(std::span<const int> tokens,
                                  std::span<double> grad) const {
  CheckTokens(tokens);
  if (grad.size() != params_.size()) {
    throw Error(ErrorCode::kInvalidArgument, "gradient buffer has wrong size");
  }
  std::fill(grad.begin(), grad.end(), 0.0);
  return Accumulate(tokens, grad);
}

std::vector<uint8_t> EncodeModel(const ToyLanguageModel& model) {
  internal::ByteWriter w;
  w.Bytes(kMagic);
  w.U32(kVersion);
  w.U32(kVocabSize);
  w.U32(static_cast<uint32_t>(model.shape().embed_dim));
  w.U32(static_cast<uint32_t>(model.shape().hidden_dim));
  w.U32(static_cast<uint32_t>(model.shape().max_len));
  for (double v : model.parameters()) w.F32(static_cast<float>(v));
  return std::move(w.bytes());
}

ToyLanguageModel DecodeModel(std::span<const uint8_t> bytes) {
  internal::ByteReader r(bytes, "model checkpoint");
  r.ExpectMagic(kMagic);
  if (r.U32() != kVersion) {
    throw Error(ErrorCode::kFormat, "unsupported model checkpoint version");
  }
  if (r.U32() != kVocabSize) {
    throw Error(ErrorCode::kFormat, "model checkpoint has a foreign vocabulary");
  }
  ModelShape shape;
  shape.embed_dim = r.U32();
  shape.hidden_dim = r.U32();
  shape.max_len = r.U32();
  const size_t d = shape.embed_dim, h = shape.hidden_dim, v = kVocabSize;
  std::vector<double> params(v * d + h * d + h + v * h + v);
  for (double& p : params) p = r.F32();
  r.ExpectEnd();
  return ToyLanguageModel(shape, std::move(params));
}

void SaveModel(const ToyLanguageModel& model, const std::string& path) {
  internal::WriteFileBytes(path, EncodeModel(model));
}

ToyLanguageModel LoadModel(const std::string& path) {
  return DecodeModel(internal::ReadFileBytes(path));
}

BigramTable::BigramTable(const ToyLanguageModel& model)
    : log_probs_(static_cast<size_t>(kVocabSize) * kVocabSize),
      max_len_(model.shape().max_len) {
  for (int a = 0; a < kVocabSize; ++a) {
    std::vector<double> logits = model.NextTokenLogits(a);
    double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double l : logits) z += std::exp(l - mx);
    const double lse = mx + std::log(z);
    for (int b = 0; b < kVocabSize; ++b) {
      log_probs_[static_cast<size_t>(a) * kVocabSize + b] = logits[b] - lse;
    }
  }
}

double BigramTable::SequenceLoss(std::span<const int> tokens) const {
  double loss = 0.0;
  int prev = kBos;
  for (int t : tokens) {
    loss -= LogProb(prev, t);
    prev = t;
  }
  loss -= LogProb(prev, kEos);
  return loss / static_cast<double>(max_len_);
}

void AdamUpdate(std::span<double> params, AdamState& state,
                std::span<const double> gradient, const DpAdamConfig& config) {
  if (state.m.size() != params.size()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
    state.t = 0;
  }
  ++state.t;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (size_t i = 0; i < params.size(); ++i) {
    const double g = gradient[i];
    state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * g;
    state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * g * g;
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.adam_eps);
  }
}

StepStats DpAdamStep(ToyLanguageModel& model, AdamState& state,
                     std::span<const std::vector<int>> batch,
                     const DpAdamConfig& config, Rng& noise) {
  if (batch.empty()) throw Error(ErrorCode::kInvalidArgument, "empty batch");
  if (!(config.clip > 0.0) || !(config.noise_multiplier >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "need clip > 0 and sigma >= 0");
  }
  const size_t n_params = model.num_parameters();
  const double clip = config.clip;
  std::vector<double> sum(n_params, 0.0);
  StepStats stats;
  std::vector<double> grads(std::min(batch.size(), kGradientChunk) * n_params);
  std::vector<double> losses(batch.size());
  double loss_total = 0.0;

  for (size_t start = 0; start < batch.size(); start += kGradientChunk) {
    const size_t end = std::min(batch.size(), start + kGradientChunk);
    const auto chunk = static_cast<ptrdiff_t>(end - start);
#pragma omp parallel for schedule(dynamic) if (config.parallel)
    for (ptrdiff_t i = 0; i < chunk; ++i) {
      std::span<double> g(grads.data() + static_cast<size_t>(i) * n_params,
                          n_params);
      losses[start + i] = model.Gradient(batch[start + i], g);
    }
    // Clip and sum in batch order.
    for (size_t i = start; i < end; ++i) {
      std::span<double> g(grads.data() + (i - start) * n_params, n_params);
      const double norm = Norm(g);
      const double scale = norm > clip ? clip / norm : 1.0;
      if (scale < 1.0) ++stats.clipped;
      double contribution = 0.0;
      for (size_t k = 0; k < n_params; ++k) {
        const double c = scale * g[k];
        contribution += c * c;
        sum[k] += c;
      }
      contribution = std::sqrt(contribution);
      if (contribution > clip * (1.0 + 1e-9)) {
        throw Error(ErrorCode::kInvalidArgument,
                    "clipped contribution exceeds the clipping threshold");
      }
      stats.max_gradient_norm = std::max(stats.max_gradient_norm, norm);
      stats.max_contribution_norm =
          std::max(stats.max_contribution_norm, contribution);
      loss_total += losses[i];
    }
  }
  const double noise_std = config.noise_multiplier * clip;
  if (noise_std > 0.0) {
    for (double& s : sum) s += noise_std * noise.Normal();
  }
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  for (double& s : sum) s *= inv_b;
  AdamUpdate(model.mutable_parameters(), state, sum, config);
  stats.mean_loss = loss_total * inv_b;
  return stats;
}

TrainResult Train(ToyLanguageModel& model, const Corpus& corpus,
                  const DpAdamConfig& config,
                  const std::function<void(const StepStats&)>& on_step) {
  const size_t n = corpus.size();
  const size_t b = config.batch_size;
  if (n == 0) throw Error(ErrorCode::kInvalidArgument, "empty training corpus");
  if (b == 0 || b > n) {
    throw Error(ErrorCode::kInvalidArgument,
                "batch size must lie in [1, " + std::to_string(n) + "]");
  }
  std::vector<std::vector<int>> encoded;
  encoded.reserve(n);
  for (const auto& record : corpus.records) {
    encoded.push_back(EncodeText(record.text, model.shape().max_len));
  }
  const size_t steps_per_epoch = (n + b - 1) / b;
  TrainResult result;
  result.sigma = config.noise_multiplier;
  result.q = static_cast<double>(b) / static_cast<double>(n);
  result.steps = config.epochs * steps_per_epoch;

  AdamState state;
  Rng noise(config.seed, kNoiseStream);
  std::vector<size_t> order(n);
  std::vector<std::vector<int>> batch(b);
  uint64_t step = 0;
  for (size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), size_t{0});
    Rng shuffle(Rng::DeriveSeed(config.seed, kOrderStream), epoch);
    Shuffle(std::span<size_t>(order), shuffle);
    for (size_t s = 0; s < steps_per_epoch; ++s) {
      for (size_t j = 0; j < b; ++j) batch[j] = encoded[order[(s * b + j) % n]];
      StepStats stats = DpAdamStep(model, state, batch, config, noise);
      stats.step = step++;
      if (on_step) on_step(stats);
      result.trace.push_back(stats);
    }
  }
  return result;
}

std::string StepStatsJson(const StepStats& stats) {
  nlohmann::json j;
  j["step"] = stats.step;
  j["loss"] = stats.mean_loss;
  j["max_gradient_norm"] = stats.max_gradient_norm;
  j["max_contribution_norm"] = stats.max_contribution_norm;
  j["clipped"] = stats.clipped;
  return j.dump();
}

NucleusSampler::NucleusSampler(const ToyLanguageModel& model,
                               const SamplingConfig& config)
    : rows_(kVocabSize), greedy_(kVocabSize, kEos),
      max_len_(config.max_len == 0 ? model.shape().max_len : config.max_len) {
  if (!(config.top_p > 0.0) || !(config.top_p <= 1.0) ||
      !(config.temperature > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "sampling needs 0 < top_p <= 1 and temperature > 0");
  }
  for (int a = 0; a < kVocabSize; ++a) {
    if (a == kEos || a == kPad) continue;
    std::vector<double> logits = model.NextTokenLogits(a);
    logits[kBos] = -std::numeric_limits<double>::infinity();
    logits[kPad] = -std::numeric_limits<double>::infinity();
    double mx = -std::numeric_limits<double>::infinity();
    for (double& l : logits) {
      l /= config.temperature;
      mx = std::max(mx, l);
    }
    std::vector<double> probs(kVocabSize);
    double z = 0.0;
    for (int v = 0; v < kVocabSize; ++v) z += probs[v] = std::exp(logits[v] - mx);
    for (double& p : probs) p /= z;
    std::vector<int> ids(kVocabSize);
    std::iota(ids.begin(), ids.end(), 0);
    std::stable_sort(ids.begin(), ids.end(),
                     [&](int x, int y) { return probs[x] > probs[y]; });
    greedy_[a] = ids[0];
    Row& row = rows_[a];
    double cumulative = 0.0;
    for (int id : ids) {
      cumulative += probs[id];
      row.tokens.push_back(id);
      row.cumulative.push_back(cumulative);
      // Slack so that e.g. 0.6 + 0.3 counts as reaching 0.9.
      if (cumulative + 1e-9 >= config.top_p) break;
    }
    for (double& c : row.cumulative) c /= cumulative;
    row.cumulative.back() = 1.0;
  }
}

int NucleusSampler::Next(int prev, Rng& rng) const {
  const Row& row = rows_[prev];
  const double u = rng.Uniform();
  auto it = std::upper_bound(row.cumulative.begin(), row.cumulative.end(), u);
  return row.tokens[static_cast<size_t>(it - row.cumulative.begin())];
}

int NucleusSampler::Greedy(int prev) const { return greedy_[prev]; }

std::span<const int> NucleusSampler::Nucleus(int prev) const {
  return rows_[prev].tokens;
}

std::string NucleusSampler::Generate(Rng& rng, std::string_view prompt) const {
  std::string out;
  if (prompt.size() >= max_len_) return out;
  int prev = prompt.empty() ? kBos : static_cast<unsigned char>(prompt.back());
  const size_t budget = max_len_ - prompt.size();
  while (out.size() < budget) {
    int t = Next(prev, rng);
    if (t == kEos) break;
    out.push_back(static_cast<char>(t));
    prev = t;
  }
  return out;
}

std::string NucleusSampler::GreedyComplete(std::string_view prompt) const {
  std::string out;
  if (prompt.size() >= max_len_) return out;
  int prev = prompt.empty() ? kBos : static_cast<unsigned char>(prompt.back());
  const size_t budget = max_len_ - prompt.size();
  while (out.size() < budget) {
    int t = Greedy(prev);
    if (t == kEos) break;
    out.push_back(static_cast<char>(t));
    prev = t;
  }
  return out;
}

Corpus Sample(const ToyLanguageModel& model, const SamplingConfig& config,
              size_t count, bool parallel) {
  constexpr int kMaxAttempts = 1000;
  NucleusSampler sampler(model, config);
  Corpus corpus;
  corpus.role = CorpusRole::kSynthetic;
  corpus.records.resize(count);
  bool all_empty = false;
#pragma omp parallel for schedule(dynamic, 256) if (parallel)
  for (ptrdiff_t i = 0; i < static_cast<ptrdiff_t>(count); ++i) {
    Rng rng(config.seed, static_cast<uint64_t>(i) + 1);
    std::string text;
    for (int attempt = 0; attempt < kMaxAttempts && text.empty(); ++attempt) {
      text = sampler.Generate(rng);
    }
    if (text.empty()) {
#pragma omp atomic write
      all_empty = true;
    }
    corpus.records[i].id = "syn-" + std::to_string(i);
    corpus.records[i].text = std::move(text);
  }
  if (all_empty) {
    throw Error(ErrorCode::kInvalidArgument,
                "model produced only empty generations");
  }
  return corpus;
}

}  // namespace dpsynth
