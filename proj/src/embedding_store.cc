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

#include "dpsynth/embedding_store.h"

#include <openssl/evp.h>

#include <bit>
#include <cmath>
#include <cstring>

#include "byte_io.h"
#include "dpsynth/error.h"

namespace dpsynth {
namespace {

constexpr char kMagic[6] = {'D', 'P', 'E', 'B', '1', '\0'};
constexpr uint32_t kVersion = 1;
constexpr uint8_t kDtypeF32 = 1;

void PutU32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

uint32_t GetU32(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) |
         (static_cast<uint32_t>(p[3]) << 24);
}

}  // namespace

Fingerprint CorpusFingerprint(const Corpus& corpus) {
  std::string joined;
  for (size_t i = 0; i < corpus.records.size(); ++i) {
    if (i) joined.push_back('\n');
    joined += corpus.records[i].id;
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(joined.data(), joined.size(), digest, &length, EVP_sha256(),
                 nullptr) != 1) {
    throw Error(ErrorCode::kIo, "SHA-256 digest failed");
  }
  Fingerprint fp;
  std::memcpy(fp.data(), digest, fp.size());
  return fp;
}

std::string FingerprintHex(const Fingerprint& fingerprint) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (uint8_t b : fingerprint) {
    out.push_back(kHex[b >> 4]);
    out.push_back(kHex[b & 15]);
  }
  return out;
}

EmbeddingMatrix::EmbeddingMatrix(size_t count, size_t dim,
                                 std::vector<float> data,
                                 Fingerprint fingerprint)
    : count_(count), dim_(dim), data_(std::move(data)),
      fingerprint_(fingerprint) {
  if (data_.size() != count_ * dim_) {
    throw Error(ErrorCode::kDimMismatch,
                "embedding data has " + std::to_string(data_.size()) +
                    " values, expected " + std::to_string(count_ * dim_));
  }
}

bool EmbeddingMatrix::AllFinite() const {
  for (float v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

EmbeddingMatrix EmbeddingMatrix::Rows(std::span<const size_t> indices) const {
  std::vector<float> out;
  out.reserve(indices.size() * dim_);
  for (size_t i : indices) {
    auto r = row(i);
    out.insert(out.end(), r.begin(), r.end());
  }
  return EmbeddingMatrix(indices.size(), dim_, std::move(out));
}

std::vector<uint8_t> EncodeEmbeddings(const EmbeddingMatrix& matrix) {
  if (!matrix.AllFinite()) {
    throw Error(ErrorCode::kInvalidArgument,
                "embedding matrix contains NaN or Inf");
  }
  std::vector<uint8_t> out;
  out.reserve(kEmbeddingHeaderSize + matrix.data().size() * 4);
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  PutU32(out, kVersion);
  PutU32(out, static_cast<uint32_t>(matrix.count()));
  PutU32(out, static_cast<uint32_t>(matrix.dim()));
  out.push_back(kDtypeF32);
  out.insert(out.end(), matrix.fingerprint().begin(),
             matrix.fingerprint().end());
  for (float v : matrix.data()) PutU32(out, std::bit_cast<uint32_t>(v));
  return out;
}

EmbeddingMatrix DecodeEmbeddings(std::span<const uint8_t> bytes,
                                 std::optional<size_t> expected_dim) {
  if (bytes.size() >= sizeof(kMagic) &&
      std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw Error(ErrorCode::kFormat, "bad magic: not a DPEB1 embedding file");
  }
  if (bytes.size() < kEmbeddingHeaderSize) {
    throw Error(ErrorCode::kTruncated, "embedding header truncated");
  }
  const uint8_t* p = bytes.data() + sizeof(kMagic);
  uint32_t version = GetU32(p);
  uint32_t count = GetU32(p + 4);
  uint32_t dim = GetU32(p + 8);
  uint8_t dtype = p[12];
  if (version != kVersion) {
    throw Error(ErrorCode::kFormat,
                "unsupported embedding version " + std::to_string(version));
  }
  if (dtype != kDtypeF32) {
    throw Error(ErrorCode::kFormat,
                "unsupported dtype tag " + std::to_string(dtype));
  }
  if (expected_dim && *expected_dim != dim) {
    throw Error(ErrorCode::kDimMismatch,
                "embedding dim " + std::to_string(dim) + ", expected " +
                    std::to_string(*expected_dim));
  }
  Fingerprint fp;
  std::memcpy(fp.data(), p + 13, fp.size());
  uint64_t values = static_cast<uint64_t>(count) * dim;
  uint64_t need = kEmbeddingHeaderSize + values * 4;
  if (bytes.size() < need) {
    throw Error(ErrorCode::kTruncated,
                "embedding payload truncated: " + std::to_string(bytes.size()) +
                    " bytes, expected " + std::to_string(need));
  }
  if (bytes.size() > need) {
    throw Error(ErrorCode::kFormat, "trailing bytes after embedding payload");
  }
  std::vector<float> data(values);
  const uint8_t* payload = bytes.data() + kEmbeddingHeaderSize;
  for (uint64_t i = 0; i < values; ++i) {
    data[i] = std::bit_cast<float>(GetU32(payload + 4 * i));
  }
  EmbeddingMatrix matrix(count, dim, std::move(data), fp);
  if (!matrix.AllFinite()) {
    throw Error(ErrorCode::kFormat, "embedding file contains NaN or Inf");
  }
  return matrix;
}

void WriteEmbeddings(const EmbeddingMatrix& matrix, const std::string& path) {
  internal::WriteFileBytes(path, EncodeEmbeddings(matrix));
}

EmbeddingMatrix ReadEmbeddings(const std::string& path,
                               std::optional<size_t> expected_dim) {
  return DecodeEmbeddings(internal::ReadFileBytes(path), expected_dim);
}

void ValidateAlignment(const EmbeddingMatrix& matrix, const Corpus& corpus) {
  if (matrix.count() != corpus.size()) {
    throw Error(ErrorCode::kAlignment,
                "embedding rows: expected " + std::to_string(corpus.size()) +
                    ", found " + std::to_string(matrix.count()));
  }
  Fingerprint expected = CorpusFingerprint(corpus);
  if (expected != matrix.fingerprint()) {
    throw Error(ErrorCode::kAlignment,
                "corpus fingerprint: expected " + FingerprintHex(expected) +
                    ", found " + FingerprintHex(matrix.fingerprint()));
  }
}

}  // namespace dpsynth
