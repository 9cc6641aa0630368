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

#ifndef DPSYNTH_EMBEDDING_STORE_H_
#define DPSYNTH_EMBEDDING_STORE_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dpsynth/corpus.h"

namespace dpsynth {

// First 16 bytes of SHA-256 over the record ids joined by '\n' (no
// trailing newline). Order-sensitive by construction.
using Fingerprint = std::array<uint8_t, 16>;

Fingerprint CorpusFingerprint(const Corpus& corpus);
std::string FingerprintHex(const Fingerprint& fingerprint);

// Dense row-major float32 matrix; row i embeds record i of the aligned
// corpus.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  EmbeddingMatrix(size_t count, size_t dim, std::vector<float> data,
                  Fingerprint fingerprint = {});

  size_t count() const { return count_; }
  size_t dim() const { return dim_; }
  std::span<const float> data() const { return data_; }
  std::span<float> mutable_data() { return data_; }
  std::span<const float> row(size_t i) const {
    return {data_.data() + i * dim_, dim_};
  }
  const Fingerprint& fingerprint() const { return fingerprint_; }
  void set_fingerprint(const Fingerprint& fp) { fingerprint_ = fp; }

  bool AllFinite() const;
  // Gathers the given rows into a new matrix with a zero fingerprint.
  EmbeddingMatrix Rows(std::span<const size_t> indices) const;

  bool operator==(const EmbeddingMatrix&) const = default;

 private:
  size_t count_ = 0;
  size_t dim_ = 0;
  std::vector<float> data_;
  Fingerprint fingerprint_{};
};

// Binary layout (little-endian):
//   "DPEB1\0" | u32 version=1 | u32 count | u32 dim | u8 dtype=1 (f32) |
//   16-byte fingerprint | count*dim f32, row-major
inline constexpr size_t kEmbeddingHeaderSize = 6 + 4 + 4 + 4 + 1 + 16;

std::vector<uint8_t> EncodeEmbeddings(const EmbeddingMatrix& matrix);
EmbeddingMatrix DecodeEmbeddings(std::span<const uint8_t> bytes,
                                 std::optional<size_t> expected_dim = {});

// Rejects non-finite matrices (kInvalidArgument) before touching the file.
void WriteEmbeddings(const EmbeddingMatrix& matrix, const std::string& path);
// kFormat on bad magic/version/dtype, kTruncated on short files,
// kDimMismatch if `expected_dim` is given and differs.
EmbeddingMatrix ReadEmbeddings(const std::string& path,
                               std::optional<size_t> expected_dim = {});

// Throws kAlignment with expected vs found when the row count or the
// fingerprint disagrees with `corpus`.
void ValidateAlignment(const EmbeddingMatrix& matrix, const Corpus& corpus);

}  // namespace dpsynth

#endif  // DPSYNTH_EMBEDDING_STORE_H_
