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

#ifndef DPSYNTH_CORPUS_H_
#define DPSYNTH_CORPUS_H_

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dpsynth/tokenizer.h"

namespace dpsynth {

struct InstructionRecord {
  std::string id;
  std::string text;
  // Optional provenance tags, e.g. "source", "language", "moderation".
  std::map<std::string, std::string> meta;

  bool operator==(const InstructionRecord&) const = default;
};

enum class CorpusRole { kReal, kSynthetic, kSelected };

std::string_view CorpusRoleName(CorpusRole role);
CorpusRole ParseCorpusRole(std::string_view name);

// Record order is significant: row i of an aligned EmbeddingMatrix
// describes records[i].
struct Corpus {
  std::vector<InstructionRecord> records;
  CorpusRole role = CorpusRole::kReal;

  size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
  bool operator==(const Corpus&) const = default;
};

// Throws kFormat if ids repeat or a text is empty.
void ValidateCorpus(const Corpus& corpus);

// Line-delimited JSON: one {"id", "text", "meta"?} object per line.
Corpus ReadCorpus(const std::string& path, CorpusRole role);
void WriteCorpus(const Corpus& corpus, const std::string& path);
Corpus ParseCorpus(std::string_view jsonl, CorpusRole role);
std::string SerializeCorpus(const Corpus& corpus);

// Keeps the first occurrence of each exact text.
Corpus DedupExact(const Corpus& corpus);

// Scans in order and drops a record iff one of its token n-grams already
// occurs in a previously kept record. Records shorter than n tokens have
// no n-grams and are always kept.
Corpus DedupNgram(const Corpus& corpus, const Tokenizer& tokenizer,
                  size_t n = 10);

// Keeps records with strictly more than `min_tokens` tokens.
Corpus FilterMinTokens(const Corpus& corpus, size_t min_tokens,
                       const Tokenizer& tokenizer);

// Literal text with `*` gaps; each `*` matches one or more characters.
// Matching is ASCII case-insensitive and may start anywhere in the text.
class WildcardPattern {
 public:
  // Throws kConfig naming the pattern if it is empty or has no literal text.
  static WildcardPattern Parse(std::string_view pattern);

  bool Matches(std::string_view text) const;
  const std::string& source() const { return source_; }

 private:
  struct Piece {
    size_t min_gap = 0;   // wildcard characters required before `literal`
    std::string literal;  // lowercased
  };

  std::string source_;
  std::vector<Piece> pieces_;
  size_t trailing_gap_ = 0;
};

// Drops records matching any pattern.
Corpus FilterPatterns(const Corpus& corpus,
                      std::span<const std::string> patterns);

// Drops records whose meta[key] is one of `rejected`; records without the
// key are kept. Used for language and moderation tags.
Corpus FilterMetaReject(const Corpus& corpus, const std::string& key,
                        std::span<const std::string> rejected);
// Keeps only records whose meta[key] is one of `accepted`.
Corpus FilterMetaAccept(const Corpus& corpus, const std::string& key,
                        std::span<const std::string> accepted);

struct PreprocessOptions {
  size_t ngram = 10;
  size_t min_tokens = 0;
  std::vector<std::string> patterns;
  std::string language_key = "language";
  std::vector<std::string> languages;  // empty: no language filter
  std::string moderation_key = "moderation";
  std::vector<std::string> moderation_reject = {"flagged"};
};

// Metadata filters, exact dedup, n-gram dedup, then token/pattern filters.
Corpus Preprocess(const Corpus& corpus, const PreprocessOptions& options,
                  const Tokenizer& tokenizer);

}  // namespace dpsynth

#endif  // DPSYNTH_CORPUS_H_
