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

#include "dpsynth/corpus.h"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "dpsynth/error.h"
#include "json.hpp"

namespace dpsynth {
namespace {

using nlohmann::json;

char AsciiLower(char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

std::string Lowercase(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), AsciiLower);
  return out;
}

bool Contains(std::span<const std::string> values, const std::string& v) {
  return std::find(values.begin(), values.end(), v) != values.end();
}

template <typename Keep>
Corpus FilterRecords(const Corpus& corpus, Keep keep) {
  Corpus out;
  out.role = corpus.role;
  for (const auto& record : corpus.records) {
    if (keep(record)) out.records.push_back(record);
  }
  return out;
}

}  // namespace

std::string_view CorpusRoleName(CorpusRole role) {
  switch (role) {
    case CorpusRole::kReal: return "real";
    case CorpusRole::kSynthetic: return "synthetic";
    case CorpusRole::kSelected: return "selected";
  }
  return "real";
}

CorpusRole ParseCorpusRole(std::string_view name) {
  if (name == "real") return CorpusRole::kReal;
  if (name == "synthetic") return CorpusRole::kSynthetic;
  if (name == "selected") return CorpusRole::kSelected;
  throw Error(ErrorCode::kConfig, "unknown corpus role: " + std::string(name));
}

void ValidateCorpus(const Corpus& corpus) {
  std::unordered_set<std::string_view> ids;
  for (const auto& record : corpus.records) {
    if (record.text.empty()) {
      throw Error(ErrorCode::kFormat, "record " + record.id + " has empty text");
    }
    if (!ids.insert(record.id).second) {
      throw Error(ErrorCode::kFormat, "duplicate record id " + record.id);
    }
  }
}

Corpus ParseCorpus(std::string_view jsonl, CorpusRole role) {
  Corpus corpus;
  corpus.role = role;
  std::istringstream in{std::string(jsonl)};
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kFormat, "corpus line " + std::to_string(line_no) +
                                          ": " + e.what());
    }
    if (!obj.is_object() || !obj.contains("id") || !obj.contains("text") ||
        !obj["id"].is_string() || !obj["text"].is_string()) {
      throw Error(ErrorCode::kFormat,
                  "corpus line " + std::to_string(line_no) +
                      ": expected string fields 'id' and 'text'");
    }
    InstructionRecord record;
    record.id = obj["id"].get<std::string>();
    record.text = obj["text"].get<std::string>();
    if (obj.contains("meta") && !obj["meta"].is_null()) {
      if (!obj["meta"].is_object()) {
        throw Error(ErrorCode::kFormat, "corpus line " +
                                            std::to_string(line_no) +
                                            ": 'meta' must be an object");
      }
      for (const auto& [key, value] : obj["meta"].items()) {
        record.meta[key] =
            value.is_string() ? value.get<std::string>() : value.dump();
      }
    }
    corpus.records.push_back(std::move(record));
  }
  ValidateCorpus(corpus);
  return corpus;
}

std::string SerializeCorpus(const Corpus& corpus) {
  std::string out;
  for (const auto& record : corpus.records) {
    json obj;
    obj["id"] = record.id;
    obj["text"] = record.text;
    if (!record.meta.empty()) obj["meta"] = record.meta;
    out += obj.dump(-1, ' ', false, json::error_handler_t::replace);
    out += '\n';
  }
  return out;
}

Corpus ReadCorpus(const std::string& path, CorpusRole role) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open corpus " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return ParseCorpus(buffer.str(), role);
}

void WriteCorpus(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write corpus " + path);
  out << SerializeCorpus(corpus);
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path);
}

Corpus DedupExact(const Corpus& corpus) {
  std::unordered_set<std::string_view> seen;
  return FilterRecords(corpus, [&](const InstructionRecord& r) {
    return seen.insert(r.text).second;
  });
}

Corpus DedupNgram(const Corpus& corpus, const Tokenizer& tokenizer, size_t n) {
  if (n == 0) throw Error(ErrorCode::kInvalidArgument, "n-gram size must be >= 1");
  std::unordered_set<std::string> seen;
  Corpus out;
  out.role = corpus.role;
  std::vector<std::string> grams;
  for (const auto& record : corpus.records) {
    std::vector<std::string> tokens = tokenizer.Tokenize(record.text);
    grams.clear();
    bool duplicate = false;
    for (size_t start = 0; start + n <= tokens.size(); ++start) {
      std::string gram;
      for (size_t k = 0; k < n; ++k) {
        if (k) gram.push_back('\x1f');
        gram += tokens[start + k];
      }
      if (seen.contains(gram)) {
        duplicate = true;
        break;
      }
      grams.push_back(std::move(gram));
    }
    if (duplicate) continue;
    for (auto& g : grams) seen.insert(std::move(g));
    out.records.push_back(record);
  }
  return out;
}

Corpus FilterMinTokens(const Corpus& corpus, size_t min_tokens,
                       const Tokenizer& tokenizer) {
  return FilterRecords(corpus, [&](const InstructionRecord& r) {
    return tokenizer.Tokenize(r.text).size() > min_tokens;
  });
}

WildcardPattern WildcardPattern::Parse(std::string_view pattern) {
  WildcardPattern p;
  p.source_ = std::string(pattern);
  size_t gap = 0;
  std::string literal;
  for (char c : pattern) {
    if (c == '*') {
      if (!literal.empty()) {
        p.pieces_.push_back({gap, Lowercase(literal)});
        literal.clear();
        gap = 0;
      }
      ++gap;
    } else {
      literal.push_back(c);
    }
  }
  if (!literal.empty()) {
    p.pieces_.push_back({gap, Lowercase(literal)});
    gap = 0;
  }
  p.trailing_gap_ = gap;
  bool has_literal = std::any_of(
      p.pieces_.begin(), p.pieces_.end(), [](const Piece& piece) {
        return piece.literal.find_first_not_of(" \t\r\n") != std::string::npos;
      });
  if (!has_literal) {
    throw Error(ErrorCode::kConfig,
                "invalid pattern '" + p.source_ + "': no literal text");
  }
  return p;
}

bool WildcardPattern::Matches(std::string_view text) const {
  std::string lowered = Lowercase(text);
  // Gaps only impose minimum lengths, so the leftmost placement of each
  // literal is always extendable if any placement is.
  size_t pos = 0;
  for (const Piece& piece : pieces_) {
    size_t found = lowered.find(piece.literal, pos + piece.min_gap);
    if (found == std::string::npos) return false;
    pos = found + piece.literal.size();
  }
  return lowered.size() - pos >= trailing_gap_;
}

Corpus FilterPatterns(const Corpus& corpus,
                      std::span<const std::string> patterns) {
  std::vector<WildcardPattern> parsed;
  parsed.reserve(patterns.size());
  for (const auto& p : patterns) parsed.push_back(WildcardPattern::Parse(p));
  return FilterRecords(corpus, [&](const InstructionRecord& r) {
    return std::none_of(parsed.begin(), parsed.end(),
                        [&](const WildcardPattern& p) { return p.Matches(r.text); });
  });
}

Corpus FilterMetaReject(const Corpus& corpus, const std::string& key,
                        std::span<const std::string> rejected) {
  return FilterRecords(corpus, [&](const InstructionRecord& r) {
    auto it = r.meta.find(key);
    return it == r.meta.end() || !Contains(rejected, it->second);
  });
}

Corpus FilterMetaAccept(const Corpus& corpus, const std::string& key,
                        std::span<const std::string> accepted) {
  return FilterRecords(corpus, [&](const InstructionRecord& r) {
    auto it = r.meta.find(key);
    return it != r.meta.end() && Contains(accepted, it->second);
  });
}

Corpus Preprocess(const Corpus& corpus, const PreprocessOptions& options,
                  const Tokenizer& tokenizer) {
  Corpus out = corpus;
  if (!options.languages.empty()) {
    out = FilterMetaAccept(out, options.language_key, options.languages);
  }
  if (!options.moderation_reject.empty()) {
    out = FilterMetaReject(out, options.moderation_key,
                           options.moderation_reject);
  }
  out = DedupExact(out);
  out = DedupNgram(out, tokenizer, options.ngram);
  out = FilterMinTokens(out, options.min_tokens, tokenizer);
  out = FilterPatterns(out, options.patterns);
  return out;
}

}  // namespace dpsynth
