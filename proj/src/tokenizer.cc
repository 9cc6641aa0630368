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

#include "dpsynth/tokenizer.h"

#include <algorithm>
#include <fstream>

#include "dpsynth/error.h"

namespace dpsynth {
namespace {

bool IsSpace(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

bool IsPunct(unsigned char c) {
  return c < 0x80 && !IsSpace(c) && !(c >= '0' && c <= '9') &&
         !(c >= 'a' && c <= 'z') && !(c >= 'A' && c <= 'Z') && c >= 0x21;
}

}  // namespace

std::vector<std::string> SimpleTokenizer::Tokenize(
    std::string_view text) const {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  };
  for (char ch : text) {
    auto c = static_cast<unsigned char>(ch);
    if (IsSpace(c) || c < 0x20) {
      flush();
    } else if (IsPunct(c)) {
      flush();
      tokens.emplace_back(1, ch);
    } else {
      if (lowercase_ && c >= 'A' && c <= 'Z') {
        ch = static_cast<char>(c - 'A' + 'a');
      }
      current.push_back(ch);
    }
  }
  flush();
  return tokens;
}

VocabularyTokenizer VocabularyTokenizer::FromFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open vocabulary file " + path);
  std::vector<std::string> vocabulary;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) vocabulary.push_back(line);
  }
  return VocabularyTokenizer(std::move(vocabulary));
}

VocabularyTokenizer::VocabularyTokenizer(std::vector<std::string> vocabulary)
    : vocabulary_(std::move(vocabulary)) {
  std::sort(vocabulary_.begin(), vocabulary_.end());
  vocabulary_.erase(std::unique(vocabulary_.begin(), vocabulary_.end()),
                    vocabulary_.end());
  for (const auto& v : vocabulary_) max_length_ = std::max(max_length_, v.size());
}

std::vector<std::string> VocabularyTokenizer::Tokenize(
    std::string_view text) const {
  std::vector<std::string> out;
  for (const std::string& piece : pre_.Tokenize(text)) {
    size_t pos = 0;
    while (pos < piece.size()) {
      size_t take = 1;
      for (size_t len = std::min(max_length_, piece.size() - pos); len > 1;
           --len) {
        std::string_view candidate(piece.data() + pos, len);
        if (std::binary_search(vocabulary_.begin(), vocabulary_.end(),
                               candidate)) {
          take = len;
          break;
        }
      }
      out.emplace_back(piece, pos, take);
      pos += take;
    }
  }
  return out;
}

}  // namespace dpsynth
