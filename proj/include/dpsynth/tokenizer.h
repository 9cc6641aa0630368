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

#ifndef DPSYNTH_TOKENIZER_H_
#define DPSYNTH_TOKENIZER_H_

#include <string>
#include <string_view>
#include <vector>

namespace dpsynth {

class Tokenizer {
 public:
  virtual ~Tokenizer() = default;
  virtual std::vector<std::string> Tokenize(std::string_view text) const = 0;
};

// Splits on ASCII whitespace and emits every ASCII punctuation character as
// its own token. Bytes >= 0x80 are treated as word characters, so UTF-8
// sequences are never split. ASCII letters are lowercased unless disabled.
class SimpleTokenizer : public Tokenizer {
 public:
  explicit SimpleTokenizer(bool lowercase = true) : lowercase_(lowercase) {}

  std::vector<std::string> Tokenize(std::string_view text) const override;

 private:
  bool lowercase_;
};

// Tokenizer backed by a vocabulary file: one token per line. Text is split
// with SimpleTokenizer and each piece is greedily segmented into the
// longest vocabulary entries; bytes not covered by the vocabulary become
// single-byte tokens.
class VocabularyTokenizer : public Tokenizer {
 public:
  static VocabularyTokenizer FromFile(const std::string& path);
  explicit VocabularyTokenizer(std::vector<std::string> vocabulary);

  std::vector<std::string> Tokenize(std::string_view text) const override;

 private:
  std::vector<std::string> vocabulary_;  // sorted
  size_t max_length_ = 1;
  SimpleTokenizer pre_;
};

}  // namespace dpsynth

#endif  // DPSYNTH_TOKENIZER_H_
