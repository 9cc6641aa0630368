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

#include <gtest/gtest.h>

#include <filesystem>
#include <string>
#include <vector>

#include "dpsynth/error.h"
#include "dpsynth/random.h"
#include "dpsynth/tokenizer.h"
#include "support/oracles.h"

namespace dpsynth {
namespace {

InstructionRecord Rec(std::string id, std::string text,
                      std::map<std::string, std::string> meta = {}) {
  return {std::move(id), std::move(text), std::move(meta)};
}

Corpus Make(std::vector<InstructionRecord> records) {
  Corpus c;
  c.records = std::move(records);
  return c;
}

std::vector<std::string> Ids(const Corpus& c) {
  std::vector<std::string> ids;
  for (const auto& r : c.records) ids.push_back(r.id);
  return ids;
}

TEST(CorpusTest, JsonlRoundTrip) {
  Corpus c = Make({Rec("a", "Hello \"world\"\nline two", {{"language", "en"}}),
                   Rec("b", "Ünïcödé text")});
  Corpus back = ParseCorpus(SerializeCorpus(c), CorpusRole::kReal);
  EXPECT_EQ(back, c);
}

TEST(CorpusTest, FileRoundTrip) {
  auto path = std::filesystem::temp_directory_path() / "dpsynth_corpus_rt.jsonl";
  Corpus c = Make({Rec("x", "one"), Rec("y", "two", {{"k", "v"}})});
  c.role = CorpusRole::kSynthetic;
  WriteCorpus(c, path.string());
  EXPECT_EQ(ReadCorpus(path.string(), CorpusRole::kSynthetic), c);
  std::filesystem::remove(path);
}

TEST(CorpusTest, RejectsMalformedLines) {
  EXPECT_THROW(ParseCorpus("{\"id\":\"a\"}\n", CorpusRole::kReal), Error);
  EXPECT_THROW(ParseCorpus("not json\n", CorpusRole::kReal), Error);
  EXPECT_THROW(ParseCorpus("{\"id\":1,\"text\":\"t\"}\n", CorpusRole::kReal),
               Error);
}

TEST(CorpusTest, RejectsDuplicateIdsAndEmptyText) {
  EXPECT_THROW(ValidateCorpus(Make({Rec("a", "x"), Rec("a", "y")})), Error);
  EXPECT_THROW(ValidateCorpus(Make({Rec("a", "")})), Error);
  EXPECT_NO_THROW(ValidateCorpus(Make({Rec("a", "x"), Rec("b", "x")})));
}

TEST(CorpusTest, RoleNames) {
  for (auto role : {CorpusRole::kReal, CorpusRole::kSynthetic, CorpusRole::kSelected}) {
    EXPECT_EQ(ParseCorpusRole(CorpusRoleName(role)), role);
  }
}

TEST(CorpusTest, DedupExactKeepsFirst) {
  Corpus c = Make({Rec("1", "same"), Rec("2", "other"), Rec("3", "same"),
                   Rec("4", "Same")});
  EXPECT_EQ(Ids(DedupExact(c)), (std::vector<std::string>{"1", "2", "4"}));
}

TEST(CorpusTest, NgramDedupKeepsFirstOwner) {
  SimpleTokenizer tok;
  Corpus c = testing::NgramFixture();
  EXPECT_EQ(Ids(DedupNgram(c, tok, 10)),
            (std::vector<std::string>{"r0", "r2", "r4"}));
}

TEST(CorpusTest, NgramDedupComparesOnlyAgainstKeptRecords) {
  SimpleTokenizer tok;
  // r1 loses to r0; r2 shares a gram only with the dropped r1 and stays.
  Corpus c = Make({Rec("r0", "1 2 3 4"), Rec("r1", "1 2 3 9"),
                   Rec("r2", "3 9 8 7")});
  EXPECT_EQ(Ids(DedupNgram(c, tok, 2)), (std::vector<std::string>{"r0", "r2"}));
  EXPECT_THROW(DedupNgram(c, tok, 0), Error);
}

TEST(CorpusTest, MinTokensDropsShortRecords) {
  SimpleTokenizer tok;
  Corpus c = Make({Rec("a", "one two"), Rec("b", "one two three")});
  EXPECT_EQ(Ids(FilterMinTokens(c, 2, tok)), (std::vector<std::string>{"b"}));
  EXPECT_EQ(FilterMinTokens(c, 0, tok).size(), 2u);
}

TEST(WildcardTest, StarNeedsAtLeastOneCharacter) {
  auto p = WildcardPattern::Parse("as an * model");
  EXPECT_TRUE(p.Matches("Well, as an AI language model I cannot"));
  EXPECT_TRUE(p.Matches("as an x model"));
  EXPECT_FALSE(p.Matches("as an  model"));
  EXPECT_FALSE(p.Matches("as an model"));
}

TEST(WildcardTest, CaseInsensitiveUnanchored) {
  auto p = WildcardPattern::Parse("OpenAI");
  EXPECT_TRUE(p.Matches("trained by openai."));
  EXPECT_FALSE(p.Matches("open ai"));
  auto q = WildcardPattern::Parse("I cannot*");
  EXPECT_TRUE(q.Matches("i cannot do that"));
  EXPECT_FALSE(q.Matches("I cannot"));
}

TEST(WildcardTest, RejectsPatternsWithoutLiterals) {
  EXPECT_THROW(WildcardPattern::Parse("*"), Error);
  EXPECT_THROW(WildcardPattern::Parse(" * "), Error);
}

TEST(CorpusTest, MetaFilters) {
  Corpus c = Make({Rec("a", "x", {{"language", "en"}}),
                   Rec("b", "y", {{"language", "fr"}}), Rec("c", "z"),
                   Rec("d", "w", {{"moderation", "flagged"}})});
  std::vector<std::string> en = {"en"}, flagged = {"flagged"};
  EXPECT_EQ(Ids(FilterMetaAccept(c, "language", en)),
            (std::vector<std::string>{"a"}));
  EXPECT_EQ(Ids(FilterMetaReject(c, "moderation", flagged)),
            (std::vector<std::string>{"a", "b", "c"}));
}

TEST(TokenizerTest, SimpleSplitsPunctuationAndLowercases) {
  SimpleTokenizer tok;
  EXPECT_EQ(tok.Tokenize("Hello, World!  ok"),
            (std::vector<std::string>{"hello", ",", "world", "!", "ok"}));
  SimpleTokenizer keep_case(false);
  EXPECT_EQ(keep_case.Tokenize("AbC"), (std::vector<std::string>{"AbC"}));
}

TEST(TokenizerTest, VocabularyGreedyLongestMatch) {
  VocabularyTokenizer tok({"un", "unbelie", "able", "vable"});
  EXPECT_EQ(tok.Tokenize("unbelievable"),
            (std::vector<std::string>{"unbelie", "vable"}));
  EXPECT_EQ(tok.Tokenize("xy"), (std::vector<std::string>{"x", "y"}));
}

TEST(PreprocessTest, EveryOperationIsIdempotentOnFuzzedCorpora) {
  SimpleTokenizer tok;
  Rng rng(2026);
  std::vector<std::string> patterns = {"as an * model", "gamma*delta"};
  std::vector<std::string> en = {"en"}, flagged = {"flagged"};
  PreprocessOptions options;
  options.ngram = 3;
  options.min_tokens = 2;
  options.patterns = patterns;
  options.languages = en;
  for (int t = 0; t < 1000; ++t) {
    Corpus c = testing::FuzzCorpus(rng);
    auto check = [&](auto op) {
      Corpus once = op(c);
      ASSERT_EQ(op(once), once) << "fuzz case " << t;
    };
    check([&](const Corpus& x) { return DedupExact(x); });
    check([&](const Corpus& x) { return DedupNgram(x, tok, 3); });
    check([&](const Corpus& x) { return FilterMinTokens(x, 2, tok); });
    check([&](const Corpus& x) { return FilterPatterns(x, patterns); });
    check([&](const Corpus& x) { return FilterMetaAccept(x, "language", en); });
    check([&](const Corpus& x) { return FilterMetaReject(x, "moderation", flagged); });
    check([&](const Corpus& x) { return Preprocess(x, options, tok); });
  }
}

TEST(PreprocessTest, OutputIsOrderPreservingSubset) {
  SimpleTokenizer tok;
  Rng rng(9);
  for (int t = 0; t < 200; ++t) {
    Corpus c = testing::FuzzCorpus(rng);
    Corpus out = Preprocess(c, PreprocessOptions{}, tok);
    size_t j = 0;
    for (const auto& r : out.records) {
      while (j < c.size() && !(c.records[j] == r)) ++j;
      ASSERT_LT(j, c.size());
      ++j;
    }
  }
}

}  // namespace
}  // namespace dpsynth
