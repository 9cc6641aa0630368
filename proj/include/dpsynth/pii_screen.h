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

#ifndef DPSYNTH_PII_SCREEN_H_
#define DPSYNTH_PII_SCREEN_H_

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "dpsynth/corpus.h"
#include "dpsynth/error.h"

namespace dpsynth {

enum class PiiCategory {
  kFullName,          // a
  kUniqueIdentifier,  // b
  kLocation,          // c
  kOrganisation,      // d
  kOccupation,        // e
  kTime,              // f
};
inline constexpr size_t kNumPiiCategories = 6;

char PiiCategoryLetter(PiiCategory category);
std::string_view PiiCategoryName(PiiCategory category);

struct PiiFinding {
  PiiCategory category = PiiCategory::kFullName;
  std::string span_text;
  std::string record_id;
  bool operator==(const PiiFinding&) const = default;
};

std::string BuildPrompt(const InstructionRecord& record,
                        std::string_view demonstrations);

// Lines of the instruction that start with a prompt delimiter (after any
// backslashes) get one more leading backslash; UnescapeInstruction undoes it.
std::string EscapeInstruction(std::string_view text);
std::string UnescapeInstruction(std::string_view text);

struct ParsedResponse {
  std::vector<PiiFinding> findings;
  std::vector<std::string> warnings;
};

// Lenient: "[[x]]: text" lines with x in a..f become findings; anything else
// non-blank becomes a warning.
ParsedResponse ParseResponse(std::string_view text,
                             std::string_view record_id = {});
std::string FormatFindings(const std::vector<PiiFinding>& findings);

class ServiceError : public Error {
 public:
  enum class Kind { kTransient, kRateLimited, kAuth, kBadResponse };
  ServiceError(Kind kind, const std::string& message)
      : Error(ErrorCode::kService, message), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

std::string_view ServiceErrorKindName(ServiceError::Kind kind);

class ChatClient {
 public:
  virtual ~ChatClient() = default;
  // Returns the assistant message or throws ServiceError.
  virtual std::string Complete(const std::string& prompt) = 0;
};

struct EndpointConfig {
  std::string base_url = "https://api.openai.com";
  std::string model = "gpt-3.5-turbo";
  std::string api_key_env = "OPENAI_API_KEY";
  double timeout_seconds = 60.0;
};

// POSTs {base_url}/v1/chat/completions with a single user message.
class HttpChatClient : public ChatClient {
 public:
  // Reads the key from the environment variable named in the config.
  explicit HttpChatClient(EndpointConfig config);
  HttpChatClient(EndpointConfig config, std::string api_key);
  std::string Complete(const std::string& prompt) override;

 private:
  EndpointConfig config_;
  std::string api_key_;
  std::string origin_;
  std::string path_;
};

struct RetryPolicy {
  int max_attempts = 5;
  double initial_backoff_ms = 500.0;
  double multiplier = 2.0;
  double max_backoff_ms = 30000.0;
};

struct ScreenOptions {
  size_t max_concurrency = 4;
  // Requests started per second across all workers; 0 means unlimited.
  double requests_per_second = 0.0;
  RetryPolicy retry;
  std::string demonstrations;
};

struct RecordScreen {
  std::string record_id;
  bool ok = false;
  std::string error_kind;  // empty when ok
  std::string error;
  int attempts = 0;
  std::vector<PiiFinding> findings;  // unique (category, span) per record
  std::vector<std::string> warnings;
};

struct ScreenReport {
  std::vector<RecordScreen> records;  // corpus order
  std::array<uint64_t, kNumPiiCategories> category_counts{};
  uint64_t instructions_with_findings = 0;
  uint64_t failed = 0;

  // Recomputes the aggregates from `records`.
  void Recount();
};

// One request per record not already screened successfully in `previous`.
ScreenReport ScreenCorpus(const Corpus& corpus, ChatClient& client,
                          const ScreenOptions& options,
                          const ScreenReport* previous = nullptr);

std::string SerializeScreenReport(const ScreenReport& report);
ScreenReport ParseScreenReport(std::string_view text);

}  // namespace dpsynth

#endif  // DPSYNTH_PII_SCREEN_H_
