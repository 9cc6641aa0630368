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

#include "dpsynth/pii_screen.h"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <regex>
#include <set>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "json.hpp"

namespace dpsynth {
namespace {

using json = nlohmann::json;

constexpr std::string_view kCategoryNames[kNumPiiCategories] = {
    "full_name", "unique_identifier", "location",
    "organisation", "occupation", "time"};

constexpr std::string_view kDelimiters[] = {"DEMONSTRATIONS:", "INSTRUCTION =",
                                            "RESULT:"};

constexpr std::string_view kScreeningInstructions =
    "1. For the given instruction from a user (denoted by INSTRUCTION), "
    "identify the following personally identifiable information.\n"
    "\n"
    "\ta. The full names of real individuals.\n"
    "\t\n"
    "\tb. Number or code that identifies entities in real word, such as phone "
    "number, email address, personal or organization website.\n"
    "\t\n"
    "\tc. Specific places and locations, such as: cities, areas, named "
    "infrastructures (bus stops, bridges, etc.).\n"
    "\t\n"
    "\td. Names of organisations, such as companies, schools, universities.\n"
    "\t\n"
    "\te. Occupational titles, such as job names, position names.\n"
    "\t\n"
    "\tf. Description of a specific time, such as October 3, 2018 or 13th "
    "June.\n"
    "\t\n"
    "\t\n"
    "2. List the answer in the following format: [[catergory]]: personally "
    "identifiable information.\n"
    "\n"
    "3. If a personally identifiable information is mentioned multiple times, "
    "only count it once.\n"
    "\n"
    "4. Do not include personally identifiable information in public articles "
    "(such as news) or fiction stories.\n"
    "\n"
    "\n"
    "\n";

// Splits keeping empty trailing pieces so that joining with '\n' inverts it.
std::vector<std::string_view> SplitLines(std::string_view text) {
  std::vector<std::string_view> lines;
  size_t start = 0;
  while (true) {
    size_t end = text.find('\n', start);
    if (end == std::string_view::npos) {
      lines.push_back(text.substr(start));
      return lines;
    }
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
}

bool StartsWithDelimiter(std::string_view line) {
  size_t k = line.find_first_not_of('\\');
  if (k == std::string_view::npos) return false;
  std::string_view rest = line.substr(k);
  return std::any_of(std::begin(kDelimiters), std::end(kDelimiters),
                     [&](std::string_view d) { return rest.starts_with(d); });
}

std::vector<PiiFinding> UniqueFindings(std::vector<PiiFinding> findings) {
  std::set<std::pair<PiiCategory, std::string>> seen;
  std::vector<PiiFinding> out;
  for (auto& f : findings) {
    if (seen.emplace(f.category, f.span_text).second) out.push_back(std::move(f));
  }
  return out;
}

class RateLimiter {
 public:
  explicit RateLimiter(double per_second)
      : interval_(per_second > 0.0
                      ? std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                            std::chrono::duration<double>(1.0 / per_second))
                      : std::chrono::steady_clock::duration::zero()),
        next_(std::chrono::steady_clock::now()) {}

  void Acquire() {
    if (interval_ == std::chrono::steady_clock::duration::zero()) return;
    std::chrono::steady_clock::time_point slot;
    {
      std::lock_guard<std::mutex> lock(mu_);
      slot = std::max(next_, std::chrono::steady_clock::now());
      next_ = slot + interval_;
    }
    std::this_thread::sleep_until(slot);
  }

 private:
  std::chrono::steady_clock::duration interval_;
  std::mutex mu_;
  std::chrono::steady_clock::time_point next_;
};

RecordScreen ScreenOne(const InstructionRecord& record, ChatClient& client,
                       const ScreenOptions& options, RateLimiter& limiter) {
  RecordScreen out;
  out.record_id = record.id;
  const std::string prompt = BuildPrompt(record, options.demonstrations);
  double backoff = options.retry.initial_backoff_ms;
  const int max_attempts = std::max(1, options.retry.max_attempts);
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    out.attempts = attempt;
    limiter.Acquire();
    try {
      ParsedResponse parsed = ParseResponse(client.Complete(prompt), record.id);
      out.ok = true;
      out.error_kind.clear();
      out.error.clear();
      out.findings = UniqueFindings(std::move(parsed.findings));
      out.warnings = std::move(parsed.warnings);
      return out;
    } catch (const ServiceError& e) {
      out.error_kind = std::string(ServiceErrorKindName(e.kind()));
      out.error = e.what();
      bool retryable = e.kind() == ServiceError::Kind::kTransient ||
                       e.kind() == ServiceError::Kind::kRateLimited;
      if (!retryable || attempt == max_attempts) break;
      std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(
          std::min(backoff, options.retry.max_backoff_ms)));
      backoff *= options.retry.multiplier;
    }
  }
  if (out.error_kind == ServiceErrorKindName(ServiceError::Kind::kRateLimited)) {
    out.error_kind = "quota";
  }
  return out;
}

}  // namespace

char PiiCategoryLetter(PiiCategory category) {
  return static_cast<char>('a' + static_cast<int>(category));
}

std::string_view PiiCategoryName(PiiCategory category) {
  return kCategoryNames[static_cast<size_t>(category)];
}

std::string_view ServiceErrorKindName(ServiceError::Kind kind) {
  switch (kind) {
    case ServiceError::Kind::kTransient:
      return "transport";
    case ServiceError::Kind::kRateLimited:
      return "rate_limited";
    case ServiceError::Kind::kAuth:
      return "auth";
    case ServiceError::Kind::kBadResponse:
      return "bad_response";
  }
  return "unknown";
}

std::string EscapeInstruction(std::string_view text) {
  std::string out;
  bool first = true;
  for (std::string_view line : SplitLines(text)) {
    if (!first) out += '\n';
    first = false;
    if (StartsWithDelimiter(line)) out += '\\';
    out += line;
  }
  return out;
}

std::string UnescapeInstruction(std::string_view text) {
  std::string out;
  bool first = true;
  for (std::string_view line : SplitLines(text)) {
    if (!first) out += '\n';
    first = false;
    if (line.starts_with('\\') && StartsWithDelimiter(line)) line.remove_prefix(1);
    out += line;
  }
  return out;
}

std::string BuildPrompt(const InstructionRecord& record,
                        std::string_view demonstrations) {
  std::string prompt(kScreeningInstructions);
  if (!demonstrations.empty()) {
    prompt += "DEMONSTRATIONS:  ";
    prompt += demonstrations;
    prompt += "\n\n\n";
  }
  prompt += "INSTRUCTION = ";
  prompt += EscapeInstruction(record.text);
  prompt += "\n\nRESULT:\n";
  return prompt;
}

ParsedResponse ParseResponse(std::string_view text, std::string_view record_id) {
  static const std::regex kLine(R"(^\s*\[\[\s*([A-Za-z])\s*\]\]\s*:\s*(.*?)\s*$)");
  ParsedResponse out;
  for (std::string_view view : SplitLines(text)) {
    std::string line(view);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::smatch m;
    if (!std::regex_match(line, m, kLine)) {
      out.warnings.push_back("unparseable line: " + line);
      continue;
    }
    char letter = static_cast<char>(std::tolower(static_cast<unsigned char>(m[1].str()[0])));
    if (letter < 'a' || letter > 'f') {
      out.warnings.push_back("unknown category: " + line);
      continue;
    }
    if (m[2].length() == 0) {
      out.warnings.push_back("empty finding: " + line);
      continue;
    }
    out.findings.push_back({static_cast<PiiCategory>(letter - 'a'), m[2].str(),
                            std::string(record_id)});
  }
  return out;
}

std::string FormatFindings(const std::vector<PiiFinding>& findings) {
  std::string out;
  for (const auto& f : findings) {
    out += "[[";
    out += PiiCategoryLetter(f.category);
    out += "]]: " + f.span_text + "\n";
  }
  return out;
}

HttpChatClient::HttpChatClient(EndpointConfig config)
    : HttpChatClient(config, [&] {
        const char* key = std::getenv(config.api_key_env.c_str());
        return std::string(key ? key : "");
      }()) {}

HttpChatClient::HttpChatClient(EndpointConfig config, std::string api_key)
    : config_(std::move(config)), api_key_(std::move(api_key)) {
  std::string url = config_.base_url;
  while (!url.empty() && url.back() == '/') url.pop_back();
  size_t scheme = url.find("://");
  size_t path_start = url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
  origin_ = url.substr(0, path_start);
  path_ = (path_start == std::string::npos ? "" : url.substr(path_start)) +
          "/v1/chat/completions";
  if (origin_.empty()) {
    throw Error(ErrorCode::kConfig, "endpoint base URL is empty");
  }
}

std::string HttpChatClient::Complete(const std::string& prompt) {
  httplib::Client client(origin_);
  if (!client.is_valid()) {
    throw ServiceError(ServiceError::Kind::kTransient,
                       "cannot create a client for " + origin_);
  }
  auto timeout = std::chrono::duration<double>(config_.timeout_seconds);
  client.set_connection_timeout(
      std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  client.set_read_timeout(
      std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  json body = {{"model", config_.model},
               {"temperature", 0},
               {"messages", json::array({{{"role", "user"}, {"content", prompt}}})}};
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
  auto res = client.Post(path_, headers,
                         body.dump(-1, ' ', false, json::error_handler_t::replace),
                         "application/json");
  if (!res) {
    throw ServiceError(ServiceError::Kind::kTransient,
                       "request failed: " + httplib::to_string(res.error()));
  }
  const int status = res->status;
  if (status == 401 || status == 403) {
    throw ServiceError(ServiceError::Kind::kAuth,
                       "endpoint rejected credentials (HTTP " +
                           std::to_string(status) + ")");
  }
  if (status == 429) {
    throw ServiceError(ServiceError::Kind::kRateLimited, "HTTP 429: " + res->body);
  }
  if (status >= 500) {
    throw ServiceError(ServiceError::Kind::kTransient,
                       "HTTP " + std::to_string(status));
  }
  if (status != 200) {
    throw ServiceError(ServiceError::Kind::kBadResponse,
                       "HTTP " + std::to_string(status) + ": " + res->body);
  }
  try {
    json reply = json::parse(res->body);
    return reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw ServiceError(ServiceError::Kind::kBadResponse,
                       std::string("malformed completion: ") + e.what());
  }
}

void ScreenReport::Recount() {
  category_counts.fill(0);
  instructions_with_findings = 0;
  failed = 0;
  for (const auto& r : records) {
    if (!r.ok) {
      ++failed;
      continue;
    }
    for (const auto& f : r.findings) ++category_counts[static_cast<size_t>(f.category)];
    if (!r.findings.empty()) ++instructions_with_findings;
  }
}

ScreenReport ScreenCorpus(const Corpus& corpus, ChatClient& client,
                          const ScreenOptions& options,
                          const ScreenReport* previous) {
  ScreenReport report;
  report.records.resize(corpus.size());
  std::map<std::string, const RecordScreen*> done;
  if (previous) {
    for (const auto& r : previous->records) {
      if (r.ok) done[r.record_id] = &r;
    }
  }
  std::vector<size_t> todo;
  for (size_t i = 0; i < corpus.size(); ++i) {
    auto it = done.find(corpus.records[i].id);
    if (it != done.end()) {
      report.records[i] = *it->second;
    } else {
      todo.push_back(i);
    }
  }
  RateLimiter limiter(options.requests_per_second);
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t t = next++; t < todo.size(); t = next++) {
      const size_t i = todo[t];
      report.records[i] = ScreenOne(corpus.records[i], client, options, limiter);
    }
  };
  const size_t n_workers =
      std::min(std::max<size_t>(options.max_concurrency, 1), todo.size());
  std::vector<std::thread> workers;
  for (size_t w = 0; w < n_workers; ++w) workers.emplace_back(worker);
  for (auto& w : workers) w.join();
  report.Recount();
  return report;
}

std::string SerializeScreenReport(const ScreenReport& report) {
  json j;
  json counts = json::object();
  for (size_t c = 0; c < kNumPiiCategories; ++c) {
    counts[std::string(1, static_cast<char>('a' + c))] = report.category_counts[c];
  }
  j["category_counts"] = counts;
  j["instructions_with_findings"] = report.instructions_with_findings;
  j["screened"] = report.records.size() - report.failed;
  j["failed"] = report.failed;
  j["records"] = json::array();
  for (const auto& r : report.records) {
    json rec;
    rec["id"] = r.record_id;
    rec["ok"] = r.ok;
    rec["attempts"] = r.attempts;
    if (!r.ok) {
      rec["error_kind"] = r.error_kind;
      rec["error"] = r.error;
    }
    rec["findings"] = json::array();
    for (const auto& f : r.findings) {
      rec["findings"].push_back(
          {{"category", std::string(1, PiiCategoryLetter(f.category))},
           {"text", f.span_text}});
    }
    rec["warnings"] = r.warnings;
    j["records"].push_back(rec);
  }
  return j.dump(2, ' ', false, json::error_handler_t::replace) + "\n";
}

ScreenReport ParseScreenReport(std::string_view text) {
  ScreenReport report;
  try {
    json j = json::parse(text);
    for (const auto& rec : j.at("records")) {
      RecordScreen r;
      r.record_id = rec.at("id").get<std::string>();
      r.ok = rec.at("ok").get<bool>();
      r.attempts = rec.value("attempts", 0);
      r.error_kind = rec.value("error_kind", "");
      r.error = rec.value("error", "");
      for (const auto& f : rec.at("findings")) {
        std::string letter = f.at("category").get<std::string>();
        if (letter.size() != 1 || letter[0] < 'a' || letter[0] > 'f') {
          throw Error(ErrorCode::kFormat, "bad category in screen report");
        }
        r.findings.push_back({static_cast<PiiCategory>(letter[0] - 'a'),
                              f.at("text").get<std::string>(), r.record_id});
      }
      r.warnings = rec.value("warnings", std::vector<std::string>{});
      report.records.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kFormat, std::string("screen report: ") + e.what());
  }
  report.Recount();
  return report;
}

}  // namespace dpsynth
