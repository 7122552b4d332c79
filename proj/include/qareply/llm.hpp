#pragma once

// Completion providers: a chat-completion HTTP client and a deterministic mock.

#include <httplib.h>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ostream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "qareply/domain.hpp"
#include "qareply/error.hpp"
#include "qareply/prompt.hpp"
#include "qareply/utf8.hpp"

namespace qareply {

struct Completion {
  std::string text;
  int attempts = 1;
  std::chrono::milliseconds latency{0};
};

class CompletionProvider {
 public:
  virtual ~CompletionProvider() = default;
  virtual Completion complete(const PromptText& prompt) = 0;
  virtual QuestionSource source() const = 0;
};

// ---------------------------------------------------------------------------

struct ProviderConfig {
  static constexpr std::string_view kDefaultBaseUrl = "https://api.openai.com/v1";
  static constexpr std::string_view kDefaultModel = "gpt-4o";

  std::string base_url{kDefaultBaseUrl};
  std::string api_key;  // never serialized, never logged
  std::string model_name{kDefaultModel};
  double temperature = 0.0;
  double timeout_seconds = 60.0;
  int max_retries = 3;
  std::chrono::milliseconds initial_backoff{500};

  /// Reads QAREPLY_API_KEY, QAREPLY_BASE_URL and QAREPLY_MODEL over the current values.
  ProviderConfig& apply_env() {
    if (const char* k = std::getenv("QAREPLY_API_KEY")) api_key = k;
    if (const char* u = std::getenv("QAREPLY_BASE_URL"); u && *u) base_url = u;
    if (const char* m = std::getenv("QAREPLY_MODEL"); m && *m) model_name = m;
    return *this;
  }
};

inline void to_json(Json& j, const ProviderConfig& c) {
  j = Json{{"base_url", c.base_url},
           {"model_name", c.model_name},
           {"temperature", c.temperature},
           {"timeout_seconds", c.timeout_seconds},
           {"max_retries", c.max_retries},
           {"initial_backoff_ms", c.initial_backoff.count()},
           {"api_key_set", !c.api_key.empty()}};
}

/// Reads everything except the key, which only comes from the environment.
inline void from_json(const Json& j, ProviderConfig& c) {
  if (!j.is_object()) throw Error(ErrorCode::WrongType, "provider config must be a JSON object");
  c.base_url = json_field::string_or(j, "base_url", c.base_url);
  c.model_name = json_field::string_or(j, "model_name", c.model_name);
  if (j.contains("temperature")) c.temperature = j.at("temperature").get<double>();
  if (j.contains("timeout_seconds")) c.timeout_seconds = j.at("timeout_seconds").get<double>();
  if (j.contains("max_retries")) c.max_retries = j.at("max_retries").get<int>();
  if (j.contains("initial_backoff_ms"))
    c.initial_backoff = std::chrono::milliseconds(j.at("initial_backoff_ms").get<long>());
  if (c.temperature < 0.0) throw Error(ErrorCode::WrongType, "temperature must be >= 0");
  if (c.timeout_seconds <= 0.0) throw Error(ErrorCode::WrongType, "timeout_seconds must be > 0");
  if (c.max_retries < 0) throw Error(ErrorCode::WrongType, "max_retries must be >= 0");
}

inline std::ostream& operator<<(std::ostream& os, const ProviderConfig& c) {
  return os << "ProviderConfig{base_url=" << c.base_url << ", model=" << c.model_name
            << ", temperature=" << c.temperature << ", timeout=" << c.timeout_seconds
            << "s, max_retries=" << c.max_retries << ", api_key=" << (c.api_key.empty() ? "<unset>" : "<redacted>")
            << "}";
}

/// Splits "https://host:port/v1" into origin "https://host:port" and path prefix "/v1".
inline std::pair<std::string, std::string> split_base_url(std::string_view url) {
  const auto scheme = url.find("://");
  const std::size_t host_start = scheme == std::string_view::npos ? 0 : scheme + 3;
  const auto slash = url.find('/', host_start);
  if (slash == std::string_view::npos) return {std::string(url), ""};
  std::string path(url.substr(slash));
  while (!path.empty() && path.back() == '/') path.pop_back();
  return {std::string(url.substr(0, slash)), path};
}

inline Json chat_request_body(const PromptText& prompt, const ProviderConfig& cfg) {
  return Json{{"model", cfg.model_name},
              {"messages", Json::array({Json{{"role", "user"}, {"content", prompt.text}}})},
              {"temperature", cfg.temperature}};
}

/// Chat-completion client. Each call opens its own connection, so instances
/// are safe to share across threads.
class HttpProvider : public CompletionProvider {
 public:
  explicit HttpProvider(ProviderConfig cfg) : cfg_(std::move(cfg)) {}

  QuestionSource source() const override { return QuestionSource::LiveLlm; }
  const ProviderConfig& config() const { return cfg_; }

  Completion complete(const PromptText& prompt) override {
    if (cfg_.api_key.empty()) throw Error(ErrorCode::AuthError, "QAREPLY_API_KEY is not set");
    const auto [origin, prefix] = split_base_url(cfg_.base_url);
    const std::string path = prefix + "/chat/completions";
    const std::string body = chat_request_body(prompt, cfg_).dump();
    const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(
        std::chrono::duration<double>(cfg_.timeout_seconds));

    const auto started = std::chrono::steady_clock::now();
    ErrorCode last = ErrorCode::ProviderError;
    std::string last_message;
    const int max_attempts = cfg_.max_retries + 1;
    for (int attempt = 1; attempt <= max_attempts; ++attempt) {
      if (attempt > 1) backoff(attempt - 1);
      httplib::Client client(origin);
      client.set_connection_timeout(timeout);
      client.set_read_timeout(timeout);
      client.set_write_timeout(timeout);
      const httplib::Headers headers{{"Authorization", "Bearer " + cfg_.api_key}};
      auto res = client.Post(path, headers, body, "application/json");
      if (!res) {
        const auto err = res.error();
        last = (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read) ? ErrorCode::Timeout
                                                                                        : ErrorCode::TransportError;
        last_message = "request failed: " + httplib::to_string(err);
        continue;
      }
      const int status = res->status;
      if (status == 401 || status == 403) throw Error(ErrorCode::AuthError, "provider rejected credentials (HTTP " + std::to_string(status) + ")");
      if (status == 429) {
        last = ErrorCode::RateLimited;
        last_message = "rate limited (HTTP 429)";
        continue;
      }
      if (status >= 500) {
        last = ErrorCode::TransportError;
        last_message = "provider failure (HTTP " + std::to_string(status) + ")";
        continue;
      }
      if (status != 200) throw Error(ErrorCode::ProviderError, "unexpected HTTP " + std::to_string(status));
      auto text = extract_message(res->body);
      if (!text) {
        last = ErrorCode::ProviderError;
        last_message = "response has no choices[0].message.content";
        continue;
      }
      Completion c;
      c.text = std::move(*text);
      c.attempts = attempt;
      c.latency = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started);
      return c;
    }
    throw Error(last, last_message + " after " + std::to_string(max_attempts) + " attempt(s)");
  }

  static std::optional<std::string> extract_message(std::string_view response_body) {
    const Json j = Json::parse(response_body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) return std::nullopt;
    const auto choices = j.find("choices");
    if (choices == j.end() || !choices->is_array() || choices->empty()) return std::nullopt;
    const Json& first = choices->front();
    if (!first.is_object() || !first.contains("message")) return std::nullopt;
    const Json& msg = first.at("message");
    if (!msg.is_object() || !msg.contains("content") || !msg.at("content").is_string()) return std::nullopt;
    return msg.at("content").get<std::string>();
  }

 private:
  void backoff(int retry) const {
    auto delay = cfg_.initial_backoff * (1 << std::min(retry - 1, 4));
    if (delay.count() > 0) std::this_thread::sleep_for(delay);
  }

  ProviderConfig cfg_;
};

// ---------------------------------------------------------------------------
// Mock provider. A pure function of the prompt text.
//
// question_gen: every sentence of the embedded mail body that ends in '?' or
// contains a request keyword becomes one Yes/No question quoting the sentence.
// draft_gen: a fixed-template reply embedding each transcript answer line.

struct MockConfig {
  std::vector<std::string> request_keywords{"please", "could you", "お願い"};
};

namespace mock_detail {

inline bool is_terminator(char32_t c) {
  return c == U'.' || c == U'!' || c == U'?' || c == 0x3002 || c == 0xFF01 || c == 0xFF1F;
}

inline bool is_blank(char32_t c) { return c == U' ' || c == U'\t' || c == U'\r' || c == 0x3000; }

inline std::u32string lower(std::u32string s) {
  for (auto& c : s)
    if (c >= U'A' && c <= U'Z') c += 32;
  return s;
}

}  // namespace mock_detail

/// Sentences of `body` that ask something, verbatim and in order.
inline std::vector<std::string> request_sentences(std::string_view body, const MockConfig& cfg = {}) {
  using namespace mock_detail;
  const std::u32string b = utf8::decode(body);
  std::vector<std::u32string> keywords;
  for (const auto& k : cfg.request_keywords) keywords.push_back(lower(utf8::decode(k)));

  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < b.size()) {
    while (i < b.size() && (is_blank(b[i]) || b[i] == U'\n')) ++i;
    if (i >= b.size()) break;
    const std::size_t start = i;
    while (i < b.size() && b[i] != U'\n' && !is_terminator(b[i])) ++i;
    while (i < b.size() && is_terminator(b[i])) ++i;
    std::size_t end = i;
    while (end > start && is_blank(b[end - 1])) --end;
    if (end == start) continue;
    const std::u32string sentence = b.substr(start, end - start);
    bool ask = sentence.back() == U'?' || sentence.back() == 0xFF1F;
    if (!ask) {
      const std::u32string low = lower(sentence);
      for (const auto& k : keywords)
        if (!k.empty() && low.find(k) != std::u32string::npos) {
          ask = true;
          break;
        }
    }
    if (ask) out.push_back(utf8::encode(sentence));
  }
  return out;
}

inline std::string mock_question_response(std::string_view prompt_text, const MockConfig& cfg = {}) {
  std::string body;
  Json questions = Json::array();
  if (prompt_format::extract_incoming_body(prompt_text, body)) {
    int n = 0;
    for (const auto& s : request_sentences(body, cfg)) {
      questions.push_back(Json{{"id", std::to_string(++n)},
                               {"question", "How would you like to respond to: \"" + s + "\""},
                               {"choices", Json::array({"Yes", "No"})},
                               {"corresponding_part", s}});
    }
  }
  return Json{{"questions", questions}}.dump(2);
}

inline std::string mock_draft_response(std::string_view prompt_text) {
  using namespace prompt_format;
  auto lines_of = [](std::string_view block) {
    std::vector<std::string_view> lines;
    std::size_t pos = 0;
    while (pos < block.size()) {
      auto nl = block.find('\n', pos);
      if (nl == std::string_view::npos) nl = block.size();
      lines.push_back(block.substr(pos, nl - pos));
      pos = nl + 1;
    }
    return lines;
  };

  std::vector<std::string> answer_lines;
  if (auto t = prompt_text.rfind(kTranscriptHeader); t != std::string_view::npos) {
    for (auto line : lines_of(prompt_text.substr(t + kTranscriptHeader.size()))) {
      if (line.rfind("###", 0) == 0) break;
      if (line.rfind("- ", 0) == 0 && line.find(kAnswerArrow) != std::string_view::npos)
        answer_lines.emplace_back(line.substr(2));
    }
  }
  std::string instruction;
  std::string name;
  for (auto line : lines_of(prompt_text)) {
    constexpr std::string_view kReq = "Additional request: ";
    if (line.rfind(kReq, 0) == 0) {
      const Json v = Json::parse(line.substr(kReq.size()), nullptr, false);
      if (v.is_string()) instruction = v.get<std::string>();
    }
  }
  if (auto u = prompt_text.rfind(kUserHeader); u != std::string_view::npos) {
    for (auto line : lines_of(prompt_text.substr(u + kUserHeader.size()))) {
      if (line.rfind("Name: ", 0) == 0) {
        name = std::string(line.substr(6));
        break;
      }
    }
  }

  std::string reply = "Thank you for your email.\n";
  if (!answer_lines.empty()) {
    reply += "\n";
    for (const auto& l : answer_lines) reply += l + "\n";
  }
  if (!instruction.empty()) reply += "\n(" + instruction + ")\n";
  reply += "\nBest regards,\n" + name;
  return Json{{"reply", reply}}.dump(2);
}

inline std::string mock_complete(const PromptText& prompt, const MockConfig& cfg = {}) {
  return prompt.kind == PromptKind::QuestionGen ? mock_question_response(prompt.text, cfg)
                                                : mock_draft_response(prompt.text);
}

class MockProvider : public CompletionProvider {
 public:
  explicit MockProvider(MockConfig cfg = {}) : cfg_(std::move(cfg)) {}

  QuestionSource source() const override { return QuestionSource::Mock; }
  Completion complete(const PromptText& prompt) override { return Completion{mock_complete(prompt, cfg_), 1, {}}; }

 private:
  MockConfig cfg_;
};

}  // namespace qareply
