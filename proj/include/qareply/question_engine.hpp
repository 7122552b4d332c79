#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "qareply/domain.hpp"
#include "qareply/error.hpp"
#include "qareply/instruction_text.hpp"
#include "qareply/llm.hpp"
#include "qareply/prompt.hpp"
#include "qareply/validate.hpp"

namespace qareply {

/// The question-generation prompt: the fixed instruction block, then the
/// audience, the prior thread and the incoming mail (last, body verbatim).
inline PromptText build_question_prompt(const EmailMessage& email, const UserIdentity& user) {
  if (email.body.find_first_not_of(" \t\r\n") == std::string::npos)
    throw Error(ErrorCode::EmptyBody, "email body is empty");

  std::string text(kQuestionInstruction);
  text += "\n###Audience###\n";
  text += "Name: " + user.name + "\n";
  text += "Email address: " + user.address + "\n";
  text += "Native language: " + (user.locale.empty() ? std::string(UserIdentity::kDefaultLocale) : user.locale) + "\n";
  text += "\n";
  prompt_format::append_thread(text, email);
  text += "\n";
  prompt_format::append_incoming_mail(text, email);
  return PromptText::make(std::move(text), PromptKind::QuestionGen);
}

namespace llm_json {

/// End (exclusive) of the balanced JSON object starting at text[open], honoring strings.
inline std::optional<std::size_t> object_end(std::string_view text, std::size_t open) {
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = open; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (c == '\\') ++i;
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"') in_string = true;
    else if (c == '{') ++depth;
    else if (c == '}' && --depth == 0) return i + 1;
  }
  return std::nullopt;
}

/// First parseable JSON object in `text` that has `key`, tolerating prose and code fences.
inline std::optional<Json> first_object_with(std::string_view text, std::string_view key) {
  for (std::size_t p = text.find('{'); p != std::string_view::npos; p = text.find('{', p + 1)) {
    const auto end = object_end(text, p);
    if (!end) continue;
    Json j = Json::parse(text.substr(p, *end - p), nullptr, false);
    if (j.is_discarded() || !j.is_object()) continue;
    if (j.contains(key)) return j;
  }
  return std::nullopt;
}

}  // namespace llm_json

/// Maps the LLM's question JSON onto a QuestionSet without validating it.
inline QuestionSet parse_llm_questions(std::string_view response, QuestionSource source = QuestionSource::LiveLlm) {
  const auto obj = llm_json::first_object_with(response, "questions");
  if (!obj) throw Error(ErrorCode::NoJsonFound, "no JSON object with a \"questions\" key");
  const Json& arr = obj->at("questions");
  if (!arr.is_array()) throw Error(ErrorCode::SchemaMismatch, "\"questions\" is not an array");

  QuestionSet set;
  set.source = source;
  set.raw_response = std::string(response);
  std::size_t index = 0;
  for (const auto& e : arr) {
    const std::string where = "questions[" + std::to_string(index++) + "]";
    if (!e.is_object()) throw Error(ErrorCode::SchemaMismatch, where + " is not an object");
    Question q;
    for (const char* key : {"id", "question", "corresponding_part"}) {
      if (!e.contains(key)) throw Error(ErrorCode::SchemaMismatch, where + " lacks \"" + key + "\"");
      if (!e.at(key).is_string()) throw Error(ErrorCode::SchemaMismatch, where + "." + key + " is not a string");
    }
    if (!e.contains("choices")) throw Error(ErrorCode::SchemaMismatch, where + " lacks \"choices\"");
    const Json& choices = e.at("choices");
    if (!choices.is_array()) throw Error(ErrorCode::SchemaMismatch, where + ".choices is not an array");
    for (const auto& c : choices) {
      if (!c.is_string()) throw Error(ErrorCode::SchemaMismatch, where + ".choices holds a non-string");
      q.choices.push_back(c.get<std::string>());
    }
    q.id = e.at("id").get<std::string>();
    q.question = e.at("question").get<std::string>();
    q.corresponding_part = e.at("corresponding_part").get<std::string>();
    set.questions.push_back(std::move(q));
  }
  return set;
}

struct QuestionEngineConfig {
  ValidationConfig validation;
  int max_attempts = 3;
};

struct QuestionGeneration {
  QuestionSet questions;
  PromptText prompt;
  int attempts = 0;
};

/// prompt -> provider -> parse -> validate. Provider failures and unparseable
/// responses are retried with fresh calls; validation failures are not.
inline QuestionGeneration generate_questions(const EmailMessage& email, const UserIdentity& user,
                                             CompletionProvider& llm, const QuestionEngineConfig& cfg = {}) {
  QuestionGeneration out;
  out.prompt = build_question_prompt(email, user);
  std::optional<Error> last;
  for (int attempt = 1; attempt <= std::max(1, cfg.max_attempts); ++attempt) {
    out.attempts = attempt;
    try {
      const Completion c = llm.complete(out.prompt);
      QuestionSet raw = parse_llm_questions(c.text, llm.source());
      out.questions = validate_question_set(std::move(raw), email, cfg.validation);
      return out;
    } catch (const ValidationError&) {
      throw;
    } catch (const Error& e) {
      if (e.code() == ErrorCode::AuthError) throw;
      if (!is_provider_error(e.code()) && e.code() != ErrorCode::NoJsonFound && e.code() != ErrorCode::SchemaMismatch)
        throw;
      last = e;
    }
  }
  if (is_provider_error(last->code()))
    throw Error(ErrorCode::ProviderError, std::string(to_string(last->code())) + " after " +
                                              std::to_string(out.attempts) + " attempt(s)");
  throw *last;
}

}  // namespace qareply
