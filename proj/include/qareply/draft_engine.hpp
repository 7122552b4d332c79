#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "qareply/domain.hpp"
#include "qareply/error.hpp"
#include "qareply/instruction_text.hpp"
#include "qareply/llm.hpp"
#include "qareply/prompt.hpp"
#include "qareply/question_engine.hpp"

namespace qareply {

struct TranscriptEntry {
  std::string question_id;
  std::string question;
  std::string corresponding_part;
  std::string answer;
};

struct QATranscript {
  std::vector<TranscriptEntry> entries;  // answered questions, in question order
  std::vector<std::string> unanswered;   // skipped or left blank
};

/// Selected choice texts in index order, then custom options, comma separated.
inline std::string render_answer(const Question& q, const Answer& a) {
  std::vector<std::string> parts;
  for (std::size_t idx : a.selected)
    if (idx < q.choices.size()) parts.push_back(q.choices[idx]);
  for (const auto& c : a.custom_options)
    if (!c.empty()) parts.push_back(c);
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += ", ";
    out += parts[i];
  }
  return out;
}

inline QATranscript build_transcript(const QuestionSet& questions, const AnswerSet& answers) {
  QATranscript t;
  for (const auto& q : questions.questions) {
    const auto it = std::find_if(answers.begin(), answers.end(),
                                 [&](const Answer& a) { return a.question_id == q.id; });
    std::string rendered = (it == answers.end() || it->skipped) ? std::string() : render_answer(q, *it);
    if (rendered.empty()) {
      t.unanswered.push_back(q.id);
      continue;
    }
    t.entries.push_back({q.id, q.question, q.corresponding_part, std::move(rendered)});
  }
  return t;
}

namespace draft_detail {

inline std::string one_line(std::string s) {
  for (auto& c : s)
    if (c == '\n' || c == '\r') c = ' ';
  return s;
}

inline bool blank(const std::string& s) { return s.find_first_not_of(" \t\r\n") == std::string::npos; }

}  // namespace draft_detail

/// "question → answer" as it appears in the draft prompt.
inline std::string transcript_line(const TranscriptEntry& e) {
  return draft_detail::one_line(e.question) + std::string(prompt_format::kAnswerArrow) + draft_detail::one_line(e.answer);
}

inline PromptText build_draft_prompt(const Session& s) {
  if (s.state < SessionState::Questioned || !s.question_set)
    throw Error(ErrorCode::InvalidState, "questions have not been generated for this session");
  const QATranscript transcript = build_transcript(*s.question_set, s.answers);
  if (transcript.entries.empty() && draft_detail::blank(s.preferences.free_instruction))
    throw Error(ErrorCode::NothingToSay, "no answered question and no free-text instruction");

  std::string text(kDraftDirective);
  text += "\n\n";
  prompt_format::append_incoming_mail(text, s.email);
  text += "\n";
  prompt_format::append_thread(text, s.email);
  text += "\n";
  text += prompt_format::kTranscriptHeader;
  if (transcript.entries.empty()) text += "(no answers)\n";
  for (const auto& e : transcript.entries) {
    text += "- " + transcript_line(e) + "\n";
    text += "  Quoted part: " + Json(e.corresponding_part).dump() + "\n";
  }
  text += "\n###Reply Preferences###\n";
  text += "Relationship with the sender: " + Json(s.preferences.relationship).dump() + "\n";
  text += "Formality: " + std::string(to_string(s.preferences.formality)) + "\n";
  text += "Tone: " + std::string(to_string(s.preferences.tone)) + "\n";
  text += "Length: " + std::string(to_string(s.preferences.length)) + "\n";
  text += "Additional request: " + Json(s.preferences.free_instruction).dump() + "\n";
  text += "\n";
  text += prompt_format::kUserHeader;
  text += "Name: " + draft_detail::one_line(s.user.name) + "\n";
  text += "Email address: " + draft_detail::one_line(s.user.address) + "\n";
  text += "Language: " + s.user.locale + "\n";
  text += "Sign the reply as this user.\n";
  return PromptText::make(std::move(text), PromptKind::DraftGen);
}

/// Accepts {"reply": "..."} anywhere in the response, else the raw text.
inline std::string parse_draft_response(std::string_view response) {
  if (auto obj = llm_json::first_object_with(response, "reply"); obj && obj->at("reply").is_string())
    return obj->at("reply").get<std::string>();
  std::string raw(response);
  const auto b = raw.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  return raw.substr(b, raw.find_last_not_of(" \t\r\n") - b + 1);
}

struct DraftEngineConfig {
  int max_generations = 10;
  int max_attempts = 3;
};

/// Appends a new draft. On any failure the session is left untouched.
inline const DraftReply& generate_draft(Session& s, CompletionProvider& llm, const DraftEngineConfig& cfg = {},
                                        Timestamp now = Clock::now()) {
  if (s.state == SessionState::Finalized) throw Error(ErrorCode::AlreadyFinalized, "session is finalized");
  if (static_cast<int>(s.drafts.size()) >= cfg.max_generations)
    throw Error(ErrorCode::RegenerationLimit, "draft limit of " + std::to_string(cfg.max_generations) + " reached");
  PromptText prompt = build_draft_prompt(s);

  std::string text;
  std::string failure;
  const int attempts = std::max(1, cfg.max_attempts);
  for (int attempt = 1; attempt <= attempts && text.empty(); ++attempt) {
    try {
      text = parse_draft_response(llm.complete(prompt).text);
      if (text.empty()) failure = "empty draft response";
    } catch (const Error& e) {
      if (e.code() == ErrorCode::AuthError || !is_provider_error(e.code())) throw;
      failure = std::string(to_string(e.code()));
    }
  }
  if (text.empty())
    throw Error(ErrorCode::ProviderError, failure + " after " + std::to_string(attempts) + " attempt(s)");

  int next_index = 1;
  for (const auto& d : s.drafts) next_index = std::max(next_index, d.generation_index + 1);
  DraftReply d;
  d.text = std::move(text);
  d.generation_index = next_index;
  d.created_at = now;
  d.prompt_digest = prompt.digest;
  d.prompt = std::move(prompt.text);
  d.edited = false;
  s.drafts.push_back(std::move(d));
  s.advance_to(SessionState::Drafted);
  return s.drafts.back();
}

inline const DraftReply& apply_edit(Session& s, std::string new_text) {
  if (s.state == SessionState::Finalized) throw Error(ErrorCode::AlreadyFinalized, "session is finalized");
  if (s.drafts.empty()) throw Error(ErrorCode::NoDraft, "no draft to edit");
  DraftReply& latest = s.drafts.back();
  latest.text = std::move(new_text);
  latest.edited = true;
  return latest;
}

}  // namespace qareply
