#pragma once

// The reply workflow over a SessionStore: create, answer, steer, draft,
// finalize. Transport-agnostic; http_api.hpp exposes it over HTTP.

#include <spdlog/spdlog.h>

#include <memory>
#include <optional>
#include <set>
#include <string>

#include "qareply/draft_engine.hpp"
#include "qareply/ingest.hpp"
#include "qareply/metrics.hpp"
#include "qareply/question_engine.hpp"
#include "qareply/session_store.hpp"

namespace qareply {

struct ServiceConfig {
  IngestConfig ingest;
  QuestionEngineConfig questions;
  DraftEngineConfig drafts;
};

/// Outcome of session creation. The session exists even when question
/// generation failed; `generation_error` then says why.
struct CreatedSession {
  std::string id;
  QuestionSet questions;
  std::optional<Error> generation_error;
};

inline Json session_summary(const Session& s) {
  std::size_t skipped = 0;
  for (const auto& a : s.answers) skipped += a.skipped ? 1 : 0;
  return Json{{"id", s.id},
              {"state", s.state},
              {"answers", s.answers.size() - skipped},
              {"skipped", skipped},
              {"drafts", s.drafts.size()}};
}

/// Referential and structural checks of an answer set against a question set.
inline void check_answers(const QuestionSet& qs, const AnswerSet& answers) {
  std::set<std::string> seen;
  for (const auto& a : answers) {
    const Question* q = qs.find(a.question_id);
    if (!q) throw Error(ErrorCode::UnknownQuestionId, "answer references an unknown question id");
    if (!seen.insert(a.question_id).second) throw Error(ErrorCode::InvalidAnswer, "question answered twice");
    if (a.skipped && (!a.selected.empty() || !a.custom_options.empty()))
      throw Error(ErrorCode::InvalidAnswer, "a skipped answer cannot carry selections");
    for (std::size_t idx : a.selected)
      if (idx >= q->choices.size())
        throw Error(ErrorCode::IndexOutOfRange, "choice index " + std::to_string(idx) + " out of range for question " +
                                                    q->id + " (" + std::to_string(q->choices.size()) + " choices)");
    for (const auto& c : a.custom_options)
      if (c.find_first_not_of(" \t\r\n") == std::string::npos)
        throw Error(ErrorCode::InvalidAnswer, "custom options must be non-empty");
  }
}

class SessionService {
 public:
  SessionService(std::shared_ptr<SessionStore> store, std::shared_ptr<CompletionProvider> llm, ServiceConfig cfg = {},
                 std::shared_ptr<spdlog::logger> log = nullptr)
      : store_(std::move(store)), llm_(std::move(llm)), cfg_(std::move(cfg)),
        log_(log ? std::move(log) : spdlog::default_logger()) {}

  SessionStore& store() { return *store_; }
  const ServiceConfig& config() const { return cfg_; }

  CreatedSession create(const Json& payload) {
    const EmailMessage email = parse_json_email(json_field::require(payload, "email"), cfg_.ingest);
    UserIdentity user;
    user.locale = cfg_.ingest.default_locale;
    if (payload.contains("user")) {
      user = payload.at("user").get<UserIdentity>();
      if (!payload.at("user").contains("locale")) user.locale = cfg_.ingest.default_locale;
    }
    Session s;
    s.email = email;
    s.user = std::move(user);
    s.opened_at = store_->now();
    const std::string id = store_->insert(std::move(s));
    log_->info("session {} created", id);

    CreatedSession out{id, {}, std::nullopt};
    try {
      out.questions = generate_into(id);
    } catch (const Error& e) {
      log_->warn("session {} question generation failed: {}", id, to_string(e.code()));
      out.generation_error = e;
    }
    return out;
  }

  /// Retries question generation for a session whose first attempt failed.
  QuestionSet retry_questions(const std::string& id) {
    const QuestionSet qs = generate_into(id);
    log_->info("session {} questions regenerated", id);
    return qs;
  }

  Session get(const std::string& id) {
    return store_->read(id, [](const Session& s) { return s; });
  }

  Json submit_answers(const std::string& id, const AnswerSet& answers) {
    Json summary = store_->mutate(id, [&](Session& s) {
      require_open(s);
      if (s.state < SessionState::Questioned || !s.question_set)
        throw Error(ErrorCode::InvalidState, "questions have not been generated");
      check_answers(*s.question_set, answers);
      s.answers = answers;
      s.advance_to(SessionState::Answered);
      return session_summary(s);
    });
    log_->info("session {} answers stored", id);
    return summary;
  }

  void set_preferences(const std::string& id, const ReplyPreferences& prefs) {
    store_->mutate(id, [&](Session& s) {
      require_open(s);
      s.preferences = prefs;
    });
    log_->info("session {} preferences stored", id);
  }

  DraftReply generate_draft(const std::string& id, bool regenerate = false) {
    DraftReply d = store_->mutate(id, [&](Session& s) {
      require_open(s);
      if (regenerate && s.drafts.empty()) throw Error(ErrorCode::NoDraft, "nothing to regenerate yet");
      return qareply::generate_draft(s, *llm_, cfg_.drafts, store_->now());
    });
    log_->info("session {} draft {} generated", id, d.generation_index);
    return d;
  }

  DraftReply edit_draft(const std::string& id, std::string text) {
    DraftReply d = store_->mutate(id, [&](Session& s) { return apply_edit(s, std::move(text)); });
    log_->info("session {} draft {} edited", id, d.generation_index);
    return d;
  }

  MetricsRecord finalize(const std::string& id, std::string final_text) {
    MetricsRecord r = store_->mutate(id, [&](Session& s) {
      require_open(s);
      if (final_text.find_first_not_of(" \t\r\n") == std::string::npos)
        throw Error(ErrorCode::EmptyFinalText, "final text is empty");
      if (s.state != SessionState::Answered && s.state != SessionState::Drafted)
        throw Error(ErrorCode::InvalidState, "session must be answered or drafted before finalizing");
      s.final_text = std::move(final_text);
      Timestamp t = store_->now();
      if (t < s.opened_at) t = s.opened_at;
      s.finalized_at = t;
      s.advance_to(SessionState::Finalized);
      return metrics::record_for(s);
    });
    log_->info("session {} finalized", id);
    return r;
  }

 private:
  static void require_open(const Session& s) {
    if (s.state == SessionState::Finalized) throw Error(ErrorCode::AlreadyFinalized, "session is finalized");
  }

  QuestionSet generate_into(const std::string& id) {
    return store_->mutate(id, [&](Session& s) {
      if (s.state != SessionState::Created)
        throw Error(ErrorCode::InvalidState, "questions were already generated for this session");
      QuestionGeneration g = generate_questions(s.email, s.user, *llm_, cfg_.questions);
      s.question_set = g.questions;
      s.advance_to(SessionState::Questioned);
      return g.questions;
    });
  }

  std::shared_ptr<SessionStore> store_;
  std::shared_ptr<CompletionProvider> llm_;
  ServiceConfig cfg_;
  std::shared_ptr<spdlog::logger> log_;
};

}  // namespace qareply
