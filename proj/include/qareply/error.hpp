#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace qareply {

enum class ErrorCode {
  // core-domain validation
  DuplicateId,
  EmptyId,
  EmptyQuestionText,
  TooManyQuestions,
  // email-ingest
  MalformedHeaders,
  NoTextPart,
  BodyTooLarge,
  MissingField,
  WrongType,
  // question-engine
  EmptyBody,
  NoJsonFound,
  SchemaMismatch,
  // draft-engine
  NothingToSay,
  NoDraft,
  RegenerationLimit,
  // llm-gateway
  AuthError,
  RateLimited,
  Timeout,
  TransportError,
  ProviderError,
  // session-service
  UnknownSession,
  UnknownQuestionId,
  IndexOutOfRange,
  InvalidAnswer,
  AlreadyFinalized,
  InvalidState,
  EmptyFinalText,
  // metrics
  NonPositiveDuration,
  WrongArity,
  OutOfRange,
  // files and configuration
  Io,
};

constexpr std::string_view to_string(ErrorCode c) {
  switch (c) {
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::EmptyId: return "EmptyId";
    case ErrorCode::EmptyQuestionText: return "EmptyQuestionText";
    case ErrorCode::TooManyQuestions: return "TooManyQuestions";
    case ErrorCode::MalformedHeaders: return "MalformedHeaders";
    case ErrorCode::NoTextPart: return "NoTextPart";
    case ErrorCode::BodyTooLarge: return "BodyTooLarge";
    case ErrorCode::MissingField: return "MissingField";
    case ErrorCode::WrongType: return "WrongType";
    case ErrorCode::EmptyBody: return "EmptyBody";
    case ErrorCode::NoJsonFound: return "NoJsonFound";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::NothingToSay: return "NothingToSay";
    case ErrorCode::NoDraft: return "NoDraft";
    case ErrorCode::RegenerationLimit: return "RegenerationLimit";
    case ErrorCode::AuthError: return "AuthError";
    case ErrorCode::RateLimited: return "RateLimited";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::TransportError: return "TransportError";
    case ErrorCode::ProviderError: return "ProviderError";
    case ErrorCode::UnknownSession: return "UnknownSession";
    case ErrorCode::UnknownQuestionId: return "UnknownQuestionId";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::InvalidAnswer: return "InvalidAnswer";
    case ErrorCode::AlreadyFinalized: return "AlreadyFinalized";
    case ErrorCode::InvalidState: return "InvalidState";
    case ErrorCode::EmptyFinalText: return "EmptyFinalText";
    case ErrorCode::NonPositiveDuration: return "NonPositiveDuration";
    case ErrorCode::WrongArity: return "WrongArity";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

/// Provider-side failures: transport, auth, throttling, and exhausted retries.
constexpr bool is_provider_error(ErrorCode c) {
  return c == ErrorCode::AuthError || c == ErrorCode::RateLimited || c == ErrorCode::Timeout ||
         c == ErrorCode::TransportError || c == ErrorCode::ProviderError;
}

/// Messages must never carry email, answer or draft content; callers log them.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

struct ValidationIssue {
  ErrorCode code;
  std::string question_id;
  std::string message;
};

/// Structural violations of a question set, reported together.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<ValidationIssue> issues)
      : Error(issues.empty() ? ErrorCode::SchemaMismatch : issues.front().code, summarize(issues)),
        issues_(std::move(issues)) {}

  const std::vector<ValidationIssue>& issues() const noexcept { return issues_; }

 private:
  static std::string summarize(const std::vector<ValidationIssue>& issues) {
    std::string s = std::to_string(issues.size()) + " validation issue(s)";
    for (const auto& i : issues) {
      s += "; ";
      s += to_string(i.code);
      if (!i.question_id.empty()) s += " (question " + i.question_id + ")";
    }
    return s;
  }

  std::vector<ValidationIssue> issues_;
};

}  // namespace qareply
