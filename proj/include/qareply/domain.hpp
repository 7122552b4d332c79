#pragma once

#include <json.hpp>

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <ctime>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "qareply/error.hpp"

namespace qareply {

using Json = nlohmann::json;
using Clock = std::chrono::system_clock;
using Timestamp = Clock::time_point;

// ---------------------------------------------------------------------------
// Timestamps travel as ISO-8601 UTC with millisecond precision.

inline std::string format_timestamp(Timestamp t) {
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(t.time_since_epoch()).count();
  std::time_t secs = static_cast<std::time_t>(ms / 1000);
  long frac = static_cast<long>(ms % 1000);
  if (frac < 0) frac += 1000, --secs;
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[96];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03ldZ", tm.tm_year + 1900,
                tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, frac);
  return buf;
}

inline std::optional<Timestamp> parse_timestamp(std::string_view s) {
  int y, mo, d, h, mi, sec;
  int ms = 0;
  char tail[8] = {0};
  const std::string str(s);
  int n = std::sscanf(str.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d.%3d%1s", &y, &mo, &d, &h, &mi, &sec, &ms, tail);
  if (n < 8) {
    ms = 0;
    n = std::sscanf(str.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d%1s", &y, &mo, &d, &h, &mi, &sec, tail);
    if (n < 7) return std::nullopt;
  }
  if (tail[0] != 'Z') return std::nullopt;
  std::tm tm{};
  tm.tm_year = y - 1900;
  tm.tm_mon = mo - 1;
  tm.tm_mday = d;
  tm.tm_hour = h;
  tm.tm_min = mi;
  tm.tm_sec = sec;
  const std::time_t secs = timegm(&tm);
  return Clock::time_point(std::chrono::seconds(secs)) + std::chrono::milliseconds(ms);
}

// ---------------------------------------------------------------------------
// Strict JSON field access. Failures map onto MissingField / WrongType.

namespace json_field {

inline const Json& require(const Json& j, const char* key) {
  if (!j.is_object()) throw Error(ErrorCode::WrongType, "expected a JSON object");
  auto it = j.find(key);
  if (it == j.end()) throw Error(ErrorCode::MissingField, std::string("missing field '") + key + "'");
  return *it;
}

inline std::string string(const Json& j, const char* key) {
  const Json& v = require(j, key);
  if (!v.is_string()) throw Error(ErrorCode::WrongType, std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

inline std::string string_or(const Json& j, const char* key, std::string fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  return string(j, key);
}

inline bool boolean_or(const Json& j, const char* key, bool fallback) {
  if (!j.contains(key)) return fallback;
  const Json& v = j.at(key);
  if (!v.is_boolean()) throw Error(ErrorCode::WrongType, std::string("field '") + key + "' must be a boolean");
  return v.get<bool>();
}

inline std::vector<std::string> strings_or_empty(const Json& j, const char* key) {
  if (!j.contains(key)) return {};
  const Json& v = j.at(key);
  if (!v.is_array()) throw Error(ErrorCode::WrongType, std::string("field '") + key + "' must be an array");
  std::vector<std::string> out;
  for (const auto& e : v) {
    if (!e.is_string())
      throw Error(ErrorCode::WrongType, std::string("field '") + key + "' must contain strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

inline std::optional<Timestamp> timestamp_or_none(const Json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  const auto t = parse_timestamp(string(j, key));
  if (!t) throw Error(ErrorCode::WrongType, std::string("field '") + key + "' must be an ISO-8601 UTC time");
  return t;
}

}  // namespace json_field

// Enum <-> string tables; unknown names are rejected, never defaulted.
#define QAREPLY_ENUM_STRINGS(Enum, ...)                                                   \
  inline constexpr std::pair<Enum, std::string_view> Enum##_names[] = {__VA_ARGS__};      \
  inline std::string_view to_string(Enum e) {                                             \
    for (const auto& [v, n] : Enum##_names)                                               \
      if (v == e) return n;                                                               \
    return "?";                                                                           \
  }                                                                                       \
  inline Enum parse_##Enum(std::string_view s) {                                          \
    for (const auto& [v, n] : Enum##_names)                                               \
      if (n == s) return v;                                                               \
    throw Error(ErrorCode::WrongType, "unknown " #Enum " value");                         \
  }                                                                                       \
  inline void to_json(Json& j, Enum e) { j = std::string(to_string(e)); }                 \
  inline void from_json(const Json& j, Enum& e) {                                         \
    if (!j.is_string()) throw Error(ErrorCode::WrongType, #Enum " must be a string");     \
    e = parse_##Enum(j.get<std::string>());                                               \
  }

// ---------------------------------------------------------------------------

struct EmailMessage {
  std::string subject;
  std::string sender_name;
  std::string sender_address;
  std::string body;  // anchor space; never normalized after ingest
  std::vector<EmailMessage> thread;
  std::optional<Timestamp> received_at;

  bool operator==(const EmailMessage&) const = default;
};

struct UserIdentity {
  static constexpr std::string_view kDefaultLocale = "en";

  std::string name;
  std::string address;
  std::string locale{kDefaultLocale};

  bool operator==(const UserIdentity&) const = default;
};

/// Half-open range [start, start + length) in Unicode scalar values.
struct AnchorSpan {
  std::size_t start = 0;
  std::size_t length = 0;

  std::size_t end() const { return start + length; }
  bool operator==(const AnchorSpan&) const = default;
};

enum class QuestionFlag { AmbiguousAnchor, FuzzyAnchor, OtherLikeChoice };
QAREPLY_ENUM_STRINGS(QuestionFlag, {QuestionFlag::AmbiguousAnchor, "AmbiguousAnchor"},
                     {QuestionFlag::FuzzyAnchor, "FuzzyAnchor"},
                     {QuestionFlag::OtherLikeChoice, "OtherLikeChoice"})

struct Question {
  std::string id;
  std::string question;
  std::vector<std::string> choices;
  std::string corresponding_part;
  std::optional<AnchorSpan> anchor;  // nullopt = unanchored
  std::set<QuestionFlag> flags;

  bool has(QuestionFlag f) const { return flags.count(f) != 0; }
  bool operator==(const Question&) const = default;
};

enum class QuestionSource { LiveLlm, Mock, Imported };
QAREPLY_ENUM_STRINGS(QuestionSource, {QuestionSource::LiveLlm, "live-llm"},
                     {QuestionSource::Mock, "mock"}, {QuestionSource::Imported, "imported"})

struct QuestionSet {
  std::vector<Question> questions;
  QuestionSource source = QuestionSource::Imported;
  std::string raw_response;

  const Question* find(std::string_view id) const {
    for (const auto& q : questions)
      if (q.id == id) return &q;
    return nullptr;
  }
  bool operator==(const QuestionSet&) const = default;
};

struct Answer {
  std::string question_id;
  std::set<std::size_t> selected;
  std::vector<std::string> custom_options;
  bool skipped = false;

  bool operator==(const Answer&) const = default;
};

using AnswerSet = std::vector<Answer>;

enum class Formality { Casual, Neutral, Formal };
QAREPLY_ENUM_STRINGS(Formality, {Formality::Casual, "casual"}, {Formality::Neutral, "neutral"},
                     {Formality::Formal, "formal"})

enum class Tone { Friendly, Neutral, Apologetic, Assertive };
QAREPLY_ENUM_STRINGS(Tone, {Tone::Friendly, "friendly"}, {Tone::Neutral, "neutral"},
                     {Tone::Apologetic, "apologetic"}, {Tone::Assertive, "assertive"})

enum class ReplyLength { Short, Medium, Long };
QAREPLY_ENUM_STRINGS(ReplyLength, {ReplyLength::Short, "short"}, {ReplyLength::Medium, "medium"},
                     {ReplyLength::Long, "long"})

struct ReplyPreferences {
  std::string relationship;
  Formality formality = Formality::Neutral;
  Tone tone = Tone::Neutral;
  ReplyLength length = ReplyLength::Medium;
  std::string free_instruction;

  bool operator==(const ReplyPreferences&) const = default;
};

struct DraftReply {
  std::string text;
  int generation_index = 1;
  Timestamp created_at{};
  std::string prompt_digest;
  std::string prompt;  // exact prompt text; content_digest(prompt) == prompt_digest
  bool edited = false;

  bool operator==(const DraftReply&) const = default;
};

enum class SessionState { Created, Questioned, Answered, Drafted, Finalized };
QAREPLY_ENUM_STRINGS(SessionState, {SessionState::Created, "created"},
                     {SessionState::Questioned, "questioned"}, {SessionState::Answered, "answered"},
                     {SessionState::Drafted, "drafted"}, {SessionState::Finalized, "finalized"})

struct Session {
  std::string id;
  EmailMessage email;
  UserIdentity user;
  std::optional<QuestionSet> question_set;
  AnswerSet answers;
  ReplyPreferences preferences;
  std::vector<DraftReply> drafts;
  std::optional<std::string> final_text;
  Timestamp opened_at{};
  std::optional<Timestamp> finalized_at;
  SessionState state = SessionState::Created;

  /// Moves forward only; requests for an earlier state are ignored.
  void advance_to(SessionState next) {
    if (next > state) state = next;
  }

  const Answer* answer_for(std::string_view question_id) const {
    for (const auto& a : answers)
      if (a.question_id == question_id) return &a;
    return nullptr;
  }

  bool operator==(const Session&) const = default;
};

enum class Condition { NoAi, PromptBased, QaBased };
QAREPLY_ENUM_STRINGS(Condition, {Condition::NoAi, "no_ai"}, {Condition::PromptBased, "prompt_based"},
                     {Condition::QaBased, "qa_based"})

struct MetricsRecord {
  std::int64_t final_char_count = 0;
  double elapsed_seconds = 0.0;
  std::int64_t prompt_char_count = 0;
  Condition condition = Condition::QaBased;

  bool operator==(const MetricsRecord&) const = default;
};

// ---------------------------------------------------------------------------
// Canonical JSON.

inline void to_json(Json& j, const EmailMessage& m) {
  j = Json{{"subject", m.subject},
           {"sender_name", m.sender_name},
           {"sender_address", m.sender_address},
           {"body", m.body},
           {"thread", Json::array()}};
  for (const auto& t : m.thread) {
    Json tj;
    to_json(tj, t);
    j["thread"].push_back(std::move(tj));
  }
  j["received_at"] = m.received_at ? Json(format_timestamp(*m.received_at)) : Json(nullptr);
}

inline void from_json(const Json& j, EmailMessage& m) {
  m.subject = json_field::string(j, "subject");
  m.sender_name = json_field::string(j, "sender_name");
  m.sender_address = json_field::string(j, "sender_address");
  m.body = json_field::string(j, "body");
  m.thread.clear();
  if (j.contains("thread") && !j.at("thread").is_null()) {
    const Json& t = j.at("thread");
    if (!t.is_array()) throw Error(ErrorCode::WrongType, "field 'thread' must be an array");
    for (const auto& e : t) {
      EmailMessage prior;
      from_json(e, prior);
      m.thread.push_back(std::move(prior));
    }
  }
  m.received_at = json_field::timestamp_or_none(j, "received_at");
}

inline void to_json(Json& j, const UserIdentity& u) {
  j = Json{{"name", u.name}, {"address", u.address}, {"locale", u.locale}};
}

inline void from_json(const Json& j, UserIdentity& u) {
  if (!j.is_object()) throw Error(ErrorCode::WrongType, "user must be a JSON object");
  u.name = json_field::string_or(j, "name", "");
  u.address = json_field::string_or(j, "address", "");
  u.locale = json_field::string_or(j, "locale", std::string(UserIdentity::kDefaultLocale));
  if (u.locale.empty()) u.locale = UserIdentity::kDefaultLocale;
}

inline void to_json(Json& j, const AnchorSpan& a) { j = Json{{"start", a.start}, {"length", a.length}}; }

inline void from_json(const Json& j, AnchorSpan& a) {
  const Json& s = json_field::require(j, "start");
  const Json& l = json_field::require(j, "length");
  if (!s.is_number_unsigned() || !l.is_number_unsigned())
    throw Error(ErrorCode::WrongType, "anchor start/length must be non-negative integers");
  a.start = s.get<std::size_t>();
  a.length = l.get<std::size_t>();
}

inline void to_json(Json& j, const Question& q) {
  j = Json{{"id", q.id},
           {"question", q.question},
           {"choices", q.choices},
           {"corresponding_part", q.corresponding_part},
           {"anchor", q.anchor ? Json(*q.anchor) : Json(nullptr)},
           {"flags", Json::array()}};
  for (auto f : q.flags) j["flags"].push_back(to_string(f));
}

inline void from_json(const Json& j, Question& q) {
  q.id = json_field::string(j, "id");
  q.question = json_field::string(j, "question");
  json_field::require(j, "choices");
  q.choices = json_field::strings_or_empty(j, "choices");
  q.corresponding_part = json_field::string(j, "corresponding_part");
  q.anchor.reset();
  if (j.contains("anchor") && !j.at("anchor").is_null()) q.anchor = j.at("anchor").get<AnchorSpan>();
  q.flags.clear();
  for (const auto& f : json_field::strings_or_empty(j, "flags")) q.flags.insert(parse_QuestionFlag(f));
}

inline void to_json(Json& j, const QuestionSet& s) {
  j = Json{{"questions", s.questions}, {"source", s.source}, {"raw_response", s.raw_response}};
}

inline void from_json(const Json& j, QuestionSet& s) {
  const Json& qs = json_field::require(j, "questions");
  if (!qs.is_array()) throw Error(ErrorCode::WrongType, "field 'questions' must be an array");
  s.questions.clear();
  for (const auto& e : qs) s.questions.push_back(e.get<Question>());
  s.source = j.contains("source") ? j.at("source").get<QuestionSource>() : QuestionSource::Imported;
  s.raw_response = json_field::string_or(j, "raw_response", "");
}

inline void to_json(Json& j, const Answer& a) {
  j = Json{{"question_id", a.question_id},
           {"selected", a.selected},
           {"custom_options", a.custom_options},
           {"skipped", a.skipped}};
}

inline void from_json(const Json& j, Answer& a) {
  a.question_id = json_field::string(j, "question_id");
  a.selected.clear();
  if (j.contains("selected")) {
    const Json& sel = j.at("selected");
    if (!sel.is_array()) throw Error(ErrorCode::WrongType, "field 'selected' must be an array");
    for (const auto& e : sel) {
      if (!e.is_number_integer()) throw Error(ErrorCode::WrongType, "selected indices must be integers");
      if (e.get<std::int64_t>() < 0) throw Error(ErrorCode::IndexOutOfRange, "negative choice index");
      a.selected.insert(e.get<std::size_t>());
    }
  }
  a.custom_options = json_field::strings_or_empty(j, "custom_options");
  a.skipped = json_field::boolean_or(j, "skipped", false);
}

inline AnswerSet answers_from_json(const Json& j) {
  const Json& arr = (j.is_object() && j.contains("answers")) ? j.at("answers") : j;
  if (!arr.is_array()) throw Error(ErrorCode::WrongType, "answers must be a JSON array");
  AnswerSet out;
  for (const auto& e : arr) out.push_back(e.get<Answer>());
  return out;
}

inline void to_json(Json& j, const ReplyPreferences& p) {
  j = Json{{"relationship", p.relationship},
           {"formality", p.formality},
           {"tone", p.tone},
           {"length", p.length},
           {"free_instruction", p.free_instruction}};
}

inline void from_json(const Json& j, ReplyPreferences& p) {
  if (!j.is_object()) throw Error(ErrorCode::WrongType, "preferences must be a JSON object");
  p = ReplyPreferences{};
  p.relationship = json_field::string_or(j, "relationship", "");
  if (j.contains("formality")) p.formality = j.at("formality").get<Formality>();
  if (j.contains("tone")) p.tone = j.at("tone").get<Tone>();
  if (j.contains("length")) p.length = j.at("length").get<ReplyLength>();
  p.free_instruction = json_field::string_or(j, "free_instruction", "");
}

inline void to_json(Json& j, const DraftReply& d) {
  j = Json{{"text", d.text},
           {"generation_index", d.generation_index},
           {"created_at", format_timestamp(d.created_at)},
           {"prompt_digest", d.prompt_digest},
           {"prompt", d.prompt},
           {"edited", d.edited}};
}

inline void from_json(const Json& j, DraftReply& d) {
  d.text = json_field::string(j, "text");
  d.generation_index = json_field::require(j, "generation_index").get<int>();
  d.created_at = json_field::timestamp_or_none(j, "created_at").value_or(Timestamp{});
  d.prompt_digest = json_field::string(j, "prompt_digest");
  d.prompt = json_field::string_or(j, "prompt", "");
  d.edited = json_field::boolean_or(j, "edited", false);
}

inline void to_json(Json& j, const Session& s) {
  j = Json{{"id", s.id},
           {"email", s.email},
           {"user", s.user},
           {"question_set", s.question_set ? Json(*s.question_set) : Json(nullptr)},
           {"answers", s.answers},
           {"preferences", s.preferences},
           {"drafts", s.drafts},
           {"final_text", s.final_text ? Json(*s.final_text) : Json(nullptr)},
           {"opened_at", format_timestamp(s.opened_at)},
           {"finalized_at", s.finalized_at ? Json(format_timestamp(*s.finalized_at)) : Json(nullptr)},
           {"state", s.state}};
}

inline void from_json(const Json& j, Session& s) {
  s.id = json_field::string(j, "id");
  s.email = json_field::require(j, "email").get<EmailMessage>();
  s.user = json_field::require(j, "user").get<UserIdentity>();
  s.question_set.reset();
  if (j.contains("question_set") && !j.at("question_set").is_null())
    s.question_set = j.at("question_set").get<QuestionSet>();
  s.answers = answers_from_json(json_field::require(j, "answers"));
  s.preferences = json_field::require(j, "preferences").get<ReplyPreferences>();
  s.drafts = json_field::require(j, "drafts").get<std::vector<DraftReply>>();
  s.final_text.reset();
  if (j.contains("final_text") && !j.at("final_text").is_null()) s.final_text = json_field::string(j, "final_text");
  s.opened_at = json_field::timestamp_or_none(j, "opened_at").value_or(Timestamp{});
  s.finalized_at = json_field::timestamp_or_none(j, "finalized_at");
  s.state = json_field::require(j, "state").get<SessionState>();
}

inline void to_json(Json& j, const MetricsRecord& r) {
  j = Json{{"condition", r.condition},
           {"final_char_count", r.final_char_count},
           {"elapsed_seconds", r.elapsed_seconds},
           {"prompt_char_count", r.prompt_char_count}};
  if (r.elapsed_seconds > 0.0)
    j["chars_per_second"] = static_cast<double>(r.final_char_count) / r.elapsed_seconds;
  else
    j["chars_per_second"] = nullptr;
}

inline void from_json(const Json& j, MetricsRecord& r) {
  r.condition = json_field::require(j, "condition").get<Condition>();
  r.final_char_count = json_field::require(j, "final_char_count").get<std::int64_t>();
  r.elapsed_seconds = json_field::require(j, "elapsed_seconds").get<double>();
  r.prompt_char_count = json_field::require(j, "prompt_char_count").get<std::int64_t>();
}

}  // namespace qareply
