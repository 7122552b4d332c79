#pragma once

#include <algorithm>
#include <cctype>
#include <set>
#include <string>
#include <vector>

#include "qareply/anchor.hpp"
#include "qareply/domain.hpp"
#include "qareply/error.hpp"
#include "qareply/utf8.hpp"

namespace qareply {

struct ValidationConfig {
  std::size_t max_questions = 10;
  // Matched case-insensitively against a trimmed choice, either whole or as a
  // leading word ("Other (please specify)").
  std::vector<std::string> other_patterns{"other", "その他"};
  AnchorOptions anchor;
};

namespace validate_detail {

inline std::string trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  return std::string(s.substr(b, s.find_last_not_of(ws) - b + 1));
}

inline std::string ascii_lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

}  // namespace validate_detail

inline bool is_other_like(std::string_view choice, const std::vector<std::string>& patterns) {
  const std::string c = validate_detail::ascii_lower(validate_detail::trim(choice));
  for (const auto& raw : patterns) {
    const std::string p = validate_detail::ascii_lower(raw);
    if (p.empty() || c.compare(0, p.size(), p) != 0) continue;
    if (c.size() == p.size()) return true;
    const unsigned char next = static_cast<unsigned char>(c[p.size()]);
    if (next < 0x80 && !std::isalnum(next)) return true;
  }
  return false;
}

/// Structural checks plus anchor resolution for every question. Structural
/// violations throw ValidationError with every issue found; anchoring
/// problems are reported through flags and never fail the set.
inline QuestionSet validate_question_set(QuestionSet set, const EmailMessage& email,
                                         const ValidationConfig& cfg = {}) {
  std::vector<ValidationIssue> issues;
  if (set.questions.size() > cfg.max_questions) {
    issues.push_back({ErrorCode::TooManyQuestions, "",
                      std::to_string(set.questions.size()) + " questions exceed the cap of " +
                          std::to_string(cfg.max_questions)});
  }
  std::set<std::string> seen;
  for (const auto& q : set.questions) {
    if (q.id.empty()) issues.push_back({ErrorCode::EmptyId, "", "question id is empty"});
    else if (!seen.insert(q.id).second) issues.push_back({ErrorCode::DuplicateId, q.id, "duplicate question id"});
    if (validate_detail::trim(q.question).empty())
      issues.push_back({ErrorCode::EmptyQuestionText, q.id, "question text is empty"});
  }
  if (!issues.empty()) throw ValidationError(std::move(issues));

  const std::u32string body = utf8::decode(email.body);
  for (auto& q : set.questions) {
    q.flags.clear();
    q.anchor.reset();
    for (const auto& c : q.choices) {
      if (is_other_like(c, cfg.other_patterns)) {
        q.flags.insert(QuestionFlag::OtherLikeChoice);
        break;
      }
    }
    if (q.corresponding_part.empty()) continue;
    const AnchorResolution r = resolve_anchor(utf8::decode(q.corresponding_part), body, cfg.anchor);
    if (!r.span) continue;
    q.anchor = r.span;
    if (r.mode == AnchorMode::Exact && r.occurrences > 1) q.flags.insert(QuestionFlag::AmbiguousAnchor);
    if (r.mode == AnchorMode::Normalized || r.mode == AnchorMode::Fuzzy) q.flags.insert(QuestionFlag::FuzzyAnchor);
  }
  return set;
}

}  // namespace qareply
