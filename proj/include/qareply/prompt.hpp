#pragma once

#include <string>
#include <string_view>

#include "qareply/digest.hpp"
#include "qareply/domain.hpp"
#include "qareply/utf8.hpp"

namespace qareply {

enum class PromptKind { QuestionGen, DraftGen };
QAREPLY_ENUM_STRINGS(PromptKind, {PromptKind::QuestionGen, "question_gen"}, {PromptKind::DraftGen, "draft_gen"})

struct PromptText {
  std::string text;
  std::string digest;
  PromptKind kind = PromptKind::QuestionGen;

  static PromptText make(std::string text, PromptKind kind) {
    PromptText p;
    p.digest = content_digest(text);
    p.text = std::move(text);
    p.kind = kind;
    return p;
  }
};

namespace prompt_format {

inline constexpr std::string_view kMailHeader = "###Incoming Mail###\n";
inline constexpr std::string_view kMailTrailerPrefix = "###End of Incoming Mail (";
inline constexpr std::string_view kMailTrailerSuffix = " characters)###\n";
inline constexpr std::string_view kTranscriptHeader = "###Questions and Answers###\n";
inline constexpr std::string_view kUserHeader = "###User###\n";
inline constexpr std::string_view kAnswerArrow = " \xE2\x86\x92 ";  // " → "

inline std::string mailbox(const EmailMessage& m) {
  if (m.sender_name.empty()) return m.sender_address;
  return m.sender_name + " <" + m.sender_address + ">";
}

inline void append_message_headers(std::string& out, const EmailMessage& m) {
  out += "Subject: " + m.subject + "\n";
  out += "From: " + mailbox(m) + "\n";
  if (m.received_at) out += "Date: " + format_timestamp(*m.received_at) + "\n";
}

/// Earlier messages of the conversation, oldest first.
inline void append_thread(std::string& out, const EmailMessage& m) {
  out += "###Prior Messages (oldest first)###\n";
  if (m.thread.empty()) {
    out += "(none)\n";
    return;
  }
  for (std::size_t i = 0; i < m.thread.size(); ++i) {
    out += "--- Message " + std::to_string(i + 1) + " of " + std::to_string(m.thread.size()) + " ---\n";
    append_message_headers(out, m.thread[i]);
    out += "\n";
    out += m.thread[i].body;
    out += "\n";
  }
  out += "--- End of Prior Messages ---\n";
}

/// The incoming mail block. The body is written verbatim and the trailer
/// carries its length so the body can be recovered from the prompt text.
inline void append_incoming_mail(std::string& out, const EmailMessage& m) {
  out += kMailHeader;
  append_message_headers(out, m);
  out += "\n";
  out += m.body;
  out += "\n";
  out += kMailTrailerPrefix;
  out += std::to_string(utf8::length(m.body));
  out += kMailTrailerSuffix;
}

/// Recovers the incoming mail body from a prompt produced by append_incoming_mail,
/// searching the last trailer. Returns false when the prompt has no mail block.
inline bool extract_incoming_body(std::string_view prompt, std::string& body) {
  const auto t = prompt.rfind(kMailTrailerPrefix);
  if (t == std::string_view::npos || t == 0) return false;
  const auto close = prompt.find(kMailTrailerSuffix, t);
  if (close == std::string_view::npos) return false;
  const std::string digits(prompt.substr(t + kMailTrailerPrefix.size(), close - t - kMailTrailerPrefix.size()));
  if (digits.empty() || digits.find_first_not_of("0123456789") != std::string::npos) return false;
  const std::size_t n = std::stoul(digits);
  const std::u32string before = utf8::decode(prompt.substr(0, t - 1));  // drop the '\n' after the body
  if (n > before.size()) return false;
  body = utf8::encode(std::u32string_view(before).substr(before.size() - n));
  return true;
}

}  // namespace prompt_format

}  // namespace qareply
