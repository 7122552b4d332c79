#pragma once

// Email ingestion: RFC 5322 / MIME files and the JSON email payload.
//
// The body produced here is the anchor space. It is handed to the LLM and to
// the anchor resolver unchanged, so nothing downstream may normalize it.

#include <iconv.h>
#include <sodium.h>

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cstring>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qareply/digest.hpp"
#include "qareply/domain.hpp"
#include "qareply/error.hpp"
#include "qareply/utf8.hpp"

namespace qareply {

struct IngestConfig {
  std::size_t max_body_chars = 20000;
  bool strip_quoted_trail = false;
  std::string default_locale{UserIdentity::kDefaultLocale};
};

namespace mime {

inline std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

inline std::string trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  return std::string(s.substr(b, s.find_last_not_of(ws) - b + 1));
}

inline std::string crlf_to_lf(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\r' && i + 1 < s.size() && s[i + 1] == '\n') continue;
    out.push_back(s[i]);
  }
  return out;
}

/// Charset conversion to UTF-8 through iconv. Unknown charsets and
/// conversion failures fall back to treating the bytes as UTF-8.
inline std::string to_utf8(std::string_view bytes, std::string_view charset) {
  const std::string cs = lower(trim(charset));
  if (cs.empty() || cs == "utf-8" || cs == "utf8" || cs == "us-ascii" || cs == "ascii")
    return utf8::sanitize(bytes);
  iconv_t cd = iconv_open("UTF-8", cs.c_str());
  if (cd == reinterpret_cast<iconv_t>(-1)) return utf8::sanitize(bytes);
  std::string in(bytes);
  std::string out(in.size() * 4 + 16, '\0');
  char* inp = in.data();
  std::size_t inleft = in.size();
  char* outp = out.data();
  std::size_t outleft = out.size();
  const std::size_t rc = iconv(cd, &inp, &inleft, &outp, &outleft);
  iconv_close(cd);
  if (rc == static_cast<std::size_t>(-1)) return utf8::sanitize(bytes);
  out.resize(out.size() - outleft);
  return utf8::sanitize(out);
}

inline std::optional<std::string> base64_decode(std::string_view in) {
  ensure_sodium();
  std::string out(in.size() * 3 / 4 + 4, '\0');
  std::size_t len = 0;
  const char* end = nullptr;
  if (sodium_base642bin(reinterpret_cast<unsigned char*>(out.data()), out.size(), in.data(), in.size(),
                        " \t\r\n", &len, &end, sodium_base64_VARIANT_ORIGINAL) != 0) {
    // Retry without padding requirements for sloppy encoders.
    std::string stripped;
    for (char c : in)
      if (c != '=' && c != ' ' && c != '\t' && c != '\r' && c != '\n') stripped.push_back(c);
    if (sodium_base642bin(reinterpret_cast<unsigned char*>(out.data()), out.size(), stripped.data(),
                          stripped.size(), nullptr, &len, &end,
                          sodium_base64_VARIANT_ORIGINAL_NO_PADDING) != 0)
      return std::nullopt;
  }
  out.resize(len);
  return out;
}

inline int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  return -1;
}

/// Quoted-printable body decoding. `header_mode` applies the RFC 2047 "Q"
/// variant where '_' stands for a space.
inline std::string quoted_printable_decode(std::string_view in, bool header_mode = false) {
  std::string out;
  out.reserve(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    const char c = in[i];
    if (header_mode && c == '_') {
      out.push_back(' ');
    } else if (c == '=') {
      if (i + 1 < in.size() && in[i + 1] == '\n') {
        i += 1;  // soft break
      } else if (i + 2 < in.size() && in[i + 1] == '\r' && in[i + 2] == '\n') {
        i += 2;
      } else if (i + 2 < in.size() && hex_value(in[i + 1]) >= 0 && hex_value(in[i + 2]) >= 0) {
        out.push_back(static_cast<char>(hex_value(in[i + 1]) * 16 + hex_value(in[i + 2])));
        i += 2;
      } else {
        out.push_back(c);
      }
    } else {
      out.push_back(c);
    }
  }
  return out;
}

/// Decodes RFC 2047 encoded words; whitespace between adjacent encoded words is dropped.
inline std::string decode_header_words(std::string_view value) {
  std::string out;
  std::size_t i = 0;
  bool last_was_word = false;
  std::string pending_ws;
  while (i < value.size()) {
    if (value.compare(i, 2, "=?") == 0) {
      const auto q1 = value.find('?', i + 2);
      const auto q2 = q1 == std::string_view::npos ? q1 : value.find('?', q1 + 1);
      const auto end = q2 == std::string_view::npos ? q2 : value.find("?=", q2 + 1);
      if (end != std::string_view::npos && q2 == q1 + 2) {
        std::string charset(value.substr(i + 2, q1 - i - 2));
        if (auto star = charset.find('*'); star != std::string::npos) charset.resize(star);
        const char enc = static_cast<char>(std::toupper(static_cast<unsigned char>(value[q1 + 1])));
        const std::string_view text = value.substr(q2 + 1, end - q2 - 1);
        std::optional<std::string> raw;
        if (enc == 'B') raw = base64_decode(text);
        else if (enc == 'Q') raw = quoted_printable_decode(text, true);
        if (raw) {
          if (!last_was_word) out += pending_ws;
          pending_ws.clear();
          out += to_utf8(*raw, charset);
          last_was_word = true;
          i = end + 2;
          continue;
        }
      }
    }
    const char c = value[i];
    if (c == ' ' || c == '\t') {
      pending_ws.push_back(c);
    } else {
      out += pending_ws;
      pending_ws.clear();
      out.push_back(c);
      last_was_word = false;
    }
    ++i;
  }
  out += pending_ws;
  return utf8::sanitize(out);
}

struct HeaderField {
  std::string name;  // lower-cased
  std::string value;
};

struct Entity {
  std::vector<HeaderField> headers;
  std::string body;  // raw, LF line endings

  std::optional<std::string> header(std::string_view name) const {
    const std::string key = lower(name);
    for (const auto& h : headers)
      if (h.name == key) return h.value;
    return std::nullopt;
  }
};

/// Splits an LF-normalized entity into unfolded headers and raw body.
inline Entity split_entity(std::string_view text, bool require_headers) {
  Entity e;
  std::size_t sep;
  std::string_view head;
  if (text.substr(0, 1) == "\n") {
    sep = 0;
    head = {};
    e.body = std::string(text.substr(1));
  } else {
    sep = text.find("\n\n");
    if (sep == std::string_view::npos) {
      if (require_headers) throw Error(ErrorCode::MalformedHeaders, "no blank line after the header block");
      head = text;
      if (!head.empty() && head.back() == '\n') head.remove_suffix(1);
    } else {
      head = text.substr(0, sep);
      e.body = std::string(text.substr(sep + 2));
    }
  }
  std::size_t pos = 0;
  while (pos < head.size()) {
    auto nl = head.find('\n', pos);
    if (nl == std::string_view::npos) nl = head.size();
    const std::string_view line = head.substr(pos, nl - pos);
    pos = nl + 1;
    if (line.empty()) continue;
    if (line[0] == ' ' || line[0] == '\t') {
      if (e.headers.empty()) throw Error(ErrorCode::MalformedHeaders, "continuation line before any header");
      e.headers.back().value += " " + trim(line);
      continue;
    }
    const auto colon = line.find(':');
    if (colon == std::string_view::npos || colon == 0)
      throw Error(ErrorCode::MalformedHeaders, "header line without a field name");
    const std::string name = lower(line.substr(0, colon));
    for (unsigned char c : name)
      if (c <= 32 || c >= 127) throw Error(ErrorCode::MalformedHeaders, "invalid character in header name");
    e.headers.push_back({name, trim(line.substr(colon + 1))});
  }
  if (require_headers && e.headers.empty()) throw Error(ErrorCode::MalformedHeaders, "no header fields");
  return e;
}

struct ContentType {
  std::string type = "text";
  std::string subtype = "plain";
  std::map<std::string, std::string> params;

  std::string mime() const { return type + "/" + subtype; }
  std::string param(const std::string& k) const {
    auto it = params.find(k);
    return it == params.end() ? std::string() : it->second;
  }
};

inline ContentType parse_content_type(std::optional<std::string> value) {
  ContentType ct;
  if (!value) return ct;
  const std::string v = *value;
  std::size_t semi = v.find(';');
  const std::string mt = lower(trim(v.substr(0, semi)));
  if (auto slash = mt.find('/'); slash != std::string::npos) {
    ct.type = mt.substr(0, slash);
    ct.subtype = mt.substr(slash + 1);
  }
  while (semi != std::string::npos) {
    std::size_t start = semi + 1;
    std::size_t eq = v.find('=', start);
    if (eq == std::string::npos) break;
    std::string key = lower(trim(v.substr(start, eq - start)));
    std::string val;
    std::size_t i = eq + 1;
    while (i < v.size() && (v[i] == ' ' || v[i] == '\t')) ++i;
    if (i < v.size() && v[i] == '"') {
      ++i;
      while (i < v.size() && v[i] != '"') {
        if (v[i] == '\\' && i + 1 < v.size()) ++i;
        val.push_back(v[i++]);
      }
      semi = v.find(';', i);
    } else {
      semi = v.find(';', i);
      val = trim(v.substr(i, semi == std::string::npos ? std::string::npos : semi - i));
    }
    ct.params[key] = val;
  }
  return ct;
}

inline std::string decode_transfer(const Entity& e) {
  const std::string enc = lower(trim(e.header("content-transfer-encoding").value_or("7bit")));
  if (enc == "base64") {
    if (auto d = base64_decode(e.body)) return *d;
    return e.body;
  }
  if (enc == "quoted-printable") return quoted_printable_decode(e.body);
  return e.body;
}

// ---------------------------------------------------------------------------
// HTML flattening: tags removed, <br> and block boundaries become newlines,
// other whitespace collapses to single spaces, entities decoded.

inline void append_entity(std::string& out, std::string_view name) {
  static const std::map<std::string, char32_t, std::less<>> named = {
      {"amp", U'&'}, {"lt", U'<'}, {"gt", U'>'}, {"quot", U'"'}, {"apos", U'\''}, {"nbsp", 0x00A0}};
  if (!name.empty() && name[0] == '#') {
    char32_t cp = 0;
    const bool hex = name.size() > 1 && (name[1] == 'x' || name[1] == 'X');
    const std::string digits(name.substr(hex ? 2 : 1));
    try {
      cp = static_cast<char32_t>(std::stoul(digits, nullptr, hex ? 16 : 10));
    } catch (...) {
      cp = utf8::kReplacement;
    }
    if (cp == 0 || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) cp = utf8::kReplacement;
    utf8::append(out, cp);
    return;
  }
  if (auto it = named.find(lower(name)); it != named.end()) {
    utf8::append(out, it->second);
  } else {
    out += "&";
    out += name;
    out += ";";
  }
}

inline std::string flatten_html(std::string_view html) {
  static const char* const kBlock[] = {"p", "div", "li", "tr", "h1", "h2", "h3", "h4", "h5", "h6",
                                       "blockquote", "ul", "ol", "table", "pre", "hr"};
  std::string text;
  auto newline = [&] {
    while (!text.empty() && text.back() == ' ') text.pop_back();
    text.push_back('\n');
  };
  std::size_t i = 0;
  while (i < html.size()) {
    const char c = html[i];
    if (c == '<') {
      if (html.compare(i, 4, "<!--") == 0) {
        const auto end = html.find("-->", i + 4);
        i = end == std::string_view::npos ? html.size() : end + 3;
        continue;
      }
      const auto close = html.find('>', i);
      if (close == std::string_view::npos) break;
      std::string_view tag = html.substr(i + 1, close - i - 1);
      i = close + 1;
      const bool closing = !tag.empty() && tag[0] == '/';
      if (closing) tag.remove_prefix(1);
      std::size_t n = 0;
      while (n < tag.size() && std::isalnum(static_cast<unsigned char>(tag[n]))) ++n;
      const std::string name = lower(tag.substr(0, n));
      if (!closing && (name == "script" || name == "style")) {
        const auto end = lower(html.substr(i)).find("</" + name);
        i = end == std::string::npos ? html.size() : i + end;
        continue;
      }
      if (name == "br") {
        newline();
      } else {
        for (const char* b : kBlock)
          if (name == b) {
            if (!text.empty() && text.back() != '\n') newline();
            break;
          }
      }
      continue;
    }
    if (c == '&') {
      const auto semi = html.find(';', i);
      if (semi != std::string_view::npos && semi - i <= 10) {
        append_entity(text, html.substr(i + 1, semi - i - 1));
        i = semi + 1;
        continue;
      }
    }
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      if (!text.empty() && text.back() != ' ' && text.back() != '\n') text.push_back(' ');
      ++i;
      continue;
    }
    text.push_back(c);
    ++i;
  }
  while (!text.empty() && (text.back() == ' ' || text.back() == '\n')) text.pop_back();
  std::size_t lead = 0;
  while (lead < text.size() && (text[lead] == ' ' || text[lead] == '\n')) ++lead;
  return text.substr(lead);
}

struct TextParts {
  std::optional<std::string> plain;
  std::optional<std::string> html;
  std::size_t ignored_attachments = 0;
};

inline void collect_parts(const Entity& e, TextParts& parts, int depth) {
  if (depth > 16) return;
  const ContentType ct = parse_content_type(e.header("content-type"));
  const std::string disposition = lower(e.header("content-disposition").value_or(""));
  if (disposition.rfind("attachment", 0) == 0) {
    ++parts.ignored_attachments;
    return;
  }
  if (ct.type == "multipart") {
    const std::string boundary = ct.param("boundary");
    if (boundary.empty()) return;
    const std::string delim = "--" + boundary;
    std::size_t pos = 0;
    const std::string& b = e.body;
    std::vector<std::string_view> chunks;
    std::optional<std::size_t> chunk_start;
    while (pos <= b.size()) {
      auto nl = b.find('\n', pos);
      if (nl == std::string::npos) nl = b.size();
      std::string_view line(b.data() + pos, nl - pos);
      while (!line.empty() && (line.back() == ' ' || line.back() == '\t')) line.remove_suffix(1);
      if (line.rfind(delim, 0) == 0) {
        const bool final = line.substr(delim.size()) == "--";
        if (chunk_start) {
          std::size_t end = pos > 0 ? pos - 1 : 0;  // drop the line break preceding the delimiter
          chunks.emplace_back(b.data() + *chunk_start, end > *chunk_start ? end - *chunk_start : 0);
        }
        if (final) break;
        chunk_start = nl + 1 <= b.size() ? nl + 1 : b.size();
      }
      pos = nl + 1;
    }
    for (auto chunk : chunks) collect_parts(split_entity(chunk, false), parts, depth + 1);
    return;
  }
  if (ct.type == "text" && (ct.subtype == "plain" || ct.subtype == "html")) {
    std::string text = to_utf8(decode_transfer(e), ct.param("charset"));
    if (ct.subtype == "plain" && !parts.plain) parts.plain = std::move(text);
    else if (ct.subtype == "html" && !parts.html) parts.html = std::move(text);
    return;
  }
  if (ct.type == "message" && ct.subtype == "rfc822") return;
  ++parts.ignored_attachments;
}

/// "Name <addr>", "<addr>", "addr (Name)" or bare "addr".
inline std::pair<std::string, std::string> parse_mailbox(std::string_view value) {
  const std::string v = trim(value);
  const auto lt = v.rfind('<');
  const auto gt = v.rfind('>');
  if (lt != std::string::npos && gt != std::string::npos && gt > lt) {
    std::string name = trim(v.substr(0, lt));
    if (name.size() >= 2 && name.front() == '"' && name.back() == '"') name = name.substr(1, name.size() - 2);
    return {decode_header_words(name), trim(v.substr(lt + 1, gt - lt - 1))};
  }
  const auto lp = v.find('(');
  const auto rp = v.rfind(')');
  if (lp != std::string::npos && rp != std::string::npos && rp > lp)
    return {decode_header_words(trim(v.substr(lp + 1, rp - lp - 1))), trim(v.substr(0, lp))};
  return {"", v};
}

/// RFC 5322 date-time, e.g. "Tue, 15 Oct 2024 09:30:00 +0900".
inline std::optional<Timestamp> parse_rfc5322_date(std::string_view value) {
  std::string v = trim(value);
  if (auto comma = v.find(','); comma != std::string::npos) v = trim(v.substr(comma + 1));
  if (auto paren = v.find('('); paren != std::string::npos) v = trim(v.substr(0, paren));
  int day = 0, year = 0, hh = 0, mm = 0, ss = 0;
  char mon[4] = {0};
  char zone[16] = {0};
  int n = std::sscanf(v.c_str(), "%d %3s %d %d:%d:%d %15s", &day, mon, &year, &hh, &mm, &ss, zone);
  if (n < 7) {
    ss = 0;
    n = std::sscanf(v.c_str(), "%d %3s %d %d:%d %15s", &day, mon, &year, &hh, &mm, zone);
    if (n < 6) return std::nullopt;
  }
  static const char* const kMonths[] = {"jan", "feb", "mar", "apr", "may", "jun",
                                        "jul", "aug", "sep", "oct", "nov", "dec"};
  int month = -1;
  for (int k = 0; k < 12; ++k)
    if (lower(mon) == kMonths[k]) month = k;
  if (month < 0) return std::nullopt;
  if (year < 100) year += year < 50 ? 2000 : 1900;
  int offset_min = 0;
  const std::string z = zone;
  if ((z[0] == '+' || z[0] == '-') && z.size() == 5) {
    const int hhmm = std::atoi(z.c_str() + 1);
    offset_min = (hhmm / 100) * 60 + hhmm % 100;
    if (z[0] == '-') offset_min = -offset_min;
  }
  std::tm tm{};
  tm.tm_year = year - 1900;
  tm.tm_mon = month;
  tm.tm_mday = day;
  tm.tm_hour = hh;
  tm.tm_min = mm;
  tm.tm_sec = ss;
  const std::time_t t = timegm(&tm) - static_cast<std::time_t>(offset_min) * 60;
  return Clock::from_time_t(t);
}

/// Cuts a trailing quoted reply: an "On ... wrote:" line or a final block of '>' lines.
inline std::string strip_quoted_trail(const std::string& body) {
  std::vector<std::size_t> starts{0};
  for (std::size_t i = 0; i < body.size(); ++i)
    if (body[i] == '\n' && i + 1 < body.size()) starts.push_back(i + 1);
  auto line_at = [&](std::size_t k) {
    const std::size_t s = starts[k];
    const std::size_t e = body.find('\n', s);
    return std::string_view(body).substr(s, e == std::string::npos ? std::string::npos : e - s);
  };
  std::size_t cut = body.size();
  std::size_t k = starts.size();
  while (k > 0) {
    const std::string_view l = line_at(k - 1);
    if (!l.empty() && l[0] == '>') {
      cut = starts[k - 1];
      --k;
    } else if (trim(l).empty() && cut != body.size()) {
      --k;
    } else {
      break;
    }
  }
  if (k > 0) {
    const std::string t = trim(line_at(k - 1));
    if (t.rfind("On ", 0) == 0 && t.size() > 6 && t.compare(t.size() - 6, 6, "wrote:") == 0) cut = starts[k - 1];
  }
  std::string out = body.substr(0, cut);
  while (!out.empty() && (out.back() == '\n' || out.back() == ' ')) out.pop_back();
  return out;
}

}  // namespace mime

inline void check_body_size(const std::string& body, const IngestConfig& cfg) {
  if (utf8::length(body) > cfg.max_body_chars)
    throw Error(ErrorCode::BodyTooLarge,
                "body exceeds " + std::to_string(cfg.max_body_chars) + " characters");
}

/// Parses an RFC 5322 message. Line endings are normalized to LF; the body is
/// the first text/plain part, else the flattened first text/html part.
/// Non-text parts are skipped and reported through `warnings`.
inline EmailMessage parse_mail_file(std::string_view bytes, const IngestConfig& cfg = {},
                                    std::vector<std::string>* warnings = nullptr) {
  const std::string text = mime::crlf_to_lf(bytes);
  if (mime::trim(text).empty()) throw Error(ErrorCode::MalformedHeaders, "empty message");
  const mime::Entity root = mime::split_entity(text, true);

  EmailMessage m;
  m.subject = mime::decode_header_words(root.header("subject").value_or(""));
  if (auto from = root.header("from")) {
    auto [name, addr] = mime::parse_mailbox(*from);
    m.sender_name = std::move(name);
    m.sender_address = std::move(addr);
  }
  if (auto date = root.header("date")) m.received_at = mime::parse_rfc5322_date(*date);

  mime::TextParts parts;
  mime::collect_parts(root, parts, 0);
  if (parts.plain) {
    m.body = std::move(*parts.plain);
  } else if (parts.html) {
    m.body = mime::flatten_html(*parts.html);
  } else {
    throw Error(ErrorCode::NoTextPart, "message has no text/plain or text/html part");
  }
  m.body = mime::crlf_to_lf(m.body);
  if (parts.ignored_attachments > 0 && warnings)
    warnings->push_back("ignored " + std::to_string(parts.ignored_attachments) + " non-text part(s)");
  if (cfg.strip_quoted_trail) m.body = mime::strip_quoted_trail(m.body);
  check_body_size(m.body, cfg);
  return m;
}

/// Verbatim mapping of the JSON email payload; the body is not touched.
inline EmailMessage parse_json_email(const Json& j, const IngestConfig& cfg = {}) {
  EmailMessage m = j.get<EmailMessage>();
  check_body_size(m.body, cfg);
  return m;
}

inline EmailMessage parse_json_email_text(std::string_view text, const IngestConfig& cfg = {}) {
  Json j = Json::parse(text, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::WrongType, "email payload is not valid JSON");
  return parse_json_email(j, cfg);
}

inline Json serialize_email(const EmailMessage& m) { return Json(m); }

}  // namespace qareply
