#pragma once

// Unicode scalar-value indexing over UTF-8 strings. Every character offset
// exchanged by this library (anchor spans, metrics counts) is measured in
// scalar values. Malformed bytes decode to U+FFFD, one scalar per bad byte,
// so counts stay defined for any input.

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

namespace qareply::utf8 {

inline constexpr char32_t kReplacement = 0xFFFD;

namespace detail {

// Decodes one scalar starting at s[i]; returns the number of bytes consumed.
inline std::size_t decode_one(std::string_view s, std::size_t i, char32_t& out) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  if (b0 < 0x80) {
    out = b0;
    return 1;
  }
  std::size_t need = 0;
  char32_t cp = 0;
  char32_t min = 0;
  if ((b0 & 0xE0) == 0xC0) {
    need = 1, cp = b0 & 0x1F, min = 0x80;
  } else if ((b0 & 0xF0) == 0xE0) {
    need = 2, cp = b0 & 0x0F, min = 0x800;
  } else if ((b0 & 0xF8) == 0xF0) {
    need = 3, cp = b0 & 0x07, min = 0x10000;
  } else {
    out = kReplacement;
    return 1;
  }
  if (i + need >= s.size()) {
    out = kReplacement;
    return 1;
  }
  for (std::size_t k = 1; k <= need; ++k) {
    const auto b = static_cast<unsigned char>(s[i + k]);
    if ((b & 0xC0) != 0x80) {
      out = kReplacement;
      return 1;
    }
    cp = (cp << 6) | (b & 0x3F);
  }
  if (cp < min || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
    out = kReplacement;
    return 1;
  }
  out = cp;
  return need + 1;
}

}  // namespace detail

inline std::u32string decode(std::string_view s) {
  std::u32string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size();) {
    char32_t cp;
    i += detail::decode_one(s, i, cp);
    out.push_back(cp);
  }
  return out;
}

inline void append(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

inline std::string encode(std::u32string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char32_t cp : s) append(out, cp);
  return out;
}

inline std::size_t length(std::string_view s) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < s.size(); ++n) {
    char32_t cp;
    i += detail::decode_one(s, i, cp);
  }
  return n;
}

inline bool is_valid(std::string_view s) {
  for (std::size_t i = 0; i < s.size();) {
    char32_t cp;
    const std::size_t n = detail::decode_one(s, i, cp);
    if (cp == kReplacement && !(n == 3 && s.substr(i, 3) == "\xEF\xBF\xBD")) return false;
    i += n;
  }
  return true;
}

/// Replaces malformed sequences with U+FFFD. Identity on valid input.
inline std::string sanitize(std::string_view s) {
  return is_valid(s) ? std::string(s) : encode(decode(s));
}

/// Slice by scalar offsets; clamps to the end of the string.
inline std::string substr(std::string_view s, std::size_t start, std::size_t count) {
  const std::u32string cps = decode(s);
  if (start >= cps.size()) return {};
  return encode(std::u32string_view(cps).substr(start, count));
}

}  // namespace qareply::utf8
