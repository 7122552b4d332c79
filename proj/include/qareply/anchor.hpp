#pragma once

// Resolves an LLM-quoted excerpt to a span of the email body.
//
// Three passes, first hit wins:
//   exact       plain substring search; the first occurrence is used and the
//               total occurrence count is reported so callers can flag ties.
//   normalized  whitespace runs and <br> tokens collapse to one space on both
//               sides; the hit is mapped back to original body offsets.
//   fuzzy       on the normalized texts: longest common substring, accepted
//               when it covers at least `fuzzy_threshold` of the normalized
//               part. The span is the body substring near that hit with the
//               smallest edit distance to the part, mapped back to original
//               offsets.
// All offsets are Unicode scalar values.

#include <algorithm>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qareply/domain.hpp"
#include "qareply/utf8.hpp"

namespace qareply {

enum class AnchorMode { Exact, Normalized, Fuzzy, Failed };
QAREPLY_ENUM_STRINGS(AnchorMode, {AnchorMode::Exact, "exact"}, {AnchorMode::Normalized, "normalized"},
                     {AnchorMode::Fuzzy, "fuzzy"}, {AnchorMode::Failed, "failed"})

struct AnchorResolution {
  AnchorMode mode = AnchorMode::Failed;
  std::optional<AnchorSpan> span;
  double similarity = 0.0;
  std::size_t occurrences = 0;  // exact mode only

  bool operator==(const AnchorResolution&) const = default;
};

struct AnchorOptions {
  double fuzzy_threshold = 0.8;
};

namespace anchor_detail {

inline bool is_space(char32_t c) {
  switch (c) {
    case U' ': case U'\t': case U'\n': case U'\r': case U'\f': case U'\v':
    case 0x00A0: case 0x3000: case 0x2028: case 0x2029:
      return true;
    default:
      return false;
  }
}

inline char32_t ascii_lower(char32_t c) { return (c >= U'A' && c <= U'Z') ? c + 32 : c; }

// Length of a <br>, <br/> or <br /> token at text[i], 0 if none.
inline std::size_t break_token_at(const std::u32string& text, std::size_t i) {
  if (i + 4 > text.size()) return 0;
  if (text[i] != U'<' || ascii_lower(text[i + 1]) != U'b' || ascii_lower(text[i + 2]) != U'r') return 0;
  std::size_t j = i + 3;
  while (j < text.size() && text[j] == U' ') ++j;
  if (j < text.size() && text[j] == U'/') ++j;
  if (j < text.size() && text[j] == U'>') return j + 1 - i;
  return 0;
}

struct Normalized {
  std::u32string text;
  std::vector<std::size_t> first;  // original index of the first scalar behind text[k]
  std::vector<std::size_t> last;   // original index one past the last scalar behind text[k]
};

inline Normalized normalize(const std::u32string& src) {
  Normalized n;
  n.text.reserve(src.size());
  std::size_t i = 0;
  while (i < src.size()) {
    std::size_t run_end = i;
    for (;;) {
      if (run_end < src.size() && is_space(src[run_end])) {
        ++run_end;
      } else if (std::size_t br = run_end < src.size() ? break_token_at(src, run_end) : 0; br != 0) {
        run_end += br;
      } else {
        break;
      }
    }
    if (run_end > i) {
      n.text.push_back(U' ');
      n.first.push_back(i);
      n.last.push_back(run_end);
      i = run_end;
    } else {
      n.text.push_back(src[i]);
      n.first.push_back(i);
      n.last.push_back(i + 1);
      ++i;
    }
  }
  return n;
}

// Substring of `text` with minimal weighted edit distance to `pattern`, with
// free start and end in `text`. Substitutions and content insertions or
// deletions cost 2; inserting or deleting whitespace costs 1. Ties prefer the
// lower end, then the match whose length is closest to the pattern's.
inline AnchorSpan best_alignment(std::u32string_view pattern, std::u32string_view text) {
  const std::size_t m = pattern.size(), n = text.size();
  auto indel = [](char32_t c) -> std::size_t { return is_space(c) ? 1 : 2; };
  std::vector<std::size_t> prev(n + 1, 0), cur(n + 1);
  std::vector<std::size_t> prev_start(n + 1), cur_start(n + 1);
  for (std::size_t j = 0; j <= n; ++j) prev_start[j] = j;
  for (std::size_t i = 1; i <= m; ++i) {
    cur[0] = prev[0] + indel(pattern[i - 1]);
    cur_start[0] = 0;
    for (std::size_t j = 1; j <= n; ++j) {
      const std::size_t diag = prev[j - 1] + (pattern[i - 1] == text[j - 1] ? 0 : 2);
      const std::size_t up = prev[j] + indel(pattern[i - 1]);
      const std::size_t left = cur[j - 1] + indel(text[j - 1]);
      if (diag <= up && diag <= left) {
        cur[j] = diag;
        cur_start[j] = prev_start[j - 1];
      } else if (up <= left) {
        cur[j] = up;
        cur_start[j] = prev_start[j];
      } else {
        cur[j] = left;
        cur_start[j] = cur_start[j - 1];
      }
    }
    std::swap(prev, cur);
    std::swap(prev_start, cur_start);
  }
  auto length_gap = [&](std::size_t j) {
    const std::size_t len = j - prev_start[j];
    return len > m ? len - m : m - len;
  };
  std::size_t best = 0;
  for (std::size_t j = 1; j <= n; ++j)
    if (prev[j] < prev[best] || (prev[j] == prev[best] && length_gap(j) < length_gap(best))) best = j;
  return AnchorSpan{prev_start[best], best - prev_start[best]};
}

}  // namespace anchor_detail

/// Longest common substring of `a` and `b`. Returns {length, start in a, start in b};
/// ties resolve to the earliest end position in `b`, then in `a`.
struct CommonSubstring {
  std::size_t length = 0;
  std::size_t a_start = 0;
  std::size_t b_start = 0;
};

inline CommonSubstring longest_common_substring(std::u32string_view a, std::u32string_view b) {
  CommonSubstring best;
  if (a.empty() || b.empty()) return best;
  std::vector<std::size_t> prev(a.size() + 1, 0), cur(a.size() + 1, 0);
  for (std::size_t j = 1; j <= b.size(); ++j) {
    for (std::size_t i = 1; i <= a.size(); ++i) {
      cur[i] = (a[i - 1] == b[j - 1]) ? prev[i - 1] + 1 : 0;
      if (cur[i] > best.length) {
        best.length = cur[i];
        best.a_start = i - cur[i];
        best.b_start = j - cur[i];
      }
    }
    std::swap(prev, cur);
  }
  return best;
}

inline AnchorResolution resolve_anchor(std::u32string_view part, std::u32string_view body,
                                       const AnchorOptions& opts = {}) {
  AnchorResolution r;
  if (part.empty() || body.empty()) return r;

  // exact
  if (std::size_t pos = body.find(part); pos != std::u32string_view::npos) {
    r.mode = AnchorMode::Exact;
    r.span = AnchorSpan{pos, part.size()};
    r.similarity = 1.0;
    for (std::size_t p = pos; p != std::u32string_view::npos; p = body.find(part, p + 1)) ++r.occurrences;
    return r;
  }

  // normalized
  const std::u32string body_str(body);
  const auto nbody = anchor_detail::normalize(body_str);
  auto npart = anchor_detail::normalize(std::u32string(part)).text;
  const auto b = npart.find_first_not_of(U' ');
  if (b == std::u32string::npos) return r;
  npart = npart.substr(b, npart.find_last_not_of(U' ') - b + 1);
  auto to_original = [&](std::size_t from, std::size_t to) {
    return AnchorSpan{nbody.first[from], nbody.last[to - 1] - nbody.first[from]};
  };
  if (std::size_t pos = nbody.text.find(npart); pos != std::u32string::npos) {
    r.mode = AnchorMode::Normalized;
    r.span = to_original(pos, pos + npart.size());
    r.similarity = 1.0;
    return r;
  }

  // fuzzy
  const std::u32string_view ntext(nbody.text);
  const CommonSubstring lcs = longest_common_substring(npart, ntext);
  const double sim = static_cast<double>(lcs.length) / static_cast<double>(npart.size());
  r.similarity = sim;
  if (lcs.length == 0 || sim < opts.fuzzy_threshold) return r;
  const std::size_t unmatched = npart.size() - lcs.length;
  const std::size_t from = lcs.b_start >= 2 * unmatched ? lcs.b_start - 2 * unmatched : 0;
  const std::size_t to = std::min(ntext.size(), lcs.b_start + lcs.length + 2 * unmatched);
  const AnchorSpan local = anchor_detail::best_alignment(npart, ntext.substr(from, to - from));
  std::size_t s = from + local.start, e = s + local.length;
  while (s < e && ntext[s] == U' ') ++s;
  while (e > s && ntext[e - 1] == U' ') --e;
  if (s == e) return r;
  r.mode = AnchorMode::Fuzzy;
  r.span = to_original(s, e);
  return r;
}

inline AnchorResolution resolve_anchor(std::string_view part, std::string_view body,
                                       const AnchorOptions& opts = {}) {
  return resolve_anchor(utf8::decode(part), utf8::decode(body), opts);
}

}  // namespace qareply
