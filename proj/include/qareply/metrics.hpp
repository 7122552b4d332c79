#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "qareply/domain.hpp"
#include "qareply/error.hpp"
#include "qareply/utf8.hpp"

namespace qareply::metrics {

struct EfficiencyReport {
  double chars_per_second = 0.0;
  std::int64_t final_char_count = 0;
  double elapsed_seconds = 0.0;
};

/// Characters of final reply text per second of reply time.
inline double efficiency(std::int64_t final_char_count, double elapsed_seconds) {
  if (!(elapsed_seconds > 0.0)) throw Error(ErrorCode::NonPositiveDuration, "elapsed time must be positive");
  if (final_char_count < 0) throw Error(ErrorCode::OutOfRange, "character count must be >= 0");
  return static_cast<double>(final_char_count) / elapsed_seconds;
}

inline EfficiencyReport efficiency_report(const MetricsRecord& r) {
  return {efficiency(r.final_char_count, r.elapsed_seconds), r.final_char_count, r.elapsed_seconds};
}

/// Characters typed to steer the AI: the free-text field plus every
/// user-added option, counted in Unicode scalar values.
inline std::int64_t prompt_char_count(std::int64_t free_text_chars, std::span<const std::string> added_options) {
  if (free_text_chars < 0) throw Error(ErrorCode::OutOfRange, "character count must be >= 0");
  std::int64_t total = free_text_chars;
  for (const auto& o : added_options) total += static_cast<std::int64_t>(utf8::length(o));
  return total;
}

inline std::int64_t prompt_char_count(const Session& s) {
  std::vector<std::string> added;
  for (const auto& a : s.answers)
    if (!a.skipped) added.insert(added.end(), a.custom_options.begin(), a.custom_options.end());
  return prompt_char_count(static_cast<std::int64_t>(utf8::length(s.preferences.free_instruction)), added);
}

/// Unweighted mean of the six NASA-TLX subscales, each on a 1..10 scale.
inline double raw_tlx(std::span<const double> scores) {
  if (scores.size() != 6) throw Error(ErrorCode::WrongArity, "Raw-TLX needs exactly six scores");
  double sum = 0.0;
  for (double v : scores) {
    if (!(v >= 1.0 && v <= 10.0)) throw Error(ErrorCode::OutOfRange, "TLX scores must lie in [1, 10]");
    sum += v;
  }
  return sum / 6.0;
}

/// Metrics of a finalized session under the QA-based condition.
inline MetricsRecord record_for(const Session& s) {
  MetricsRecord r;
  r.condition = Condition::QaBased;
  r.final_char_count = s.final_text ? static_cast<std::int64_t>(utf8::length(*s.final_text)) : 0;
  const Timestamp end = s.finalized_at.value_or(s.opened_at);
  r.elapsed_seconds = std::chrono::duration<double>(end - s.opened_at).count();
  r.prompt_char_count = prompt_char_count(s);
  return r;
}

// ---------------------------------------------------------------------------
// CSV: condition,final_char_count,elapsed_seconds,chars_per_second,prompt_char_count

inline constexpr std::string_view kCsvHeader =
    "condition,final_char_count,elapsed_seconds,chars_per_second,prompt_char_count";

inline void write_csv_header(std::ostream& os) { os << kCsvHeader << "\n"; }

inline void write_csv_row(std::ostream& os, const MetricsRecord& r) {
  std::ostringstream line;
  line.precision(17);
  line << to_string(r.condition) << ',' << r.final_char_count << ',' << r.elapsed_seconds << ',';
  if (r.elapsed_seconds > 0.0) line << efficiency(r.final_char_count, r.elapsed_seconds);
  line << ',' << r.prompt_char_count;
  os << line.str() << "\n";
}

inline std::vector<MetricsRecord> read_csv(std::istream& is) {
  std::vector<MetricsRecord> rows;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    if (!header_seen) {
      header_seen = true;
      if (line != kCsvHeader) throw Error(ErrorCode::WrongType, "unexpected CSV header");
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (line.back() == ',') cells.emplace_back();
    if (cells.size() != 5) throw Error(ErrorCode::WrongType, "CSV line " + std::to_string(line_no) + " needs 5 cells");
    try {
      MetricsRecord r;
      r.condition = parse_Condition(cells[0]);
      std::size_t used = 0;
      r.final_char_count = std::stoll(cells[1], &used);
      if (used != cells[1].size() || r.final_char_count < 0) throw std::invalid_argument("count");
      r.elapsed_seconds = std::stod(cells[2], &used);
      if (used != cells[2].size()) throw std::invalid_argument("seconds");
      r.prompt_char_count = std::stoll(cells[4], &used);
      if (used != cells[4].size() || r.prompt_char_count < 0) throw std::invalid_argument("prompt");
      rows.push_back(r);
    } catch (const Error&) {
      throw Error(ErrorCode::WrongType, "CSV line " + std::to_string(line_no) + " has an unknown condition");
    } catch (const std::exception&) {
      throw Error(ErrorCode::WrongType, "CSV line " + std::to_string(line_no) + " has a malformed number");
    }
  }
  return rows;
}

struct ConditionSummary {
  Condition condition = Condition::QaBased;
  std::size_t rows = 0;
  double mean_chars_per_second = 0.0;
  double mean_prompt_char_count = 0.0;
};

/// Per-condition means; efficiency is recomputed from count and duration.
inline std::vector<ConditionSummary> summarize(const std::vector<MetricsRecord>& rows) {
  std::map<Condition, ConditionSummary> acc;
  for (const auto& r : rows) {
    auto& s = acc[r.condition];
    s.condition = r.condition;
    ++s.rows;
    s.mean_chars_per_second += efficiency(r.final_char_count, r.elapsed_seconds);
    s.mean_prompt_char_count += static_cast<double>(r.prompt_char_count);
  }
  std::vector<ConditionSummary> out;
  for (auto& [c, s] : acc) {
    s.mean_chars_per_second /= static_cast<double>(s.rows);
    s.mean_prompt_char_count /= static_cast<double>(s.rows);
    out.push_back(s);
  }
  return out;
}

}  // namespace qareply::metrics
