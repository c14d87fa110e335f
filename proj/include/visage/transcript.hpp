#pragma once

// Time-aligned phone transcripts, the engine's input.
//
// File format, one record per line, UTF-8:
//
//   symbol<TAB>start_ms<TAB>end_ms
//
// Times are non-negative integer milliseconds. Lines starting with '#' are
// comments, except the directive `#duration<TAB>ms` which declares the total
// utterance length (trailing silence after the last phone). Blank lines are
// ignored.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "visage/error.hpp"
#include "visage/text.hpp"

namespace visage {

inline constexpr std::string_view kSilence = "sil";

/// Anything that can answer whether a phone symbol is known.
template <typename T>
concept PhoneInventory = requires(const T& inv, std::string_view symbol) {
  { inv.contains(symbol) } -> std::convertible_to<bool>;
};

struct PhoneSegment {
  std::string symbol;
  double start = 0.0;  // seconds
  double end = 0.0;    // seconds

  double duration() const { return end - start; }
  friend bool operator==(const PhoneSegment&, const PhoneSegment&) = default;
};

struct Transcript {
  std::vector<PhoneSegment> segments;
  double total_duration = 0.0;  // seconds

  bool empty() const { return segments.empty(); }
  friend bool operator==(const Transcript&, const Transcript&) = default;
};

enum class DiagnosticKind {
  UnknownSymbol,
  NonFinite,
  NegativeStart,
  NonPositiveDuration,
  Unsorted,
  Overlap,
  DurationTooShort,
};

constexpr std::string_view to_string(DiagnosticKind kind) noexcept {
  switch (kind) {
    case DiagnosticKind::UnknownSymbol: return "UnknownSymbol";
    case DiagnosticKind::NonFinite: return "NonFinite";
    case DiagnosticKind::NegativeStart: return "NegativeStart";
    case DiagnosticKind::NonPositiveDuration: return "NonPositiveDuration";
    case DiagnosticKind::Unsorted: return "Unsorted";
    case DiagnosticKind::Overlap: return "Overlap";
    case DiagnosticKind::DurationTooShort: return "DurationTooShort";
  }
  return "Unknown";
}

struct Diagnostic {
  DiagnosticKind kind;
  std::size_t index;  // offending segment
  std::string message;
};

/// Checks every Transcript invariant. Returns one diagnostic per violation;
/// an empty list means the transcript is valid.
template <PhoneInventory Inventory>
std::vector<Diagnostic> validate(const Transcript& transcript, const Inventory& inventory) {
  std::vector<Diagnostic> out;
  const auto& segs = transcript.segments;
  for (std::size_t i = 0; i < segs.size(); ++i) {
    const auto& s = segs[i];
    if (s.symbol != kSilence && !inventory.contains(s.symbol)) {
      out.push_back({DiagnosticKind::UnknownSymbol, i, "unknown symbol '" + s.symbol + "'"});
    }
    if (!std::isfinite(s.start) || !std::isfinite(s.end)) {
      out.push_back({DiagnosticKind::NonFinite, i, "non-finite time"});
      continue;
    }
    if (s.start < 0.0) out.push_back({DiagnosticKind::NegativeStart, i, "start before 0"});
    if (!(s.end > s.start)) out.push_back({DiagnosticKind::NonPositiveDuration, i, "end <= start"});
    if (i > 0) {
      const auto& prev = segs[i - 1];
      if (s.start < prev.start) {
        out.push_back({DiagnosticKind::Unsorted, i, "segment starts before its predecessor"});
      } else if (s.start < prev.end) {
        out.push_back({DiagnosticKind::Overlap, i, "segment overlaps its predecessor"});
      }
    }
  }
  if (!segs.empty() && transcript.total_duration < segs.back().end) {
    out.push_back({DiagnosticKind::DurationTooShort, segs.size() - 1,
                   "total duration ends before the last segment"});
  }
  return out;
}

namespace detail {

inline std::int64_t parse_ms(std::string_view field, std::size_t line_no) {
  const auto v = text::parse_int(field);
  if (!v) throw Error(ErrorCode::MalformedLine, "non-numeric time '" + std::string(field) + "'", line_no);
  if (*v < 0) throw Error(ErrorCode::MalformedLine, "negative time", line_no);
  return *v;
}

}  // namespace detail

template <PhoneInventory Inventory>
Transcript parse_transcript(std::string_view content, const Inventory& inventory) {
  Transcript out;
  std::int64_t last_end_ms = 0;
  std::int64_t declared_ms = -1;
  std::size_t line_no = 0;
  for (auto line : text::lines(content)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    if (line.front() == '#') {
      constexpr std::string_view kDirective = "#duration";
      if (line.substr(0, kDirective.size()) == kDirective &&
          (line.size() == kDirective.size() || line[kDirective.size()] == '\t' ||
           line[kDirective.size()] == ' ')) {
        declared_ms = detail::parse_ms(line.substr(kDirective.size()), line_no);
      }
      continue;
    }
    const auto fields = text::split(line, '\t');
    if (fields.size() != 3) {
      throw Error(ErrorCode::MalformedLine,
                  "expected 3 tab-separated fields, got " + std::to_string(fields.size()), line_no);
    }
    const auto symbol = text::trim(fields[0]);
    if (symbol.empty()) throw Error(ErrorCode::MalformedLine, "empty symbol", line_no);
    const auto start_ms = detail::parse_ms(fields[1], line_no);
    const auto end_ms = detail::parse_ms(fields[2], line_no);
    if (symbol != kSilence && !inventory.contains(symbol)) {
      throw Error(ErrorCode::UnknownSymbol, "unknown symbol '" + std::string(symbol) + "'", line_no);
    }
    if (end_ms <= start_ms) {
      throw Error(ErrorCode::NonMonotonic,
                  "end " + std::to_string(end_ms) + " ms is not after start " +
                      std::to_string(start_ms) + " ms",
                  line_no);
    }
    if (!out.segments.empty() && start_ms < last_end_ms) {
      throw Error(ErrorCode::NonMonotonic,
                  "start " + std::to_string(start_ms) + " ms overlaps previous end " +
                      std::to_string(last_end_ms) + " ms",
                  line_no);
    }
    out.segments.push_back({std::string(symbol), static_cast<double>(start_ms) / 1000.0,
                            static_cast<double>(end_ms) / 1000.0});
    last_end_ms = end_ms;
  }
  if (declared_ms >= 0 && declared_ms < last_end_ms) {
    throw Error(ErrorCode::NonMonotonic, "#duration is shorter than the last segment");
  }
  const auto total_ms = std::max(declared_ms, last_end_ms);
  out.total_duration = static_cast<double>(total_ms) / 1000.0;
  return out;
}

/// Inverse of parse_transcript for transcripts whose times lie on the
/// millisecond grid. Emits a #duration directive only when it carries
/// information beyond the last segment's end.
inline std::string serialize_transcript(const Transcript& transcript) {
  auto ms = [](double seconds) { return std::llround(seconds * 1000.0); };
  std::string out;
  for (const auto& s : transcript.segments) {
    out += s.symbol;
    out += '\t';
    out += std::to_string(ms(s.start));
    out += '\t';
    out += std::to_string(ms(s.end));
    out += '\n';
  }
  const auto last = transcript.segments.empty() ? 0 : ms(transcript.segments.back().end);
  if (ms(transcript.total_duration) > last) {
    out += "#duration\t" + std::to_string(ms(transcript.total_duration)) + "\n";
  }
  return out;
}

}  // namespace visage
