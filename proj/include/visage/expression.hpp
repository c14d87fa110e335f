#pragma once

// Emotion blending in weight space. For expression j at intensity lambda the
// face is F = F_c + lambda * (F_j^max - F_0): the current viseme shape plus
// the expression's displacement from neutral. A compatibility table caps the
// lower-face share of each expression per viseme and can substitute a
// pre-blended viseme+expression target for lip-closing visemes.

#include <algorithm>
#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "visage/error.hpp"
#include "visage/coarticulation.hpp"
#include "visage/headpose.hpp"
#include "visage/text.hpp"
#include "visage/viseme.hpp"

namespace visage {

enum class Expression { anger, disgust, fear, joy, sadness, surprise };
inline constexpr int kExpressionCount = 6;
inline constexpr std::array<Expression, kExpressionCount> kExpressions = {
    Expression::anger, Expression::disgust, Expression::fear,
    Expression::joy,   Expression::sadness, Expression::surprise};

constexpr std::string_view to_string(Expression e) noexcept {
  switch (e) {
    case Expression::anger: return "anger";
    case Expression::disgust: return "disgust";
    case Expression::fear: return "fear";
    case Expression::joy: return "joy";
    case Expression::sadness: return "sadness";
    case Expression::surprise: return "surprise";
  }
  return "?";
}

inline std::optional<Expression> parse_expression(std::string_view name) {
  for (auto e : kExpressions) {
    if (to_string(e) == name) return e;
  }
  return std::nullopt;
}

constexpr int index_of(Expression e) noexcept { return static_cast<int>(e); }

using ExpressionWeights = std::array<double, kExpressionCount>;

/// Piecewise-linear intensity over time; zero outside [first knot, last knot].
struct Envelope {
  std::vector<std::pair<double, double>> knots;  // (seconds, value in [0,1]), time-sorted

  double at(double t) const {
    if (knots.empty() || t < knots.front().first || t > knots.back().first) return 0.0;
    for (std::size_t i = 1; i < knots.size(); ++i) {
      const auto [t0, v0] = knots[i - 1];
      const auto [t1, v1] = knots[i];
      if (t <= t1) {
        if (t1 == t0) return std::max(v0, v1);
        return v0 + (v1 - v0) * (t - t0) / (t1 - t0);
      }
    }
    return knots.back().second;
  }
};

struct ExpressionSpec {
  Expression expression = Expression::joy;
  double intensity = 1.0;            // lambda
  std::optional<Envelope> envelope;  // absent: constant over the whole timeline
};

struct ActiveExpression {
  Expression expression;
  double intensity;
  friend bool operator==(const ActiveExpression&, const ActiveExpression&) = default;
};

/// Per-frame active expressions, intensity = lambda * envelope(t). Several
/// specs for the same expression combine by maximum; zero intensities drop out.
inline std::vector<std::vector<ActiveExpression>> expand_expression_schedule(
    std::span<const ExpressionSpec> specs, double fps, std::size_t n_frames) {
  std::vector<std::vector<ActiveExpression>> out(n_frames);
  for (std::size_t k = 0; k < n_frames; ++k) {
    const double t = static_cast<double>(k) / fps;
    ExpressionWeights level{};
    for (const auto& spec : specs) {
      const double shape = spec.envelope ? spec.envelope->at(t) : 1.0;
      auto& slot = level[index_of(spec.expression)];
      slot = std::max(slot, std::clamp(spec.intensity * shape, 0.0, 1.0));
    }
    for (auto e : kExpressions) {
      if (level[index_of(e)] > 0.0) out[k].push_back({e, level[index_of(e)]});
    }
  }
  return out;
}

struct EnvelopeShape {
  double attack = 0.150;   // seconds
  double release = 0.150;  // seconds
};

/// Emotion script rows `expression,start_ms,end_ms,peak_lambda`; each row
/// becomes a trapezoid envelope. '#' starts a comment line.
inline std::vector<ExpressionSpec> parse_emotion_script(std::string_view content,
                                                        EnvelopeShape shape = {}) {
  std::vector<ExpressionSpec> out;
  std::size_t line_no = 0;
  for (auto line : text::lines(content)) {
    ++line_no;
    const auto trimmed = text::trim(line);
    if (trimmed.empty() || trimmed.front() == '#') continue;
    const auto f = text::split(trimmed, ',');
    if (f.size() != 4) throw Error(ErrorCode::MalformedLine, "expected expression,start_ms,end_ms,peak_lambda", line_no);
    const auto expr = parse_expression(text::trim(f[0]));
    if (!expr) throw Error(ErrorCode::MalformedLine, "unknown expression '" + std::string(text::trim(f[0])) + "'", line_no);
    const auto start = text::parse_int(f[1]);
    const auto end = text::parse_int(f[2]);
    const auto peak = text::parse_double(f[3]);
    if (!start || !end || !peak) throw Error(ErrorCode::MalformedLine, "non-numeric field", line_no);
    if (*start < 0 || *end <= *start) throw Error(ErrorCode::NonMonotonic, "need 0 <= start < end", line_no);
    if (!(*peak >= 0.0 && *peak <= 1.0)) throw Error(ErrorCode::MalformedLine, "peak_lambda must be in [0,1]", line_no);

    const double s = static_cast<double>(*start) / 1000.0;
    const double e = static_cast<double>(*end) / 1000.0;
    double attack = std::max(0.0, shape.attack);
    double release = std::max(0.0, shape.release);
    if (attack + release > e - s) {
      const double scale = (e - s) / (attack + release);
      attack *= scale;
      release *= scale;
    }
    Envelope env;
    env.knots = {{s, attack > 0.0 ? 0.0 : 1.0}, {s + attack, 1.0}, {e - release, 1.0}, {e, release > 0.0 ? 0.0 : 1.0}};
    out.push_back({*expr, *peak, std::move(env)});
  }
  return out;
}

struct CompatEntry {
  double alpha = 1.0;  // viseme weight factor
  double cap = 1.0;    // maximum lower-face emotion weight
  std::optional<int> preblend;
  friend bool operator==(const CompatEntry&, const CompatEntry&) = default;
};

/// Viseme x expression compatibility table.
class CompatibilityTable {
 public:
  /// Placeholder tuning: joy is capped at 0.3 on rounded/puckered visemes,
  /// and the open-mouth emotions (surprise, fear, anger) on the bilabial and
  /// labiodental classes are replaced by pre-blended targets 0..5.
  static CompatibilityTable defaults() {
    CompatibilityTable t;
    for (auto& row : t.entries_) row.fill(CompatEntry{});
    for (int v : {10, 18, 19}) t.entries_[v][index_of(Expression::joy)] = CompatEntry{1.0, 0.3, std::nullopt};
    int id = 0;
    for (int v : {1, 2}) {
      for (auto e : {Expression::surprise, Expression::fear, Expression::anger}) {
        t.entries_[v][index_of(e)] = CompatEntry{1.0, 1.0, id++};
      }
    }
    return t;
  }

  /// Every entry (1.0, 1.0) with no pre-blends.
  static CompatibilityTable neutral() {
    CompatibilityTable t;
    for (auto& row : t.entries_) row.fill(CompatEntry{});
    return t;
  }

  /// CSV rows `viseme_id,expression,alpha,cap[,preblend_id]`. Combinations
  /// not listed stay missing and fail on lookup.
  static CompatibilityTable parse(std::string_view content) {
    CompatibilityTable t;
    std::size_t line_no = 0;
    for (auto line : text::lines(content)) {
      ++line_no;
      const auto trimmed = text::trim(line);
      if (trimmed.empty() || trimmed.front() == '#') continue;
      const auto f = text::split(trimmed, ',');
      if (f.size() != 4 && f.size() != 5) {
        throw Error(ErrorCode::MalformedLine, "expected viseme_id,expression,alpha,cap[,preblend_id]", line_no);
      }
      const auto v = text::parse_int(f[0]);
      const auto e = parse_expression(text::trim(f[1]));
      const auto alpha = text::parse_double(f[2]);
      const auto cap = text::parse_double(f[3]);
      if (!v || !e || !alpha || !cap) throw Error(ErrorCode::MalformedLine, "bad field", line_no);
      if (*v < 0 || *v >= kVisemeCount) throw Error(ErrorCode::InvalidTable, "viseme id out of range", line_no);
      if (!(*alpha >= 0.0 && *alpha <= 1.0) || !(*cap >= 0.0 && *cap <= 1.0)) {
        throw Error(ErrorCode::InvalidTable, "alpha and cap must be in [0,1]", line_no);
      }
      CompatEntry entry{*alpha, *cap, std::nullopt};
      if (f.size() == 5 && !text::trim(f[4]).empty()) {
        const auto pb = text::parse_int(f[4]);
        if (!pb || *pb < 0) throw Error(ErrorCode::MalformedLine, "bad preblend id", line_no);
        entry.preblend = static_cast<int>(*pb);
      }
      auto& slot = t.entries_[*v][index_of(*e)];
      if (slot) throw Error(ErrorCode::InvalidTable, "duplicate entry", line_no);
      slot = entry;
    }
    return t;
  }

  std::string serialize() const {
    std::string out = "# viseme_id,expression,alpha,cap[,preblend_id]\n";
    for (int v = 0; v < kVisemeCount; ++v) {
      for (auto e : kExpressions) {
        const auto& slot = entries_[v][index_of(e)];
        if (!slot) continue;
        out += std::to_string(v) + "," + std::string(to_string(e)) + "," + text::format_double(slot->alpha) +
               "," + text::format_double(slot->cap);
        if (slot->preblend) out += "," + std::to_string(*slot->preblend);
        out += "\n";
      }
    }
    return out;
  }

  const CompatEntry& entry(int viseme_id, Expression e) const {
    if (viseme_id < 0 || viseme_id >= kVisemeCount || !entries_[viseme_id][index_of(e)]) {
      throw Error(ErrorCode::MissingEntry, "no compatibility entry for viseme " + std::to_string(viseme_id) +
                                               " x " + std::string(to_string(e)));
    }
    return *entries_[viseme_id][index_of(e)];
  }

  bool complete() const {
    for (const auto& row : entries_) {
      for (const auto& slot : row) {
        if (!slot) return false;
      }
    }
    return true;
  }

  /// Distinct pre-blend target ids referenced by the table, ascending.
  std::vector<int> preblend_ids() const {
    std::vector<int> ids;
    for (const auto& row : entries_) {
      for (const auto& slot : row) {
        if (slot && slot->preblend) ids.push_back(*slot->preblend);
      }
    }
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    return ids;
  }

 private:
  std::array<std::array<std::optional<CompatEntry>, kExpressionCount>, kVisemeCount> entries_{};
};

inline std::pair<double, double> lookup_compat(int viseme_id, Expression e, const CompatibilityTable& table) {
  const auto& entry = table.entry(viseme_id, e);
  return {entry.alpha, entry.cap};
}

struct Preblend {
  int id = 0;
  double weight = 0.0;
  friend bool operator==(const Preblend&, const Preblend&) = default;
};

struct GazeAngles {
  double yaw = 0.0;    // degrees
  double pitch = 0.0;  // degrees
  friend bool operator==(const GazeAngles&, const GazeAngles&) = default;
};

/// Complete pose of one frame.
struct FrameBlend {
  VisemeWeights viseme_weights{};
  ExpressionWeights upper{};
  ExpressionWeights lower{};
  std::optional<Preblend> preblend;
  GazeAngles gaze;
  NeckPose neck;
  friend bool operator==(const FrameBlend&, const FrameBlend&) = default;
};

/// Lowest id wins ties.
inline int dominant_viseme(const VisemeWeights& w) {
  return static_cast<int>(std::max_element(w.begin(), w.end()) - w.begin());
}

/// Blends the active expressions with one frame of viseme weights.
///
/// With d the dominant viseme: the upper face carries each expression at its
/// requested intensity; the lower face is capped at cap(d, j). All viseme
/// weights are scaled by alpha(d, j*) of the strongest active expression j*.
/// When (d, j) has a pre-blend target, that target replaces both viseme d and
/// the lower-face share of j, at viseme d's weight; if several qualify, the
/// strongest expression's pre-blend is used.
inline FrameBlend blend_frame(const VisemeWeights& frame_visemes, std::span<const ActiveExpression> active,
                              const CompatibilityTable& table) {
  FrameBlend fb;
  for (int v = 0; v < kVisemeCount; ++v) fb.viseme_weights[v] = std::clamp(frame_visemes[v], 0.0, 1.0);
  const int d = dominant_viseme(fb.viseme_weights);

  ExpressionWeights requested{};
  for (const auto& a : active) {
    auto& slot = requested[index_of(a.expression)];
    slot = std::max(slot, std::clamp(a.intensity, 0.0, 1.0));
  }

  std::optional<Expression> strongest;
  std::optional<Expression> preblended;
  for (auto e : kExpressions) {
    const int j = index_of(e);
    if (!(requested[j] > 0.0)) continue;
    const auto& entry = table.entry(d, e);
    fb.upper[j] = requested[j];
    fb.lower[j] = std::min(requested[j], entry.cap);
    if (!strongest || fb.lower[j] > fb.lower[index_of(*strongest)]) strongest = e;
    if (entry.preblend && fb.lower[j] > 0.0 &&
        (!preblended || fb.lower[j] > fb.lower[index_of(*preblended)])) {
      preblended = e;
    }
  }

  if (strongest) {
    const double alpha = table.entry(d, *strongest).alpha;
    for (auto& w : fb.viseme_weights) w = std::clamp(w * alpha, 0.0, 1.0);
  }
  if (preblended) {
    fb.preblend = Preblend{*table.entry(d, *preblended).preblend, fb.viseme_weights[d]};
    fb.viseme_weights[d] = 0.0;
    fb.lower[index_of(*preblended)] = 0.0;
  }
  return fb;
}

}  // namespace visage
