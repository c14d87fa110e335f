#pragma once

// Coarticulation: kernel-smoothed viseme trajectories sampled per frame, and
// the hard lip-closure guarantee for bilabial/labiodental segments.
//
// The weight of viseme v at frame time t is
//
//   w_v(t) = sum_{s in v} int_s K(t - tau) dtau  /  sum_{all s} int_s K(t - tau) dtau
//
// i.e. a Nadaraya-Watson smoother over segment indicators. Gaps between
// segments count as silence (neutral class); nothing exists outside
// [0, total_duration]. A zero bandwidth selects the unsmoothed baseline where
// each frame shows only the active segment's viseme.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "visage/error.hpp"
#include "visage/text.hpp"
#include "visage/viseme.hpp"

namespace visage {

using VisemeWeights = std::array<double, kVisemeCount>;

enum class KernelShape { gaussian, triangular };

struct SmoothingKernel {
  KernelShape shape = KernelShape::gaussian;
  /// Gaussian sigma, or triangle half-width, in seconds. Zero disables smoothing.
  double bandwidth = 0.030;

  static constexpr double kTruncation = 4.0;  // gaussian support is +-4 sigma

  /// Half-width of the kernel's support.
  double support() const {
    return shape == KernelShape::gaussian ? kTruncation * bandwidth : bandwidth;
  }

  /// Cumulative kernel mass on (-inf, u]; the kernel integrates to one.
  double cdf(double u) const {
    const double h = support();
    if (u <= -h) return 0.0;
    if (u >= h) return 1.0;
    if (shape == KernelShape::gaussian) {
      const double lo = normal_cdf(-kTruncation);
      return (normal_cdf(u / bandwidth) - lo) / (1.0 - 2.0 * lo);
    }
    if (u < 0.0) return (h + u) * (h + u) / (2.0 * h * h);
    return 1.0 - (h - u) * (h - u) / (2.0 * h * h);
  }

  static double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }
};

struct VisemeTrack {
  double fps = 30.0;
  std::vector<VisemeWeights> frames;

  std::size_t size() const { return frames.size(); }
  double frame_time(std::size_t k) const { return static_cast<double>(k) / fps; }
  friend bool operator==(const VisemeTrack&, const VisemeTrack&) = default;
};

inline std::size_t frame_count(double total_duration, double fps) {
  // The epsilon keeps 7 s * 30 fps at 210 despite representation error.
  return static_cast<std::size_t>(std::max(0.0, std::ceil(total_duration * fps - 1e-9)));
}

inline VisemeWeights one_hot(int viseme_id) {
  VisemeWeights w{};
  w[viseme_id] = 1.0;
  return w;
}

namespace detail {

/// Segments plus neutral fillers for every gap inside [0, total].
inline std::vector<VisemeSegment> fill_gaps(std::span<const VisemeSegment> segments,
                                            double total, int neutral) {
  std::vector<VisemeSegment> out;
  out.reserve(segments.size() * 2 + 1);
  double cursor = 0.0;
  for (const auto& s : segments) {
    if (s.start > cursor) out.push_back({neutral, cursor, s.start});
    out.push_back(s);
    cursor = std::max(cursor, s.end);
  }
  if (total > cursor) out.push_back({neutral, cursor, total});
  return out;
}

}  // namespace detail

inline VisemeTrack sample_track(std::span<const VisemeSegment> segments, double fps,
                                const SmoothingKernel& kernel, double total_duration,
                                int neutral_id = 0) {
  if (!(fps > 0.0) || !std::isfinite(fps)) throw Error(ErrorCode::BadDimensions, "fps must be > 0");
  if (!(kernel.bandwidth >= 0.0)) throw Error(ErrorCode::BadDimensions, "bandwidth must be >= 0");
  if (!segments.empty()) total_duration = std::max(total_duration, segments.back().end);
  if (!(total_duration > 0.0)) throw Error(ErrorCode::EmptyTimeline, "timeline has zero duration");

  constexpr double kEpsilon = 1e-6;
  const auto covered = detail::fill_gaps(segments, total_duration, neutral_id);
  VisemeTrack track;
  track.fps = fps;
  track.frames.resize(frame_count(total_duration, fps));

  std::size_t first = 0;  // first segment that can still touch the kernel window
  for (std::size_t k = 0; k < track.frames.size(); ++k) {
    const double t = track.frame_time(k);
    auto& w = track.frames[k];

    if (kernel.bandwidth == 0.0) {
      const auto it = std::find_if(covered.begin(), covered.end(),
                                   [t](const VisemeSegment& s) { return s.start <= t && t < s.end; });
      w = one_hot(it == covered.end() ? neutral_id : it->viseme_id);
      continue;
    }

    const double reach = kernel.support();
    while (first < covered.size() && covered[first].end < t - reach) ++first;
    double denominator = 0.0;
    for (std::size_t i = first; i < covered.size() && covered[i].start <= t + reach; ++i) {
      const auto& s = covered[i];
      const double mass = kernel.cdf(t - s.start) - kernel.cdf(t - s.end);
      w[s.viseme_id] += mass;
      denominator += mass;
    }
    if (denominator < kEpsilon) {
      w = one_hot(neutral_id);
      continue;
    }
    for (auto& x : w) x = std::clamp(x / denominator, 0.0, 1.0);
  }
  return track;
}

/// Guarantees one pure frame for every lip-closing segment: the frame nearest
/// the segment midpoint among frames inside the segment, or the nearest frame
/// overall when none falls inside. A frame already claimed by an earlier
/// segment is skipped. Frame choice depends only on segment timing, so the
/// operation is idempotent.
inline VisemeTrack enforce_labial_closure(VisemeTrack track, std::span<const VisemeSegment> segments,
                                          const VisemeTable& table) {
  const auto n = static_cast<long>(track.size());
  if (n == 0) return track;
  std::vector<bool> claimed(track.size(), false);
  auto t_of = [&](long k) { return track.frame_time(static_cast<std::size_t>(k)); };

  for (const auto& seg : segments) {
    if (!table.closes_lips(seg.viseme_id)) continue;
    const double mid = 0.5 * (seg.start + seg.end);
    const long center = std::clamp(std::lround(mid * track.fps), 0L, n - 1);

    long chosen = -1;
    double best = 0.0;
    auto consider = [&](long k, bool inside_only) {
      if (k < 0 || k >= n || claimed[k]) return;
      const double t = t_of(k);
      if (inside_only && !(seg.start <= t && t < seg.end)) return;
      const double d = std::abs(t - mid);
      if (chosen < 0 || d < best || (d == best && k < chosen)) {
        chosen = k;
        best = d;
      }
    };
    // Inside frames form a contiguous run; scan it, then fall back outward.
    long lo = std::clamp(static_cast<long>(std::floor(seg.start * track.fps)) - 1, 0L, n - 1);
    long hi = std::clamp(static_cast<long>(std::ceil(seg.end * track.fps)) + 1, 0L, n - 1);
    for (long k = lo; k <= hi; ++k) consider(k, true);
    for (long d = 0; chosen < 0 && d < n; ++d) {
      consider(center - d, false);
      consider(center + d, false);
    }
    if (chosen < 0) continue;  // every frame already claimed
    claimed[chosen] = true;
    track.frames[chosen] = one_hot(seg.viseme_id);
  }
  return track;
}

/// `#track fps=<fps> classes=20` followed by one CSV row of weights per frame.
inline std::string serialize_track(const VisemeTrack& track) {
  std::string out = "#track fps=" + text::format_double(track.fps) +
                    " classes=" + std::to_string(kVisemeCount) + "\n";
  for (const auto& f : track.frames) {
    for (int v = 0; v < kVisemeCount; ++v) {
      if (v) out += ',';
      out += text::format_double(f[v]);
    }
    out += '\n';
  }
  return out;
}

inline VisemeTrack parse_track(std::string_view content) {
  VisemeTrack track;
  bool header = false;
  std::size_t line_no = 0;
  for (auto line : text::lines(content)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    if (!header) {
      const auto toks = text::tokens(line);
      if (toks.size() != 3 || toks[0] != "#track" || toks[1].substr(0, 4) != "fps=" ||
          toks[2] != "classes=" + std::to_string(kVisemeCount)) {
        throw Error(ErrorCode::MalformedLine, "expected '#track fps=<fps> classes=20'", line_no);
      }
      const auto fps = text::parse_double(toks[1].substr(4));
      if (!fps || !(*fps > 0.0)) throw Error(ErrorCode::MalformedLine, "bad fps", line_no);
      track.fps = *fps;
      header = true;
      continue;
    }
    const auto fields = text::split(line, ',');
    if (fields.size() != kVisemeCount) {
      throw Error(ErrorCode::MalformedLine, "expected 20 weights", line_no);
    }
    VisemeWeights w{};
    for (int v = 0; v < kVisemeCount; ++v) {
      const auto x = text::parse_double(fields[v]);
      if (!x) throw Error(ErrorCode::MalformedLine, "non-numeric weight", line_no);
      w[v] = *x;
    }
    track.frames.push_back(w);
  }
  if (!header) throw Error(ErrorCode::MalformedLine, "missing #track header");
  return track;
}

}  // namespace visage
