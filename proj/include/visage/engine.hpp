#pragma once

// End-to-end synthesis: transcript + emotion script -> per-frame FrameBlend
// timeline, and the timeline file format.
//
// Timeline file: first line is a JSON object describing the stream, second
// line names the CSV columns, then one CSV row per frame:
//
//   frame,time,v0..v19,upper_<expr>x6,lower_<expr>x6,preblend_id,preblend_weight,
//   gaze_yaw,gaze_pitch,neck_yaw,neck_pitch,neck_roll
//
// preblend_id is -1 when no pre-blend is active.

#include <algorithm>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "visage/coarticulation.hpp"
#include "visage/error.hpp"
#include "visage/expression.hpp"
#include "visage/headpose.hpp"
#include "visage/text.hpp"
#include "visage/transcript.hpp"
#include "visage/viseme.hpp"

namespace visage {

struct EngineConfig {
  double fps = 30.0;
  SmoothingKernel kernel;
  LabialExtension labials;
  bool enforce_closure = true;  // also gates labial extension
  EnvelopeShape envelope;
  std::string viseme_table;  // empty: built-in English table
  std::string compat_table;  // empty: built-in defaults
  std::string morphset;      // manifest path, needed for mesh export only

  /// The unsmoothed comparison baseline: one viseme per phone, no closure pass.
  void use_basic_lipsync() {
    kernel.bandwidth = 0.0;
    enforce_closure = false;
  }

  void validate() const {
    if (!(fps > 0.0) || !std::isfinite(fps)) throw Error(ErrorCode::BadDimensions, "fps must be > 0");
    if (!(kernel.bandwidth >= 0.0)) throw Error(ErrorCode::BadDimensions, "bandwidth must be >= 0");
    if (!(labials.max_extension >= 0.0) || !(labials.min_duration >= 0.0)) {
      throw Error(ErrorCode::BadDimensions, "labial extension parameters must be >= 0");
    }
  }
};

/// Reads a JSON config; absent keys keep their defaults. Relative paths
/// resolve against `base_dir`.
inline EngineConfig parse_config(std::string_view json_text, const std::string& base_dir = {}) {
  EngineConfig cfg;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedLine, std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::MalformedLine, "config must be a JSON object");
  auto path = [&](const char* key, std::string& out) {
    if (!j.contains(key)) return;
    std::string p = j.at(key).get<std::string>();
    if (!p.empty() && p.front() != '/' && !base_dir.empty()) p = base_dir + "/" + p;
    out = p;
  };
  try {
    cfg.fps = j.value("fps", cfg.fps);
    cfg.kernel.bandwidth = j.value("bandwidth", cfg.kernel.bandwidth);
    if (j.contains("kernel")) {
      const auto shape = j.at("kernel").get<std::string>();
      if (shape == "gaussian") cfg.kernel.shape = KernelShape::gaussian;
      else if (shape == "triangular") cfg.kernel.shape = KernelShape::triangular;
      else throw Error(ErrorCode::MalformedLine, "kernel must be gaussian or triangular");
    }
    cfg.labials.max_extension = j.value("max_extension", cfg.labials.max_extension);
    cfg.labials.min_duration = j.value("min_duration", cfg.labials.min_duration);
    cfg.enforce_closure = j.value("enforce_closure", cfg.enforce_closure);
    cfg.envelope.attack = j.value("attack", cfg.envelope.attack);
    cfg.envelope.release = j.value("release", cfg.envelope.release);
    path("viseme_table", cfg.viseme_table);
    path("compat_table", cfg.compat_table);
    path("morphset", cfg.morphset);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedLine, std::string("bad config value: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

/// Step-wise gaze and neck commands: rows `eyes,start_ms,yaw,pitch` or
/// `neck,start_ms,yaw,pitch,roll`. A command holds until the next one of
/// the same kind. Neck commands are clamped to the envelope.
struct LookScript {
  struct Eyes {
    double time;
    GazeAngles angles;
  };
  struct Neck {
    double time;
    NeckPose pose;
  };
  std::vector<Eyes> eyes;
  std::vector<Neck> neck;

  GazeAngles eyes_at(double t) const {
    GazeAngles out;
    for (const auto& e : eyes) {
      if (e.time <= t) out = e.angles;
    }
    return out;
  }
  NeckPose neck_at(double t) const {
    NeckPose out;
    for (const auto& n : neck) {
      if (n.time <= t) out = n.pose;
    }
    return out;
  }
};

inline LookScript parse_look_script(std::string_view content) {
  LookScript script;
  std::size_t line_no = 0;
  for (auto line : text::lines(content)) {
    ++line_no;
    const auto trimmed = text::trim(line);
    if (trimmed.empty() || trimmed.front() == '#') continue;
    const auto f = text::split(trimmed, ',');
    const auto kind = text::trim(f[0]);
    const std::size_t want = kind == "eyes" ? 4 : kind == "neck" ? 5 : 0;
    if (want == 0) throw Error(ErrorCode::MalformedLine, "row kind must be eyes or neck", line_no);
    if (f.size() != want) throw Error(ErrorCode::MalformedLine, "wrong field count", line_no);
    const auto ms = text::parse_int(f[1]);
    if (!ms || *ms < 0) throw Error(ErrorCode::MalformedLine, "bad start_ms", line_no);
    std::vector<double> v;
    for (std::size_t i = 2; i < f.size(); ++i) {
      const auto x = text::parse_double(f[i]);
      if (!x || !std::isfinite(*x)) throw Error(ErrorCode::MalformedLine, "non-numeric angle", line_no);
      v.push_back(*x);
    }
    const double t = static_cast<double>(*ms) / 1000.0;
    if (kind == "eyes") {
      if (std::abs(v[0]) > 60.0 || std::abs(v[1]) > 40.0) throw Error(ErrorCode::GazeOutOfRange, "eye angles exceed +-60/+-40", line_no);
      script.eyes.push_back({t, {v[0], v[1]}});
    } else {
      script.neck.push_back({t, clamp_neck(v[0], v[1], v[2]).pose});
    }
  }
  auto by_time = [](const auto& a, const auto& b) { return a.time < b.time; };
  std::stable_sort(script.eyes.begin(), script.eyes.end(), by_time);
  std::stable_sort(script.neck.begin(), script.neck.end(), by_time);
  return script;
}

struct Timeline {
  double fps = 30.0;
  std::vector<FrameBlend> frames;

  double frame_time(std::size_t k) const { return static_cast<double>(k) / fps; }
};

/// Viseme track for a transcript under `cfg` (extension, smoothing, closure).
inline VisemeTrack synthesize_track(const Transcript& transcript, const VisemeTable& visemes, const EngineConfig& cfg) {
  auto segments = to_viseme_segments(transcript, visemes);
  if (cfg.enforce_closure) segments = extend_labials(segments, visemes, cfg.labials);
  auto track = sample_track(segments, cfg.fps, cfg.kernel, transcript.total_duration, visemes.neutral_id());
  if (cfg.enforce_closure) track = enforce_labial_closure(std::move(track), segments, visemes);
  return track;
}

inline Timeline synthesize(const Transcript& transcript, std::span<const ExpressionSpec> emotions,
                           const VisemeTable& visemes, const CompatibilityTable& compat, const EngineConfig& cfg,
                           const LookScript& look = {}) {
  cfg.validate();
  Timeline timeline;
  timeline.fps = cfg.fps;
  if (transcript.empty() && !(transcript.total_duration > 0.0)) return timeline;

  const auto track = synthesize_track(transcript, visemes, cfg);
  const auto schedule = expand_expression_schedule(emotions, cfg.fps, track.size());
  timeline.frames.reserve(track.size());
  for (std::size_t k = 0; k < track.size(); ++k) {
    auto fb = blend_frame(track.frames[k], schedule[k], compat);
    const double t = track.frame_time(k);
    fb.gaze = look.eyes_at(t);
    fb.neck = look.neck_at(t);
    timeline.frames.push_back(fb);
  }
  return timeline;
}

inline std::vector<std::string> timeline_columns() {
  std::vector<std::string> cols = {"frame", "time"};
  for (int v = 0; v < kVisemeCount; ++v) cols.push_back("v" + std::to_string(v));
  for (auto e : kExpressions) cols.push_back("upper_" + std::string(to_string(e)));
  for (auto e : kExpressions) cols.push_back("lower_" + std::string(to_string(e)));
  for (const char* c : {"preblend_id", "preblend_weight", "gaze_yaw", "gaze_pitch", "neck_yaw", "neck_pitch", "neck_roll"}) {
    cols.emplace_back(c);
  }
  return cols;
}

inline std::string serialize_timeline(const Timeline& timeline) {
  nlohmann::json header;
  header["format"] = "visage-timeline";
  header["version"] = 1;
  header["fps"] = timeline.fps;
  header["frames"] = timeline.frames.size();
  header["viseme_classes"] = kVisemeCount;
  std::vector<std::string> names;
  for (auto e : kExpressions) names.emplace_back(to_string(e));
  header["expressions"] = names;

  const auto cols = timeline_columns();
  std::string out = header.dump() + "\n";
  for (std::size_t i = 0; i < cols.size(); ++i) out += (i ? "," : "") + cols[i];
  out += "\n";
  auto num = [&](double x) {
    out += ',';
    out += text::format_double(x);
  };
  for (std::size_t k = 0; k < timeline.frames.size(); ++k) {
    const auto& fb = timeline.frames[k];
    out += std::to_string(k);
    num(timeline.frame_time(k));
    for (double w : fb.viseme_weights) num(w);
    for (double w : fb.upper) num(w);
    for (double w : fb.lower) num(w);
    out += "," + std::to_string(fb.preblend ? fb.preblend->id : -1);
    num(fb.preblend ? fb.preblend->weight : 0.0);
    num(fb.gaze.yaw);
    num(fb.gaze.pitch);
    num(fb.neck.yaw);
    num(fb.neck.pitch);
    num(fb.neck.roll);
    out += "\n";
  }
  return out;
}

inline Timeline parse_timeline(std::string_view content) {
  const auto rows = text::lines(content);
  if (rows.size() < 2) throw Error(ErrorCode::MalformedLine, "timeline needs a header and a column line");
  Timeline timeline;
  try {
    const auto header = nlohmann::json::parse(rows[0]);
    if (header.at("format") != "visage-timeline") throw Error(ErrorCode::MalformedLine, "not a timeline file", 1);
    timeline.fps = header.at("fps").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedLine, std::string("bad timeline header: ") + e.what(), 1);
  }
  const auto cols = timeline_columns();
  for (std::size_t i = 2; i < rows.size(); ++i) {
    if (text::trim(rows[i]).empty()) continue;
    const auto f = text::split(rows[i], ',');
    if (f.size() != cols.size()) throw Error(ErrorCode::MalformedLine, "wrong column count", i + 1);
    std::vector<double> v;
    for (auto field : f) {
      const auto x = text::parse_double(field);
      if (!x) throw Error(ErrorCode::MalformedLine, "non-numeric field", i + 1);
      v.push_back(*x);
    }
    FrameBlend fb;
    std::size_t c = 2;
    for (auto& w : fb.viseme_weights) w = v[c++];
    for (auto& w : fb.upper) w = v[c++];
    for (auto& w : fb.lower) w = v[c++];
    const int pb = static_cast<int>(v[c++]);
    const double pbw = v[c++];
    if (pb >= 0) fb.preblend = Preblend{pb, pbw};
    fb.gaze = {v[c], v[c + 1]};
    fb.neck = {v[c + 2], v[c + 3], v[c + 4]};
    timeline.frames.push_back(fb);
  }
  return timeline;
}

}  // namespace visage
