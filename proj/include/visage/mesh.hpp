#pragma once

// Multi-target morphing: OBJ meshes, morph-target sets with upper/lower face
// regions, per-frame blending and rigid eye-gaze rotation.

#include <algorithm>
#include <array>
#include <cmath>
#include <compare>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "visage/error.hpp"
#include "visage/expression.hpp"
#include "visage/headpose.hpp"
#include "visage/text.hpp"
#include "visage/viseme.hpp"

namespace visage {

using Vec3 = Eigen::Vector3d;
using Triangle = std::array<std::size_t, 3>;

inline constexpr std::string_view kNoseTip = "nose_tip";
inline constexpr std::string_view kLeftEyeCenter = "left_eye_center";
inline constexpr std::string_view kRightEyeCenter = "right_eye_center";

struct Mesh {
  std::vector<Vec3> vertices;
  std::vector<Triangle> faces;
  std::map<std::string, std::size_t, std::less<>> landmarks;

  std::size_t landmark(std::string_view name) const {
    const auto it = landmarks.find(name);
    if (it == landmarks.end()) throw Error(ErrorCode::MissingLandmark, "landmark '" + std::string(name) + "' not set");
    return it->second;
  }
};

/// Reads vertices and faces from Wavefront OBJ text. Polygons are fan
/// triangulated; texture/normal indices and all other records are ignored.
inline Mesh parse_obj(std::string_view content) {
  Mesh mesh;
  std::size_t line_no = 0;
  for (auto line : text::lines(content)) {
    ++line_no;
    const auto toks = text::tokens(line);
    if (toks.empty() || toks[0].front() == '#') continue;
    if (toks[0] == "v") {
      if (toks.size() < 4) throw Error(ErrorCode::MalformedLine, "vertex needs 3 coordinates", line_no);
      Vec3 p;
      for (int i = 0; i < 3; ++i) {
        const auto x = text::parse_double(toks[1 + i]);
        if (!x) throw Error(ErrorCode::MalformedLine, "non-numeric coordinate", line_no);
        p[i] = *x;
      }
      mesh.vertices.push_back(p);
    } else if (toks[0] == "f") {
      if (toks.size() < 4) throw Error(ErrorCode::MalformedLine, "face needs at least 3 vertices", line_no);
      std::vector<std::size_t> poly;
      for (std::size_t i = 1; i < toks.size(); ++i) {
        const auto idx = text::parse_int(toks[i].substr(0, toks[i].find('/')));
        if (!idx || *idx == 0) throw Error(ErrorCode::MalformedLine, "bad face index", line_no);
        const auto n = static_cast<std::int64_t>(mesh.vertices.size());
        const auto resolved = *idx > 0 ? *idx - 1 : n + *idx;
        if (resolved < 0 || resolved >= n) throw Error(ErrorCode::MalformedLine, "face index out of range", line_no);
        poly.push_back(static_cast<std::size_t>(resolved));
      }
      for (std::size_t i = 1; i + 1 < poly.size(); ++i) mesh.faces.push_back({poly[0], poly[i], poly[i + 1]});
    }
  }
  return mesh;
}

inline std::string serialize_obj(const Mesh& mesh) {
  std::string out;
  out.reserve(mesh.vertices.size() * 48 + mesh.faces.size() * 24);
  for (const auto& v : mesh.vertices) {
    out += "v " + text::format_double(v.x()) + " " + text::format_double(v.y()) + " " +
           text::format_double(v.z()) + "\n";
  }
  for (const auto& f : mesh.faces) {
    out += "f " + std::to_string(f[0] + 1) + " " + std::to_string(f[1] + 1) + " " + std::to_string(f[2] + 1) + "\n";
  }
  return out;
}

enum class Region { upper, lower, both };

enum class TargetKind { viseme, expression_upper, expression_lower, preblend };

/// Orders targets for blending: visemes, upper expressions, lower
/// expressions, pre-blends, each by ascending index.
struct TargetKey {
  TargetKind kind = TargetKind::viseme;
  int index = 0;
  auto operator<=>(const TargetKey&) const = default;
};

inline std::string to_string(const TargetKey& key) {
  switch (key.kind) {
    case TargetKind::viseme: return "viseme " + std::to_string(key.index);
    case TargetKind::expression_upper:
      return "expression_upper " + std::string(to_string(static_cast<Expression>(key.index)));
    case TargetKind::expression_lower:
      return "expression_lower " + std::string(to_string(static_cast<Expression>(key.index)));
    case TargetKind::preblend: return "preblend " + std::to_string(key.index);
  }
  return "?";
}

struct MorphTarget {
  TargetKey key;
  std::vector<Vec3> displacements;  // relative to the neutral mesh
};

struct MorphSet {
  Mesh neutral;
  std::map<TargetKey, MorphTarget> targets;
  std::vector<Region> regions;                 // per vertex
  std::array<std::vector<std::size_t>, 2> eyes;  // left, right
  std::map<Expression, std::string> facs;      // action units, metadata only

  const MorphTarget* find(TargetKey key) const {
    const auto it = targets.find(key);
    return it == targets.end() ? nullptr : &it->second;
  }
  bool is_eye_vertex(std::size_t i) const {
    for (const auto& eye : eyes) {
      if (std::binary_search(eye.begin(), eye.end(), i)) return true;
    }
    return false;
  }
};

/// Parsed morph-set manifest. One directive per line:
///
///   neutral <obj>
///   landmark <name> <vertex>
///   eye left|right <vertex or a-b range>...
///   viseme <id> <obj>
///   expression <name> <obj> [action units]     full face, split by region
///   expression_upper|expression_lower <name> <obj>
///   preblend <id> <obj>
///   mask upper|lower|both <vertex or a-b range>...
struct Manifest {
  struct TargetFile {
    TargetKind kind;
    int index;
    std::string path;
    bool split = false;  // full-face expression to divide into upper/lower
  };

  std::string neutral;
  std::map<std::string, std::size_t, std::less<>> landmarks;
  std::array<std::vector<std::size_t>, 2> eyes;
  std::vector<TargetFile> targets;
  std::vector<std::pair<Region, std::vector<std::size_t>>> masks;
  std::map<Expression, std::string> facs;
};

namespace detail {

inline std::vector<std::size_t> parse_index_list(std::span<const std::string_view> toks, std::size_t line_no) {
  std::vector<std::size_t> out;
  for (auto tok : toks) {
    const auto dash = tok.find('-');
    const auto a = text::parse_int(tok.substr(0, dash));
    const auto b = dash == std::string_view::npos ? a : text::parse_int(tok.substr(dash + 1));
    if (!a || !b || *a < 0 || *b < *a) throw Error(ErrorCode::MalformedLine, "bad vertex index or range", line_no);
    for (auto i = *a; i <= *b; ++i) out.push_back(static_cast<std::size_t>(i));
  }
  return out;
}

inline Expression expect_expression(std::string_view name, std::size_t line_no) {
  const auto e = parse_expression(name);
  if (!e) throw Error(ErrorCode::MalformedLine, "unknown expression '" + std::string(name) + "'", line_no);
  return *e;
}

}  // namespace detail

inline Manifest parse_manifest(std::string_view content) {
  Manifest m;
  std::size_t line_no = 0;
  for (auto line : text::lines(content)) {
    ++line_no;
    const auto toks = text::tokens(line);
    if (toks.empty() || toks[0].front() == '#') continue;
    const auto key = toks[0];
    auto need = [&](std::size_t n) {
      if (toks.size() < n) throw Error(ErrorCode::MalformedLine, "too few fields for '" + std::string(key) + "'", line_no);
    };
    if (key == "neutral") {
      need(2);
      m.neutral = std::string(toks[1]);
    } else if (key == "landmark") {
      need(3);
      const auto idx = text::parse_int(toks[2]);
      if (!idx || *idx < 0) throw Error(ErrorCode::MalformedLine, "bad landmark index", line_no);
      m.landmarks[std::string(toks[1])] = static_cast<std::size_t>(*idx);
    } else if (key == "eye") {
      need(3);
      if (toks[1] != "left" && toks[1] != "right") throw Error(ErrorCode::MalformedLine, "eye must be left or right", line_no);
      auto& eye = m.eyes[toks[1] == "left" ? 0 : 1];
      const auto idx = detail::parse_index_list(std::span(toks).subspan(2), line_no);
      eye.insert(eye.end(), idx.begin(), idx.end());
    } else if (key == "viseme" || key == "preblend") {
      need(3);
      const auto id = text::parse_int(toks[1]);
      if (!id || *id < 0 || (key == "viseme" && *id >= kVisemeCount)) {
        throw Error(ErrorCode::MalformedLine, "bad target id", line_no);
      }
      m.targets.push_back({key == "viseme" ? TargetKind::viseme : TargetKind::preblend, static_cast<int>(*id),
                           std::string(toks[2])});
    } else if (key == "expression") {
      need(3);
      const auto e = detail::expect_expression(toks[1], line_no);
      m.targets.push_back({TargetKind::expression_upper, index_of(e), std::string(toks[2]), true});
      if (toks.size() > 3) m.facs[e] = std::string(toks[3]);
    } else if (key == "expression_upper" || key == "expression_lower") {
      need(3);
      const auto e = detail::expect_expression(toks[1], line_no);
      m.targets.push_back({key == "expression_upper" ? TargetKind::expression_upper : TargetKind::expression_lower,
                           index_of(e), std::string(toks[2])});
    } else if (key == "mask") {
      need(3);
      Region r;
      if (toks[1] == "upper") r = Region::upper;
      else if (toks[1] == "lower") r = Region::lower;
      else if (toks[1] == "both") r = Region::both;
      else throw Error(ErrorCode::MalformedLine, "mask region must be upper, lower or both", line_no);
      m.masks.emplace_back(r, detail::parse_index_list(std::span(toks).subspan(2), line_no));
    } else {
      throw Error(ErrorCode::MalformedLine, "unknown directive '" + std::string(key) + "'", line_no);
    }
  }
  if (m.neutral.empty()) throw Error(ErrorCode::MalformedLine, "manifest has no 'neutral' entry");
  return m;
}

using MeshLoader = std::function<Mesh(const std::string&)>;

namespace detail {

inline void require_same_topology(const Mesh& neutral, const Mesh& target, const std::string& what) {
  if (target.vertices.size() != neutral.vertices.size()) {
    throw Error(ErrorCode::TopologyMismatch, what + ": " + std::to_string(target.vertices.size()) +
                                                 " vertices, neutral has " + std::to_string(neutral.vertices.size()));
  }
  if (target.faces != neutral.faces) throw Error(ErrorCode::TopologyMismatch, what + ": face list differs from neutral");
}

}  // namespace detail

/// Builds a MorphSet. Displacements are target - neutral. Vertices without an
/// explicit mask are upper face when above the nose tip (y > y_nose), lower
/// face otherwise. Expression targets never move eye vertices; a vertex
/// masked `both` receives half of a split expression's displacement in each
/// half so that upper + lower reproduces the full expression.
inline MorphSet assemble_morphset(const Manifest& manifest, const MeshLoader& load) {
  MorphSet set;
  set.neutral = load(manifest.neutral);
  const auto n = set.neutral.vertices.size();
  set.neutral.landmarks = manifest.landmarks;
  for (const auto& [name, idx] : set.neutral.landmarks) {
    if (idx >= n) throw Error(ErrorCode::MissingLandmark, "landmark '" + name + "' index out of range");
  }
  set.facs = manifest.facs;

  for (int side = 0; side < 2; ++side) {
    auto eye = manifest.eyes[side];
    std::sort(eye.begin(), eye.end());
    eye.erase(std::unique(eye.begin(), eye.end()), eye.end());
    if (!eye.empty()) {
      if (eye.back() >= n) throw Error(ErrorCode::TopologyMismatch, "eye vertex index out of range");
      set.neutral.landmark(side == 0 ? kLeftEyeCenter : kRightEyeCenter);
    }
    set.eyes[side] = std::move(eye);
  }

  std::vector<std::optional<Region>> explicit_regions(n);
  for (const auto& [region, indices] : manifest.masks) {
    for (auto i : indices) {
      if (i >= n) throw Error(ErrorCode::TopologyMismatch, "mask vertex index out of range");
      explicit_regions[i] = region;
    }
  }
  set.regions.resize(n);
  std::optional<double> nose_y;
  for (std::size_t i = 0; i < n; ++i) {
    if (explicit_regions[i]) {
      set.regions[i] = *explicit_regions[i];
      continue;
    }
    if (!nose_y) nose_y = set.neutral.vertices[set.neutral.landmark(kNoseTip)].y();
    set.regions[i] = set.neutral.vertices[i].y() > *nose_y ? Region::upper : Region::lower;
  }

  auto add = [&](TargetKey key, std::vector<Vec3> disp) {
    if (!set.targets.emplace(key, MorphTarget{key, std::move(disp)}).second) {
      throw Error(ErrorCode::TopologyMismatch, "duplicate target " + to_string(key));
    }
  };

  for (const auto& tf : manifest.targets) {
    const auto mesh = load(tf.path);
    detail::require_same_topology(set.neutral, mesh, tf.path);
    std::vector<Vec3> disp(n);
    for (std::size_t i = 0; i < n; ++i) disp[i] = mesh.vertices[i] - set.neutral.vertices[i];

    if (tf.kind == TargetKind::viseme || tf.kind == TargetKind::preblend) {
      add({tf.kind, tf.index}, std::move(disp));
      continue;
    }
    auto restrict_to = [&](Region keep) {
      std::vector<Vec3> out(n, Vec3::Zero());
      for (std::size_t i = 0; i < n; ++i) {
        if (set.is_eye_vertex(i)) continue;
        if (set.regions[i] == keep) out[i] = disp[i];
        else if (set.regions[i] == Region::both) out[i] = tf.split ? Vec3(0.5 * disp[i]) : disp[i];
      }
      return out;
    };
    if (tf.split) {
      add({TargetKind::expression_upper, tf.index}, restrict_to(Region::upper));
      add({TargetKind::expression_lower, tf.index}, restrict_to(Region::lower));
    } else {
      add({tf.kind, tf.index}, restrict_to(tf.kind == TargetKind::expression_upper ? Region::upper : Region::lower));
    }
  }

  for (int v = 0; v < kVisemeCount; ++v) {
    if (!set.find({TargetKind::viseme, v})) throw Error(ErrorCode::MissingTarget, "missing viseme target " + std::to_string(v));
  }
  for (auto e : kExpressions) {
    for (auto kind : {TargetKind::expression_upper, TargetKind::expression_lower}) {
      if (!set.find({kind, index_of(e)})) throw Error(ErrorCode::MissingTarget, "missing " + to_string(TargetKey{kind, index_of(e)}));
    }
  }
  return set;
}

/// Loads a manifest and its OBJ files; relative paths resolve against the
/// manifest's directory.
inline MorphSet load_morphset(const std::string& manifest_path) {
  const auto manifest = parse_manifest(text::read_file(manifest_path));
  const auto base = std::filesystem::path(manifest_path).parent_path();
  return assemble_morphset(manifest, [&](const std::string& rel) {
    const auto p = std::filesystem::path(rel);
    return parse_obj(text::read_file((p.is_absolute() ? p : base / p).string()));
  });
}

/// Nonzero (target, weight) pairs of a frame in blending order.
inline std::vector<std::pair<TargetKey, double>> frame_weights(const FrameBlend& fb) {
  std::vector<std::pair<TargetKey, double>> out;
  for (int v = 0; v < kVisemeCount; ++v) {
    if (fb.viseme_weights[v] != 0.0) out.push_back({{TargetKind::viseme, v}, fb.viseme_weights[v]});
  }
  for (int j = 0; j < kExpressionCount; ++j) {
    if (fb.upper[j] != 0.0) out.push_back({{TargetKind::expression_upper, j}, fb.upper[j]});
  }
  for (int j = 0; j < kExpressionCount; ++j) {
    if (fb.lower[j] != 0.0) out.push_back({{TargetKind::expression_lower, j}, fb.lower[j]});
  }
  if (fb.preblend && fb.preblend->weight != 0.0) out.push_back({{TargetKind::preblend, fb.preblend->id}, fb.preblend->weight});
  return out;
}

/// neutral + sum of weight * displacement, accumulated in TargetKey order.
inline Mesh blend_mesh(const MorphSet& set, const FrameBlend& fb) {
  const auto weights = frame_weights(fb);
  std::vector<const MorphTarget*> targets;
  targets.reserve(weights.size());
  for (const auto& [key, w] : weights) {
    const auto* t = set.find(key);
    if (!t) throw Error(ErrorCode::UnknownTargetId, "no target " + to_string(key) + " in morph set");
    targets.push_back(t);
  }
  Mesh out = set.neutral;
  for (std::size_t k = 0; k < targets.size(); ++k) {
    const double w = weights[k].second;
    const auto& disp = targets[k]->displacements;
    for (std::size_t i = 0; i < out.vertices.size(); ++i) out.vertices[i] += w * disp[i];
  }
  return out;
}

inline constexpr double kMaxGazeYaw = 60.0;
inline constexpr double kMaxGazePitch = 40.0;

/// Pitch about +x (positive looks up), then yaw about +y (positive looks
/// toward +x). Forward is +z.
inline Eigen::Matrix3d gaze_rotation(double yaw_deg, double pitch_deg) {
  constexpr double kRad = std::numbers::pi / 180.0;
  const Eigen::AngleAxisd yaw(yaw_deg * kRad, Vec3::UnitY());
  const Eigen::AngleAxisd pitch(-pitch_deg * kRad, Vec3::UnitX());
  return (yaw * pitch).toRotationMatrix();
}

/// Rotates each eye submesh rigidly about its eye-center landmark.
inline Mesh apply_gaze(Mesh mesh, const MorphSet& set, double yaw_deg, double pitch_deg) {
  if (!(std::abs(yaw_deg) <= kMaxGazeYaw) || !(std::abs(pitch_deg) <= kMaxGazePitch)) {
    throw Error(ErrorCode::GazeOutOfRange, "gaze (" + text::format_double(yaw_deg) + ", " +
                                               text::format_double(pitch_deg) + ") exceeds +-60/+-40 deg");
  }
  if (yaw_deg == 0.0 && pitch_deg == 0.0) return mesh;
  const Eigen::Matrix3d r = gaze_rotation(yaw_deg, pitch_deg);
  for (int side = 0; side < 2; ++side) {
    if (set.eyes[side].empty()) continue;
    const Vec3 center = mesh.vertices[set.neutral.landmark(side == 0 ? kLeftEyeCenter : kRightEyeCenter)];
    for (auto i : set.eyes[side]) mesh.vertices[i] = center + r * (mesh.vertices[i] - center);
  }
  return mesh;
}

inline GazeAngles gaze_to_angles(const Vec3& eye_center, const Vec3& target) {
  const auto aim = aim_angles(eye_center, target);
  return {aim.yaw, aim.pitch};
}

}  // namespace visage
