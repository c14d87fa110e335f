#pragma once

// Self-contained synthetic assets: a procedural low-poly head with viseme,
// expression and pre-blend targets, a default camera, and smooth lens-like
// warps standing in for a physical mask.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "visage/calibration.hpp"
#include "visage/expression.hpp"
#include "visage/mesh.hpp"
#include "visage/text.hpp"

namespace visage::fixtures {

struct HeadAssets {
  Manifest manifest;
  std::map<std::string, Mesh> files;  // manifest path -> mesh

  MorphSet morphset() const {
    return assemble_morphset(manifest, [this](const std::string& path) {
      const auto it = files.find(path);
      if (it == files.end()) throw Error(ErrorCode::Io, "no fixture mesh '" + path + "'");
      return it->second;
    });
  }
};

namespace detail {

struct SphereRange {
  std::size_t first;
  std::size_t count;
};

/// Lat/long sphere appended to `mesh`; returns the vertex range it occupies.
inline SphereRange add_ellipsoid(Mesh& mesh, const Vec3& center, const Vec3& radii, int rings, int segments) {
  const std::size_t first = mesh.vertices.size();
  mesh.vertices.push_back(center + Vec3(0, radii.y(), 0));
  for (int r = 1; r < rings; ++r) {
    const double theta = std::numbers::pi * r / rings;
    const double y = (2 * r == rings) ? 0.0 : std::cos(theta);
    for (int s = 0; s < segments; ++s) {
      const double phi = 2.0 * std::numbers::pi * s / segments;
      mesh.vertices.push_back(center + Vec3(radii.x() * std::sin(theta) * std::sin(phi), radii.y() * y,
                                            radii.z() * std::sin(theta) * std::cos(phi)));
    }
  }
  mesh.vertices.push_back(center - Vec3(0, radii.y(), 0));
  const std::size_t last = mesh.vertices.size() - 1;
  auto ring_vertex = [&](int r, int s) { return first + 1 + static_cast<std::size_t>((r - 1) * segments + (s % segments)); };
  for (int s = 0; s < segments; ++s) mesh.faces.push_back({first, ring_vertex(1, s + 1), ring_vertex(1, s)});
  for (int r = 1; r + 1 < rings; ++r) {
    for (int s = 0; s < segments; ++s) {
      mesh.faces.push_back({ring_vertex(r, s), ring_vertex(r, s + 1), ring_vertex(r + 1, s + 1)});
      mesh.faces.push_back({ring_vertex(r, s), ring_vertex(r + 1, s + 1), ring_vertex(r + 1, s)});
    }
  }
  for (int s = 0; s < segments; ++s) mesh.faces.push_back({last, ring_vertex(rings - 1, s), ring_vertex(rings - 1, s + 1)});
  return {first, mesh.vertices.size() - first};
}

inline double bump(double dx, double dy, double sx, double sy) {
  return std::exp(-(dx * dx / sx + dy * dy / sy));
}

}  // namespace detail

/// Builds the test head: an ellipsoidal face (nose bump at the origin,
/// forward +z, up +y, avatar's left +x) plus two eyeballs with explicit
/// center vertices. About 1.3k vertices.
inline HeadAssets make_procedural_head() {
  constexpr int kRings = 30;
  constexpr int kSegments = 40;
  Mesh neutral;
  const auto face = detail::add_ellipsoid(neutral, Vec3::Zero(), Vec3(0.8, 1.1, 0.9), kRings, kSegments);
  for (std::size_t i = face.first; i < face.first + face.count; ++i) {
    auto& v = neutral.vertices[i];
    if (v.z() > 0.0) v.z() += 0.25 * detail::bump(v.x(), v.y(), 0.02, 0.03);
  }
  const std::size_t nose_tip = face.first + 1 + static_cast<std::size_t>((kRings / 2 - 1) * kSegments);

  std::array<std::vector<std::size_t>, 2> eyes;
  std::array<std::size_t, 2> centers{};
  for (int side = 0; side < 2; ++side) {
    const Vec3 c(side == 0 ? 0.3 : -0.3, 0.3, 0.72);
    const auto range = detail::add_ellipsoid(neutral, c, Vec3(0.12, 0.12, 0.12), 8, 10);
    centers[side] = neutral.vertices.size();
    neutral.vertices.push_back(c);
    for (std::size_t i = range.first; i <= centers[side]; ++i) eyes[side].push_back(i);
  }
  const std::size_t n = neutral.vertices.size();
  auto on_face = [&](std::size_t i) { return i < face.first + face.count; };

  // Mouth-region field shared by visemes and lower-face expressions.
  auto mouth = [&](std::size_t i, double open, double wide, double pucker) -> Vec3 {
    const auto& v = neutral.vertices[i];
    if (!on_face(i) || v.y() > 0.0 || v.z() <= 0.0) return Vec3::Zero();
    const double g = detail::bump(v.x(), v.y() + 0.45, 0.10, 0.05);
    const double jaw = v.y() < -0.45 ? 1.0 : 0.3;
    return g * Vec3(wide * v.x(), -open * jaw, pucker);
  };
  auto brows = [&](std::size_t i, double raise, double inner) -> Vec3 {
    const auto& v = neutral.vertices[i];
    if (!on_face(i) || v.z() <= 0.0) return Vec3::Zero();
    const double g = detail::bump(std::abs(v.x()) - 0.3, v.y() - 0.55, 0.03, 0.01);
    const double gi = detail::bump(std::abs(v.x()) - 0.1, v.y() - 0.5, 0.01, 0.01);
    return Vec3(0.0, raise * g + inner * gi, 0.0);
  };
  auto corners = [&](std::size_t i, double lift) -> Vec3 {
    const auto& v = neutral.vertices[i];
    if (!on_face(i) || v.z() <= 0.0) return Vec3::Zero();
    const double g = detail::bump(std::abs(v.x()) - 0.25, v.y() + 0.45, 0.01, 0.01);
    return g * Vec3(0.3 * lift * v.x(), lift, 0.0);
  };

  auto displaced = [&](auto&& field) {
    Mesh m = neutral;
    for (std::size_t i = 0; i < n; ++i) m.vertices[i] += field(i);
    return m;
  };

  HeadAssets assets;
  auto& man = assets.manifest;
  man.neutral = "neutral.obj";
  man.landmarks = {{std::string(kNoseTip), nose_tip},
                   {std::string(kLeftEyeCenter), centers[0]},
                   {std::string(kRightEyeCenter), centers[1]}};
  man.eyes = eyes;
  neutral.landmarks = man.landmarks;
  assets.files[man.neutral] = neutral;

  auto viseme_shape = [](int v) {
    if (v == 0) return Vec3::Zero().eval();
    if (v == 1) return Vec3(-0.01, -0.015, 0.01);  // pressed lips
    if (v == 2) return Vec3(0.0, 0.01, 0.0);       // lower lip to teeth
    return Vec3(0.04 + 0.01 * (v % 5), 0.02 * ((v * 7) % 5 - 2), 0.015 * ((v * 3) % 4));
  };
  for (int v = 0; v < kVisemeCount; ++v) {
    const Vec3 p = viseme_shape(v);
    const std::string path = "viseme_" + std::string(v < 10 ? "0" : "") + std::to_string(v) + ".obj";
    assets.files[path] = displaced([&](std::size_t i) { return mouth(i, p.x(), p.y(), p.z()); });
    man.targets.push_back({TargetKind::viseme, v, path});
  }

  struct ExprShape {
    double raise, inner, lift, open;
    const char* aus;
  };
  const std::map<Expression, ExprShape> shapes = {
      {Expression::anger, {-0.03, -0.02, -0.01, 0.02, "AU4+AU5+AU7+AU23"}},
      {Expression::disgust, {-0.02, 0.0, 0.02, 0.0, "AU9+AU15+AU16"}},
      {Expression::fear, {0.04, 0.02, -0.01, 0.04, "AU1+AU2+AU4+AU5+AU20+AU26"}},
      {Expression::joy, {0.01, 0.0, 0.04, 0.0, "AU6+AU12"}},
      {Expression::sadness, {0.0, 0.03, -0.03, 0.0, "AU1+AU4+AU15"}},
      {Expression::surprise, {0.05, 0.02, 0.0, 0.07, "AU1+AU2+AU5+AU26"}},
  };
  auto expression_field = [&](Expression e, std::size_t i) -> Vec3 {
    const auto& s = shapes.at(e);
    return brows(i, s.raise, s.inner) + corners(i, s.lift) + mouth(i, s.open, 0.0, 0.0);
  };
  for (auto e : kExpressions) {
    const std::string path = "expression_" + std::string(to_string(e)) + ".obj";
    assets.files[path] = displaced([&](std::size_t i) { return expression_field(e, i); });
    man.targets.push_back({TargetKind::expression_upper, index_of(e), path, true});
    man.facs[e] = shapes.at(e).aus;
  }

  // Pre-blends for the default compatibility table: lip-closing visemes 1, 2
  // with surprise, fear, anger -> ids 0..5. The mouth stays nearly closed.
  int id = 0;
  for (int v : {1, 2}) {
    for (auto e : {Expression::surprise, Expression::fear, Expression::anger}) {
      const Vec3 p = viseme_shape(v);
      const auto& s = shapes.at(e);
      const std::string path = "preblend_" + std::to_string(id) + ".obj";
      assets.files[path] = displaced([&](std::size_t i) {
        const Vec3 lower = neutral.vertices[i].y() > 0.0 ? Vec3::Zero().eval() : corners(i, s.lift);
        return (mouth(i, p.x() + 0.1 * s.open, p.y(), p.z()) + lower).eval();
      });
      man.targets.push_back({TargetKind::preblend, id, path});
      ++id;
    }
  }
  return assets;
}

/// Writes every mesh plus `manifest.txt` into `dir`; returns the manifest path.
inline std::string write_head(const HeadAssets& assets, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& [path, mesh] : assets.files) text::write_file((dir / path).string(), serialize_obj(mesh));
  const auto& m = assets.manifest;
  std::string out = "# procedural test head\nneutral " + m.neutral + "\n";
  for (const auto& [name, idx] : m.landmarks) out += "landmark " + name + " " + std::to_string(idx) + "\n";
  for (int side = 0; side < 2; ++side) {
    if (m.eyes[side].empty()) continue;
    out += std::string("eye ") + (side == 0 ? "left" : "right") + " " + std::to_string(m.eyes[side].front()) + "-" +
           std::to_string(m.eyes[side].back()) + "\n";
  }
  for (const auto& t : m.targets) {
    switch (t.kind) {
      case TargetKind::viseme: out += "viseme " + std::to_string(t.index) + " " + t.path + "\n"; break;
      case TargetKind::preblend: out += "preblend " + std::to_string(t.index) + " " + t.path + "\n"; break;
      case TargetKind::expression_upper:
      case TargetKind::expression_lower: {
        const auto e = static_cast<Expression>(t.index);
        const std::string key = t.split ? "expression"
                                : t.kind == TargetKind::expression_upper ? "expression_upper"
                                                                         : "expression_lower";
        out += key + " " + std::string(to_string(e)) + " " + t.path;
        if (t.split && m.facs.count(e)) out += " " + m.facs.at(e);
        out += "\n";
        break;
      }
    }
  }
  const auto manifest = (dir / "manifest.txt").string();
  text::write_file(manifest, out);
  return manifest;
}

/// Camera at +4 on z looking down -z, 40 deg vertical field of view,
/// OpenGL-style clip space, row-vector matrices.
inline CameraMatrices default_camera(double aspect = 4.0 / 3.0) {
  CameraMatrices cams;
  cams.view(3, 2) = -4.0;
  const double f = 1.0 / std::tan(20.0 * std::numbers::pi / 180.0);
  const double near = 0.5, far = 20.0;
  Mat4 p = Mat4::Zero();
  p(0, 0) = f / aspect;
  p(1, 1) = f;
  p(2, 2) = (far + near) / (near - far);
  p(2, 3) = -1.0;
  p(3, 2) = 2.0 * far * near / (near - far);
  cams.projection = p;
  return cams;
}

/// Smooth barrel-plus-shear warp of screen space, fixed at the corners of
/// a width x height rectangle only approximately; strength is in pixels.
struct SmoothWarp {
  double width = 800.0;
  double height = 600.0;
  double strength = 12.0;

  Vec2 operator()(const Vec2& p) const {
    const double u = p.x() / width - 0.5;
    const double v = p.y() / height - 0.5;
    const double r2 = u * u + v * v;
    return p + strength * Vec2(u * r2 * 4.0 + 0.3 * std::sin(std::numbers::pi * v),
                               v * r2 * 4.0 + 0.2 * std::sin(std::numbers::pi * u));
  }
};

inline std::vector<Vec2> warp_corners(const ScreenGrid& grid, const SmoothWarp& warp) {
  std::vector<Vec2> out;
  for (int r = 0; r <= grid.rows; ++r) {
    for (int c = 0; c <= grid.cols; ++c) out.push_back(warp(grid.corner(r, c)));
  }
  return out;
}

/// Adds isotropic gaussian noise (sigma pixels) to every point.
inline std::vector<Vec2> add_noise(std::vector<Vec2> pts, double sigma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, sigma);
  for (auto& p : pts) {
    const double dx = noise(rng);
    const double dy = noise(rng);
    p += Vec2(dx, dy);
  }
  return pts;
}

}  // namespace visage::fixtures
