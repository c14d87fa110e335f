#pragma once

// Projection calibration: checkerboard lattice, DLT homographies, a
// piecewise-homography map from screen to mask coordinates, affine placement
// of the mold model, and pre-distortion of a mesh through the inverse
// world-view-projection transform.
//
// Matrices act on row vectors (p' = p * M) for the camera chain, matching
// S = N * WVP. Homographies and affines act on column vectors.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <Eigen/LU>
#include <Eigen/QR>
#include <Eigen/SVD>

#include "visage/error.hpp"
#include "visage/mesh.hpp"
#include "visage/text.hpp"

namespace visage {

using Vec2 = Eigen::Vector2d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Affine2 = Eigen::Matrix<double, 2, 3>;

struct PointPair {
  Vec2 src;
  Vec2 dst;
};

inline constexpr double kDivideEpsilon = 1e-12;

/// 3x3 projective transform, scaled so the bottom-right entry is 1 when it
/// is nonzero (unit Frobenius norm otherwise).
class Homography {
 public:
  Homography() : m_(Mat3::Identity()) {}
  explicit Homography(const Mat3& m) : m_(normalized(m)) {
    if (!m_.allFinite() || std::abs(m_.determinant()) <= 1e-12) {
      throw Error(ErrorCode::DegenerateConfiguration, "homography is singular");
    }
  }

  /// Wraps a matrix that is already normalized, without rescaling.
  static Homography from_normalized(const Mat3& m) {
    Homography h;
    h.m_ = m;
    return h;
  }

  const Mat3& matrix() const { return m_; }

  Vec2 apply(const Vec2& p) const {
    const Eigen::Vector3d q = m_ * Eigen::Vector3d(p.x(), p.y(), 1.0);
    if (std::abs(q.z()) < kDivideEpsilon) throw Error(ErrorCode::ProjectiveDivideByZero, "point maps to infinity");
    return q.head<2>() / q.z();
  }

  static Mat3 normalized(const Mat3& m) {
    if (std::abs(m(2, 2)) > 1e-12) return m / m(2, 2);
    return m / m.norm();
  }

 private:
  Mat3 m_;
};

namespace detail {

inline double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

/// Similarity moving the centroid to the origin with mean distance sqrt(2).
inline Mat3 hartley_normalization(std::span<const Vec2> pts) {
  Vec2 c = Vec2::Zero();
  for (const auto& p : pts) c += p;
  c /= static_cast<double>(pts.size());
  double mean = 0.0;
  for (const auto& p : pts) mean += (p - c).norm();
  mean /= static_cast<double>(pts.size());
  if (!(mean > 0.0)) throw Error(ErrorCode::DegenerateConfiguration, "all points coincide");
  const double s = std::sqrt(2.0) / mean;
  Mat3 t;
  t << s, 0, -s * c.x(), 0, s, -s * c.y(), 0, 0, 1;
  return t;
}

inline Vec2 transform(const Mat3& t, const Vec2& p) {
  const Eigen::Vector3d q = t * Eigen::Vector3d(p.x(), p.y(), 1.0);
  return q.head<2>() / q.z();
}

/// Rejects coincident points, collinear triples when exactly `minimal`
/// points are given, and fully collinear sets otherwise. Works on
/// normalized coordinates so the tolerance is scale-free.
inline void check_configuration(std::span<const Vec2> pts, std::size_t minimal, const char* which) {
  constexpr double kTol = 1e-9;
  const Mat3 t = hartley_normalization(pts);
  std::vector<Vec2> q;
  q.reserve(pts.size());
  for (const auto& p : pts) q.push_back(transform(t, p));
  for (std::size_t i = 0; i < q.size(); ++i) {
    for (std::size_t j = i + 1; j < q.size(); ++j) {
      if ((q[i] - q[j]).norm() < kTol) {
        throw Error(ErrorCode::DegenerateConfiguration, std::string(which) + " points coincide");
      }
    }
  }
  if (q.size() == minimal) {
    for (std::size_t i = 0; i < q.size(); ++i) {
      for (std::size_t j = i + 1; j < q.size(); ++j) {
        for (std::size_t k = j + 1; k < q.size(); ++k) {
          if (std::abs(cross2(q[j] - q[i], q[k] - q[i])) < kTol) {
            throw Error(ErrorCode::DegenerateConfiguration, std::string(which) + " points are collinear");
          }
        }
      }
    }
  } else {
    Eigen::MatrixXd centered(q.size(), 2);
    for (std::size_t i = 0; i < q.size(); ++i) centered.row(static_cast<Eigen::Index>(i)) = q[i].transpose();
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered);
    if (svd.singularValues()(1) < kTol * std::max(1.0, svd.singularValues()(0))) {
      throw Error(ErrorCode::DegenerateConfiguration, std::string(which) + " points are collinear");
    }
  }
}

}  // namespace detail

/// Least-squares DLT on Hartley-normalized points. Exact for four
/// non-degenerate correspondences.
inline Homography estimate_homography(std::span<const PointPair> pairs) {
  if (pairs.size() < 4) throw Error(ErrorCode::InsufficientPoints, "homography needs at least 4 correspondences");
  std::vector<Vec2> src, dst;
  for (const auto& p : pairs) {
    if (!p.src.allFinite() || !p.dst.allFinite()) throw Error(ErrorCode::NonFiniteInput, "non-finite point");
    src.push_back(p.src);
    dst.push_back(p.dst);
  }
  detail::check_configuration(src, 4, "source");
  detail::check_configuration(dst, 4, "destination");

  const Mat3 ts = detail::hartley_normalization(src);
  const Mat3 td = detail::hartley_normalization(dst);
  const auto n = static_cast<Eigen::Index>(pairs.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2 * n, 9);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec2 x = detail::transform(ts, src[i]);
    const Vec2 u = detail::transform(td, dst[i]);
    a.row(2 * i) << 0, 0, 0, -x.x(), -x.y(), -1, u.y() * x.x(), u.y() * x.y(), u.y();
    a.row(2 * i + 1) << x.x(), x.y(), 1, 0, 0, 0, -u.x() * x.x(), -u.x() * x.y(), -u.x();
  }
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::VectorXd h = svd.matrixV().col(8);
  Mat3 hn;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  return Homography(td.inverse() * hn * ts);
}

struct ScreenGrid {
  int rows = 1;
  int cols = 1;
  double width = 1.0;   // pixels
  double height = 1.0;  // pixels

  std::size_t corner_count() const { return static_cast<std::size_t>((rows + 1) * (cols + 1)); }
  std::size_t corner_index(int r, int c) const { return static_cast<std::size_t>(r * (cols + 1) + c); }
  double cell_width() const { return width / cols; }
  double cell_height() const { return height / rows; }
  Vec2 corner(int r, int c) const { return {c * width / cols, r * height / rows}; }
  friend bool operator==(const ScreenGrid&, const ScreenGrid&) = default;
};

struct Checkerboard {
  ScreenGrid grid;
  std::vector<Vec2> corners;     // row-major (rows+1) x (cols+1) lattice
  std::vector<bool> cell_white;  // row-major rows x cols, (0,0) white
};

inline void validate_grid(const ScreenGrid& g) {
  if (g.rows < 1 || g.cols < 1 || !(g.width > 0.0) || !(g.height > 0.0) || !std::isfinite(g.width) ||
      !std::isfinite(g.height)) {
    throw Error(ErrorCode::BadDimensions, "grid needs rows, cols >= 1 and positive size");
  }
}

inline Checkerboard gen_checkerboard(int rows, int cols, double width, double height) {
  Checkerboard board;
  board.grid = {rows, cols, width, height};
  validate_grid(board.grid);
  for (int r = 0; r <= rows; ++r) {
    for (int c = 0; c <= cols; ++c) board.corners.push_back(board.grid.corner(r, c));
  }
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) board.cell_white.push_back((r + c) % 2 == 0);
  }
  return board;
}

/// Binary PGM (P5) of the pattern at the grid's pixel size.
inline std::string render_pgm(const Checkerboard& board) {
  const auto w = static_cast<int>(std::lround(board.grid.width));
  const auto h = static_cast<int>(std::lround(board.grid.height));
  if (w < 1 || h < 1) throw Error(ErrorCode::BadDimensions, "pattern must be at least 1x1 pixel");
  std::string out = "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  const double cw = board.grid.cell_width();
  const double ch = board.grid.cell_height();
  for (int y = 0; y < h; ++y) {
    const int r = std::min(board.grid.rows - 1, static_cast<int>((y + 0.5) / ch));
    for (int x = 0; x < w; ++x) {
      const int c = std::min(board.grid.cols - 1, static_cast<int>((x + 0.5) / cw));
      out += board.cell_white[static_cast<std::size_t>(r * board.grid.cols + c)] ? '\xff' : '\x00';
    }
  }
  return out;
}

enum class CellMode { homography, triangle_affine };

inline std::string_view to_string(CellMode m) {
  return m == CellMode::homography ? "homography" : "triangle_affine";
}

/// Exact affine through three correspondences.
inline Affine2 affine_from_triangle(const std::array<Vec2, 3>& src, const std::array<Vec2, 3>& dst) {
  Mat3 s;
  s << src[0].x(), src[1].x(), src[2].x(), src[0].y(), src[1].y(), src[2].y(), 1, 1, 1;
  if (std::abs(s.determinant()) < 1e-12) throw Error(ErrorCode::DegenerateConfiguration, "triangle is degenerate");
  Eigen::Matrix<double, 2, 3> d;
  d << dst[0].x(), dst[1].x(), dst[2].x(), dst[0].y(), dst[1].y(), dst[2].y();
  return d * s.inverse();
}

inline Vec2 apply_affine(const Affine2& a, const Vec2& p) { return a.leftCols<2>() * p + a.col(2); }

struct MappedPoint {
  Vec2 point;
  bool outside = false;  // input fell outside the lattice and was clamped to a boundary cell
};

/// Screen-to-mask map: one transform per checkerboard cell.
class PiecewiseMap {
 public:
  PiecewiseMap() = default;

  const ScreenGrid& grid() const { return grid_; }
  CellMode mode() const { return mode_; }
  std::span<const Vec2> mask_corners() const { return mask_; }
  const Homography& cell(int r, int c) const { return cells_[index(r, c)]; }
  const std::array<Affine2, 2>& triangles(int r, int c) const { return tris_[index(r, c)]; }

  /// Transform of cell (r, c) applied to p, with no lattice lookup.
  Vec2 apply_cell(int r, int c, const Vec2& p) const {
    if (mode_ == CellMode::homography) return cells_[index(r, c)].apply(p);
    const Vec2 o = grid_.corner(r, c);
    const double u = (p.x() - o.x()) / grid_.cell_width();
    const double v = (p.y() - o.y()) / grid_.cell_height();
    return apply_affine(tris_[index(r, c)][u >= v ? 0 : 1], p);
  }

  MappedPoint map_point(const Vec2& p) const {
    if (!p.allFinite()) throw Error(ErrorCode::NonFiniteInput, "non-finite point");
    const double gx = p.x() / grid_.cell_width();
    const double gy = p.y() / grid_.cell_height();
    MappedPoint out;
    out.outside = gx < 0.0 || gy < 0.0 || gx > grid_.cols || gy > grid_.rows;
    // Lattice corners are exact constraints of every adjacent cell.
    if (!out.outside && gx == std::floor(gx) && gy == std::floor(gy) &&
        grid_.corner(static_cast<int>(gy), static_cast<int>(gx)) == p) {
      out.point = mask_[grid_.corner_index(static_cast<int>(gy), static_cast<int>(gx))];
      return out;
    }
    const int c = std::clamp(static_cast<int>(std::floor(gx)), 0, grid_.cols - 1);
    const int r = std::clamp(static_cast<int>(std::floor(gy)), 0, grid_.rows - 1);
    out.point = apply_cell(r, c, p);
    return out;
  }

  friend PiecewiseMap build_piecewise_map(const ScreenGrid&, std::span<const Vec2>, CellMode);
  friend PiecewiseMap parse_piecewise_map(std::string_view);

 private:
  std::size_t index(int r, int c) const {
    if (r < 0 || c < 0 || r >= grid_.rows || c >= grid_.cols) throw Error(ErrorCode::BadDimensions, "cell out of range");
    return static_cast<std::size_t>(r * grid_.cols + c);
  }

  ScreenGrid grid_;
  CellMode mode_ = CellMode::homography;
  std::vector<Vec2> mask_;
  std::vector<Homography> cells_;
  std::vector<std::array<Affine2, 2>> tris_;
};

inline MappedPoint map_point(const PiecewiseMap& map, const Vec2& p) { return map.map_point(p); }

/// One exact 4-point homography (or two exact triangle affines) per cell,
/// from the uniform screen lattice to the measured mask corners.
inline PiecewiseMap build_piecewise_map(const ScreenGrid& grid, std::span<const Vec2> mask_corners,
                                        CellMode mode = CellMode::homography) {
  validate_grid(grid);
  if (mask_corners.size() != grid.corner_count()) {
    throw Error(ErrorCode::BadDimensions, "expected " + std::to_string(grid.corner_count()) + " mask corners, got " +
                                              std::to_string(mask_corners.size()));
  }
  PiecewiseMap map;
  map.grid_ = grid;
  map.mode_ = mode;
  map.mask_.assign(mask_corners.begin(), mask_corners.end());
  for (int r = 0; r < grid.rows; ++r) {
    for (int c = 0; c < grid.cols; ++c) {
      const std::array<std::pair<int, int>, 4> quad = {{{r, c}, {r, c + 1}, {r + 1, c + 1}, {r + 1, c}}};
      std::array<PointPair, 4> pairs;
      for (std::size_t k = 0; k < 4; ++k) {
        const auto [qr, qc] = quad[k];
        pairs[k] = {grid.corner(qr, qc), mask_corners[grid.corner_index(qr, qc)]};
      }
      const std::string where = "cell (" + std::to_string(r) + "," + std::to_string(c) + ")";
      try {
        if (mode == CellMode::homography) {
          map.cells_.push_back(estimate_homography(pairs));
        } else {
          map.tris_.push_back({affine_from_triangle({pairs[0].src, pairs[1].src, pairs[2].src},
                                                    {pairs[0].dst, pairs[1].dst, pairs[2].dst}),
                               affine_from_triangle({pairs[0].src, pairs[2].src, pairs[3].src},
                                                    {pairs[0].dst, pairs[2].dst, pairs[3].dst})});
        }
      } catch (const Error& e) {
        if (e.code() != ErrorCode::DegenerateConfiguration && e.code() != ErrorCode::NonFiniteInput) throw;
        throw Error(ErrorCode::DegenerateCell, where + ": " + e.what());
      }
    }
  }
  return map;
}

/// Text form: header, grid line, mode, every mask corner, then every cell's
/// matrix entries row-major. Numbers use shortest round-trip formatting, so
/// parse_piecewise_map restores bit-identical matrices.
inline std::string serialize_piecewise_map(const PiecewiseMap& map) {
  const auto& g = map.grid();
  std::string out = "#piecewise-map 1\n";
  out += "grid " + std::to_string(g.rows) + " " + std::to_string(g.cols) + " " + text::format_double(g.width) + " " +
         text::format_double(g.height) + "\n";
  out += "mode " + std::string(to_string(map.mode())) + "\n";
  for (int r = 0; r <= g.rows; ++r) {
    for (int c = 0; c <= g.cols; ++c) {
      const auto& m = map.mask_corners()[g.corner_index(r, c)];
      out += "corner " + std::to_string(r) + " " + std::to_string(c) + " " + text::format_double(m.x()) + " " +
             text::format_double(m.y()) + "\n";
    }
  }
  for (int r = 0; r < g.rows; ++r) {
    for (int c = 0; c < g.cols; ++c) {
      if (map.mode() == CellMode::homography) {
        out += "cell " + std::to_string(r) + " " + std::to_string(c);
        const auto& h = map.cell(r, c).matrix();
        for (int i = 0; i < 3; ++i) {
          for (int j = 0; j < 3; ++j) out += " " + text::format_double(h(i, j));
        }
        out += "\n";
      } else {
        for (int t = 0; t < 2; ++t) {
          out += "tri " + std::to_string(r) + " " + std::to_string(c) + " " + std::to_string(t);
          const auto& a = map.triangles(r, c)[t];
          for (int i = 0; i < 2; ++i) {
            for (int j = 0; j < 3; ++j) out += " " + text::format_double(a(i, j));
          }
          out += "\n";
        }
      }
    }
  }
  return out;
}

inline PiecewiseMap parse_piecewise_map(std::string_view content) {
  PiecewiseMap map;
  bool have_grid = false;
  std::vector<bool> seen_corner, seen_cell;
  std::size_t line_no = 0;
  auto num = [&](std::string_view tok) {
    const auto v = text::parse_double(tok);
    if (!v) throw Error(ErrorCode::MalformedLine, "non-numeric field '" + std::string(tok) + "'", line_no);
    return *v;
  };
  auto cell_rc = [&](std::string_view rs, std::string_view cs, int max_r, int max_c) {
    const auto r = text::parse_int(rs);
    const auto c = text::parse_int(cs);
    if (!r || !c || *r < 0 || *c < 0 || *r > max_r || *c > max_c) throw Error(ErrorCode::MalformedLine, "index out of range", line_no);
    return std::pair<int, int>(static_cast<int>(*r), static_cast<int>(*c));
  };
  for (auto line : text::lines(content)) {
    ++line_no;
    const auto toks = text::tokens(line);
    if (toks.empty() || toks[0].front() == '#') continue;
    if (toks[0] == "grid") {
      if (toks.size() != 5) throw Error(ErrorCode::MalformedLine, "grid <rows> <cols> <width> <height>", line_no);
      const auto r = text::parse_int(toks[1]);
      const auto c = text::parse_int(toks[2]);
      if (!r || !c) throw Error(ErrorCode::MalformedLine, "bad grid size", line_no);
      map.grid_ = {static_cast<int>(*r), static_cast<int>(*c), num(toks[3]), num(toks[4])};
      validate_grid(map.grid_);
      map.mask_.assign(map.grid_.corner_count(), Vec2::Zero());
      seen_corner.assign(map.grid_.corner_count(), false);
      seen_cell.assign(static_cast<std::size_t>(map.grid_.rows * map.grid_.cols) * 2, false);
      map.cells_.assign(static_cast<std::size_t>(map.grid_.rows * map.grid_.cols), Homography());
      map.tris_.assign(static_cast<std::size_t>(map.grid_.rows * map.grid_.cols), {Affine2::Zero(), Affine2::Zero()});
      have_grid = true;
      continue;
    }
    if (!have_grid) throw Error(ErrorCode::MalformedLine, "'grid' must come first", line_no);
    if (toks[0] == "mode") {
      if (toks.size() != 2) throw Error(ErrorCode::MalformedLine, "mode <name>", line_no);
      if (toks[1] == "homography") map.mode_ = CellMode::homography;
      else if (toks[1] == "triangle_affine") map.mode_ = CellMode::triangle_affine;
      else throw Error(ErrorCode::MalformedLine, "unknown mode", line_no);
    } else if (toks[0] == "corner") {
      if (toks.size() != 5) throw Error(ErrorCode::MalformedLine, "corner <r> <c> <x> <y>", line_no);
      const auto [r, c] = cell_rc(toks[1], toks[2], map.grid_.rows, map.grid_.cols);
      map.mask_[map.grid_.corner_index(r, c)] = Vec2(num(toks[3]), num(toks[4]));
      seen_corner[map.grid_.corner_index(r, c)] = true;
    } else if (toks[0] == "cell") {
      if (toks.size() != 12) throw Error(ErrorCode::MalformedLine, "cell <r> <c> <9 entries>", line_no);
      const auto [r, c] = cell_rc(toks[1], toks[2], map.grid_.rows - 1, map.grid_.cols - 1);
      Mat3 h;
      for (int i = 0; i < 9; ++i) h(i / 3, i % 3) = num(toks[3 + i]);
      map.cells_[map.index(r, c)] = Homography::from_normalized(h);
      seen_cell[map.index(r, c) * 2] = seen_cell[map.index(r, c) * 2 + 1] = true;
    } else if (toks[0] == "tri") {
      if (toks.size() != 10) throw Error(ErrorCode::MalformedLine, "tri <r> <c> <k> <6 entries>", line_no);
      const auto [r, c] = cell_rc(toks[1], toks[2], map.grid_.rows - 1, map.grid_.cols - 1);
      const auto k = text::parse_int(toks[3]);
      if (!k || (*k != 0 && *k != 1)) throw Error(ErrorCode::MalformedLine, "triangle index must be 0 or 1", line_no);
      Affine2 a;
      for (int i = 0; i < 6; ++i) a(i / 3, i % 3) = num(toks[4 + i]);
      map.tris_[map.index(r, c)][*k] = a;
      seen_cell[map.index(r, c) * 2 + static_cast<std::size_t>(*k)] = true;
    } else {
      throw Error(ErrorCode::MalformedLine, "unknown record '" + std::string(toks[0]) + "'", line_no);
    }
  }
  if (!have_grid) throw Error(ErrorCode::MalformedLine, "missing grid record");
  if (std::find(seen_corner.begin(), seen_corner.end(), false) != seen_corner.end() ||
      std::find(seen_cell.begin(), seen_cell.end(), false) != seen_cell.end()) {
    throw Error(ErrorCode::MalformedLine, "map file is incomplete");
  }
  return map;
}

/// Correspondence CSV rows `row,col,mask_x,mask_y`, one per lattice corner.
/// An optional header row starting with "row" is skipped.
inline std::vector<Vec2> parse_correspondences(std::string_view content, int rows, int cols) {
  validate_grid({rows, cols, 1.0, 1.0});
  const ScreenGrid g{rows, cols, 1.0, 1.0};
  std::vector<std::optional<Vec2>> slots(g.corner_count());
  std::size_t line_no = 0;
  for (auto line : text::lines(content)) {
    ++line_no;
    const auto trimmed = text::trim(line);
    if (trimmed.empty() || trimmed.front() == '#' || trimmed.substr(0, 3) == "row") continue;
    const auto f = text::split(trimmed, ',');
    if (f.size() != 4) throw Error(ErrorCode::MalformedLine, "expected row,col,mask_x,mask_y", line_no);
    const auto r = text::parse_int(f[0]);
    const auto c = text::parse_int(f[1]);
    const auto x = text::parse_double(f[2]);
    const auto y = text::parse_double(f[3]);
    if (!r || !c || !x || !y) throw Error(ErrorCode::MalformedLine, "non-numeric field", line_no);
    if (*r < 0 || *c < 0 || *r > rows || *c > cols) throw Error(ErrorCode::MalformedLine, "corner index outside the lattice", line_no);
    auto& slot = slots[g.corner_index(static_cast<int>(*r), static_cast<int>(*c))];
    if (slot) throw Error(ErrorCode::MalformedLine, "duplicate corner", line_no);
    slot = Vec2(*x, *y);
  }
  std::vector<Vec2> out;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (!slots[i]) {
      throw Error(ErrorCode::MalformedLine, "missing corner (" + std::to_string(i / (cols + 1)) + "," +
                                                std::to_string(i % (cols + 1)) + ")");
    }
    out.push_back(*slots[i]);
  }
  return out;
}

inline std::string serialize_correspondences(const ScreenGrid& grid, std::span<const Vec2> mask) {
  std::string out = "row,col,mask_x,mask_y\n";
  for (int r = 0; r <= grid.rows; ++r) {
    for (int c = 0; c <= grid.cols; ++c) {
      const auto& m = mask[grid.corner_index(r, c)];
      out += std::to_string(r) + "," + std::to_string(c) + "," + text::format_double(m.x()) + "," +
             text::format_double(m.y()) + "\n";
    }
  }
  return out;
}

/// 2D affine placing mold-model points onto the mask image.
struct MoldPlacement {
  Affine2 matrix = Affine2::Identity();

  Vec2 apply(const Vec2& p) const { return apply_affine(matrix, p); }
};

struct AffineFit {
  MoldPlacement placement;
  std::vector<double> residuals;  // per pair, Euclidean
  double rms = 0.0;
  double max = 0.0;
};

/// Least-squares six-parameter affine (QR on the [x y 1] design matrix).
inline AffineFit fit_affine_mold(std::span<const PointPair> pairs) {
  if (pairs.size() < 3) throw Error(ErrorCode::InsufficientPoints, "affine fit needs at least 3 correspondences");
  std::vector<Vec2> src;
  for (const auto& p : pairs) src.push_back(p.src);
  if (pairs.size() == 3) detail::check_configuration(src, 3, "mold");
  else detail::check_configuration(src, 0, "mold");

  const auto n = static_cast<Eigen::Index>(pairs.size());
  Eigen::MatrixXd design(n, 3);
  Eigen::MatrixXd rhs(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    design.row(i) << pairs[i].src.x(), pairs[i].src.y(), 1.0;
    rhs.row(i) = pairs[i].dst.transpose();
  }
  const Eigen::Matrix<double, 3, 2> x = design.colPivHouseholderQr().solve(rhs);
  AffineFit fit;
  fit.placement.matrix = x.transpose();
  if (std::abs(fit.placement.matrix.leftCols<2>().determinant()) < 1e-12) {
    throw Error(ErrorCode::DegenerateConfiguration, "fitted affine is singular");
  }
  double sum = 0.0;
  for (const auto& p : pairs) {
    const double r = (fit.placement.apply(p.src) - p.dst).norm();
    fit.residuals.push_back(r);
    sum += r * r;
    fit.max = std::max(fit.max, r);
  }
  fit.rms = std::sqrt(sum / static_cast<double>(pairs.size()));
  return fit;
}

/// Pair CSV rows `mold_x,mold_y,mask_x,mask_y`.
inline std::vector<PointPair> parse_point_pairs(std::string_view content) {
  std::vector<PointPair> out;
  std::size_t line_no = 0;
  for (auto line : text::lines(content)) {
    ++line_no;
    const auto trimmed = text::trim(line);
    if (trimmed.empty() || trimmed.front() == '#' || std::isalpha(static_cast<unsigned char>(trimmed.front()))) continue;
    const auto f = text::split(trimmed, ',');
    if (f.size() != 4) throw Error(ErrorCode::MalformedLine, "expected 4 numbers", line_no);
    std::array<double, 4> v{};
    for (int i = 0; i < 4; ++i) {
      const auto x = text::parse_double(f[i]);
      if (!x) throw Error(ErrorCode::MalformedLine, "non-numeric field", line_no);
      v[i] = *x;
    }
    out.push_back({{v[0], v[1]}, {v[2], v[3]}});
  }
  return out;
}

namespace detail {

inline std::vector<double> parse_numbers(std::string_view content, std::size_t expected, const char* what) {
  std::vector<double> out;
  std::size_t line_no = 0;
  for (auto line : text::lines(content)) {
    ++line_no;
    const auto trimmed = text::trim(line);
    if (trimmed.empty() || trimmed.front() == '#') continue;
    for (auto tok : text::tokens(trimmed)) {
      const auto v = text::parse_double(tok);
      if (!v) throw Error(ErrorCode::MalformedLine, "non-numeric value '" + std::string(tok) + "'", line_no);
      out.push_back(*v);
    }
  }
  if (out.size() != expected) {
    throw Error(ErrorCode::MalformedLine, std::string(what) + ": expected " + std::to_string(expected) +
                                              " numbers, got " + std::to_string(out.size()));
  }
  return out;
}

}  // namespace detail

/// Six numbers, the 2x3 matrix row-major.
inline MoldPlacement parse_placement(std::string_view content) {
  const auto v = detail::parse_numbers(content, 6, "placement");
  MoldPlacement p;
  for (int i = 0; i < 6; ++i) p.matrix(i / 3, i % 3) = v[i];
  if (std::abs(p.matrix.leftCols<2>().determinant()) < 1e-12) {
    throw Error(ErrorCode::DegenerateConfiguration, "placement is singular");
  }
  return p;
}

inline std::string serialize_placement(const MoldPlacement& p) {
  std::string out;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 3; ++j) out += (j ? " " : "") + text::format_double(p.matrix(i, j));
    out += "\n";
  }
  return out;
}

struct CameraMatrices {
  Mat4 world = Mat4::Identity();
  Mat4 view = Mat4::Identity();
  Mat4 projection = Mat4::Identity();

  /// Row-vector chain: clip = [x y z 1] * world * view * projection.
  Mat4 wvp() const { return world * view * projection; }
};

/// World, view and projection, 16 numbers each, row-major.
inline CameraMatrices parse_camera_matrices(std::string_view content) {
  const auto v = detail::parse_numbers(content, 48, "camera matrices");
  CameraMatrices cams;
  Mat4* mats[3] = {&cams.world, &cams.view, &cams.projection};
  for (int m = 0; m < 3; ++m) {
    for (int i = 0; i < 16; ++i) (*mats[m])(i / 4, i % 4) = v[static_cast<std::size_t>(16 * m + i)];
  }
  return cams;
}

inline std::string serialize_camera_matrices(const CameraMatrices& cams) {
  std::string out;
  const std::pair<const char*, const Mat4*> mats[3] = {
      {"world", &cams.world}, {"view", &cams.view}, {"projection", &cams.projection}};
  for (const auto& [name, m] : mats) {
    out += std::string("# ") + name + "\n";
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) out += (j ? " " : "") + text::format_double((*m)(i, j));
      out += "\n";
    }
  }
  return out;
}

/// Inverse of m, verified by ||m * m^-1 - I||_inf < 1e-9.
inline Mat4 checked_inverse(const Mat4& m) {
  Eigen::FullPivLU<Mat4> lu(m);
  if (!m.allFinite() || !lu.isInvertible()) throw Error(ErrorCode::UninvertibleWVP, "WVP matrix is singular");
  const Mat4 inv = lu.inverse();
  const double err = (m * inv - Mat4::Identity()).cwiseAbs().rowwise().sum().maxCoeff();
  if (!(err < 1e-9)) throw Error(ErrorCode::UninvertibleWVP, "WVP inverse check failed, residual " + text::format_double(err));
  return inv;
}

/// Screen pixels (origin top-left, y down) to normalized device coordinates.
struct Viewport {
  double width = 1.0;
  double height = 1.0;

  Vec2 to_screen(const Vec2& ndc) const { return {(ndc.x() + 1.0) * 0.5 * width, (1.0 - ndc.y()) * 0.5 * height}; }
  Vec2 to_ndc(const Vec2& px) const { return {px.x() / width * 2.0 - 1.0, 1.0 - px.y() / height * 2.0}; }
};

struct ClipPoint {
  Eigen::RowVector4d clip;  // pre-divide, row-vector convention
  Vec2 screen;              // pixels
};

inline ClipPoint project_vertex(const Vec3& v, const Mat4& wvp, const Viewport& vp) {
  const Eigen::RowVector4d clip = Eigen::RowVector4d(v.x(), v.y(), v.z(), 1.0) * wvp;
  if (std::abs(clip(3)) < kDivideEpsilon) throw Error(ErrorCode::ProjectiveDivideByZero, "vertex projects with w = 0");
  return {clip, vp.to_screen(Vec2(clip(0) / clip(3), clip(1) / clip(3)))};
}

/// Screen positions of every vertex of `mesh` under `cams`.
inline std::vector<Vec2> project_mesh(const Mesh& mesh, const CameraMatrices& cams, const Viewport& vp) {
  const Mat4 wvp = cams.wvp();
  std::vector<Vec2> out;
  out.reserve(mesh.vertices.size());
  for (const auto& v : mesh.vertices) out.push_back(project_vertex(v, wvp, vp).screen);
  return out;
}

/// Pre-distorts a mesh: each vertex is projected to the screen, registered
/// by the mold placement, sent through the piecewise map, and lifted back to
/// model space with the inverse WVP, keeping the vertex's own clip-space depth
/// and w. The viewport is the map's screen size.
inline Mesh predistort_model(const Mesh& neutral, const CameraMatrices& cams, const PiecewiseMap& map,
                             const MoldPlacement& placement = {}) {
  const Mat4 wvp = cams.wvp();
  const Mat4 inv = checked_inverse(wvp);
  const Viewport vp{map.grid().width, map.grid().height};
  Mesh out = neutral;
  for (std::size_t i = 0; i < neutral.vertices.size(); ++i) {
    const auto projected = project_vertex(neutral.vertices[i], wvp, vp);
    const Vec2 moved = map.map_point(placement.apply(projected.screen)).point;
    const Vec2 ndc = vp.to_ndc(moved);
    const double w = projected.clip(3);
    const Eigen::RowVector4d clip(ndc.x() * w, ndc.y() * w, projected.clip(2), w);
    const Eigen::RowVector4d model = clip * inv;
    if (std::abs(model(3)) < kDivideEpsilon) throw Error(ErrorCode::ProjectiveDivideByZero, "inverse projection has w = 0");
    out.vertices[i] = Vec3(model(0), model(1), model(2)) / model(3);
  }
  return out;
}

}  // namespace visage
