#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string_view>
#include <vector>

#include "limbreg/raster.hpp"

namespace limbreg {

enum class DirectionMethod { Exhaustive, MinRect };

constexpr std::string_view to_string(DirectionMethod m) {
  return m == DirectionMethod::Exhaustive ? "exhaustive" : "min_rect";
}

struct PrincipalDirection {
  double angle = 0.0;  // degrees in [0, 180)
  DirectionMethod method = DirectionMethod::MinRect;
  double extent = 0.0;  // projection length along the chosen direction, pixels
};

namespace detail {

// Relative slack used when comparing floating scores for ties.
inline bool clearly_greater(double a, double b) { return a > b + 1e-9 * std::max(1.0, std::abs(b)); }

inline double wrap_angle180(double deg) {
  double a = std::fmod(deg, 180.0);
  if (a < 0) a += 180.0;
  if (a >= 180.0 - 1e-9) a = 0.0;
  return a;
}

}  // namespace detail

/// Projection-extent search. For every candidate angle the foreground pixel
/// centers are projected onto the axis through the raster origin, and the
/// axis with the longest projected segment wins (smallest angle on ties).
/// Above 90 degrees the points are first shifted left by (width - 1) so every
/// projection keeps a non-negative coordinate.
inline PrincipalDirection principal_direction_exhaustive(const BinaryMask& mask, double step = 1.0) {
  if (!(step > 0.0 && step <= 5.0)) throw Error(ErrorCode::Parameter, "angular step must lie in (0, 5]");
  std::vector<Point2> pts;
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x)
      if (mask.at(x, y)) pts.push_back({double(x), double(y)});
  if (pts.empty()) throw Error(ErrorCode::EmptyMask, "principal direction of an empty mask");

  PrincipalDirection best{0.0, DirectionMethod::Exhaustive, -1.0};
  const double shift = mask.width() - 1;
  for (int k = 0;; ++k) {
    const double theta = k * step;
    if (theta >= 180.0) break;
    const auto [c, s] = cos_sin_deg(theta);  // theta == 90 projects onto y exactly
    const double dx = theta > 90.0 ? -shift : 0.0;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const Point2& p : pts) {
      const double r = std::abs((p.x + dx) * c + p.y * s);
      lo = std::min(lo, r);
      hi = std::max(hi, r);
    }
    const double extent = hi - lo;
    if (detail::clearly_greater(extent, best.extent)) best = {theta, DirectionMethod::Exhaustive, extent};
  }
  return best;
}

// ---------------------------------------------------------------------------
// Convex hull and minimum-area rectangle

/// Convex hull of integer points, counter-clockwise in (x, y) with y down
/// read as a right-handed frame, collinear points dropped.
inline std::vector<Point2> convex_hull(std::vector<Point2> pts) {
  std::sort(pts.begin(), pts.end(), [](Point2 a, Point2 b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  auto cross = [](Point2 o, Point2 a, Point2 b) { return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x); };
  std::vector<Point2> hull(2 * pts.size());
  std::size_t k = 0;
  for (const Point2& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

/// Hull of the foreground pixel centers. Only the leftmost and rightmost pixel
/// of each row can be hull vertices.
inline std::vector<Point2> mask_hull(const BinaryMask& mask) {
  std::vector<Point2> pts;
  for (int y = 0; y < mask.height(); ++y) {
    int first = -1, last = -1;
    for (int x = 0; x < mask.width(); ++x)
      if (mask.at(x, y)) {
        if (first < 0) first = x;
        last = x;
      }
    if (first >= 0) {
      pts.push_back({double(first), double(y)});
      if (last != first) pts.push_back({double(last), double(y)});
    }
  }
  return convex_hull(std::move(pts));
}

struct OrientedRect {
  double angle = 0.0;  // direction of the longer side, [0, 180)
  double long_side = 0.0;
  double short_side = 0.0;
  double area() const { return long_side * short_side; }
};

namespace detail {

/// Rectangle flush with a hull edge of direction u; the longer side decides
/// the angle, equal sides take the smaller of the two angles.
inline OrientedRect make_rect(Point2 u, double along, double across) {
  const double a_u = wrap_angle180(std::atan2(u.y, u.x) * 180.0 / std::numbers::pi);
  const double a_n = wrap_angle180(a_u + 90.0);
  OrientedRect r;
  r.long_side = std::max(along, across);
  r.short_side = std::min(along, across);
  if (std::abs(along - across) <= 1e-9 * std::max(1.0, r.long_side))
    r.angle = std::min(a_u, a_n);
  else
    r.angle = along > across ? a_u : a_n;
  return r;
}

inline bool better_rect(const OrientedRect& a, const OrientedRect& b) {
  const double tol = 1e-9 * std::max(1.0, b.area());
  if (a.area() < b.area() - tol) return true;
  if (a.area() > b.area() + tol) return false;
  return a.angle < b.angle;
}

}  // namespace detail

/// Minimum-area enclosing rectangle of a convex polygon (counter-clockwise,
/// at least 3 vertices) by rotating calipers. One side of the optimum is
/// flush with a hull edge; the three support points advance monotonically
/// as the edge index increases.
inline OrientedRect min_area_rect(const std::vector<Point2>& hull) {
  const std::size_t n = hull.size();
  if (n < 3) throw Error(ErrorCode::DegenerateGeometry, "minimum rectangle needs 3 non-collinear points");
  auto at = [&](std::size_t i) { return hull[i % n]; };
  auto dot = [](Point2 a, Point2 b) { return a.x * b.x + a.y * b.y; };
  auto sub = [](Point2 a, Point2 b) { return Point2{a.x - b.x, a.y - b.y}; };

  // Unwrapped indices of the supports: max along u, max height, min along u.
  std::size_t far_u = 1, far_n = 1, near_u = 1;
  OrientedRect best{};
  bool have = false;
  for (std::size_t i = 0; i < n; ++i) {
    const Point2 e = sub(at(i + 1), at(i));
    const double len = std::hypot(e.x, e.y);
    const Point2 u{e.x / len, e.y / len};
    const Point2 nrm{-u.y, u.x};
    far_u = std::max(far_u, i + 1);
    while (far_u < i + n && dot(sub(at(far_u + 1), at(far_u)), u) > 0) ++far_u;
    far_n = std::max(far_n, far_u);
    while (far_n < i + n && dot(sub(at(far_n + 1), at(far_n)), nrm) > 0) ++far_n;
    near_u = std::max(near_u, far_n);
    while (near_u < i + n && dot(sub(at(near_u + 1), at(near_u)), u) < 0) ++near_u;

    const Point2 base = at(i);
    const double along = dot(sub(at(far_u), base), u) - dot(sub(at(near_u), base), u);
    const double across = std::abs(dot(sub(at(far_n), base), nrm));
    const OrientedRect r = detail::make_rect(u, along, across);
    if (!have || detail::better_rect(r, best)) {
      best = r;
      have = true;
    }
  }
  return best;
}

/// Angle of the longer side of the minimum-area rectangle around the mask.
inline PrincipalDirection min_rect_direction(const BinaryMask& mask) {
  const auto hull = mask_hull(mask);
  if (hull.size() < 3) throw Error(ErrorCode::DegenerateGeometry, "mask has fewer than 3 non-collinear pixels");
  const OrientedRect r = min_area_rect(hull);
  return {r.angle, DirectionMethod::MinRect, r.long_side};
}

inline PrincipalDirection principal_direction(const BinaryMask& mask, DirectionMethod method, double step = 1.0) {
  return method == DirectionMethod::Exhaustive ? principal_direction_exhaustive(mask, step) : min_rect_direction(mask);
}

/// Rotates the mask so the principal direction lies along +x.
inline BinaryMask normalize_horizontal(const BinaryMask& mask, const PrincipalDirection& dir) {
  return rotate_image(mask, dir.angle);
}

}  // namespace limbreg
