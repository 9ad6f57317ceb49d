#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <variant>
#include <vector>

#include "limbreg/ffrc.hpp"
#include "limbreg/raster.hpp"

namespace limbreg {

/// Index-wise correspondences: fixed[i] <-> moving[i].
struct MatchedPairs {
  std::vector<Point2> fixed;
  std::vector<Point2> moving;

  std::size_t count() const noexcept { return fixed.size(); }
};

/// Structural keypoints are already ordered identically on both images, so
/// matching is pairing by index.
inline MatchedPairs match_structural(const KeypointSet& fixed_kp, const KeypointSet& moving_kp) {
  if (fixed_kp.points.size() != moving_kp.points.size())
    throw Error(ErrorCode::Matching, "keypoint counts differ (" + std::to_string(fixed_kp.points.size()) + " vs " +
                                         std::to_string(moving_kp.points.size()) + ")");
  return {fixed_kp.points, moving_kp.points};
}

/// 2x3 map (x, y, 1) -> (x', y'), row-major.
struct AffineTransform {
  std::array<double, 6> m{1, 0, 0, 0, 1, 0};

  static AffineTransform identity() { return {}; }

  Point2 apply(Point2 p) const { return {m[0] * p.x + m[1] * p.y + m[2], m[3] * p.x + m[4] * p.y + m[5]}; }
  double determinant() const { return m[0] * m[4] - m[1] * m[3]; }

  bool is_valid() const {
    return std::all_of(m.begin(), m.end(), [](double v) { return std::isfinite(v); }) &&
           std::abs(determinant()) > 1e-8;
  }

  AffineTransform inverse() const {
    if (!is_valid()) throw Error(ErrorCode::SingularTransform, "affine transform is not invertible");
    const double d = determinant();
    const double a = m[4] / d, b = -m[1] / d, c = -m[3] / d, e = m[0] / d;
    return {{a, b, -(a * m[2] + b * m[5]), c, e, -(c * m[2] + e * m[5])}};
  }

  /// (this o other)(p) = this(other(p))
  AffineTransform compose(const AffineTransform& o) const {
    return {{m[0] * o.m[0] + m[1] * o.m[3], m[0] * o.m[1] + m[1] * o.m[4], m[0] * o.m[2] + m[1] * o.m[5] + m[2],
             m[3] * o.m[0] + m[4] * o.m[3], m[3] * o.m[1] + m[4] * o.m[4], m[3] * o.m[2] + m[4] * o.m[5] + m[5]}};
  }
};

namespace detail {

/// Centroid and RMS radius, used to condition the linear systems.
struct Normalizer {
  Point2 center;
  double scale = 1.0;

  static Normalizer of(std::span<const Point2> pts) {
    Normalizer n;
    for (const Point2& p : pts) {
      n.center.x += p.x;
      n.center.y += p.y;
    }
    n.center.x /= static_cast<double>(pts.size());
    n.center.y /= static_cast<double>(pts.size());
    double ss = 0.0;
    for (const Point2& p : pts) ss += (p.x - n.center.x) * (p.x - n.center.x) + (p.y - n.center.y) * (p.y - n.center.y);
    n.scale = std::sqrt(ss / static_cast<double>(pts.size()));
    if (!(n.scale > 0)) n.scale = 1.0;
    return n;
  }

  Point2 operator()(Point2 p) const { return {(p.x - center.x) / scale, (p.y - center.y) / scale}; }

  /// Re-express a map written in normalized input coordinates in pixels.
  AffineTransform denormalize_input(const std::array<double, 6>& a) const {
    const double ax = a[0] / scale, ay = a[1] / scale, bx = a[3] / scale, by = a[4] / scale;
    return {{ax, ay, a[2] - ax * center.x - ay * center.y, bx, by, a[5] - bx * center.x - by * center.y}};
  }
};

/// True when the points span less than a line (relative to their spread).
inline bool collinear(std::span<const Point2> pts) {
  if (pts.size() < 3) return true;
  const Normalizer n = Normalizer::of(pts);
  double sxx = 0, sxy = 0, syy = 0;
  for (const Point2& p : pts) {
    const Point2 q = n(p);
    sxx += q.x * q.x;
    sxy += q.x * q.y;
    syy += q.y * q.y;
  }
  const double tr = sxx + syy;
  const double det = sxx * syy - sxy * sxy;
  // smallest eigenvalue of the scatter matrix relative to the largest
  const double disc = std::sqrt(std::max(0.0, tr * tr / 4 - det));
  const double lmax = tr / 2 + disc, lmin = tr / 2 - disc;
  return !(lmax > 0) || lmin <= 1e-12 * lmax;
}

/// Least-squares affine taking `from` onto `to`. With `invertible` the
/// result must also be non-degenerate.
inline AffineTransform fit_affine_lsq(std::span<const Point2> to, std::span<const Point2> from, bool invertible = true) {
  if (from.size() < 3) throw Error(ErrorCode::DegenerateConfiguration, "affine estimation needs at least 3 pairs");
  if (collinear(from) || (invertible && collinear(to)))
    throw Error(ErrorCode::DegenerateConfiguration, "point configuration is collinear");
  const Normalizer n = Normalizer::of(from);
  const Eigen::Index rows = static_cast<Eigen::Index>(from.size());
  Eigen::MatrixXd a(rows, 3);
  Eigen::MatrixXd b(rows, 2);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const Point2 q = n(from[static_cast<std::size_t>(i)]);
    a.row(i) << q.x, q.y, 1.0;
    b.row(i) << to[static_cast<std::size_t>(i)].x, to[static_cast<std::size_t>(i)].y;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  qr.setThreshold(1e-10);
  if (qr.rank() < 3) throw Error(ErrorCode::DegenerateConfiguration, "point configuration is rank deficient");
  const Eigen::MatrixXd x = qr.solve(b);  // 3x2
  const AffineTransform t = n.denormalize_input({x(0, 0), x(1, 0), x(2, 0), x(0, 1), x(1, 1), x(2, 1)});
  if (invertible && !t.is_valid()) throw Error(ErrorCode::DegenerateConfiguration, "estimated affine is degenerate");
  return t;
}

}  // namespace detail

struct RansacOptions {
  double threshold = 4.0;  // pixels
  int iterations = 1000;
  std::uint32_t seed = 20230725u;
};

struct AffineEstimate {
  AffineTransform transform;
  std::vector<bool> inliers;  // all true without RANSAC
};

/// Affine H minimizing sum |H(moving_i) - fixed_i|^2. With RANSAC, minimal
/// 3-pair models are scored by inlier count (residual <= threshold) and the
/// best consensus set is refit by least squares. The generator is seeded, so
/// results are reproducible.
inline AffineEstimate estimate_affine_robust(const MatchedPairs& pairs, const std::optional<RansacOptions>& ransac = {}) {
  if (pairs.fixed.size() != pairs.moving.size()) throw Error(ErrorCode::Matching, "pair lists differ in length");
  const std::size_t n = pairs.count();
  if (n < 3) throw Error(ErrorCode::DegenerateConfiguration, "affine estimation needs at least 3 pairs");
  if (!ransac) return {detail::fit_affine_lsq(pairs.fixed, pairs.moving), std::vector<bool>(n, true)};
  if (!(ransac->threshold > 0) || ransac->iterations < 1)
    throw Error(ErrorCode::Parameter, "RANSAC threshold and iteration count must be positive");

  auto consensus = [&](const AffineTransform& h) {
    std::vector<bool> in(n);
    for (std::size_t i = 0; i < n; ++i) in[i] = distance(h.apply(pairs.moving[i]), pairs.fixed[i]) <= ransac->threshold;
    return in;
  };

  std::mt19937 rng(ransac->seed);
  std::vector<bool> best_in;
  std::size_t best_count = 0;
  for (int it = 0; it < ransac->iterations && best_count < n; ++it) {
    std::array<std::size_t, 3> idx{};
    idx[0] = rng() % n;
    do idx[1] = rng() % n; while (idx[1] == idx[0]);
    do idx[2] = rng() % n; while (idx[2] == idx[0] || idx[2] == idx[1]);
    std::array<Point2, 3> f{}, m{};
    for (int k = 0; k < 3; ++k) {
      f[k] = pairs.fixed[idx[k]];
      m[k] = pairs.moving[idx[k]];
    }
    AffineTransform h;
    try {
      h = detail::fit_affine_lsq(f, m);
    } catch (const Error&) {
      continue;  // collinear sample
    }
    auto in = consensus(h);
    const auto cnt = static_cast<std::size_t>(std::count(in.begin(), in.end(), true));
    if (cnt > best_count) {
      best_count = cnt;
      best_in = std::move(in);
    }
  }
  if (best_count < 3) throw Error(ErrorCode::DegenerateConfiguration, "RANSAC found no consensus of 3 or more pairs");

  std::vector<Point2> f, m;
  for (std::size_t i = 0; i < n; ++i)
    if (best_in[i]) {
      f.push_back(pairs.fixed[i]);
      m.push_back(pairs.moving[i]);
    }
  return {detail::fit_affine_lsq(f, m), std::move(best_in)};
}

inline AffineTransform estimate_affine(const MatchedPairs& pairs, const std::optional<RansacOptions>& ransac = {}) {
  return estimate_affine_robust(pairs, ransac).transform;
}

// ---------------------------------------------------------------------------
// Thin-plate spline

/// U(r) = r^2 ln r, U(0) = 0.
inline double tps_kernel(double r) { return r > 0 ? r * r * std::log(r) : 0.0; }

/// f(p) = A p + sum_j w_j U(|n(p) - n(c_j)|), where n() maps pixels to the
/// controls' normalized frame (centroid at 0, unit RMS radius). The kernel
/// and lambda live in that frame, which makes lambda independent of image
/// scale; the affine part is stored in pixels.
struct TpsWarp {
  std::vector<Point2> control_points;
  AffineTransform affine_part;
  std::vector<Point2> weights;  // (w_x, w_y) per control point
  double regularization_lambda = 0.0;
  Point2 norm_center;
  double norm_scale = 1.0;

  Point2 normalize(Point2 p) const { return {(p.x - norm_center.x) / norm_scale, (p.y - norm_center.y) / norm_scale}; }

  Point2 apply(Point2 p) const {
    Point2 out = affine_part.apply(p);
    const Point2 q = normalize(p);
    for (std::size_t j = 0; j < control_points.size(); ++j) {
      const double u = tps_kernel(distance(q, normalize(control_points[j])));
      out.x += weights[j].x * u;
      out.y += weights[j].y * u;
    }
    return out;
  }

  /// w^T K w summed over both output coordinates.
  double bending_energy() const {
    double e = 0.0;
    for (std::size_t i = 0; i < control_points.size(); ++i)
      for (std::size_t j = 0; j < control_points.size(); ++j) {
        const double k = tps_kernel(distance(normalize(control_points[i]), normalize(control_points[j])));
        e += k * (weights[i].x * weights[j].x + weights[i].y * weights[j].y);
      }
    return e;
  }
};

/// Fits the spline taking FIXED coordinates to MOVING coordinates, so warping
/// the moving image onto the fixed grid needs no inversion. Solves
/// [[K + lambda I, P], [P^T, 0]] [w; a] = [v; 0] for both coordinates. The
/// least-squares affine is removed from the targets first, so purely affine
/// data yields weights at round-off level.
inline TpsWarp tps_fit(const MatchedPairs& pairs, double lambda = 0.0) {
  if (pairs.fixed.size() != pairs.moving.size()) throw Error(ErrorCode::Matching, "pair lists differ in length");
  if (!(lambda >= 0) || !std::isfinite(lambda)) throw Error(ErrorCode::Parameter, "TPS lambda must be >= 0");
  const std::size_t n = pairs.count();
  if (n < 3) throw Error(ErrorCode::DegenerateConfiguration, "TPS needs at least 3 control points");
  const auto& ctrl = pairs.fixed;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (distance(ctrl[i], ctrl[j]) <= 1e-9)
        throw Error(ErrorCode::DuplicatePoint, "duplicate TPS control points at index " + std::to_string(i) + " and " +
                                                   std::to_string(j));
  if (detail::collinear(ctrl)) throw Error(ErrorCode::SingularSystem, "TPS control points are collinear");

  const AffineTransform base = detail::fit_affine_lsq(pairs.moving, ctrl, false);
  const detail::Normalizer norm = detail::Normalizer::of(ctrl);

  const auto sz = static_cast<Eigen::Index>(n + 3);
  const auto en = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd sys = Eigen::MatrixXd::Zero(sz, sz);
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(sz, 2);
  for (Eigen::Index i = 0; i < en; ++i) {
    const Point2 ci = norm(ctrl[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = 0; j < en; ++j)
      sys(i, j) = tps_kernel(distance(ci, norm(ctrl[static_cast<std::size_t>(j)])));
    sys(i, i) += lambda;
    sys(i, en) = sys(en, i) = 1.0;
    sys(i, en + 1) = sys(en + 1, i) = ci.x;
    sys(i, en + 2) = sys(en + 2, i) = ci.y;
    const Point2 fit = base.apply(ctrl[static_cast<std::size_t>(i)]);
    rhs(i, 0) = pairs.moving[static_cast<std::size_t>(i)].x - fit.x;
    rhs(i, 1) = pairs.moving[static_cast<std::size_t>(i)].y - fit.y;
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(sys);
  if (!lu.isInvertible()) throw Error(ErrorCode::SingularSystem, "TPS system is singular");
  const Eigen::MatrixXd sol = lu.solve(rhs);

  TpsWarp warp;
  warp.control_points = ctrl;
  warp.regularization_lambda = lambda;
  warp.norm_center = norm.center;
  warp.norm_scale = norm.scale;
  warp.weights.resize(n);
  for (Eigen::Index i = 0; i < en; ++i) warp.weights[static_cast<std::size_t>(i)] = {sol(i, 0), sol(i, 1)};
  const AffineTransform residual_affine = norm.denormalize_input(
      {sol(en + 1, 0), sol(en + 2, 0), sol(en, 0), sol(en + 1, 1), sol(en + 2, 1), sol(en, 1)});
  for (int k = 0; k < 6; ++k) warp.affine_part.m[static_cast<std::size_t>(k)] = base.m[static_cast<std::size_t>(k)] +
                                                                                 residual_affine.m[static_cast<std::size_t>(k)];
  return warp;
}

// ---------------------------------------------------------------------------
// Warping and overlay

/// FAM produces an affine (moving -> fixed); FAM-TPS a spline (fixed -> moving).
using Transform = std::variant<AffineTransform, TpsWarp>;

/// Backward warp of a moving raster onto a fixed grid of the given size.
/// Affine transforms are inverted once; splines are evaluated directly.
template <class Raster>
Raster warp_image(const Raster& moving, const AffineTransform& moving_to_fixed, int out_width, int out_height) {
  const AffineTransform inv = moving_to_fixed.inverse();
  return resample(moving, out_width, out_height, [&](int x, int y) { return inv.apply({double(x), double(y)}); });
}

template <class Raster>
Raster warp_image(const Raster& moving, const TpsWarp& fixed_to_moving, int out_width, int out_height) {
  return resample(moving, out_width, out_height,
                  [&](int x, int y) { return fixed_to_moving.apply({double(x), double(y)}); });
}

template <class Raster>
Raster warp_image(const Raster& moving, const Transform& t, int out_width, int out_height) {
  return std::visit([&](const auto& tr) { return warp_image(moving, tr, out_width, out_height); }, t);
}

/// Per-pixel w_fixed * fixed + w_moving * moving, rounded and clamped.
inline Image blend_overlay(const Image& fixed, const Image& warped_moving, double w_fixed = 0.4, double w_moving = 0.6) {
  if (fixed.width() != warped_moving.width() || fixed.height() != warped_moving.height())
    throw Error(ErrorCode::Size, "overlay inputs differ in size");
  if (fixed.channels() != warped_moving.channels()) throw Error(ErrorCode::ChannelMismatch, "overlay inputs differ in channels");
  Image out(fixed.width(), fixed.height(), fixed.channels());
  auto f = fixed.data();
  auto m = warped_moving.data();
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = clamp_round_u8(w_fixed * f[i] + w_moving * m[i]);
  return out;
}

}  // namespace limbreg
