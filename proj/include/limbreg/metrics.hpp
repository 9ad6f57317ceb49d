#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "limbreg/raster.hpp"
#include "limbreg/registration.hpp"

namespace limbreg {

namespace detail {

struct Overlap {
  std::size_t a = 0, b = 0, both = 0;
};

inline Overlap overlap(const BinaryMask& a, const BinaryMask& b) {
  if (a.width() != b.width() || a.height() != b.height()) throw Error(ErrorCode::Size, "masks differ in size");
  Overlap o;
  auto da = a.data();
  auto db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) {
    o.a += da[i];
    o.b += db[i];
    o.both += da[i] & db[i];
  }
  if (o.a == 0 && o.b == 0) throw Error(ErrorCode::UndefinedMetric, "overlap of two empty masks is undefined");
  return o;
}

}  // namespace detail

/// 2|A n B| / (|A| + |B|)
inline double dice(const BinaryMask& a, const BinaryMask& b) {
  const auto o = detail::overlap(a, b);
  return 2.0 * static_cast<double>(o.both) / static_cast<double>(o.a + o.b);
}

/// |A n B| / |A u B|
inline double jaccard(const BinaryMask& a, const BinaryMask& b) {
  const auto o = detail::overlap(a, b);
  return static_cast<double>(o.both) / static_cast<double>(o.a + o.b - o.both);
}

/// Foreground pixels with at least one background 4-neighbour; the canvas
/// border counts as background. Raster order.
inline std::vector<Point2> boundary_points(const BinaryMask& mask) {
  std::vector<Point2> out;
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x)
      if (mask.at(x, y) && (!mask.at_or_false(x - 1, y) || !mask.at_or_false(x + 1, y) ||
                            !mask.at_or_false(x, y - 1) || !mask.at_or_false(x, y + 1)))
        out.push_back({double(x), double(y)});
  if (out.empty()) throw Error(ErrorCode::EmptyMask, "boundary of an empty mask");
  return out;
}

/// Exact nearest-neighbour distances over a fixed point set, bucketed on a
/// uniform grid and searched ring by ring.
class NearestNeighborIndex {
 public:
  explicit NearestNeighborIndex(std::span<const Point2> pts) : pts_(pts.begin(), pts.end()) {
    if (pts_.empty()) throw Error(ErrorCode::EmptySet, "nearest-neighbour index over an empty set");
    double x0 = pts_[0].x, x1 = x0, y0 = pts_[0].y, y1 = y0;
    for (const Point2& p : pts_) {
      x0 = std::min(x0, p.x);
      x1 = std::max(x1, p.x);
      y0 = std::min(y0, p.y);
      y1 = std::max(y1, p.y);
    }
    origin_ = {x0, y0};
    const double area = std::max(1.0, (x1 - x0 + 1) * (y1 - y0 + 1));
    cell_ = std::max(1.0, std::sqrt(area / static_cast<double>(pts_.size())));
    cols_ = static_cast<int>((x1 - x0) / cell_) + 1;
    rows_ = static_cast<int>((y1 - y0) / cell_) + 1;

    std::vector<int> counts(static_cast<std::size_t>(cols_) * rows_ + 1, 0);
    for (const Point2& p : pts_) ++counts[cell_of(p) + 1];
    for (std::size_t i = 1; i < counts.size(); ++i) counts[i] += counts[i - 1];
    start_ = counts;
    order_.resize(pts_.size());
    for (std::size_t i = 0; i < pts_.size(); ++i) order_[static_cast<std::size_t>(counts[cell_of(pts_[i])]++)] = static_cast<int>(i);
  }

  double nearest_distance(Point2 q) const {
    const int cx = std::clamp(static_cast<int>(std::floor((q.x - origin_.x) / cell_)), 0, cols_ - 1);
    const int cy = std::clamp(static_cast<int>(std::floor((q.y - origin_.y) / cell_)), 0, rows_ - 1);
    double best2 = std::numeric_limits<double>::infinity();
    const int max_ring = std::max({cx, cols_ - 1 - cx, cy, rows_ - 1 - cy});
    for (int r = 0; r <= max_ring; ++r) {
      for (int y = cy - r; y <= cy + r; ++y) {
        if (y < 0 || y >= rows_) continue;
        const bool edge_row = (y == cy - r || y == cy + r);
        for (int x = cx - r; x <= cx + r; x += edge_row ? 1 : 2 * r) {
          if (x >= 0 && x < cols_) scan_cell(x, y, q, best2);
          if (r == 0) break;
        }
      }
      // Cells outside ring r are at least r cells away along some axis.
      const double bound = r * cell_;
      if (best2 <= bound * bound) break;
    }
    return std::sqrt(best2);
  }

 private:
  std::size_t cell_of(Point2 p) const {
    const int cx = std::clamp(static_cast<int>((p.x - origin_.x) / cell_), 0, cols_ - 1);
    const int cy = std::clamp(static_cast<int>((p.y - origin_.y) / cell_), 0, rows_ - 1);
    return static_cast<std::size_t>(cy) * cols_ + cx;
  }

  void scan_cell(int x, int y, Point2 q, double& best2) const {
    const std::size_t c = static_cast<std::size_t>(y) * cols_ + x;
    for (int k = start_[c]; k < start_[c + 1]; ++k) {
      const Point2& p = pts_[static_cast<std::size_t>(order_[static_cast<std::size_t>(k)])];
      const double dx = p.x - q.x, dy = p.y - q.y;
      best2 = std::min(best2, dx * dx + dy * dy);
    }
  }

  std::vector<Point2> pts_;
  Point2 origin_;
  double cell_ = 1.0;
  int cols_ = 1, rows_ = 1;
  std::vector<int> start_;
  std::vector<int> order_;
};

namespace detail {

inline std::vector<double> nearest_distances(std::span<const Point2> from, std::span<const Point2> to) {
  if (from.empty() || to.empty()) throw Error(ErrorCode::EmptySet, "surface distance with an empty point set");
  const NearestNeighborIndex index(to);
  std::vector<double> d;
  d.reserve(from.size());
  for (const Point2& p : from) d.push_back(index.nearest_distance(p));
  return d;
}

inline double sum(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

}  // namespace detail

/// Symmetric Hausdorff distance, Euclidean, exact.
inline double hausdorff(std::span<const Point2> a, std::span<const Point2> b) {
  const auto ab = detail::nearest_distances(a, b);
  const auto ba = detail::nearest_distances(b, a);
  return std::max(*std::max_element(ab.begin(), ab.end()), *std::max_element(ba.begin(), ba.end()));
}

/// Mean distance from each point of A (registered surface) to B (fixed
/// surface). Not symmetric.
inline double asd(std::span<const Point2> a, std::span<const Point2> b) {
  const auto ab = detail::nearest_distances(a, b);
  return detail::sum(ab) / static_cast<double>(ab.size());
}

inline double assd(std::span<const Point2> a, std::span<const Point2> b) {
  const auto ab = detail::nearest_distances(a, b);
  const auto ba = detail::nearest_distances(b, a);
  return (detail::sum(ab) + detail::sum(ba)) / static_cast<double>(ab.size() + ba.size());
}

struct KeypointError {
  std::vector<double> distances;
  double mean = 0.0;
};

/// Projects moving keypoints through the transform and measures the distance
/// to their paired ground-truth positions.
inline KeypointError keypoint_ed(const AffineTransform& transform, std::span<const Point2> moving,
                                 std::span<const Point2> fixed_truth) {
  if (moving.size() != fixed_truth.size()) throw Error(ErrorCode::Matching, "keypoint counts differ");
  if (moving.empty()) throw Error(ErrorCode::Matching, "no keypoints to compare");
  KeypointError e;
  for (std::size_t i = 0; i < moving.size(); ++i) e.distances.push_back(distance(transform.apply(moving[i]), fixed_truth[i]));
  e.mean = detail::sum(e.distances) / static_cast<double>(e.distances.size());
  return e;
}

struct RegistrationReport {
  double dice = 0.0;
  double jaccard = 0.0;
  double hausdorff = 0.0;
  double asd = 0.0;   // registered -> fixed
  double assd = 0.0;
  std::optional<KeypointError> keypoints;
};

/// Overlap and surface metrics of a registered mask against the fixed mask.
inline RegistrationReport evaluate_registration(const BinaryMask& registered, const BinaryMask& fixed) {
  RegistrationReport r;
  r.dice = dice(registered, fixed);
  r.jaccard = jaccard(registered, fixed);
  const auto a = boundary_points(registered);
  const auto b = boundary_points(fixed);
  r.hausdorff = hausdorff(a, b);
  r.asd = asd(a, b);
  r.assd = assd(a, b);
  return r;
}

}  // namespace limbreg
