#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "limbreg/raster.hpp"

namespace limbreg {

enum class CurveKind { Raw, Filtered };

/// Forearm feature representation curve: one value per mask column.
struct FeatureCurve {
  std::vector<double> values;
  CurveKind kind = CurveKind::Raw;

  std::size_t size() const noexcept { return values.size(); }
};

struct KalmanParams {
  double process_noise_q = 0.01;
  double measurement_noise_r = 4.0;
  double initial_variance_p0 = 1.0;

  void validate() const {
    if (!(process_noise_q > 0) || !(measurement_noise_r > 0) || !(initial_variance_p0 > 0))
      throw Error(ErrorCode::Parameter, "Kalman noise parameters must be strictly positive");
  }
};

/// Foreground count per column of a horizontally normalized mask.
inline FeatureCurve compute_ffrc(const BinaryMask& mask) {
  FeatureCurve c;
  c.values.assign(static_cast<std::size_t>(mask.width()), 0.0);
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x)
      if (mask.at(x, y)) c.values[static_cast<std::size_t>(x)] += 1.0;
  return c;
}

struct KalmanState {
  double value = 0.0;
  double slope = 0.0;
};

/// Forward constant-velocity Kalman filter with the column index as time.
/// State (value, slope), transition [[1,1],[0,1]], process noise q*I, only
/// the value is observed. Starts at (z[0], 0) with covariance p0*I.
inline std::vector<KalmanState> kalman_track(std::span<const double> z, const KalmanParams& params) {
  params.validate();
  if (z.size() < 2) throw Error(ErrorCode::Parameter, "Kalman smoothing needs at least 2 samples");
  const double q = params.process_noise_q;
  const double r = params.measurement_noise_r;

  std::vector<KalmanState> out(z.size());
  double v = z[0], s = 0.0;
  double p00 = params.initial_variance_p0, p01 = 0.0, p11 = params.initial_variance_p0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (i > 0) {
      v += s;
      const double a = p00 + 2 * p01 + p11 + q;
      const double b = p01 + p11;
      const double d = p11 + q;
      p00 = a;
      p01 = b;
      p11 = d;
    }
    const double innov_var = p00 + r;
    const double k0 = p00 / innov_var;
    const double k1 = p01 / innov_var;
    const double innov = z[i] - v;
    v += k0 * innov;
    s += k1 * innov;
    const double np11 = p11 - k1 * p01;
    p00 *= 1 - k0;
    p01 *= 1 - k0;
    p11 = np11;
    out[i] = {v, s};
  }
  return out;
}

/// Filtered value component of kalman_track, limited to
/// [max(0, min - 3*sqrt(r)), max + 3*sqrt(r)] of the raw curve.
inline FeatureCurve kalman_smooth(const FeatureCurve& raw, const KalmanParams& params = {}) {
  const auto states = kalman_track(raw.values, params);
  const auto [lo_it, hi_it] = std::minmax_element(raw.values.begin(), raw.values.end());
  const double band = 3.0 * std::sqrt(params.measurement_noise_r);
  const double lo = std::max(0.0, *lo_it - band);
  const double hi = *hi_it + band;
  FeatureCurve out;
  out.kind = CurveKind::Filtered;
  out.values.reserve(states.size());
  for (const auto& st : states) out.values.push_back(std::clamp(st.value, lo, hi));
  return out;
}

// ---------------------------------------------------------------------------
// Wrist valley

/// Window length for valley scoring: round(width / 16) made even, in [8, 64].
inline int default_wrist_window(int width) {
  int l = static_cast<int>(std::lround(width / 16.0));
  if (l % 2 != 0) --l;
  return std::clamp(l, 8, 64);
}

struct ValleyCandidate {
  int x = 0;  // leftmost column of the minimum (plateaus included)
  double value = 0.0;
  double prominence = 0.0;
};

inline constexpr double kMinValleyProminence = 2.0;

/// Strict local minima over positive columns: a run of equal values whose
/// neighbours on both sides are strictly higher. Prominence is the height of
/// the lower of the two bounding ridges above the valley, each ridge found by
/// walking outward until a lower value or the curve end.
inline std::vector<ValleyCandidate> valley_candidates(std::span<const double> c,
                                                      double min_prominence = kMinValleyProminence) {
  std::vector<ValleyCandidate> out;
  const std::size_t n = c.size();
  std::size_t i = 1;
  while (i + 1 < n) {
    std::size_t j = i;
    while (j + 1 < n && c[j + 1] == c[i]) ++j;
    const double v = c[i];
    if (v > 0 && j + 1 < n && c[i - 1] > v && c[j + 1] > v) {
      double left = v;
      for (std::size_t k = i; k-- > 0 && c[k] >= v;) left = std::max(left, c[k]);
      double right = v;
      for (std::size_t k = j + 1; k < n && c[k] >= v; ++k) right = std::max(right, c[k]);
      const double prom = std::min(left, right) - v;
      if (prom >= min_prominence) out.push_back({static_cast<int>(i), v, prom});
    }
    i = j + 1;
  }
  return out;
}

/// Number of window samples strictly above the valley value. The window is
/// C(t - L/2 + i), i = 1..L, with indices clamped to the curve.
inline int wrist_score(std::span<const double> c, int t, int window) {
  const int n = static_cast<int>(c.size());
  int score = 0;
  for (int i = 1; i <= window; ++i) {
    const int idx = std::clamp(t - window / 2 + i, 0, n - 1);
    score += c[static_cast<std::size_t>(idx)] - c[static_cast<std::size_t>(t)] > 0 ? 1 : 0;
  }
  return score;
}

/// Valley candidate with the best window score; ties go to the deeper valley,
/// then the smaller column.
inline int detect_wrist(const FeatureCurve& curve, int window) {
  if (window < 4 || window % 2 != 0) throw Error(ErrorCode::Parameter, "wrist window L must be even and >= 4");
  const auto cands = valley_candidates(curve.values);
  if (cands.empty()) throw Error(ErrorCode::NoValley, "feature curve has no valley candidate");
  int best = -1, best_score = -1;
  double best_value = 0.0;
  for (const auto& cand : cands) {
    const int s = wrist_score(curve.values, cand.x, window);
    if (s > best_score || (s == best_score && cand.value < best_value)) {
      best = cand.x;
      best_score = s;
      best_value = cand.value;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Keypoints

/// Occupied column farthest from the wrist. Equal distances on both sides
/// resolve to the side with more foreground (the hand side carries less),
/// then to the smaller column.
inline int distal_point(const BinaryMask& mask, int wrist_x) {
  int first = -1, last = -1;
  std::size_t left_mass = 0, right_mass = 0;
  for (int x = 0; x < mask.width(); ++x) {
    std::size_t col = 0;
    for (int y = 0; y < mask.height(); ++y) col += mask.at(x, y);
    if (col == 0) continue;
    if (first < 0) first = x;
    last = x;
    if (x < wrist_x) left_mass += col;
    if (x > wrist_x) right_mass += col;
  }
  if (first < 0) throw Error(ErrorCode::EmptyMask, "distal point of an empty mask");
  const int dl = std::abs(wrist_x - first);
  const int dr = std::abs(last - wrist_x);
  if (dl != dr) return dl > dr ? first : last;
  return right_mass > left_mass ? last : first;
}

struct KeypointSet {
  std::vector<Point2> points;  // (upper, lower) per sampled column, distal first
  int wrist_x = 0;
  int distal_x = 0;
};

inline constexpr int kDefaultKeypointColumns = 10;

/// Columns spaced uniformly from distal to wrist (inclusive); at each, the
/// first and last foreground rows.
inline KeypointSet sample_edge_points(const BinaryMask& mask, int wrist_x, int distal_x,
                                      int n_columns = kDefaultKeypointColumns) {
  if (n_columns < 2) throw Error(ErrorCode::Parameter, "need at least 2 keypoint columns");
  if (wrist_x == distal_x) throw Error(ErrorCode::Parameter, "wrist and distal columns coincide");
  if (std::abs(wrist_x - distal_x) + 1 < n_columns)
    throw Error(ErrorCode::Parameter, "too many keypoint columns for the wrist-distal span");
  const int dir = wrist_x > distal_x ? 1 : -1;

  KeypointSet kp;
  kp.wrist_x = wrist_x;
  kp.distal_x = distal_x;
  int prev = 0;
  for (int k = 0; k < n_columns; ++k) {
    int x = static_cast<int>(std::lround(distal_x + double(k) * (wrist_x - distal_x) / (n_columns - 1)));
    if (k > 0 && (x - prev) * dir <= 0) x = prev + dir;  // collision: step toward the wrist
    prev = x;
    if (x < 0 || x >= mask.width()) throw Error(ErrorCode::MaskGap, "sampled column outside the mask");
    int top = -1, bottom = -1;
    for (int y = 0; y < mask.height(); ++y)
      if (mask.at(x, y)) {
        if (top < 0) top = y;
        bottom = y;
      }
    if (top < 0) throw Error(ErrorCode::MaskGap, "sampled column " + std::to_string(x) + " has no foreground");
    kp.points.push_back({double(x), double(top)});
    kp.points.push_back({double(x), double(bottom)});
  }
  return kp;
}

struct CurvePeak {
  int x = 0;
  double value = 0.0;
};

/// Global maximum, smallest column on ties.
inline CurvePeak curve_peak(const FeatureCurve& curve) {
  if (curve.values.empty()) throw Error(ErrorCode::Parameter, "peak of an empty curve");
  CurvePeak p{0, curve.values[0]};
  for (std::size_t i = 1; i < curve.values.size(); ++i)
    if (curve.values[i] > p.value) p = {static_cast<int>(i), curve.values[i]};
  return p;
}

}  // namespace limbreg
