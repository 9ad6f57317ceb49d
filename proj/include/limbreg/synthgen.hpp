#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>

#include "limbreg/ffrc.hpp"
#include "limbreg/raster.hpp"
#include "limbreg/registration.hpp"

namespace limbreg::synth {

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
};

/// Parametric forearm: a linear taper from elbow to wrist followed by a
/// half-ellipse palm whose flat side sits on the wrist. Axial rotation only
/// narrows the palm's projected width (cosine model with a 0.35 floor).
struct ForearmParams {
  int canvas_width = 840;
  int canvas_height = 480;
  double arm_length = 440.0;
  double wrist_width = 44.0;
  double elbow_width = 60.0;
  double palm_length = 150.0;
  double palm_max_width = 180.0;
  double axial_angle = 0.0;     // degrees, [0, 90]
  double in_plane_angle = 0.0;  // degrees, [0, 180)
  Rgb skin_color{210, 160, 140};
  Rgb background_color{60, 60, 60};
  std::uint32_t seed = 1;
  int noise_amplitude = 6;

  double palm_projected_width() const {
    return palm_max_width * (0.35 + 0.65 * std::cos(axial_angle * std::numbers::pi / 180.0));
  }
  double total_length() const { return arm_length + palm_length; }

  void validate() const {
    if (canvas_width < 16 || canvas_height < 16) throw Error(ErrorCode::Parameter, "canvas too small");
    if (!(arm_length > 0 && palm_length > 0 && wrist_width > 0))
      throw Error(ErrorCode::Parameter, "limb lengths and widths must be positive");
    if (!(wrist_width < elbow_width)) throw Error(ErrorCode::Parameter, "wrist must be narrower than elbow");
    if (!(axial_angle >= 0 && axial_angle <= 90)) throw Error(ErrorCode::Parameter, "axial angle must lie in [0, 90]");
    if (!(in_plane_angle >= 0 && in_plane_angle < 180))
      throw Error(ErrorCode::Parameter, "in-plane angle must lie in [0, 180)");
    if (!(palm_projected_width() > wrist_width))
      throw Error(ErrorCode::Parameter, "projected palm must be wider than the wrist");
    if (noise_amplitude < 0 || noise_amplitude > 64) throw Error(ErrorCode::Parameter, "noise amplitude out of range");
  }
};

/// Fixture used for registration: a strongly tapered arm whose palm stays
/// close to the elbow width, which keeps the minimum-area rectangle aligned
/// with the limb and the wrist valley sharp.
inline ForearmParams registration_fixture() {
  ForearmParams p;
  p.arm_length = 320;
  p.wrist_width = 40;
  p.elbow_width = 100;
  p.palm_length = 130;
  p.palm_max_width = 140;
  return p;
}

/// Fixture for the palm-projection effect: the palm stays wider than the
/// elbow at every axial angle, so the curve peak always sits on the palm.
inline ForearmParams projection_fixture() {
  ForearmParams p;
  p.arm_length = 320;
  p.wrist_width = 40;
  p.elbow_width = 70;
  p.palm_length = 130;
  p.palm_max_width = 220;
  return p;
}

/// Maps any axial angle onto the [0, 90] projection model: the projected
/// palm width depends only on |cos|, so a and 180 - a look alike.
inline double fold_axial_angle(double deg) {
  double a = std::fmod(deg, 180.0);
  if (a < 0) a += 180.0;
  return a > 90.0 ? 180.0 - a : a;
}

/// Smooth Gaussian bulge added to both arm edges (half-width units).
struct EdgeBump {
  double amplitude = 0.0;     // pixels
  double center = 0.5;        // fraction of arm length from the elbow
  double width = 0.12;        // fraction of arm length (Gaussian sigma)
};

/// Silhouette in the limb's own frame: x runs from the elbow (0) through the
/// wrist (arm_length) to the fingertip; y is the signed offset from the axis.
class Silhouette {
 public:
  explicit Silhouette(const ForearmParams& p, std::optional<EdgeBump> bump = {})
      : p_(p), palm_half_(p.palm_projected_width() / 2), bump_(bump) {}

  double half_width(double x) const {
    const double xw = p_.arm_length;
    if (x < 0 || x > p_.total_length()) return 0.0;
    if (x <= xw) {
      double h = p_.elbow_width / 2 + (p_.wrist_width - p_.elbow_width) / 2 * (x / xw);
      if (bump_) {
        const double d = (x - bump_->center * xw) / (bump_->width * xw);
        h += bump_->amplitude * std::exp(-d * d);
      }
      return h;
    }
    const double t = (x - xw) / p_.palm_length;
    return palm_half_ * std::sqrt(std::max(0.0, 1 - t * t));
  }

  bool contains(Point2 body) const {
    return body.x >= 0 && body.x <= p_.total_length() && std::abs(body.y) <= half_width(body.x);
  }

  double max_half_width() const {
    double m = std::max(p_.elbow_width / 2, palm_half_);
    if (bump_) m += std::max(0.0, bump_->amplitude);
    return m;
  }

 private:
  ForearmParams p_;
  double palm_half_;
  std::optional<EdgeBump> bump_;
};

/// Body frame -> canvas: centered on the canvas, long axis along
/// (cos a, sin a) for in-plane angle a.
inline AffineTransform body_to_canvas(const ForearmParams& p) {
  const auto [c, s] = cos_sin_deg(p.in_plane_angle);
  const double cx = (p.canvas_width - 1) * 0.5, cy = (p.canvas_height - 1) * 0.5;
  const double ox = -p.total_length() / 2;
  return {{c, -s, cx + c * ox, s, c, cy + s * ox}};
}

/// s * R(rot) (p - center) + center + (tx, ty)
inline AffineTransform similarity_about(Point2 center, double rot_deg, double scale, double tx, double ty) {
  const auto [c, s] = cos_sin_deg(rot_deg);
  const double a = scale * c, b = -scale * s, d = scale * s, e = scale * c;
  return {{a, b, center.x + tx - a * center.x - b * center.y, d, e, center.y + ty - d * center.x - e * center.y}};
}

struct SimilaritySpec {
  double rot = 0.0;  // degrees
  double scale = 1.0;
  double tx = 0.0;
  double ty = 0.0;
};

/// Parses "rot=10,scale=1.1,tx=25,ty=-5"; omitted keys keep their identity
/// values.
inline SimilaritySpec parse_similarity(std::string_view text) {
  SimilaritySpec s;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t end = std::min(text.find(',', pos), text.size());
    const std::string_view item = text.substr(pos, end - pos);
    pos = end + 1;
    const auto eq = item.find('=');
    if (eq == std::string_view::npos) throw Error(ErrorCode::Parse, "transform item '" + std::string(item) + "' lacks '='");
    const std::string_view key = item.substr(0, eq), val = item.substr(eq + 1);
    double v = 0.0;
    const auto res = std::from_chars(val.data(), val.data() + val.size(), v);
    if (res.ec != std::errc{} || res.ptr != val.data() + val.size() || !std::isfinite(v))
      throw Error(ErrorCode::Parse, "transform value '" + std::string(val) + "' is not a number");
    if (key == "rot") s.rot = v;
    else if (key == "scale") s.scale = v;
    else if (key == "tx") s.tx = v;
    else if (key == "ty") s.ty = v;
    else throw Error(ErrorCode::Parse, "unknown transform key '" + std::string(key) + "'");
  }
  if (!(s.scale > 0)) throw Error(ErrorCode::Range, "transform scale must be > 0");
  return s;
}

struct ForearmBundle {
  Image image;
  BinaryMask mask;
  KeypointSet keypoints;  // ground truth, canvas coordinates
  FeatureCurve analytic;  // per-column thickness of the unrotated silhouette
  double wrist_column = 0.0;  // unrotated frame
  int elbow_column = 0;       // unrotated frame, first occupied column
};

namespace detail {

inline void check_fit(const ForearmParams& p, const Silhouette& sil, const AffineTransform& to_canvas) {
  const double h = sil.max_half_width();
  constexpr double margin = 3.0;
  for (const Point2 corner : {Point2{0, -h}, Point2{0, h}, Point2{p.total_length(), -h}, Point2{p.total_length(), h}}) {
    const Point2 q = to_canvas.apply(corner);
    if (q.x < margin || q.y < margin || q.x > p.canvas_width - 1 - margin || q.y > p.canvas_height - 1 - margin)
      throw Error(ErrorCode::Fit, "silhouette does not fit in the canvas");
  }
}

inline KeypointSet ground_truth_keypoints(const ForearmParams& p, const Silhouette& sil, const AffineTransform& to_canvas,
                                          int n_columns) {
  KeypointSet kp;
  const AffineTransform unrotated = body_to_canvas([&] {
    ForearmParams q = p;
    q.in_plane_angle = 0;
    return q;
  }());
  kp.distal_x = static_cast<int>(std::lround(unrotated.apply({0, 0}).x));
  kp.wrist_x = static_cast<int>(std::lround(unrotated.apply({p.arm_length, 0}).x));
  for (int k = 0; k < n_columns; ++k) {
    const double x = p.arm_length * k / (n_columns - 1);
    const double h = sil.half_width(x);
    kp.points.push_back(to_canvas.apply({x, -h}));
    kp.points.push_back(to_canvas.apply({x, h}));
  }
  return kp;
}

/// Rasterizes the silhouette seen through `canvas_to_body`, painting skin
/// with per-channel uniform noise in [-a, a].
inline std::pair<Image, BinaryMask> rasterize(const ForearmParams& p, const Silhouette& sil,
                                              const AffineTransform& canvas_to_body, std::uint32_t seed) {
  Image img(p.canvas_width, p.canvas_height, 3);
  BinaryMask mask(p.canvas_width, p.canvas_height);
  std::mt19937 rng(seed);
  const int span = 2 * p.noise_amplitude + 1;
  const std::array<std::uint8_t, 3> skin{p.skin_color.r, p.skin_color.g, p.skin_color.b};
  const std::array<std::uint8_t, 3> bg{p.background_color.r, p.background_color.g, p.background_color.b};
  for (int y = 0; y < p.canvas_height; ++y)
    for (int x = 0; x < p.canvas_width; ++x) {
      const bool in = sil.contains(canvas_to_body.apply({double(x), double(y)}));
      mask.set(x, y, in);
      for (int c = 0; c < 3; ++c) {
        if (in) {
          const int noise = static_cast<int>(rng() % static_cast<std::uint32_t>(span)) - p.noise_amplitude;
          img.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(skin[c] + noise, 0, 255));
        } else {
          img.at(x, y, c) = bg[c];
        }
      }
    }
  return {std::move(img), std::move(mask)};
}

inline FeatureCurve analytic_curve(const ForearmParams& p, const Silhouette& sil) {
  FeatureCurve c;
  const double cx = (p.canvas_width - 1) * 0.5;
  for (int x = 0; x < p.canvas_width; ++x) c.values.push_back(2 * sil.half_width(x - cx + p.total_length() / 2));
  return c;
}

}  // namespace detail

/// Image, mask, ground-truth keypoints and analytic curve of one forearm.
inline ForearmBundle generate_forearm(const ForearmParams& params, int n_columns = kDefaultKeypointColumns) {
  params.validate();
  const Silhouette sil(params);
  const AffineTransform to_canvas = body_to_canvas(params);
  detail::check_fit(params, sil, to_canvas);

  ForearmBundle b;
  std::tie(b.image, b.mask) = detail::rasterize(params, sil, to_canvas.inverse(), params.seed);
  b.keypoints = detail::ground_truth_keypoints(params, sil, to_canvas, n_columns);
  b.analytic = detail::analytic_curve(params, sil);
  const double cx = (params.canvas_width - 1) * 0.5;
  b.wrist_column = cx - params.total_length() / 2 + params.arm_length;
  b.elbow_column = static_cast<int>(std::ceil(cx - params.total_length() / 2));
  return b;
}

struct ForearmPair {
  ForearmBundle fixed;
  ForearmBundle moving;
  AffineTransform fixed_to_moving;
  AffineTransform moving_to_fixed;
};

/// Fixed forearm plus the same geometry mapped through `fixed_to_moving`
/// (optionally with an edge bump) and re-rasterized with its own noise.
inline ForearmPair generate_pair(const ForearmParams& params, const AffineTransform& fixed_to_moving,
                                 std::optional<EdgeBump> bump = {}, int n_columns = kDefaultKeypointColumns) {
  if (!fixed_to_moving.is_valid()) throw Error(ErrorCode::SingularTransform, "pair transform is not invertible");
  ForearmPair pair;
  pair.fixed = generate_forearm(params, n_columns);
  pair.fixed_to_moving = fixed_to_moving;
  pair.moving_to_fixed = fixed_to_moving.inverse();

  const Silhouette sil(params, bump);
  const AffineTransform to_canvas = fixed_to_moving.compose(body_to_canvas(params));
  detail::check_fit(params, sil, to_canvas);

  ForearmBundle& m = pair.moving;
  std::tie(m.image, m.mask) = detail::rasterize(params, sil, to_canvas.inverse(), params.seed + 1);
  m.keypoints = detail::ground_truth_keypoints(params, sil, to_canvas, n_columns);
  m.analytic = detail::analytic_curve(params, sil);
  m.wrist_column = pair.fixed.wrist_column;
  m.elbow_column = pair.fixed.elbow_column;
  return pair;
}

}  // namespace limbreg::synth
