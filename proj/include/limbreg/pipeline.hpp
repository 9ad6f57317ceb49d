#pragma once

// End-to-end FAM / FAM-TPS registration: mask -> orient -> FFRC -> keypoints
// -> match -> affine (-> spline) -> warp -> metrics.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>

#include "limbreg/ffrc.hpp"
#include "limbreg/image_io.hpp"
#include "limbreg/metrics.hpp"
#include "limbreg/orientation.hpp"
#include "limbreg/registration.hpp"
#include "limbreg/segmentation.hpp"
#include "limbreg/serialize.hpp"

namespace limbreg {

enum class RegistrationMode { Fam, FamTps };

constexpr std::string_view to_string(RegistrationMode m) { return m == RegistrationMode::Fam ? "fam" : "fam-tps"; }

struct PipelineConfig {
  KalmanParams kalman;
  std::optional<int> wrist_window_L;  // empty = width/16 rule
  int n_keypoint_columns = kDefaultKeypointColumns;
  RegistrationMode mode = RegistrationMode::Fam;
  double tps_lambda = 0.0;
  std::optional<double> ransac_threshold;  // empty = plain least squares
  int ransac_iterations = 1000;
  double overlay_w_fixed = 0.4;
  double overlay_w_moving = 0.6;
  DirectionMethod orientation_method = DirectionMethod::MinRect;
  double orientation_step = 1.0;

  int wrist_window(int width) const { return wrist_window_L ? *wrist_window_L : default_wrist_window(width); }

  std::optional<RansacOptions> ransac() const {
    if (!ransac_threshold) return std::nullopt;
    RansacOptions o;
    o.threshold = *ransac_threshold;
    o.iterations = ransac_iterations;
    return o;
  }

  void validate() const {
    auto range = [](bool ok, const char* field, const std::string& rule) {
      if (!ok) throw Error(ErrorCode::Range, std::string(field) + " " + rule);
    };
    range(kalman.process_noise_q > 0, "kalman_q", "must be > 0");
    range(kalman.measurement_noise_r > 0, "kalman_r", "must be > 0");
    range(kalman.initial_variance_p0 > 0, "kalman_p0", "must be > 0");
    if (wrist_window_L) range(*wrist_window_L >= 4 && *wrist_window_L % 2 == 0, "wrist_window_L", "must be even and >= 4");
    range(n_keypoint_columns >= 2 && n_keypoint_columns <= 4096, "n_keypoint_columns", "must lie in [2, 4096]");
    range(tps_lambda >= 0 && std::isfinite(tps_lambda), "tps_lambda", "must be >= 0");
    if (ransac_threshold) range(*ransac_threshold > 0 && std::isfinite(*ransac_threshold), "ransac_threshold", "must be > 0");
    range(ransac_iterations >= 1, "ransac_iterations", "must be >= 1");
    range(overlay_w_fixed >= 0 && overlay_w_fixed <= 1, "overlay_w_fixed", "must lie in [0, 1]");
    range(overlay_w_moving >= 0 && overlay_w_moving <= 1, "overlay_w_moving", "must lie in [0, 1]");
    range(orientation_step > 0 && orientation_step <= 5, "orientation_step", "must lie in (0, 5]");
  }
};

inline Json to_json(const PipelineConfig& c) {
  Json j{{"kalman_q", c.kalman.process_noise_q},
         {"kalman_r", c.kalman.measurement_noise_r},
         {"kalman_p0", c.kalman.initial_variance_p0}};
  j["wrist_window_L"] = c.wrist_window_L ? Json(*c.wrist_window_L) : Json("auto");
  j["n_keypoint_columns"] = c.n_keypoint_columns;
  j["mode"] = to_string(c.mode);
  j["tps_lambda"] = c.tps_lambda;
  j["ransac_threshold"] = c.ransac_threshold ? Json(*c.ransac_threshold) : Json("none");
  j["ransac_iterations"] = c.ransac_iterations;
  j["overlay_w_fixed"] = c.overlay_w_fixed;
  j["overlay_w_moving"] = c.overlay_w_moving;
  j["orientation_method"] = to_string(c.orientation_method);
  j["orientation_step"] = c.orientation_step;
  return j;
}

// ---------------------------------------------------------------------------
// Config file: flat "key = value" lines, '#' starts a comment.

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(std::string_view text, std::string_view key, int line) {
  T v{};
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size())
    throw Error(ErrorCode::Parse,
                "line " + std::to_string(line) + ": " + std::string(key) + " expects a number, got '" + std::string(text) + "'");
  return v;
}

}  // namespace detail

inline PipelineConfig parse_config(std::string_view text) {
  PipelineConfig c;
  std::map<std::string, int, std::less<>> seen;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw Error(ErrorCode::Parse, "line " + std::to_string(line_no) + ": expected 'key = value'");
    const std::string_view key = detail::trim(line.substr(0, eq));
    const std::string_view val = detail::trim(line.substr(eq + 1));
    if (key.empty() || val.empty())
      throw Error(ErrorCode::Parse, "line " + std::to_string(line_no) + ": empty key or value");
    if (auto [it, fresh] = seen.emplace(std::string(key), line_no); !fresh)
      throw Error(ErrorCode::Parse, "line " + std::to_string(line_no) + ": duplicate key " + std::string(key) +
                                        " (first set on line " + std::to_string(it->second) + ")");

    auto real = [&] { return detail::parse_number<double>(val, key, line_no); };
    auto integer = [&] { return detail::parse_number<int>(val, key, line_no); };
    if (key == "kalman_q") c.kalman.process_noise_q = real();
    else if (key == "kalman_r") c.kalman.measurement_noise_r = real();
    else if (key == "kalman_p0") c.kalman.initial_variance_p0 = real();
    else if (key == "wrist_window_L") c.wrist_window_L = val == "auto" ? std::nullopt : std::optional<int>(integer());
    else if (key == "n_keypoint_columns") c.n_keypoint_columns = integer();
    else if (key == "mode") {
      if (val == "fam") c.mode = RegistrationMode::Fam;
      else if (val == "fam-tps") c.mode = RegistrationMode::FamTps;
      else throw Error(ErrorCode::Parse, "line " + std::to_string(line_no) + ": mode must be fam or fam-tps");
    } else if (key == "tps_lambda") c.tps_lambda = real();
    else if (key == "ransac_threshold") c.ransac_threshold = val == "none" ? std::nullopt : std::optional<double>(real());
    else if (key == "ransac_iterations") c.ransac_iterations = integer();
    else if (key == "overlay_w_fixed") c.overlay_w_fixed = real();
    else if (key == "overlay_w_moving") c.overlay_w_moving = real();
    else if (key == "orientation_method") {
      if (val == "min_rect") c.orientation_method = DirectionMethod::MinRect;
      else if (val == "exhaustive") c.orientation_method = DirectionMethod::Exhaustive;
      else throw Error(ErrorCode::Parse, "line " + std::to_string(line_no) + ": orientation_method must be min_rect or exhaustive");
    } else if (key == "orientation_step") c.orientation_step = real();
    else throw Error(ErrorCode::Parse, "line " + std::to_string(line_no) + ": unknown key " + std::string(key));
  }
  c.validate();
  return c;
}

/// A missing file yields the defaults; an unreadable or malformed one fails.
inline PipelineConfig load_config(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::exists(path, ec)) return PipelineConfig{};
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

// ---------------------------------------------------------------------------
// Debug dumps

/// Numbered stage dumps; a default-constructed sink writes nothing.
class DebugSink {
 public:
  DebugSink() = default;
  explicit DebugSink(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    std::filesystem::create_directories(*dir_, ec);
    if (ec) throw Error(ErrorCode::Io, "cannot create debug directory " + dir_->string());
  }

  bool enabled() const { return dir_.has_value(); }

  void mask(const std::string& name, const BinaryMask& m) {
    if (dir_) io::write_mask(next(name + ".pgm"), m);
  }
  void image(const std::string& name, const Image& img) {
    if (dir_) io::write_image(next(name + (img.channels() == 1 ? ".pgm" : ".png")), img);
  }
  void text(const std::string& name, const std::string& content) {
    if (dir_) write_text(next(name), content);
  }
  void json(const std::string& name, const Json& j) {
    if (dir_) write_json(next(name + ".json"), j);
  }

 private:
  std::filesystem::path next(const std::string& name) {
    const int n = ++counter_;
    return *dir_ / ((n < 10 ? "0" : "") + std::to_string(n) + "_" + name);
  }

  std::optional<std::filesystem::path> dir_;
  int counter_ = 0;
};

// ---------------------------------------------------------------------------
// Per-limb analysis

struct LimbAnalysis {
  BinaryMask mask;
  PrincipalDirection direction;
  double applied_rotation = 0.0;  // direction angle, or +180 to put the elbow on the left
  BinaryMask oriented;
  FeatureCurve raw;
  FeatureCurve filtered;
  int window = 0;
  KeypointSet oriented_keypoints;
  KeypointSet keypoints;  // source-image coordinates
};

namespace detail {

template <class F>
auto staged(const char* stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    if (!e.stage().empty()) throw;
    throw e.with_stage(stage);
  }
}

inline void analyze_at(LimbAnalysis& a, double rotation, const PipelineConfig& cfg) {
  a.applied_rotation = rotation;
  a.oriented = rotate_image(a.mask, rotation);
  a.raw = compute_ffrc(a.oriented);
  a.filtered = staged("curve", [&] { return kalman_smooth(a.raw, cfg.kalman); });
  a.window = cfg.wrist_window(a.oriented.width());
  const int wrist = staged("wrist", [&] { return detect_wrist(a.filtered, a.window); });
  a.oriented_keypoints = staged("keypoints", [&] {
    const int distal = distal_point(a.oriented, wrist);
    return sample_edge_points(a.oriented, wrist, distal, cfg.n_keypoint_columns);
  });
}

}  // namespace detail

/// Orients the mask, then reads the wrist and edge keypoints off its FFRC.
/// Limbs whose elbow lands on the right after rotation are turned a further
/// 180 degrees and re-analysed, so both images of a pair share one layout
/// (distal end left, upper edge first).
inline LimbAnalysis analyze_mask(const BinaryMask& mask, const PipelineConfig& cfg = {}, DebugSink* debug = nullptr,
                                 const std::string& tag = "limb") {
  cfg.validate();
  LimbAnalysis a;
  a.mask = mask;
  a.direction = detail::staged("orient", [&] {
    return principal_direction(mask, cfg.orientation_method, cfg.orientation_step);
  });
  detail::analyze_at(a, a.direction.angle, cfg);
  if (a.oriented_keypoints.distal_x > a.oriented_keypoints.wrist_x) detail::analyze_at(a, a.direction.angle + 180.0, cfg);

  const RotationFrame frame = RotationFrame::make(mask.width(), mask.height(), a.applied_rotation);
  a.keypoints = a.oriented_keypoints;
  for (Point2& p : a.keypoints.points) p = frame.to_source(p);

  if (debug && debug->enabled()) {
    debug->mask(tag + "_oriented", a.oriented);
    debug->text(tag + "_curve.csv", curve_csv(a.raw, a.filtered));
    Json kp = to_json(a.keypoints);
    kp["orientation_angle"] = a.direction.angle;
    kp["applied_rotation"] = a.applied_rotation;
    debug->json(tag + "_keypoints", kp);
  }
  return a;
}

inline LimbAnalysis analyze_limb(const Image& image, const PipelineConfig& cfg = {}, DebugSink* debug = nullptr,
                                 const std::string& tag = "limb") {
  const SkinSegmentation seg = detail::staged("mask", [&] { return segment_skin(image); });
  if (debug) debug->mask(tag + "_mask", seg.mask);
  return analyze_mask(seg.mask, cfg, debug, tag);
}

// ---------------------------------------------------------------------------
// Registration

struct PipelineResult {
  LimbAnalysis fixed;
  LimbAnalysis moving;
  MatchedPairs pairs;
  AffineEstimate affine;  // moving -> fixed
  std::optional<TpsWarp> tps;  // fixed -> moving
  Image warped;
  BinaryMask warped_mask;
  Image overlay;
  RegistrationReport report;

  Transform transform() const { return tps ? Transform(*tps) : Transform(affine.transform); }
};

inline PipelineResult register_limbs(LimbAnalysis fixed, LimbAnalysis moving, const Image& fixed_image,
                                     const Image& moving_image, const PipelineConfig& cfg, DebugSink* debug = nullptr) {
  PipelineResult r;
  r.fixed = std::move(fixed);
  r.moving = std::move(moving);
  r.pairs = detail::staged("match", [&] { return match_structural(r.fixed.keypoints, r.moving.keypoints); });
  r.affine = detail::staged("affine", [&] { return estimate_affine_robust(r.pairs, cfg.ransac()); });
  if (cfg.mode == RegistrationMode::FamTps) {
    // Controls come from the consensus set so RANSAC-rejected pairs do not
    // bend the spline. A single-pixel column yields upper == lower; only the
    // first copy of a repeated control is kept.
    MatchedPairs ctrl;
    for (std::size_t i = 0; i < r.pairs.count(); ++i) {
      if (!r.affine.inliers[i]) continue;
      const Point2 f = r.pairs.fixed[i];
      if (std::any_of(ctrl.fixed.begin(), ctrl.fixed.end(), [&](Point2 c) { return distance(c, f) <= 1e-9; })) continue;
      ctrl.fixed.push_back(f);
      ctrl.moving.push_back(r.pairs.moving[i]);
    }
    r.tps = detail::staged("tps", [&] { return tps_fit(ctrl, cfg.tps_lambda); });
  }
  const int w = fixed_image.width(), h = fixed_image.height();
  detail::staged("warp", [&] {
    const Transform t = r.transform();
    r.warped = warp_image(moving_image, t, w, h);
    r.warped_mask = warp_image(r.moving.mask, t, w, h);
    r.overlay = blend_overlay(fixed_image, r.warped, cfg.overlay_w_fixed, cfg.overlay_w_moving);
    return 0;
  });
  if (debug) {
    debug->image("warped", r.warped);
    debug->mask("warped_mask", r.warped_mask);
    debug->image("overlay", r.overlay);
  }
  r.report = detail::staged("metrics", [&] { return evaluate_registration(r.warped_mask, r.fixed.mask); });
  return r;
}

inline PipelineResult run_pipeline(const Image& fixed, const Image& moving, const PipelineConfig& cfg = {},
                                   DebugSink* debug = nullptr) {
  cfg.validate();
  LimbAnalysis f = analyze_limb(fixed, cfg, debug, "fixed");
  LimbAnalysis m = analyze_limb(moving, cfg, debug, "moving");
  return register_limbs(std::move(f), std::move(m), fixed, moving, cfg, debug);
}

/// Transform dump written next to the warped image.
inline Json transform_json(const PipelineResult& r) {
  if (!r.tps) return to_json(r.affine.transform);
  Json j = to_json(*r.tps);
  j["fam_affine"] = to_json(r.affine.transform);
  return j;
}

inline Json report_json(const PipelineResult& r, const PipelineConfig& cfg, const Json& inputs = Json::object()) {
  std::size_t n_in = 0;
  for (bool b : r.affine.inliers) n_in += b;
  return Json{{"format_version", kFormatVersion},
              {"tool_version", kToolVersion},
              {"inputs", inputs},
              {"config", to_json(cfg)},
              {"metrics", to_json(r.report)},
              {"not_computed", Json::array({"fid"})},
              {"fixed",
               {{"orientation_angle", r.fixed.direction.angle},
                {"applied_rotation", r.fixed.applied_rotation},
                {"wrist_x", r.fixed.oriented_keypoints.wrist_x},
                {"distal_x", r.fixed.oriented_keypoints.distal_x}}},
              {"moving",
               {{"orientation_angle", r.moving.direction.angle},
                {"applied_rotation", r.moving.applied_rotation},
                {"wrist_x", r.moving.oriented_keypoints.wrist_x},
                {"distal_x", r.moving.oriented_keypoints.distal_x}}},
              {"pairs", r.pairs.count()},
              {"inliers", n_in}};
}

}  // namespace limbreg
