#pragma once

// JSON and CSV encodings of the pipeline's data types. Field names here are
// part of the on-disk format; bump kFormatVersion when they change.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <string>

#include "json.hpp"
#include "limbreg/ffrc.hpp"
#include "limbreg/metrics.hpp"
#include "limbreg/registration.hpp"

namespace limbreg {

inline constexpr int kFormatVersion = 1;
inline constexpr const char* kToolVersion = "1.0.0";

using Json = nlohmann::ordered_json;

namespace detail {

inline Json point_json(Point2 p) { return Json::array({p.x, p.y}); }

inline Point2 point_from(const Json& j) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw Error(ErrorCode::Parse, "expected a point [x, y]");
  return {j[0].get<double>(), j[1].get<double>()};
}

inline Json rows_json(const AffineTransform& t) {
  return Json::array({Json::array({t.m[0], t.m[1], t.m[2]}), Json::array({t.m[3], t.m[4], t.m[5]})});
}

inline AffineTransform affine_from_rows(const Json& j) {
  if (!j.is_array() || j.size() != 2) throw Error(ErrorCode::Parse, "affine matrix must have 2 rows");
  AffineTransform t;
  for (std::size_t r = 0; r < 2; ++r) {
    if (!j[r].is_array() || j[r].size() != 3) throw Error(ErrorCode::Parse, "affine rows must have 3 entries");
    for (std::size_t c = 0; c < 3; ++c) {
      if (!j[r][c].is_number()) throw Error(ErrorCode::Parse, "affine entries must be numbers");
      t.m[r * 3 + c] = j[r][c].get<double>();
    }
  }
  return t;
}

}  // namespace detail

inline Json to_json(const KeypointSet& kp) {
  Json pts = Json::array();
  for (const Point2& p : kp.points) pts.push_back(detail::point_json(p));
  return Json{{"format_version", kFormatVersion}, {"wrist_x", kp.wrist_x}, {"distal_x", kp.distal_x}, {"points", pts}};
}

inline KeypointSet keypoints_from_json(const Json& j) {
  try {
    KeypointSet kp;
    kp.wrist_x = j.at("wrist_x").get<int>();
    kp.distal_x = j.at("distal_x").get<int>();
    for (const auto& p : j.at("points")) kp.points.push_back(detail::point_from(p));
    return kp;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("keypoint JSON: ") + e.what());
  }
}

inline Json to_json(const AffineTransform& t) {
  return Json{{"type", "affine"}, {"direction", "moving_to_fixed"}, {"matrix", detail::rows_json(t)}};
}

inline Json to_json(const TpsWarp& w) {
  Json ctrl = Json::array(), weights = Json::array();
  for (const Point2& p : w.control_points) ctrl.push_back(detail::point_json(p));
  for (const Point2& p : w.weights) weights.push_back(detail::point_json(p));
  return Json{{"type", "tps"},
              {"direction", "fixed_to_moving"},
              {"kernel", "r^2 ln r"},
              {"lambda", w.regularization_lambda},
              {"normalization", {{"center", detail::point_json(w.norm_center)}, {"scale", w.norm_scale}}},
              {"affine_part", detail::rows_json(w.affine_part)},
              {"control_points", ctrl},
              {"weights", weights}};
}

/// Moving -> fixed affine from a transform dump: an affine file directly, or
/// the FAM stage recorded inside a spline dump.
inline AffineTransform affine_from_json(const Json& j) {
  try {
    if (j.contains("fam_affine")) return affine_from_json(j.at("fam_affine"));
    if (j.value("type", "") != "affine") throw Error(ErrorCode::Parse, "transform JSON holds no affine");
    if (j.value("direction", "moving_to_fixed") != "moving_to_fixed")
      throw Error(ErrorCode::Parse, "affine direction must be moving_to_fixed");
    return detail::affine_from_rows(j.at("matrix"));
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("transform JSON: ") + e.what());
  }
}

inline Json to_json(const RegistrationReport& r) {
  Json m{{"dice", r.dice},
         {"jaccard", r.jaccard},
         {"hausdorff", r.hausdorff},
         {"asd", r.asd},
         {"asd_direction", "registered_to_fixed"},
         {"assd", r.assd}};
  if (r.keypoints) m["keypoint_ed"] = {{"mean", r.keypoints->mean}, {"distances", r.keypoints->distances}};
  return m;
}

inline Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Parse, path.string() + ": " + e.what());
  }
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

inline void write_json(const std::filesystem::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

/// Shortest round-trip decimal form.
inline std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string curve_csv(const FeatureCurve& raw, const FeatureCurve& filtered) {
  std::string out = "raw,filtered\n";
  for (std::size_t i = 0; i < raw.size(); ++i) out += format_number(raw.values[i]) + "," + format_number(filtered.values[i]) + "\n";
  return out;
}

}  // namespace limbreg
