// limbreg: command-line front end for the limb registration library.
//
// Every failure prints one JSON object on stderr and exits with the numeric
// value of its ErrorCode (usage errors exit 2). Outputs written by a command
// that later fails are removed.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "limbreg/batch.hpp"
#include "limbreg/limbreg.hpp"

namespace fs = std::filesystem;
using namespace limbreg;

namespace {

constexpr int kUsageExit = 2;
constexpr int kInternalExit = 1;

struct Globals {
  std::string config_path;
  std::string debug_dir;
};

PipelineConfig base_config(const Globals& g) {
  return g.config_path.empty() ? PipelineConfig{} : detail::staged("config", [&] {
    if (!fs::exists(g.config_path)) throw Error(ErrorCode::Io, "config file " + g.config_path + " does not exist");
    return load_config(g.config_path);
  });
}

template <class F>
auto loading(F&& f) {
  return detail::staged("load", std::forward<F>(f));
}

void print_json(const Json& j) { std::cout << j.dump(2) << "\n"; }

// --- mask -------------------------------------------------------------------

struct MaskArgs {
  std::string in, out;
};

void run_mask(const MaskArgs& a, const Globals& g) {
  const Image img = loading([&] { return io::read_image(a.in); });
  const SkinSegmentation seg = detail::staged("mask", [&] { return segment_skin(img); });
  OutputTransaction tx;
  io::write_mask(tx.file(a.out), seg.mask);
  if (!g.debug_dir.empty()) {
    DebugSink dbg(g.debug_dir);
    dbg.image("cr", seg.cr);
    dbg.image("blurred", seg.blurred);
    dbg.mask("thresholded", seg.thresholded);
    dbg.mask("mask", seg.mask);
  }
  tx.commit();
}

// --- orient -------------------------------------------------------------------

struct OrientArgs {
  std::string mask;
  std::string method;
  std::optional<double> step;
};

void run_orient(const OrientArgs& a, const Globals& g) {
  PipelineConfig cfg = base_config(g);
  if (!a.method.empty()) cfg.orientation_method = a.method == "exhaustive" ? DirectionMethod::Exhaustive : DirectionMethod::MinRect;
  if (a.step) cfg.orientation_step = *a.step;
  cfg.validate();
  const BinaryMask mask = loading([&] { return io::read_mask(a.mask); });
  const PrincipalDirection d = detail::staged("orient", [&] {
    return principal_direction(mask, cfg.orientation_method, cfg.orientation_step);
  });
  print_json(Json{{"angle", d.angle}, {"method", to_string(d.method)}, {"extent", d.extent}});
}

// --- curve --------------------------------------------------------------------

struct CurveArgs {
  std::string mask, csv;
};

void run_curve(const CurveArgs& a, const Globals& g) {
  const PipelineConfig cfg = base_config(g);
  const BinaryMask mask = loading([&] { return io::read_mask(a.mask); });
  const PrincipalDirection d = detail::staged("orient", [&] {
    return principal_direction(mask, cfg.orientation_method, cfg.orientation_step);
  });
  const FeatureCurve raw = compute_ffrc(normalize_horizontal(mask, d));
  const FeatureCurve filtered = detail::staged("curve", [&] { return kalman_smooth(raw, cfg.kalman); });
  OutputTransaction tx;
  write_text(tx.file(a.csv), curve_csv(raw, filtered));
  tx.commit();
}

// --- keypoints ----------------------------------------------------------------

struct KeypointArgs {
  std::string mask, json;
};

void run_keypoints(const KeypointArgs& a, const Globals& g) {
  const PipelineConfig cfg = base_config(g);
  const BinaryMask mask = loading([&] { return io::read_mask(a.mask); });
  std::optional<DebugSink> dbg;
  if (!g.debug_dir.empty()) dbg.emplace(g.debug_dir);
  const LimbAnalysis an = analyze_mask(mask, cfg, dbg ? &*dbg : nullptr, "limb");
  Json j = to_json(an.keypoints);
  j["frame"] = "source";
  j["orientation_angle"] = an.direction.angle;
  j["applied_rotation"] = an.applied_rotation;
  if (a.json.empty()) {
    print_json(j);
    return;
  }
  OutputTransaction tx;
  write_json(tx.file(a.json), j);
  tx.commit();
}

// --- register -----------------------------------------------------------------

struct RegisterArgs {
  std::string fixed, moving, out = ".";
  std::string mode;
  std::optional<double> lambda;
  std::optional<double> ransac;
};

void run_register(const RegisterArgs& a, const Globals& g) {
  PipelineConfig cfg = base_config(g);
  if (!a.mode.empty()) cfg.mode = a.mode == "fam-tps" ? RegistrationMode::FamTps : RegistrationMode::Fam;
  if (a.lambda) cfg.tps_lambda = *a.lambda;
  if (a.ransac) cfg.ransac_threshold = *a.ransac;
  detail::staged("config", [&] {
    cfg.validate();
    return 0;
  });
  const Image fixed = loading([&] { return io::read_image(a.fixed); });
  const Image moving = loading([&] { return io::read_image(a.moving); });
  std::optional<DebugSink> dbg;
  if (!g.debug_dir.empty()) dbg.emplace(g.debug_dir);
  const PipelineResult r = run_pipeline(fixed, moving, cfg, dbg ? &*dbg : nullptr);
  OutputTransaction tx;
  write_registration_outputs(tx, a.out, r, cfg, Json{{"fixed", a.fixed}, {"moving", a.moving}});
  tx.commit();
}

// --- evaluate -----------------------------------------------------------------

struct EvaluateArgs {
  std::string fixed_mask, warped_mask;
  std::vector<std::string> keypoints;
  std::string transform;
  std::string json;
};

void run_evaluate(const EvaluateArgs& a, const Globals&) {
  if (a.keypoints.empty() != a.transform.empty())
    throw Error(ErrorCode::Parameter, "--keypoints and --transform must be given together");
  const BinaryMask fixed = loading([&] { return io::read_mask(a.fixed_mask); });
  const BinaryMask warped = loading([&] { return io::read_mask(a.warped_mask); });
  RegistrationReport rep = detail::staged("metrics", [&] { return evaluate_registration(warped, fixed); });
  Json inputs{{"fixed_mask", a.fixed_mask}, {"warped_mask", a.warped_mask}};
  if (!a.transform.empty()) {
    const KeypointSet fk = loading([&] { return keypoints_from_json(read_json(a.keypoints[0])); });
    const KeypointSet mk = loading([&] { return keypoints_from_json(read_json(a.keypoints[1])); });
    const AffineTransform t = loading([&] { return affine_from_json(read_json(a.transform)); });
    rep.keypoints = detail::staged("metrics", [&] { return keypoint_ed(t, mk.points, fk.points); });
    inputs["fixed_keypoints"] = a.keypoints[0];
    inputs["moving_keypoints"] = a.keypoints[1];
    inputs["transform"] = a.transform;
  }
  const Json j{{"format_version", kFormatVersion},
               {"tool_version", kToolVersion},
               {"inputs", inputs},
               {"metrics", to_json(rep)},
               {"not_computed", Json::array({"fid"})}};
  if (a.json.empty()) {
    print_json(j);
    return;
  }
  OutputTransaction tx;
  write_json(tx.file(a.json), j);
  tx.commit();
}

// --- synth --------------------------------------------------------------------

struct SynthArgs {
  double angle = 0.0;
  double in_plane = 0.0;
  std::string transform;
  double bump = 0.0;
  std::uint32_t seed = 1;
  std::string preset = "registration";
  std::string out;
};

void run_synth(const SynthArgs& a, const Globals&) {
  synth::ForearmParams p = a.preset == "projection" ? synth::projection_fixture() : synth::registration_fixture();
  p.axial_angle = synth::fold_axial_angle(a.angle);
  p.in_plane_angle = a.in_plane;
  p.seed = a.seed;
  const synth::SimilaritySpec s = synth::parse_similarity(a.transform);
  const Point2 center{(p.canvas_width - 1) * 0.5, (p.canvas_height - 1) * 0.5};
  const AffineTransform t = synth::similarity_about(center, s.rot, s.scale, s.tx, s.ty);
  std::optional<synth::EdgeBump> bump;
  if (a.bump != 0.0) bump = synth::EdgeBump{a.bump};
  const synth::ForearmPair pair = detail::staged("synth", [&] { return synth::generate_pair(p, t, bump); });

  const fs::path dir(a.out);
  OutputTransaction tx;
  tx.make_dirs(dir);
  io::write_png(tx.file(dir / "fixed.png"), pair.fixed.image);
  io::write_png(tx.file(dir / "moving.png"), pair.moving.image);
  io::write_mask(tx.file(dir / "fixed_mask.pgm"), pair.fixed.mask);
  io::write_mask(tx.file(dir / "moving_mask.pgm"), pair.moving.mask);
  write_json(tx.file(dir / "fixed_keypoints.json"), to_json(pair.fixed.keypoints));
  write_json(tx.file(dir / "moving_keypoints.json"), to_json(pair.moving.keypoints));
  Json tj = to_json(pair.moving_to_fixed);
  tj["fixed_to_moving"] = detail::rows_json(pair.fixed_to_moving);
  tj["params"] = {{"preset", a.preset},
                  {"axial_angle", p.axial_angle},
                  {"requested_angle", a.angle},
                  {"in_plane_angle", p.in_plane_angle},
                  {"rot", s.rot},
                  {"scale", s.scale},
                  {"tx", s.tx},
                  {"ty", s.ty},
                  {"bump", a.bump},
                  {"seed", p.seed}};
  write_json(tx.file(dir / "transform.json"), tj);
  tx.commit();
}

// --- batch --------------------------------------------------------------------

struct BatchArgs {
  std::string manifest, out;
  int jobs = 1;
};

int run_batch_cmd(const BatchArgs& a, const Globals& g) {
  const PipelineConfig cfg = base_config(g);
  const std::string text = loading([&] {
    std::ifstream in(a.manifest, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open manifest " + a.manifest);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  });
  const auto entries = detail::staged("manifest", [&] { return parse_manifest(text); });
  const BatchResult res = run_batch(entries, fs::path(a.manifest).parent_path(), a.out, cfg, a.jobs);
  if (res.first_error) {
    std::cerr << error_json(*res.first_error).dump() << "\n";
    return static_cast<int>(res.first_error->code());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Structure-based limb image registration"};
  app.require_subcommand(0, 1);
  Globals g;
  bool version = false;
  app.add_flag("--version", version, "Print tool and format version");
  app.add_option("--config", g.config_path, "Flat key = value pipeline config");
  app.add_option("--debug-dir", g.debug_dir, "Write numbered intermediate stages here");

  MaskArgs mask_args;
  auto* mask = app.add_subcommand("mask", "Extract the skin mask of a color image");
  mask->add_option("input", mask_args.in, "PNG/PPM image")->required();
  mask->add_option("output", mask_args.out, "Mask output (.pgm or .png)")->required();

  OrientArgs orient_args;
  auto* orient = app.add_subcommand("orient", "Principal direction of a mask as JSON");
  orient->add_option("mask", orient_args.mask)->required();
  orient->add_option("--method", orient_args.method)->check(CLI::IsMember({"min_rect", "exhaustive"}));
  orient->add_option("--step", orient_args.step, "Angular step for the exhaustive search (degrees)");

  CurveArgs curve_args;
  auto* curve = app.add_subcommand("curve", "Raw and filtered feature curve as CSV");
  curve->add_option("mask", curve_args.mask)->required();
  curve->add_option("--csv", curve_args.csv)->required();

  KeypointArgs kp_args;
  auto* keypoints = app.add_subcommand("keypoints", "Wrist, distal point and edge keypoints as JSON");
  keypoints->add_option("mask", kp_args.mask)->required();
  keypoints->add_option("--json", kp_args.json, "Output file (default: stdout)");

  RegisterArgs reg_args;
  auto* reg = app.add_subcommand("register", "Register a moving image onto a fixed image");
  reg->add_option("fixed", reg_args.fixed)->required();
  reg->add_option("moving", reg_args.moving)->required();
  reg->add_option("--mode", reg_args.mode)->check(CLI::IsMember({"fam", "fam-tps"}));
  reg->add_option("--lambda", reg_args.lambda, "TPS regularization");
  reg->add_option("--ransac", reg_args.ransac, "Enable RANSAC with this pixel threshold");
  reg->add_option("--out", reg_args.out, "Output directory")->capture_default_str();

  EvaluateArgs eval_args;
  auto* eval = app.add_subcommand("evaluate", "Overlap and surface metrics of a registered mask");
  eval->add_option("fixed_mask", eval_args.fixed_mask)->required();
  eval->add_option("warped_mask", eval_args.warped_mask)->required();
  eval->add_option("--keypoints", eval_args.keypoints, "fixed.json moving.json")->expected(2);
  eval->add_option("--transform", eval_args.transform, "Transform JSON (moving -> fixed affine)");
  eval->add_option("--json", eval_args.json, "Output file (default: stdout)");

  SynthArgs synth_args;
  auto* syn = app.add_subcommand("synth", "Generate a synthetic forearm pair");
  syn->add_option("--angle", synth_args.angle, "Axial angle, degrees (folded onto 0-90)");
  syn->add_option("--in-plane", synth_args.in_plane, "In-plane angle of the fixed limb, [0, 180)");
  syn->add_option("--transform", synth_args.transform, "rot=..,scale=..,tx=..,ty=.. about the canvas center");
  syn->add_option("--bump", synth_args.bump, "Edge bump amplitude on the moving limb (pixels)");
  syn->add_option("--seed", synth_args.seed);
  syn->add_option("--preset", synth_args.preset)->check(CLI::IsMember({"registration", "projection"}));
  syn->add_option("--out", synth_args.out)->required();

  BatchArgs batch_args;
  auto* batch = app.add_subcommand("batch", "Register every pair listed in a manifest");
  batch->add_option("manifest", batch_args.manifest)->required();
  batch->add_option("--out", batch_args.out)->required();
  batch->add_option("--jobs", batch_args.jobs)->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << Json{{"error", "usage"}, {"code", kUsageExit}, {"stage", "cli"}, {"message", e.what()}}.dump() << "\n";
    return kUsageExit;
  }

  if (version) {
    std::cout << "limbreg " << kToolVersion << " (format " << kFormatVersion << ")\n";
    return 0;
  }

  try {
    if (*mask) run_mask(mask_args, g);
    else if (*orient) run_orient(orient_args, g);
    else if (*curve) run_curve(curve_args, g);
    else if (*keypoints) run_keypoints(kp_args, g);
    else if (*reg) run_register(reg_args, g);
    else if (*eval) run_evaluate(eval_args, g);
    else if (*syn) run_synth(synth_args, g);
    else if (*batch) return run_batch_cmd(batch_args, g);
    else {
      std::cerr << Json{{"error", "usage"}, {"code", kUsageExit}, {"stage", "cli"}, {"message", "no subcommand given"}}.dump()
                << "\n";
      return kUsageExit;
    }
  } catch (const Error& e) {
    std::cerr << error_json(e).dump() << "\n";
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << Json{{"error", "internal"}, {"code", kInternalExit}, {"stage", ""}, {"message", e.what()}}.dump() << "\n";
    return kInternalExit;
  }
  return 0;
}
