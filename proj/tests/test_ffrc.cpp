#include "oracles.hpp"
#include "support.hpp"

#include <Eigen/Dense>

using namespace test;

namespace {

FeatureCurve curve_of(std::vector<double> v) {
  FeatureCurve c;
  c.values = std::move(v);
  return c;
}

// Textbook matrix-form Kalman filter for the constant-velocity model.
std::vector<Eigen::Vector2d> reference_kalman(const std::vector<double>& z, double q, double r, double p0) {
  Eigen::Matrix2d F;
  F << 1, 1, 0, 1;
  const Eigen::RowVector2d H(1, 0);
  const Eigen::Matrix2d Q = q * Eigen::Matrix2d::Identity();
  Eigen::Vector2d x(z[0], 0);
  Eigen::Matrix2d P = p0 * Eigen::Matrix2d::Identity();
  std::vector<Eigen::Vector2d> out;
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (i > 0) {
      x = F * x;
      P = F * P * F.transpose() + Q;
    }
    const double S = (H * P * H.transpose())(0, 0) + r;
    const Eigen::Vector2d K = P * H.transpose() / S;
    x += K * (z[i] - (H * x)(0, 0));
    P = (Eigen::Matrix2d::Identity() - K * H) * P;
    out.push_back(x);
  }
  return out;
}

bool is_boundary(const BinaryMask& m, Point2 p) {
  const int x = static_cast<int>(p.x), y = static_cast<int>(p.y);
  return m.at(x, y) && (!m.at_or_false(x, y - 1) || !m.at_or_false(x, y + 1));
}

}  // namespace

TEST(Ffrc, FullMaskIsConstant) {
  const FeatureCurve c = compute_ffrc(BinaryMask(17, 9, true));
  ASSERT_EQ(c.values.size(), 17u);
  EXPECT_EQ(c.kind, CurveKind::Raw);
  for (double v : c.values) EXPECT_EQ(v, 9.0);
}

TEST(Ffrc, RectangleIndicator) {
  const FeatureCurve c = compute_ffrc(rect_mask(100, 30, 30, 5, 69, 14));
  for (int x = 0; x < 100; ++x) EXPECT_EQ(c.values[x], (x >= 30 && x <= 69) ? 10.0 : 0.0) << x;
}

TEST(Ffrc, RightTriangleMatchesCountingOracle) {
  // Triangle (0,0), (100,0), (100,50): pixel centre (x, y) is inside when
  // 0 <= y <= x / 2.
  BinaryMask m(101, 51);
  for (int y = 0; y <= 50; ++y)
    for (int x = 0; x <= 100; ++x) m.set(x, y, 2 * y <= x);
  const FeatureCurve c = compute_ffrc(m);
  for (int x = 0; x <= 100; ++x) EXPECT_EQ(c.values[x], x / 2 + 1) << x;
}

TEST(Ffrc, SumAndVerticalTranslationInvariance) {
  std::mt19937 rng(21);
  for (int trial = 0; trial < 30; ++trial) {
    BinaryMask m(40, 60), shifted(40, 60);
    const int dy = static_cast<int>(rng() % 20);
    std::size_t total = 0;
    for (int y = 0; y < 40; ++y)
      for (int x = 0; x < 40; ++x)
        if (rng() % 3 == 0) {
          m.set(x, y);
          shifted.set(x, y + dy);
          ++total;
        }
    const FeatureCurve a = compute_ffrc(m), b = compute_ffrc(shifted);
    EXPECT_EQ(std::accumulate(a.values.begin(), a.values.end(), 0.0), static_cast<double>(total));
    EXPECT_EQ(a.values, b.values);
  }
}

TEST(Kalman, ConstantCurveSettles) {
  const FeatureCurve f = kalman_smooth(curve_of(std::vector<double>(100, 50.0)));
  EXPECT_EQ(f.kind, CurveKind::Filtered);
  for (std::size_t i = 10; i < f.values.size(); ++i) EXPECT_NEAR(f.values[i], 50.0, 0.5);
}

TEST(Kalman, MatchesMatrixReferenceAndTracksRamp) {
  std::vector<double> z;
  for (int i = 0; i < 200; ++i) z.push_back(2.0 * i);
  KalmanParams p;
  const auto states = kalman_track(z, p);
  const auto ref = reference_kalman(z, p.process_noise_q, p.measurement_noise_r, p.initial_variance_p0);
  for (std::size_t i = 0; i < z.size(); ++i) {
    EXPECT_NEAR(states[i].value, ref[i](0), 1e-9);
    EXPECT_NEAR(states[i].slope, ref[i](1), 1e-9);
  }
  for (std::size_t i = 50; i < z.size(); ++i) EXPECT_NEAR(states[i].slope, 2.0, 0.1);
}

TEST(Kalman, MatchesMatrixReferenceOnRandomInputs) {
  std::mt19937 rng(77);
  std::uniform_real_distribution<double> U(0, 100), Qd(0.001, 1), Rd(0.5, 20);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> z(50 + rng() % 100);
    for (double& v : z) v = U(rng);
    KalmanParams p{Qd(rng), Rd(rng), Qd(rng) * 5};
    const auto states = kalman_track(z, p);
    const auto ref = reference_kalman(z, p.process_noise_q, p.measurement_noise_r, p.initial_variance_p0);
    for (std::size_t i = 0; i < z.size(); ++i) EXPECT_NEAR(states[i].value, ref[i](0), 1e-8);
  }
}

TEST(Kalman, ReducesNoiseOnRamp) {
  int better = 0;
  for (unsigned seed = 1; seed <= 100; ++seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> noise(-5, 5);
    std::vector<double> truth, z;
    for (int i = 0; i < 300; ++i) {
      truth.push_back(100 + 0.5 * i);
      z.push_back(truth.back() + noise(rng));
    }
    const FeatureCurve f = kalman_smooth(curve_of(z));
    double se_f = 0, se_z = 0;
    for (std::size_t i = 30; i < z.size(); ++i) {
      se_f += (f.values[i] - truth[i]) * (f.values[i] - truth[i]);
      se_z += (z[i] - truth[i]) * (z[i] - truth[i]);
    }
    better += se_f < se_z;
  }
  EXPECT_EQ(better, 100);
}

TEST(Kalman, OutputStaysInBandAndKeepsLength) {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> z(2 + rng() % 200);
    for (double& v : z) v = static_cast<double>(rng() % 3 == 0 ? rng() % 200 : 0);
    const KalmanParams p{0.01 + (rng() % 100) / 10.0, 0.5 + (rng() % 100) / 5.0, 1.0};
    const FeatureCurve f = kalman_smooth(curve_of(z), p);
    ASSERT_EQ(f.values.size(), z.size());
    const auto [lo, hi] = std::minmax_element(z.begin(), z.end());
    const double band = 3 * std::sqrt(p.measurement_noise_r);
    for (double v : f.values) {
      EXPECT_GE(v, std::max(0.0, *lo - band));
      EXPECT_LE(v, *hi + band);
    }
  }
}

TEST(Kalman, ParameterErrors) {
  const FeatureCurve c = curve_of({1, 2, 3});
  EXPECT_EQ(error_code_of([&] { kalman_smooth(c, {0.0, 4.0, 1.0}); }), ErrorCode::Parameter);
  EXPECT_EQ(error_code_of([&] { kalman_smooth(c, {0.01, -1.0, 1.0}); }), ErrorCode::Parameter);
  EXPECT_EQ(error_code_of([&] { kalman_smooth(c, {0.01, 4.0, 0.0}); }), ErrorCode::Parameter);
  EXPECT_EQ(error_code_of([&] { kalman_smooth(curve_of({1})); }), ErrorCode::Parameter);
}

TEST(WristWindow, DefaultRule) {
  EXPECT_EQ(default_wrist_window(1680), 64);
  EXPECT_EQ(default_wrist_window(840), 52);
  EXPECT_EQ(default_wrist_window(100), 8);
  EXPECT_EQ(default_wrist_window(360), 22);  // 22.5 rounds to 23, made even
  EXPECT_EQ(default_wrist_window(376), 24);
}

TEST(DetectWrist, SingleValley) {
  std::vector<double> v;
  for (int x = 0; x < 240; ++x) v.push_back(20.0 + std::abs(x - 120));
  EXPECT_EQ(detect_wrist(curve_of(v), 20), 120);
}

TEST(DetectWrist, DeepValleyBeatsShallow) {
  // W curve: 60 at the ends and at 120, valleys 40 at x = 80 and 10 at x = 160.
  std::vector<double> v(241);
  for (int x = 0; x <= 240; ++x) {
    if (x <= 80) v[x] = 60 - 20.0 * x / 80;
    else if (x <= 120) v[x] = 40 + 20.0 * (x - 80) / 40;
    else if (x <= 160) v[x] = 60 - 50.0 * (x - 120) / 40;
    else v[x] = 10 + 50.0 * (x - 160) / 80;
  }
  // Both windows have 19 of 20 samples strictly above the valley value
  // (i = L/2 lands on the valley itself), so the deeper valley wins.
  EXPECT_EQ(wrist_score(v, 80, 20), 19);
  EXPECT_EQ(wrist_score(v, 160, 20), 19);
  EXPECT_EQ(detect_wrist(curve_of(v), 20), 160);
  EXPECT_EQ(oracle::detect_wrist(v, 20), 160);
}

TEST(DetectWrist, PlateauReportsLeftmostColumn) {
  std::vector<double> v;
  for (int x = 0; x < 100; ++x) v.push_back(x < 50 ? 60 - x : 10 + (x - 50));
  for (int x = 48; x <= 52; ++x) v[x] = 12;  // flat bottom, width 5
  const int w = detect_wrist(curve_of(v), 10);
  EXPECT_EQ(w, 48);
  EXPECT_EQ(oracle::detect_wrist(v, 10), 48);
}

TEST(DetectWrist, ShallowWigglesAreNotCandidates) {
  std::vector<double> v(50, 30.0);
  v[25] = 29.0;  // prominence 1 < 2
  EXPECT_EQ(error_code_of([&] { detect_wrist(curve_of(v), 10); }), ErrorCode::NoValley);
  EXPECT_EQ(error_code_of([&] { detect_wrist(curve_of(std::vector<double>(30, 5.0)), 10); }), ErrorCode::NoValley);
}

TEST(DetectWrist, WindowValidation) {
  const FeatureCurve c = curve_of({5, 3, 5});
  EXPECT_EQ(error_code_of([&] { detect_wrist(c, 7); }), ErrorCode::Parameter);
  EXPECT_EQ(error_code_of([&] { detect_wrist(c, 2); }), ErrorCode::Parameter);
}

TEST(DetectWrist, MatchesDirectEvaluationOnRandomCurves) {
  std::mt19937 rng(555);
  int compared = 0;
  for (int i = 0; i < 200; ++i) {
    const auto c = oracle::random_piecewise_linear(rng);
    const int L = 2 * (2 + static_cast<int>(rng() % 30));
    const int expected = oracle::detect_wrist(c, L);
    if (expected < 0) {
      EXPECT_EQ(error_code_of([&] { detect_wrist(curve_of(c), L); }), ErrorCode::NoValley);
      continue;
    }
    ++compared;
    ASSERT_EQ(detect_wrist(curve_of(c), L), expected) << "curve " << i;
  }
  EXPECT_GE(compared, 150);
}

TEST(DistalPoint, FarthestColumn) {
  EXPECT_EQ(distal_point(rect_mask(100, 20, 30, 5, 69, 14), 60), 30);
  EXPECT_EQ(distal_point(rect_mask(100, 20, 30, 5, 69, 14), 35), 69);
  EXPECT_EQ(error_code_of([] { distal_point(BinaryMask(5, 5), 2); }), ErrorCode::EmptyMask);
}

TEST(DistalPoint, SymmetricTieIsDeterministic) {
  const BinaryMask sym = rect_mask(101, 20, 20, 5, 80, 14);
  EXPECT_EQ(distal_point(sym, 50), 20);  // equal mass: smaller column
  BinaryMask heavier_right = sym;
  for (int x = 51; x <= 80; ++x) heavier_right.set(x, 15);
  EXPECT_EQ(distal_point(heavier_right, 50), 80);
}

TEST(DistalPoint, GeneratorElbowColumn) {
  auto p = synth::registration_fixture();
  p.canvas_width = 475;  // (475 - 1) / 2 - 450 / 2 = 12
  const auto b = synth::generate_forearm(p);
  ASSERT_EQ(b.elbow_column, 12);
  const int wrist = detect_wrist(kalman_smooth(compute_ffrc(b.mask)), default_wrist_window(p.canvas_width));
  EXPECT_EQ(distal_point(b.mask, wrist), 12);
}

TEST(EdgePoints, RectangleRows) {
  const BinaryMask m = rect_mask(100, 60, 10, 10, 89, 49);
  const KeypointSet kp = sample_edge_points(m, 89, 10, 10);
  ASSERT_EQ(kp.points.size(), 20u);
  for (std::size_t i = 0; i < 20; i += 2) {
    EXPECT_EQ(kp.points[i].y, 10.0);
    EXPECT_EQ(kp.points[i + 1].y, 49.0);
    EXPECT_EQ(kp.points[i].x, kp.points[i + 1].x);
  }
  EXPECT_EQ(kp.points.front().x, 10.0);
  EXPECT_EQ(kp.points.back().x, 89.0);
}

TEST(EdgePoints, TwoColumnsAreTheEnds) {
  const KeypointSet kp = sample_edge_points(rect_mask(100, 60, 10, 10, 89, 49), 89, 10, 2);
  ASSERT_EQ(kp.points.size(), 4u);
  EXPECT_EQ(kp.points[0].x, 10.0);
  EXPECT_EQ(kp.points[3].x, 89.0);
}

TEST(EdgePoints, Errors) {
  BinaryMask gap = rect_mask(100, 60, 10, 10, 89, 49);
  for (int y = 0; y < 60; ++y) gap.set(50, y, false);
  EXPECT_EQ(error_code_of([&] { sample_edge_points(gap, 89, 10, 80); }), ErrorCode::MaskGap);
  const BinaryMask m = rect_mask(100, 60, 10, 10, 89, 49);
  EXPECT_EQ(error_code_of([&] { sample_edge_points(m, 50, 50); }), ErrorCode::Parameter);
  EXPECT_EQ(error_code_of([&] { sample_edge_points(m, 89, 10, 1); }), ErrorCode::Parameter);
  EXPECT_EQ(error_code_of([&] { sample_edge_points(m, 15, 10, 10); }), ErrorCode::Parameter);
}

TEST(EdgePoints, FollowGeneratorSilhouette) {
  for (double axial : {0.0, 45.0, 90.0}) {
    auto p = synth::registration_fixture();
    p.axial_angle = axial;
    const auto b = synth::generate_forearm(p);
    const int wrist = detect_wrist(kalman_smooth(compute_ffrc(b.mask)), default_wrist_window(p.canvas_width));
    const int distal = distal_point(b.mask, wrist);
    const KeypointSet kp = sample_edge_points(b.mask, wrist, distal);
    ASSERT_EQ(kp.points.size(), 20u);
    const double cy = (p.canvas_height - 1) * 0.5;
    const synth::Silhouette sil(p);
    const double elbow_x = (p.canvas_width - 1) * 0.5 - p.total_length() / 2;
    for (std::size_t i = 0; i < kp.points.size(); i += 2) {
      const double h = sil.half_width(kp.points[i].x - elbow_x);
      // Topmost / bottommost pixel centres inside |y - cy| <= h.
      EXPECT_NEAR(kp.points[i].y, std::ceil(cy - h), 1.0) << axial << " col " << kp.points[i].x;
      EXPECT_NEAR(kp.points[i + 1].y, std::floor(cy + h), 1.0) << axial << " col " << kp.points[i].x;
    }
  }
}

TEST(EdgePoints, LieOnTheBoundary) {
  std::mt19937 rng(31);
  for (int trial = 0; trial < 30; ++trial) {
    auto p = synth::registration_fixture();
    p.axial_angle = static_cast<double>(rng() % 91);
    p.seed = rng();
    const auto b = synth::generate_forearm(p);
    const BinaryMask m = extract_skin_mask(b.image);
    const int wrist = detect_wrist(kalman_smooth(compute_ffrc(m)), default_wrist_window(m.width()));
    const KeypointSet kp = sample_edge_points(m, wrist, distal_point(m, wrist), 2 + static_cast<int>(rng() % 30));
    ASSERT_EQ(kp.points.size() % 2, 0u);
    for (const Point2& q : kp.points) EXPECT_TRUE(is_boundary(m, q));
  }
}

TEST(CurvePeak, TieBreaks) {
  const auto c = curve_peak(curve_of(std::vector<double>(20, 7.0)));
  EXPECT_EQ(c.x, 0);
  EXPECT_EQ(c.value, 7.0);
  std::vector<double> v(100, 1.0);
  v[10] = v[90] = 5.0;
  EXPECT_EQ(curve_peak(curve_of(v)).x, 10);
  EXPECT_EQ(error_code_of([] { curve_peak(FeatureCurve{}); }), ErrorCode::Parameter);
}

TEST(CurvePeak, PalmApexOfGenerator) {
  auto p = synth::projection_fixture();
  const auto b = synth::generate_forearm(p);
  const auto analytic = curve_peak(b.analytic);
  const auto measured = curve_peak(compute_ffrc(b.mask));
  EXPECT_EQ(analytic.x, static_cast<int>(std::ceil(b.wrist_column)));
  EXPECT_NEAR(measured.x, analytic.x, 1);
}

TEST(CurvePeak, RotationSeriesIsNonIncreasing) {
  std::vector<double> peaks;
  for (int a = 0; a <= 90; a += 5) {
    auto p = synth::projection_fixture();
    p.axial_angle = a;
    peaks.push_back(curve_peak(compute_ffrc(synth::generate_forearm(p).mask)).value);
  }
  int inversions = 0;
  for (std::size_t i = 1; i < peaks.size(); ++i)
    if (peaks[i] > peaks[i - 1]) {
      ++inversions;
      EXPECT_LE(peaks[i] - peaks[i - 1], 2.0);
    }
  EXPECT_LE(inversions, 1);
}
