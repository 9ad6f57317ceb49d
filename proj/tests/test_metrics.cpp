#include "support.hpp"

using namespace test;

namespace {

double brute_directed(const std::vector<Point2>& a, const std::vector<Point2>& b, bool mean) {
  double acc = 0;
  for (const Point2& p : a) {
    double best = std::numeric_limits<double>::infinity();
    for (const Point2& q : b) best = std::min(best, distance(p, q));
    acc = mean ? acc + best : std::max(acc, best);
  }
  return mean ? acc / static_cast<double>(a.size()) : acc;
}

BinaryMask random_blob_mask(std::mt19937& rng, int w, int h) {
  std::uniform_real_distribution<double> U(0, 1);
  BinaryMask m(w, h);
  const int blobs = 1 + static_cast<int>(rng() % 4);
  for (int k = 0; k < blobs; ++k) {
    const Point2 c{U(rng) * w, U(rng) * h};
    const double rx = 3 + U(rng) * w / 3, ry = 3 + U(rng) * h / 3;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        if (std::pow((x - c.x) / rx, 2) + std::pow((y - c.y) / ry, 2) <= 1) m.set(x, y);
  }
  if (m.none()) m.set(w / 2, h / 2);
  return m;
}

BinaryMask rot90(const BinaryMask& m) {
  BinaryMask out(m.height(), m.width());
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x)
      if (m.at(x, y)) out.set(m.height() - 1 - y, x);
  return out;
}

BinaryMask shift(const BinaryMask& m, int dx, int dy) {
  BinaryMask out(m.width() + dx, m.height() + dy);
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x)
      if (m.at(x, y)) out.set(x + dx, y + dy);
  return out;
}

}  // namespace

TEST(Overlap, Examples) {
  const BinaryMask a = rect_mask(30, 30, 0, 0, 9, 9);
  EXPECT_EQ(dice(a, a), 1.0);
  EXPECT_EQ(jaccard(a, a), 1.0);
  const BinaryMask b = rect_mask(30, 30, 20, 20, 29, 29);
  EXPECT_EQ(dice(a, b), 0.0);
  EXPECT_EQ(jaccard(a, b), 0.0);
  const BinaryMask c = rect_mask(30, 30, 5, 0, 14, 9);  // overlaps a in 50 px
  EXPECT_DOUBLE_EQ(dice(a, c), 0.5);
  EXPECT_DOUBLE_EQ(jaccard(a, c), 1.0 / 3.0);
}

TEST(Overlap, Errors) {
  EXPECT_EQ(error_code_of([] { dice(BinaryMask(4, 4), BinaryMask(4, 4)); }), ErrorCode::UndefinedMetric);
  EXPECT_EQ(error_code_of([] { jaccard(BinaryMask(4, 4), BinaryMask(4, 4)); }), ErrorCode::UndefinedMetric);
  EXPECT_EQ(error_code_of([] { dice(BinaryMask(4, 4, true), BinaryMask(5, 4, true)); }), ErrorCode::Size);
}

TEST(Boundary, Examples) {
  const auto sq = boundary_points(rect_mask(9, 9, 3, 3, 5, 5));
  EXPECT_EQ(sq.size(), 8u);
  for (const Point2& p : sq) EXPECT_FALSE(p.x == 4 && p.y == 4);
  const auto one = boundary_points(rect_mask(5, 5, 2, 2, 2, 2));
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].x, 2);
  EXPECT_EQ(boundary_points(BinaryMask(10, 6, true)).size(), 2u * 10 + 2u * 4);
  EXPECT_EQ(error_code_of([] { boundary_points(BinaryMask(3, 3)); }), ErrorCode::EmptyMask);
}

TEST(SurfaceDistance, Examples) {
  const std::vector<Point2> o{{0, 0}};
  EXPECT_EQ(hausdorff(o, o), 0.0);
  EXPECT_EQ(asd(o, o), 0.0);
  EXPECT_EQ(assd(o, o), 0.0);
  EXPECT_DOUBLE_EQ(hausdorff(o, std::vector<Point2>{{3, 4}}), 5.0);
  EXPECT_DOUBLE_EQ(hausdorff(std::vector<Point2>{{0, 0}, {10, 0}}, o), 10.0);
  EXPECT_DOUBLE_EQ(asd(std::vector<Point2>{{0, 0}, {0, 2}}, o), 1.0);
  const std::vector<Point2> far{{0, 0}, {0, 100}};
  EXPECT_EQ(asd(o, far), 0.0);
  EXPECT_NEAR(assd(o, far), 100.0 / 3.0, 1e-12);
  EXPECT_EQ(error_code_of([&] { hausdorff(o, std::vector<Point2>{}); }), ErrorCode::EmptySet);
  EXPECT_EQ(error_code_of([&] { asd(std::vector<Point2>{}, o); }), ErrorCode::EmptySet);
}

TEST(SurfaceDistance, MatchesBruteForce) {
  std::mt19937 rng(41);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Point2> a, b;
    const int spread = 10 + static_cast<int>(rng() % 500);
    for (int i = 0, n = 1 + static_cast<int>(rng() % 150); i < n; ++i)
      a.push_back({double(rng() % spread), double(rng() % (spread / 2 + 1))});
    for (int i = 0, n = 1 + static_cast<int>(rng() % 150); i < n; ++i)
      b.push_back({double(rng() % spread) + 7, double(rng() % spread)});
    const double ab = brute_directed(a, b, false), ba = brute_directed(b, a, false);
    EXPECT_DOUBLE_EQ(hausdorff(a, b), std::max(ab, ba));
    EXPECT_DOUBLE_EQ(hausdorff(a, b), hausdorff(b, a));
    EXPECT_NEAR(asd(a, b), brute_directed(a, b, true), 1e-9);
    const double sym = (brute_directed(a, b, true) * a.size() + brute_directed(b, a, true) * b.size()) / (a.size() + b.size());
    EXPECT_NEAR(assd(a, b), sym, 1e-9);
    EXPECT_LE(assd(a, b), hausdorff(a, b) + 1e-12);
  }
}

TEST(Metrics, IdentitiesOnRandomMaskPairs) {
  std::mt19937 rng(42);
  for (int trial = 0; trial < 200; ++trial) {
    const BinaryMask a = random_blob_mask(rng, 64, 48), b = random_blob_mask(rng, 64, 48);
    const double d = dice(a, b), j = jaccard(a, b);
    EXPECT_NEAR(j, d / (2 - d), 1e-12);
    EXPECT_LE(j, d);
    EXPECT_EQ(d, dice(b, a));
    EXPECT_EQ(j, jaccard(b, a));
    const auto ba = boundary_points(a), bb = boundary_points(b);
    EXPECT_LE(assd(ba, bb), hausdorff(ba, bb) + 1e-12);
  }
}

TEST(Metrics, InvariantUnderSharedRigidMotion) {
  std::mt19937 rng(43);
  for (int trial = 0; trial < 30; ++trial) {
    const BinaryMask a = random_blob_mask(rng, 50, 40), b = random_blob_mask(rng, 50, 40);
    const RegistrationReport r0 = evaluate_registration(a, b);
    const int dx = static_cast<int>(rng() % 20), dy = static_cast<int>(rng() % 20);
    for (const auto& [ma, mb] : {std::pair{shift(a, dx, dy), shift(b, dx, dy)}, std::pair{rot90(a), rot90(b)}}) {
      const RegistrationReport r1 = evaluate_registration(ma, mb);
      EXPECT_DOUBLE_EQ(r1.dice, r0.dice);
      EXPECT_DOUBLE_EQ(r1.jaccard, r0.jaccard);
      EXPECT_NEAR(r1.hausdorff, r0.hausdorff, 0.5);
      EXPECT_NEAR(r1.asd, r0.asd, 0.5);
      EXPECT_NEAR(r1.assd, r0.assd, 0.5);
    }
  }
}

TEST(KeypointEd, Examples) {
  std::vector<Point2> pts;
  for (int i = 0; i < 20; ++i) pts.push_back({10.0 * i, 3.0 * i});
  const KeypointError id = keypoint_ed(AffineTransform::identity(), pts, pts);
  EXPECT_EQ(id.mean, 0.0);
  for (double d : id.distances) EXPECT_EQ(d, 0.0);

  const AffineTransform h{{1.05, -0.2, 14, 0.2, 1.05, -6}};
  std::vector<Point2> truth;
  for (const Point2& p : pts) truth.push_back(h.apply(p));
  EXPECT_LT(keypoint_ed(h, pts, truth).mean, 1e-6);

  std::mt19937 rng(44);
  std::uniform_real_distribution<double> J(-2, 2);
  std::vector<Point2> jittered = truth;
  for (Point2& p : jittered) {
    p.x += J(rng);
    p.y += J(rng);
  }
  EXPECT_LE(keypoint_ed(h, pts, jittered).mean, 2 * std::sqrt(2.0));

  EXPECT_EQ(error_code_of([&] { keypoint_ed(h, pts, std::vector<Point2>(3)); }), ErrorCode::Matching);
}

TEST(Report, EvaluatesRegisteredAgainstFixed) {
  const BinaryMask fixed = rect_mask(40, 40, 10, 10, 29, 29);
  const BinaryMask reg = rect_mask(40, 40, 12, 10, 31, 29);
  const RegistrationReport r = evaluate_registration(reg, fixed);
  EXPECT_DOUBLE_EQ(r.dice, 2.0 * 18 * 20 / 800);
  EXPECT_DOUBLE_EQ(r.hausdorff, 2.0);
  EXPECT_LE(r.assd, r.hausdorff);
}
