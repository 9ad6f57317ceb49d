#pragma once

#include <gtest/gtest.h>
#include <unistd.h>

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "limbreg/limbreg.hpp"

namespace test {

using namespace limbreg;

/// Inclusive pixel rectangle [x0, x1] x [y0, y1].
inline BinaryMask rect_mask(int w, int h, int x0, int y0, int x1, int y1) {
  BinaryMask m(w, h);
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) m.set(x, y, true);
  return m;
}

/// Pixel centers inside a rectangle of the given size centered at c and
/// rotated so its long side points along (cos a, sin a).
inline BinaryMask rotated_rect_mask(int w, int h, Point2 c, double len, double wid, double angle_deg) {
  const double a = angle_deg * std::numbers::pi / 180.0;
  const double ux = std::cos(a), uy = std::sin(a);
  BinaryMask m(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double dx = x - c.x, dy = y - c.y;
      const double along = dx * ux + dy * uy, across = -dx * uy + dy * ux;
      m.set(x, y, std::abs(along) <= len / 2 && std::abs(across) <= wid / 2);
    }
  return m;
}

inline BinaryMask ellipse_mask(int w, int h, Point2 c, double rx, double ry, double angle_deg = 0.0) {
  const double a = angle_deg * std::numbers::pi / 180.0;
  const double ux = std::cos(a), uy = std::sin(a);
  BinaryMask m(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double dx = x - c.x, dy = y - c.y;
      const double u = (dx * ux + dy * uy) / rx, v = (-dx * uy + dy * ux) / ry;
      m.set(x, y, u * u + v * v <= 1.0);
    }
  return m;
}

/// Pixels whose centers lie within half a pixel of segment ab.
inline BinaryMask segment_mask(int w, int h, Point2 a, Point2 b) {
  BinaryMask m(w, h);
  const double vx = b.x - a.x, vy = b.y - a.y, len2 = vx * vx + vy * vy;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double t = std::clamp(((x - a.x) * vx + (y - a.y) * vy) / len2, 0.0, 1.0);
      m.set(x, y, std::hypot(x - a.x - t * vx, y - a.y - t * vy) <= 0.5);
    }
  return m;
}

inline Image filled_rgb(int w, int h, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  Image img(w, h, 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      img.at(x, y, 0) = r;
      img.at(x, y, 1) = g;
      img.at(x, y, 2) = b;
    }
  return img;
}

inline void paint(Image& img, const BinaryMask& m, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x)
      if (m.at(x, y)) {
        img.at(x, y, 0) = r;
        img.at(x, y, 1) = g;
        img.at(x, y, 2) = b;
      }
}

inline std::size_t count_diff(const BinaryMask& a, const BinaryMask& b) {
  std::size_t n = 0;
  for (int y = 0; y < a.height(); ++y)
    for (int x = 0; x < a.width(); ++x) n += a.at(x, y) != b.at(x, y);
  return n;
}

inline std::size_t count_and(const BinaryMask& a, const BinaryMask& b) {
  std::size_t n = 0;
  for (int y = 0; y < a.height(); ++y)
    for (int x = 0; x < a.width(); ++x) n += a.at(x, y) && b.at(x, y);
  return n;
}

/// Fresh empty directory under the gtest temp dir, private to this process
/// (ctest runs tests in parallel processes).
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
  const std::string test = info ? std::string(info->test_suite_name()) + "." + info->name() + "." : "";
  auto dir = std::filesystem::path(::testing::TempDir()) / "limbreg_tests" /
             (std::to_string(::getpid()) + "." + test + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

template <class F>
ErrorCode error_code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected a limbreg::Error";
  return ErrorCode::Io;
}

}  // namespace test
