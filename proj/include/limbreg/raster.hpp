#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "limbreg/error.hpp"

namespace limbreg {

/// Continuous 2-D position in index coordinates: (column, row), pixel
/// centers sit on integers.
struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

inline double distance(Point2 a, Point2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

/// Dense 8-bit raster with 1 (gray) or 3 (RGB) interleaved channels, row-major.
class Image {
 public:
  Image() = default;

  Image(int width, int height, int channels, std::uint8_t fill = 0)
      : width_(width), height_(height), channels_(channels) {
    validate_shape();
    data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
  }

  Image(int width, int height, int channels, std::vector<std::uint8_t> data)
      : width_(width), height_(height), channels_(channels), data_(std::move(data)) {
    validate_shape();
    if (data_.size() != static_cast<std::size_t>(width) * height * channels)
      throw Error(ErrorCode::Size, "image data length does not match width*height*channels");
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return channels_; }
  bool empty() const noexcept { return data_.empty(); }

  std::uint8_t& at(int x, int y, int c = 0) { return data_[index(x, y, c)]; }
  std::uint8_t at(int x, int y, int c = 0) const { return data_[index(x, y, c)]; }

  std::span<std::uint8_t> data() noexcept { return data_; }
  std::span<const std::uint8_t> data() const noexcept { return data_; }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  void validate_shape() const {
    if (width_ < 1 || height_ < 1) throw Error(ErrorCode::Size, "image dimensions must be >= 1");
    if (channels_ != 1 && channels_ != 3)
      throw Error(ErrorCode::ChannelMismatch, "image must have 1 or 3 channels");
  }
  std::size_t index(int x, int y, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<std::uint8_t> data_;
};

/// Dense boolean raster; foreground is the limb.
class BinaryMask {
 public:
  BinaryMask() = default;

  BinaryMask(int width, int height, bool fill = false) : width_(width), height_(height) {
    if (width < 1 || height < 1) throw Error(ErrorCode::Size, "mask dimensions must be >= 1");
    data_.assign(static_cast<std::size_t>(width) * height, fill ? 1 : 0);
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }

  bool contains(int x, int y) const noexcept { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  bool at(int x, int y) const { return data_[static_cast<std::size_t>(y) * width_ + x] != 0; }
  /// Out-of-canvas reads are background.
  bool at_or_false(int x, int y) const { return contains(x, y) && at(x, y); }
  void set(int x, int y, bool v = true) { data_[static_cast<std::size_t>(y) * width_ + x] = v ? 1 : 0; }

  std::size_t count() const {
    return static_cast<std::size_t>(std::count(data_.begin(), data_.end(), std::uint8_t{1}));
  }
  bool none() const { return count() == 0; }

  std::span<const std::uint8_t> data() const noexcept { return data_; }

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;  // 0 or 1
};

inline Image mask_to_image(const BinaryMask& mask) {
  Image out(mask.width(), mask.height(), 1);
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x) out.at(x, y) = mask.at(x, y) ? 255 : 0;
  return out;
}

/// Any non-zero gray value is foreground.
inline BinaryMask mask_from_image(const Image& image) {
  if (image.channels() != 1) throw Error(ErrorCode::ChannelMismatch, "mask image must be single-channel");
  BinaryMask out(image.width(), image.height());
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x) out.set(x, y, image.at(x, y) > 0);
  return out;
}

inline std::uint8_t clamp_round_u8(double v) {
  return static_cast<std::uint8_t>(std::clamp<long>(std::lround(v), 0, 255));
}

// ---------------------------------------------------------------------------
// Color

/// Full-range BT.601 red-difference chroma.
inline std::uint8_t cr_value(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  return clamp_round_u8(128.0 + 0.5 * r - 0.418688 * g - 0.081312 * b);
}

inline Image rgb_to_cr(const Image& image) {
  if (image.channels() != 3) throw Error(ErrorCode::ChannelMismatch, "rgb_to_cr expects a 3-channel image");
  Image out(image.width(), image.height(), 1);
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x)
      out.at(x, y) = cr_value(image.at(x, y, 0), image.at(x, y, 1), image.at(x, y, 2));
  return out;
}

// ---------------------------------------------------------------------------
// Smoothing

inline constexpr double kGaussianSigma = 1.1;

/// Normalized 1-D taps; the 5x5 kernel is their outer product.
inline std::array<double, 5> gaussian_kernel5(double sigma = kGaussianSigma) {
  std::array<double, 5> k{};
  double sum = 0.0;
  for (int i = 0; i < 5; ++i) {
    const double d = i - 2;
    k[i] = std::exp(-d * d / (2.0 * sigma * sigma));
    sum += k[i];
  }
  for (double& v : k) v /= sum;
  return k;
}

/// 5x5 Gaussian with edge replication. Separable passes run in double; the
/// output is rounded once.
inline Image gaussian_blur5(const Image& image) {
  if (image.channels() != 1) throw Error(ErrorCode::ChannelMismatch, "gaussian_blur5 expects a 1-channel image");
  const int w = image.width();
  const int h = image.height();
  if (w < 5 || h < 5) throw Error(ErrorCode::Size, "gaussian_blur5 needs an image of at least 5x5");
  const auto k = gaussian_kernel5();

  std::vector<double> rows(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = 0; i < 5; ++i) acc += k[i] * image.at(std::clamp(x + i - 2, 0, w - 1), y);
      rows[static_cast<std::size_t>(y) * w + x] = acc;
    }

  Image out(w, h, 1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = 0; i < 5; ++i) acc += k[i] * rows[static_cast<std::size_t>(std::clamp(y + i - 2, 0, h - 1)) * w + x];
      out.at(x, y) = clamp_round_u8(acc);
    }
  return out;
}

// ---------------------------------------------------------------------------
// Resampling

/// Bilinear sample of channel c at a continuous index position; taps outside
/// the raster read as 0.
inline double sample_bilinear(const Image& src, double px, double py, int c) {
  if (!(px > -1.0 && py > -1.0 && px < src.width() && py < src.height())) return 0.0;
  const int x0 = static_cast<int>(std::floor(px));
  const int y0 = static_cast<int>(std::floor(py));
  const double fx = px - x0;
  const double fy = py - y0;
  auto tap = [&](int x, int y) -> double {
    return (x >= 0 && y >= 0 && x < src.width() && y < src.height()) ? src.at(x, y, c) : 0.0;
  };
  return (1 - fx) * (1 - fy) * tap(x0, y0) + fx * (1 - fy) * tap(x0 + 1, y0) +
         (1 - fx) * fy * tap(x0, y0 + 1) + fx * fy * tap(x0 + 1, y0 + 1);
}

inline bool sample_nearest(const BinaryMask& src, double px, double py) {
  if (!std::isfinite(px) || !std::isfinite(py)) return false;
  const double rx = std::floor(px + 0.5);
  const double ry = std::floor(py + 0.5);
  if (rx < 0 || ry < 0 || rx >= src.width() || ry >= src.height()) return false;
  return src.at(static_cast<int>(rx), static_cast<int>(ry));
}

/// Backward mapping: `source_of(x, y)` returns the source position for output
/// pixel (x, y).
template <class SourceOf>
Image resample(const Image& src, int out_width, int out_height, SourceOf&& source_of) {
  Image out(out_width, out_height, src.channels());
  for (int y = 0; y < out_height; ++y)
    for (int x = 0; x < out_width; ++x) {
      const Point2 p = source_of(x, y);
      for (int c = 0; c < src.channels(); ++c) out.at(x, y, c) = clamp_round_u8(sample_bilinear(src, p.x, p.y, c));
    }
  return out;
}

template <class SourceOf>
BinaryMask resample(const BinaryMask& src, int out_width, int out_height, SourceOf&& source_of) {
  BinaryMask out(out_width, out_height);
  for (int y = 0; y < out_height; ++y)
    for (int x = 0; x < out_width; ++x) {
      const Point2 p = source_of(x, y);
      out.set(x, y, sample_nearest(src, p.x, p.y));
    }
  return out;
}

/// cos/sin of an angle in degrees, exact on multiples of 90.
inline std::pair<double, double> cos_sin_deg(double deg) {
  const double r = std::fmod(deg, 360.0);
  const double m = r < 0 ? r + 360.0 : r;
  if (m == 0.0) return {1.0, 0.0};
  if (m == 90.0) return {0.0, 1.0};
  if (m == 180.0) return {-1.0, 0.0};
  if (m == 270.0) return {0.0, -1.0};
  const double rad = m * std::numbers::pi / 180.0;
  return {std::cos(rad), std::sin(rad)};
}

/// Geometry of rotating a W x H raster about its center by -angle onto a
/// canvas sized to the rotated bounding box. An angle theta names the
/// direction (cos theta, sin theta) in (column, row) coordinates; after the
/// rotation that direction points along +x.
struct RotationFrame {
  double angle_deg = 0.0;
  int src_width = 0;
  int src_height = 0;
  int dst_width = 0;
  int dst_height = 0;
  double cos_a = 1.0;
  double sin_a = 0.0;

  static RotationFrame make(int width, int height, double angle_deg) {
    if (!std::isfinite(angle_deg)) throw Error(ErrorCode::Parameter, "rotation angle must be finite");
    RotationFrame f;
    f.angle_deg = angle_deg;
    f.src_width = width;
    f.src_height = height;
    std::tie(f.cos_a, f.sin_a) = cos_sin_deg(angle_deg);
    const double bw = width * std::abs(f.cos_a) + height * std::abs(f.sin_a);
    const double bh = width * std::abs(f.sin_a) + height * std::abs(f.cos_a);
    f.dst_width = std::max(1, static_cast<int>(std::ceil(bw - 1e-6)));
    f.dst_height = std::max(1, static_cast<int>(std::ceil(bh - 1e-6)));
    return f;
  }

  Point2 src_center() const { return {(src_width - 1) * 0.5, (src_height - 1) * 0.5}; }
  Point2 dst_center() const { return {(dst_width - 1) * 0.5, (dst_height - 1) * 0.5}; }

  Point2 to_rotated(Point2 p) const {
    const Point2 c = src_center(), d = dst_center();
    const double vx = p.x - c.x, vy = p.y - c.y;
    return {cos_a * vx + sin_a * vy + d.x, -sin_a * vx + cos_a * vy + d.y};
  }

  Point2 to_source(Point2 q) const {
    const Point2 c = src_center(), d = dst_center();
    const double vx = q.x - d.x, vy = q.y - d.y;
    return {cos_a * vx - sin_a * vy + c.x, sin_a * vx + cos_a * vy + c.y};
  }
};

/// Rotate about the raster center by -angle. Bilinear for images, nearest
/// neighbour for masks; samples from outside the source are 0/false.
template <class Raster>
Raster rotate_image(const Raster& raster, double angle_deg) {
  const RotationFrame frame = RotationFrame::make(raster.width(), raster.height(), angle_deg);
  return resample(raster, frame.dst_width, frame.dst_height,
                  [&](int x, int y) { return frame.to_source({double(x), double(y)}); });
}

}  // namespace limbreg
