#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <utility>
#include <vector>

#include "limbreg/raster.hpp"

namespace limbreg {

using Histogram = std::array<std::uint64_t, 256>;

struct OtsuResult {
  int threshold = 0;  // pixels with value > threshold are foreground
  double between_class_variance = 0.0;
};

inline Histogram histogram(const Image& gray) {
  if (gray.channels() != 1) throw Error(ErrorCode::ChannelMismatch, "histogram expects a 1-channel image");
  Histogram h{};
  for (std::uint8_t v : gray.data()) ++h[v];
  return h;
}

namespace detail {

/// a * b for a < 2^128, b < 2^64, as (high 128 bits, low 64 bits).
inline std::pair<unsigned __int128, std::uint64_t> mul_u128_u64(unsigned __int128 a, std::uint64_t b) {
  using u128 = unsigned __int128;
  const u128 lo = static_cast<u128>(static_cast<std::uint64_t>(a)) * b;
  const u128 hi = static_cast<u128>(static_cast<std::uint64_t>(a >> 64)) * b;
  const u128 mid = (lo >> 64) + static_cast<std::uint64_t>(hi);
  const u128 top = (hi >> 64) + (mid >> 64);
  return {(top << 64) | static_cast<std::uint64_t>(mid), static_cast<std::uint64_t>(lo)};
}

}  // namespace detail

/// Global threshold maximizing w0*w1*(mu0-mu1)^2, where class 0 holds bins
/// <= t. The score equals D^2 / (N^2 n0 n1) with D = n1*s0 - n0*s1, so
/// candidates are compared exactly as fractions D^2 / (n0 n1) in integer
/// arithmetic (valid up to ~2.7e8 pixels); ties go to the smallest t.
inline OtsuResult otsu_threshold(const Histogram& hist) {
  using u128 = unsigned __int128;
  std::uint64_t total = 0;
  std::uint64_t weighted = 0;
  int populated = 0;
  for (int i = 0; i < 256; ++i) {
    total += hist[i];
    weighted += static_cast<std::uint64_t>(i) * hist[i];
    populated += hist[i] > 0;
  }
  if (populated < 2) throw Error(ErrorCode::DegenerateHistogram, "histogram has fewer than two populated bins");

  // Best fraction so far: num / den with num = D^2, den = n0 * n1.
  int best_t = -1;
  u128 best_num = 0;
  std::uint64_t best_den = 1;
  std::uint64_t n0 = 0, s0 = 0;
  for (int t = 0; t < 256; ++t) {
    n0 += hist[t];
    s0 += static_cast<std::uint64_t>(t) * hist[t];
    const std::uint64_t n1 = total - n0;
    if (n0 == 0 || n1 == 0) continue;
    const std::uint64_t s1 = weighted - s0;
    const auto d = static_cast<__int128>(n1) * s0 - static_cast<__int128>(n0) * s1;
    const u128 ad = static_cast<u128>(d < 0 ? -d : d);
    const u128 num = ad * ad;
    const std::uint64_t den = n0 * n1;
    // num / den > best_num / best_den  <=>  num * best_den > best_num * den
    if (best_t < 0 || detail::mul_u128_u64(num, best_den) > detail::mul_u128_u64(best_num, den)) {
      best_t = t;
      best_num = num;
      best_den = den;
    }
  }
  const double n = static_cast<double>(total);
  const double var = static_cast<double>(best_num) / (n * n * static_cast<double>(best_den));
  return {best_t, var};
}

inline BinaryMask binarize(const Image& gray, int threshold) {
  if (gray.channels() != 1) throw Error(ErrorCode::ChannelMismatch, "binarize expects a 1-channel image");
  BinaryMask out(gray.width(), gray.height());
  for (int y = 0; y < gray.height(); ++y)
    for (int x = 0; x < gray.width(); ++x) out.set(x, y, gray.at(x, y) > threshold);
  return out;
}

// ---------------------------------------------------------------------------
// Morphology with a 5x5 square element; everything outside the canvas is
// background. A square element separates into a row pass and a column pass.

namespace detail {

template <bool Erode>
BinaryMask morph5(const BinaryMask& in) {
  const int w = in.width(), h = in.height();
  auto pass = [&](const BinaryMask& src, int dx, int dy) {
    BinaryMask dst(w, h);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        bool v = Erode;
        for (int k = -2; k <= 2; ++k) {
          const bool s = src.at_or_false(x + k * dx, y + k * dy);
          if constexpr (Erode) v = v && s;
          else v = v || s;
        }
        dst.set(x, y, v);
      }
    return dst;
  };
  return pass(pass(in, 1, 0), 0, 1);
}

}  // namespace detail

inline BinaryMask erode5(const BinaryMask& m) { return detail::morph5<true>(m); }
inline BinaryMask dilate5(const BinaryMask& m) { return detail::morph5<false>(m); }

/// Opening followed by closing.
inline BinaryMask morphological_open_close(const BinaryMask& mask) {
  const BinaryMask opened = dilate5(erode5(mask));
  return erode5(dilate5(opened));
}

/// Keeps the largest 4-connected foreground component; on equal sizes the one
/// reached first in raster order wins. An empty mask is returned unchanged.
inline BinaryMask largest_component(const BinaryMask& mask) {
  const int w = mask.width(), h = mask.height();
  std::vector<int> label(static_cast<std::size_t>(w) * h, -1);
  std::vector<std::size_t> sizes;
  std::deque<std::pair<int, int>> queue;
  for (int y0 = 0; y0 < h; ++y0)
    for (int x0 = 0; x0 < w; ++x0) {
      if (!mask.at(x0, y0) || label[static_cast<std::size_t>(y0) * w + x0] >= 0) continue;
      const int id = static_cast<int>(sizes.size());
      std::size_t size = 0;
      label[static_cast<std::size_t>(y0) * w + x0] = id;
      queue.emplace_back(x0, y0);
      while (!queue.empty()) {
        const auto [x, y] = queue.front();
        queue.pop_front();
        ++size;
        constexpr int dx[4] = {1, -1, 0, 0};
        constexpr int dy[4] = {0, 0, 1, -1};
        for (int k = 0; k < 4; ++k) {
          const int nx = x + dx[k], ny = y + dy[k];
          if (!mask.at_or_false(nx, ny)) continue;
          int& l = label[static_cast<std::size_t>(ny) * w + nx];
          if (l < 0) {
            l = id;
            queue.emplace_back(nx, ny);
          }
        }
      }
      sizes.push_back(size);
    }

  BinaryMask out(w, h);
  if (sizes.empty()) return out;
  int keep = 0;
  for (int i = 1; i < static_cast<int>(sizes.size()); ++i)
    if (sizes[i] > sizes[keep]) keep = i;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) out.set(x, y, label[static_cast<std::size_t>(y) * w + x] == keep);
  return out;
}

/// Every intermediate of the skin segmentation, for debugging dumps.
struct SkinSegmentation {
  Image cr;
  Image blurred;
  OtsuResult otsu;
  BinaryMask thresholded;
  BinaryMask mask;
};

inline SkinSegmentation segment_skin(const Image& image) {
  SkinSegmentation s;
  s.cr = rgb_to_cr(image);
  s.blurred = gaussian_blur5(s.cr);
  s.otsu = otsu_threshold(histogram(s.blurred));
  s.thresholded = binarize(s.blurred, s.otsu.threshold);
  s.mask = largest_component(morphological_open_close(s.thresholded));
  if (s.mask.none()) throw Error(ErrorCode::EmptyMask, "no foreground survives morphological cleanup");
  return s;
}

/// Cr -> 5x5 Gaussian -> OTSU (> t is skin) -> open/close -> largest component.
inline BinaryMask extract_skin_mask(const Image& image) { return segment_skin(image).mask; }

}  // namespace limbreg
