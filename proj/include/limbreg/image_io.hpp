#pragma once

// PNG and binary PGM/PPM (P5/P6, 8-bit) reading and writing.
// Link against libpng when including this header.

#include <png.h>

#include <cctype>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <memory>
#include <string>
#include <vector>

#include "limbreg/raster.hpp"

namespace limbreg::io {

namespace detail {

inline std::vector<std::uint8_t> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline bool is_png(const std::vector<std::uint8_t>& bytes) {
  static constexpr std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  return bytes.size() >= 8 && std::memcmp(bytes.data(), sig, 8) == 0;
}

inline Image decode_png(const std::vector<std::uint8_t>& bytes, const std::string& name) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size()))
    throw Error(ErrorCode::Io, name + ": " + img.message);
  const bool color = (img.format & PNG_FORMAT_FLAG_COLOR) != 0;
  img.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const int channels = color ? 3 : 1;
  std::vector<std::uint8_t> data(PNG_IMAGE_SIZE(img));
  // Alpha, if any, is composited onto black.
  png_color black{0, 0, 0};
  if (!png_image_finish_read(&img, &black, data.data(), 0, nullptr)) {
    std::string msg = img.message;
    png_image_free(&img);
    throw Error(ErrorCode::Io, name + ": " + msg);
  }
  return Image(static_cast<int>(img.width), static_cast<int>(img.height), channels, std::move(data));
}

// Netpbm header: magic, width, height, maxval, separated by whitespace and
// '#' comments, then exactly one whitespace byte.
inline Image decode_pnm(const std::vector<std::uint8_t>& bytes, const std::string& name) {
  std::size_t pos = 2;
  auto skip = [&] {
    while (pos < bytes.size()) {
      if (std::isspace(bytes[pos])) {
        ++pos;
      } else if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else {
        break;
      }
    }
  };
  auto number = [&]() -> long {
    skip();
    if (pos >= bytes.size() || !std::isdigit(bytes[pos])) throw Error(ErrorCode::Io, name + ": malformed netpbm header");
    long v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos++] - '0');
      if (v > (1L << 24)) throw Error(ErrorCode::Io, name + ": netpbm header value too large");
    }
    return v;
  };
  const int channels = bytes[1] == '5' ? 1 : 3;
  const long w = number(), h = number(), maxval = number();
  if (maxval != 255) throw Error(ErrorCode::Io, name + ": only 8-bit netpbm (maxval 255) is supported");
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw Error(ErrorCode::Io, name + ": malformed netpbm header");
  ++pos;
  const std::size_t need = static_cast<std::size_t>(w) * h * channels;
  if (w < 1 || h < 1 || bytes.size() - pos < need) throw Error(ErrorCode::Io, name + ": truncated netpbm data");
  return Image(static_cast<int>(w), static_cast<int>(h), channels,
               std::vector<std::uint8_t>(bytes.begin() + pos, bytes.begin() + pos + need));
}

inline void write_bytes(const std::filesystem::path& path, const std::string& header, std::span<const std::uint8_t> data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

}  // namespace detail

/// Reads PNG, P5 or P6, sniffing the content rather than the extension.
inline Image read_image(const std::filesystem::path& path) {
  const auto bytes = detail::read_all(path);
  if (detail::is_png(bytes)) return detail::decode_png(bytes, path.string());
  if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '5' || bytes[1] == '6'))
    return detail::decode_pnm(bytes, path.string());
  throw Error(ErrorCode::Io, path.string() + ": unsupported image format (expected PNG, PGM or PPM)");
}

inline void write_png(const std::filesystem::path& path, const Image& image) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width());
  img.height = static_cast<png_uint_32>(image.height());
  img.format = image.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&img, path.string().c_str(), 0, image.data().data(), 0, nullptr))
    throw Error(ErrorCode::Io, path.string() + ": " + img.message);
}

/// P5 for gray, P6 for RGB.
inline void write_pnm(const std::filesystem::path& path, const Image& image) {
  const std::string header = std::string(image.channels() == 1 ? "P5\n" : "P6\n") + std::to_string(image.width()) +
                             " " + std::to_string(image.height()) + "\n255\n";
  detail::write_bytes(path, header, image.data());
}

/// Format chosen by extension: .png, otherwise netpbm.
inline void write_image(const std::filesystem::path& path, const Image& image) {
  auto ext = path.extension().string();
  for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (ext == ".png")
    write_png(path, image);
  else
    write_pnm(path, image);
}

inline BinaryMask read_mask(const std::filesystem::path& path) {
  Image img = read_image(path);
  if (img.channels() != 1) throw Error(ErrorCode::ChannelMismatch, path.string() + ": mask must be grayscale");
  return mask_from_image(img);
}

/// Foreground 255, background 0.
inline void write_mask(const std::filesystem::path& path, const BinaryMask& mask) {
  write_image(path, mask_to_image(mask));
}

}  // namespace limbreg::io
