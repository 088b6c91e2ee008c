#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "vasl/error.hpp"

namespace vasl {

/// Interleaved integer image as stored in a binary PGM (1 channel) or PPM
/// (3 channels). Samples are raw codes in [0, maxval].
struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 1;
  std::uint16_t maxval = 255;
  std::vector<std::uint16_t> samples;  // row-major, channels interleaved

  static Image blank(std::size_t w, std::size_t h, std::size_t c, std::uint16_t maxval) {
    return Image{w, h, c, maxval, std::vector<std::uint16_t>(w * h * c, 0)};
  }

  std::uint16_t at(std::size_t x, std::size_t y, std::size_t c = 0) const { return samples[(y * width + x) * channels + c]; }
  std::uint16_t& at(std::size_t x, std::size_t y, std::size_t c = 0) { return samples[(y * width + x) * channels + c]; }

  // Planar [channels][height][width] values divided by maxval.
  std::vector<double> planes() const {
    std::vector<double> out(samples.size());
    const double inv = 1.0 / maxval;
    const std::size_t plane = width * height;
    for (std::size_t i = 0; i < plane; ++i)
      for (std::size_t c = 0; c < channels; ++c) out[c * plane + i] = samples[i * channels + c] * inv;
    return out;
  }

  friend bool operator==(const Image&, const Image&) = default;
};

/// Quantizes v in [0,1] to a code in [0, maxval] by round-half-up.
inline std::uint16_t quantize(double v, std::uint16_t maxval) {
  const double c = std::floor(std::clamp(v, 0.0, 1.0) * maxval + 0.5);
  return static_cast<std::uint16_t>(c);
}

/// Planar [channels][h][w] values in [0,1] to an image.
inline Image image_from_planes(const std::vector<double>& planes, std::size_t w, std::size_t h, std::size_t channels,
                               std::uint16_t maxval) {
  if (planes.size() != w * h * channels) throw ShapeError("image_from_planes: size does not match dims");
  Image img = Image::blank(w, h, channels, maxval);
  const std::size_t plane = w * h;
  for (std::size_t i = 0; i < plane; ++i)
    for (std::size_t c = 0; c < channels; ++c) img.samples[i * channels + c] = quantize(planes[c * plane + i], maxval);
  return img;
}

namespace detail {

class PnmHeaderReader {
 public:
  PnmHeaderReader(const std::string& bytes, const std::string& path) : b_(bytes), path_(path) {}

  // Unsigned decimal field preceded by whitespace and '#' comments.
  std::size_t field(const char* what) {
    skip_space_and_comments();
    std::size_t v = 0;
    std::size_t digits = 0;
    while (pos_ < b_.size() && b_[pos_] >= '0' && b_[pos_] <= '9') {
      v = v * 10 + static_cast<std::size_t>(b_[pos_] - '0');
      if (v > 1000000) fail(std::string("implausible ") + what);
      ++pos_;
      ++digits;
    }
    if (digits == 0) fail(std::string("expected ") + what);
    return v;
  }

  // Exactly one whitespace byte separates maxval from the raster.
  std::size_t raster_start() {
    if (pos_ >= b_.size() || !std::isspace(static_cast<unsigned char>(b_[pos_]))) fail("missing separator before raster");
    return pos_ + 1;
  }

  [[noreturn]] void fail(const std::string& why) const { throw DataError(path_ + ": malformed header: " + why); }

 private:
  void skip_space_and_comments() {
    while (pos_ < b_.size()) {
      if (b_[pos_] == '#') {
        while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(b_[pos_]))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  const std::string& b_;
  const std::string& path_;
  std::size_t pos_ = 2;
};

}  // namespace detail

/// Decodes binary P5/P6. Only maxval 255 (one byte per sample) and 65535
/// (two bytes, most significant first) are accepted.
inline Image decode_pnm(const std::string& bytes, const std::string& path = "<memory>") {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6'))
    throw DataError(path + ": not a binary PGM/PPM (expected P5 or P6)");
  detail::PnmHeaderReader h(bytes, path);
  Image img;
  img.channels = bytes[1] == '6' ? 3 : 1;
  img.width = h.field("width");
  img.height = h.field("height");
  const std::size_t maxval = h.field("maxval");
  if (maxval != 255 && maxval != 65535)
    throw DataError(path + ": unsupported maxval " + std::to_string(maxval) + " (only 255 and 65535)");
  if (img.width == 0 || img.height == 0) h.fail("zero image dimension");
  img.maxval = static_cast<std::uint16_t>(maxval);
  const std::size_t start = h.raster_start();
  const std::size_t count = img.width * img.height * img.channels;
  const std::size_t bps = maxval == 255 ? 1 : 2;
  if (bytes.size() - start < count * bps)
    throw DataError(path + ": truncated raster (" + std::to_string(bytes.size() - start) + " of " +
                    std::to_string(count * bps) + " bytes)");
  img.samples.resize(count);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + start);
  for (std::size_t i = 0; i < count; ++i)
    img.samples[i] = bps == 1 ? p[i] : static_cast<std::uint16_t>((p[2 * i] << 8) | p[2 * i + 1]);
  return img;
}

inline std::string encode_pnm(const Image& img) {
  if (img.channels != 1 && img.channels != 3) throw DataError("encode_pnm: images must have 1 or 3 channels");
  if (img.maxval != 255 && img.maxval != 65535) throw DataError("encode_pnm: maxval must be 255 or 65535");
  if (img.samples.size() != img.width * img.height * img.channels) throw DataError("encode_pnm: sample count mismatch");
  std::string out = (img.channels == 3 ? "P6\n" : "P5\n") + std::to_string(img.width) + " " +
                    std::to_string(img.height) + "\n" + std::to_string(img.maxval) + "\n";
  const bool wide = img.maxval == 65535;
  out.reserve(out.size() + img.samples.size() * (wide ? 2 : 1));
  for (std::uint16_t s : img.samples) {
    if (s > img.maxval) throw DataError("encode_pnm: sample exceeds maxval");
    if (wide) out.push_back(static_cast<char>(s >> 8));
    out.push_back(static_cast<char>(s & 0xff));
  }
  return out;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

inline void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write to '" + path + "' failed");
}

inline Image load_image(const std::string& path) { return decode_pnm(read_file(path), path); }
inline void save_image(const std::string& path, const Image& img) { write_file(path, encode_pnm(img)); }

/// Probability map [h][w] in [0,1] as a 16-bit PGM with code round(p * 65535).
inline Image probability_image(const std::vector<double>& prob, std::size_t w, std::size_t h) {
  return image_from_planes(prob, w, h, 1, 65535);
}

/// Binary mask as an 8-bit PGM with values 0 / 255.
inline Image mask_image(const std::vector<double>& mask, std::size_t w, std::size_t h) {
  Image img = Image::blank(w, h, 1, 255);
  for (std::size_t i = 0; i < mask.size(); ++i) img.samples[i] = mask[i] != 0.0 ? 255 : 0;
  return img;
}

}  // namespace vasl
