#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "vasl/error.hpp"
#include "vasl/image_io.hpp"

namespace vasl {

/// Bilinear resampling of planar [channels][h][w] data to [channels][out_h][out_w]
/// on a corner-aligned grid: output pixel i samples input coordinate
/// i * (in - 1) / (out - 1), so the four corners map onto each other.
inline std::vector<double> resize_bilinear(const std::vector<double>& in, std::size_t channels, std::size_t h,
                                           std::size_t w, std::size_t out_h, std::size_t out_w) {
  if (h < 2 || w < 2) throw DataError("resize: input axes must have at least 2 pixels");
  if (out_h < 2 || out_w < 2) throw DataError("resize: output axes must have at least 2 pixels");
  if (in.size() != channels * h * w) throw ShapeError("resize: buffer size does not match dims");
  if (h == out_h && w == out_w) return in;

  struct Tap {
    std::size_t i0;
    double t;
  };
  auto taps = [](std::size_t in_n, std::size_t out_n) {
    std::vector<Tap> out(out_n);
    const double scale = static_cast<double>(in_n - 1) / static_cast<double>(out_n - 1);
    for (std::size_t i = 0; i < out_n; ++i) {
      const double x = static_cast<double>(i) * scale;
      const auto i0 = std::min(static_cast<std::size_t>(x), in_n - 2);
      out[i] = {i0, x - static_cast<double>(i0)};
    }
    return out;
  };
  const auto ty = taps(h, out_h);
  const auto tx = taps(w, out_w);
  std::vector<double> out(channels * out_h * out_w);
  for (std::size_t c = 0; c < channels; ++c) {
    const double* src = in.data() + c * h * w;
    double* dst = out.data() + c * out_h * out_w;
    for (std::size_t y = 0; y < out_h; ++y) {
      const double* r0 = src + ty[y].i0 * w;
      const double* r1 = r0 + w;
      const double v = ty[y].t;
      for (std::size_t x = 0; x < out_w; ++x) {
        const std::size_t j = tx[x].i0;
        const double u = tx[x].t;
        const double top = (1.0 - u) * r0[j] + u * r0[j + 1];
        const double bottom = (1.0 - u) * r1[j] + u * r1[j + 1];
        dst[y * out_w + x] = (1.0 - v) * top + v * bottom;
      }
    }
  }
  return out;
}

/// Image to planar values in [0,1] at size x size.
inline std::vector<double> resize_normalize(const Image& img, std::size_t size) {
  return resize_bilinear(img.planes(), img.channels, img.height, img.width, size, size);
}

/// Gray = (r + g + b) / 3 from planar RGB.
inline std::vector<double> grayscale(const std::vector<double>& rgb, std::size_t h, std::size_t w) {
  const std::size_t plane = h * w;
  if (rgb.size() != 3 * plane) throw ShapeError("grayscale: expected 3 planes");
  std::vector<double> g(plane);
  for (std::size_t i = 0; i < plane; ++i) g[i] = (rgb[i] + rgb[plane + i] + rgb[2 * plane + i]) / 3.0;
  return g;
}

/// 3x3 Sobel gradient magnitude of the grayscale image with replicated
/// borders, divided by its maximum. A flat image maps to all zeros.
inline std::vector<double> sobel_edge(const std::vector<double>& rgb, std::size_t h, std::size_t w) {
  const auto g = grayscale(rgb, h, w);
  auto at = [&](std::ptrdiff_t y, std::ptrdiff_t x) {
    y = std::clamp<std::ptrdiff_t>(y, 0, static_cast<std::ptrdiff_t>(h) - 1);
    x = std::clamp<std::ptrdiff_t>(x, 0, static_cast<std::ptrdiff_t>(w) - 1);
    return g[static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x)];
  };
  std::vector<double> mag(h * w);
  double peak = 0.0;
  for (std::size_t yy = 0; yy < h; ++yy)
    for (std::size_t xx = 0; xx < w; ++xx) {
      const auto y = static_cast<std::ptrdiff_t>(yy), x = static_cast<std::ptrdiff_t>(xx);
      const double gx = (at(y - 1, x + 1) + 2 * at(y, x + 1) + at(y + 1, x + 1)) -
                        (at(y - 1, x - 1) + 2 * at(y, x - 1) + at(y + 1, x - 1));
      const double gy = (at(y + 1, x - 1) + 2 * at(y + 1, x) + at(y + 1, x + 1)) -
                        (at(y - 1, x - 1) + 2 * at(y - 1, x) + at(y - 1, x + 1));
      const double m = std::sqrt(gx * gx + gy * gy);
      mag[yy * w + xx] = m;
      peak = std::max(peak, m);
    }
  if (peak > 0.0)
    for (double& m : mag) m /= peak;
  return mag;
}

/// Stand-in depth for real images that come without a depth file: the
/// grayscale image under a (2r+1)^2 box blur with replicated borders. It is
/// not a depth estimate; callers must opt in explicitly.
inline std::vector<double> depth_proxy(const std::vector<double>& rgb, std::size_t h, std::size_t w,
                                       std::size_t radius = 4) {
  auto g = grayscale(rgb, h, w);
  std::vector<double> tmp(h * w);
  const auto r = static_cast<std::ptrdiff_t>(radius);
  const double inv = 1.0 / static_cast<double>(2 * radius + 1);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      double s = 0.0;
      for (std::ptrdiff_t d = -r; d <= r; ++d)
        s += g[y * w + static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(x) + d, 0,
                                                                              static_cast<std::ptrdiff_t>(w) - 1))];
      tmp[y * w + x] = s * inv;
    }
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      double s = 0.0;
      for (std::ptrdiff_t d = -r; d <= r; ++d)
        s += tmp[static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(y) + d, 0,
                                                                     static_cast<std::ptrdiff_t>(h) - 1)) *
                     w +
                 x];
      g[y * w + x] = s * inv;
    }
  return g;
}

}  // namespace vasl
