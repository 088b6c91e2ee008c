#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "vasl/conv_kernels.hpp"
#include "vasl/tensor.hpp"

namespace vasl {

/// Geometry of a 2-D convolution. Weights are [out, in, kernel_h, kernel_w];
/// bias, when enabled, is [1, out, 1, 1].
struct ConvSpec {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t kernel_h = 1;
  std::size_t kernel_w = 1;
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::size_t dilation = 1;
  bool bias = false;

  static ConvSpec square(std::size_t in, std::size_t out, std::size_t k, std::size_t stride = 1,
                         std::size_t padding = 0, std::size_t dilation = 1, bool bias = false) {
    return ConvSpec{in, out, k, k, stride, padding, dilation, bias};
  }

  // floor((in + 2 pad - dilation (k - 1) - 1) / stride) + 1
  std::size_t out_extent(std::size_t in, std::size_t k) const {
    if (stride == 0 || dilation == 0 || k == 0) throw ShapeError("conv: stride, dilation and kernel must be positive");
    const std::size_t span = dilation * (k - 1) + 1;
    if (in + 2 * padding < span)
      throw ShapeError("conv: kernel span " + std::to_string(span) + " exceeds padded input " +
                       std::to_string(in + 2 * padding));
    return (in + 2 * padding - span) / stride + 1;
  }

  Shape weight_shape() const { return Shape(out_channels, in_channels, kernel_h, kernel_w); }
  Shape bias_shape() const { return Shape(1, out_channels, 1, 1); }
  std::size_t fan_in() const { return in_channels * kernel_h * kernel_w; }
  std::size_t param_count() const { return weight_shape().numel() + (bias ? out_channels : 0); }
};

namespace detail {

// Range of output columns whose input column o*stride + offset lies in [0, width).
struct ColumnRange {
  std::size_t lo = 0;
  std::size_t hi = 0;
};

inline ColumnRange valid_columns(std::ptrdiff_t offset, std::size_t stride, std::size_t width, std::size_t out_w) {
  const auto s = static_cast<std::ptrdiff_t>(stride);
  std::ptrdiff_t lo = offset >= 0 ? 0 : (-offset + s - 1) / s;
  const std::ptrdiff_t last = static_cast<std::ptrdiff_t>(width) - 1 - offset;
  std::ptrdiff_t hi = last < 0 ? 0 : last / s + 1;
  hi = std::min<std::ptrdiff_t>(hi, static_cast<std::ptrdiff_t>(out_w));
  if (lo > hi) lo = hi;
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

// Eight independent lanes, combined in a fixed order. The compiler can
// vectorize this without reassociating a single accumulator.
inline double dot(const double* __restrict a, const double* __restrict b, std::size_t len) {
  double acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  std::size_t i = 0;
  for (; i + 8 <= len; i += 8)
    for (std::size_t k = 0; k < 8; ++k) acc[k] += a[i + k] * b[i + k];
  double tail = 0.0;
  for (; i < len; ++i) tail += a[i] * b[i];
  return ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail;
}

inline double dot_strided(const double* a, const double* b, std::size_t len, std::size_t b_stride) {
  double total = 0.0;
  for (std::size_t i = 0; i < len; ++i) total += a[i] * b[i * b_stride];
  return total;
}

inline void axpy(double* __restrict y, const double* __restrict x, double a, std::size_t len) {
  for (std::size_t i = 0; i < len; ++i) y[i] += a * x[i];
}

struct ConvGeometry {
  std::size_t batch, in_c, out_c, in_h, in_w, out_h, out_w, kh, kw, stride, pad, dil;
  std::vector<ColumnRange> cols;  // per kernel column

  ConvGeometry(const Shape& x, const ConvSpec& s)
      : batch(x.n()), in_c(x.c()), out_c(s.out_channels), in_h(x.h()), in_w(x.w()),
        out_h(s.out_extent(x.h(), s.kernel_h)), out_w(s.out_extent(x.w(), s.kernel_w)),
        kh(s.kernel_h), kw(s.kernel_w), stride(s.stride), pad(s.padding), dil(s.dilation) {
    for (std::size_t j = 0; j < kw; ++j) cols.push_back(valid_columns(col_offset(j), stride, in_w, out_w));
  }

  std::ptrdiff_t col_offset(std::size_t j) const {
    return static_cast<std::ptrdiff_t>(j * dil) - static_cast<std::ptrdiff_t>(pad);
  }

  // Input row for output row oh and kernel row i, or -1 when in padding.
  std::ptrdiff_t in_row(std::size_t oh, std::size_t i) const {
    const auto r = static_cast<std::ptrdiff_t>(oh * stride + i * dil) - static_cast<std::ptrdiff_t>(pad);
    return (r < 0 || r >= static_cast<std::ptrdiff_t>(in_h)) ? -1 : r;
  }
};

inline void conv_forward(const ConvGeometry& g, const double* x, const double* w, const double* b, double* y) {
  const std::size_t in_plane = g.in_h * g.in_w;
  const std::size_t out_plane = g.out_h * g.out_w;
  for (std::size_t n = 0; n < g.batch; ++n)
    for (std::size_t oc = 0; oc < g.out_c; ++oc) {
      double* out = y + (n * g.out_c + oc) * out_plane;
      std::fill(out, out + out_plane, b ? b[oc] : 0.0);
      for (std::size_t ic = 0; ic < g.in_c; ++ic) {
        const double* in = x + (n * g.in_c + ic) * in_plane;
        const double* wk = w + (oc * g.in_c + ic) * g.kh * g.kw;
        for (std::size_t oh = 0; oh < g.out_h; ++oh) {
          double* out_row = out + oh * g.out_w;
          for (std::size_t i = 0; i < g.kh; ++i) {
            const std::ptrdiff_t r = g.in_row(oh, i);
            if (r < 0) continue;
            const double* in_row = in + static_cast<std::size_t>(r) * g.in_w;
            for (std::size_t j = 0; j < g.kw; ++j) {
              const auto [lo, hi] = g.cols[j];
              if (lo >= hi) continue;
              const double wv = wk[i * g.kw + j];
              const std::ptrdiff_t off = g.col_offset(j);
              if (g.stride == 1) {
                axpy(out_row + lo, in_row + static_cast<std::ptrdiff_t>(lo) + off, wv, hi - lo);
              } else {
                for (std::size_t o = lo; o < hi; ++o)
                  out_row[o] += wv * in_row[static_cast<std::ptrdiff_t>(o * g.stride) + off];
              }
            }
          }
        }
      }
    }
}

inline void conv_backward_input(const ConvGeometry& g, const double* gy, const double* w, double* gx) {
  const std::size_t in_plane = g.in_h * g.in_w;
  const std::size_t out_plane = g.out_h * g.out_w;
  for (std::size_t n = 0; n < g.batch; ++n)
    for (std::size_t ic = 0; ic < g.in_c; ++ic) {
      double* gin = gx + (n * g.in_c + ic) * in_plane;
      for (std::size_t oc = 0; oc < g.out_c; ++oc) {
        const double* gout = gy + (n * g.out_c + oc) * out_plane;
        const double* wk = w + (oc * g.in_c + ic) * g.kh * g.kw;
        for (std::size_t oh = 0; oh < g.out_h; ++oh) {
          const double* gout_row = gout + oh * g.out_w;
          for (std::size_t i = 0; i < g.kh; ++i) {
            const std::ptrdiff_t r = g.in_row(oh, i);
            if (r < 0) continue;
            double* gin_row = gin + static_cast<std::size_t>(r) * g.in_w;
            for (std::size_t j = 0; j < g.kw; ++j) {
              const auto [lo, hi] = g.cols[j];
              if (lo >= hi) continue;
              const double wv = wk[i * g.kw + j];
              const std::ptrdiff_t off = g.col_offset(j);
              if (g.stride == 1) {
                axpy(gin_row + static_cast<std::ptrdiff_t>(lo) + off, gout_row + lo, wv, hi - lo);
              } else {
                for (std::size_t o = lo; o < hi; ++o)
                  gin_row[static_cast<std::ptrdiff_t>(o * g.stride) + off] += wv * gout_row[o];
              }
            }
          }
        }
      }
    }
}

inline void conv_backward_weight(const ConvGeometry& g, const double* gy, const double* x, double* gw) {
  const std::size_t in_plane = g.in_h * g.in_w;
  const std::size_t out_plane = g.out_h * g.out_w;
  for (std::size_t n = 0; n < g.batch; ++n)
    for (std::size_t oc = 0; oc < g.out_c; ++oc) {
      const double* gout = gy + (n * g.out_c + oc) * out_plane;
      for (std::size_t ic = 0; ic < g.in_c; ++ic) {
        const double* in = x + (n * g.in_c + ic) * in_plane;
        double* gk = gw + (oc * g.in_c + ic) * g.kh * g.kw;
        for (std::size_t i = 0; i < g.kh; ++i)
          for (std::size_t j = 0; j < g.kw; ++j) {
            const auto [lo, hi] = g.cols[j];
            if (lo >= hi) continue;
            const std::ptrdiff_t off = g.col_offset(j);
            double acc = 0.0;
            for (std::size_t oh = 0; oh < g.out_h; ++oh) {
              const std::ptrdiff_t r = g.in_row(oh, i);
              if (r < 0) continue;
              const double* in_row = in + static_cast<std::size_t>(r) * g.in_w;
              const double* gout_row = gout + oh * g.out_w;
              if (g.stride == 1)
                acc += dot(gout_row + lo, in_row + static_cast<std::ptrdiff_t>(lo) + off, hi - lo);
              else
                acc += dot_strided(gout_row + lo, in_row + static_cast<std::ptrdiff_t>(lo * g.stride) + off, hi - lo,
                                   g.stride);
            }
            gk[i * g.kw + j] += acc;
          }
      }
    }
}

}  // namespace detail

namespace detail {

inline PaddedPlanes padded_sample(const ConvGeometry& g, const double* x, std::size_t n) {
  return PaddedPlanes(x + n * g.in_c * g.in_h * g.in_w, g.in_c, g.in_h, g.in_w, g.pad, g.pad);
}

inline void fast_forward(const ConvGeometry& g, const double* x, const double* w, const double* b, double* y) {
  for (std::size_t n = 0; n < g.batch; ++n) {
    const PaddedPlanes in = padded_sample(g, x, n);
    correlate(in.planes(), 0, w, g.out_c, g.kh, g.kw, g.dil, g.out_h, g.out_w, b, y + n * g.out_c * g.out_h * g.out_w,
              false);
  }
}

// Input gradient as a forward correlation of the fully padded output
// gradient with the flipped, channel-transposed kernel.
inline void fast_backward_input(const ConvGeometry& g, const double* gy, const double* w, double* gx) {
  std::vector<double> wt(g.in_c * g.out_c * g.kh * g.kw);
  for (std::size_t oc = 0; oc < g.out_c; ++oc)
    for (std::size_t ic = 0; ic < g.in_c; ++ic)
      for (std::size_t i = 0; i < g.kh; ++i)
        for (std::size_t j = 0; j < g.kw; ++j)
          wt[((ic * g.out_c + oc) * g.kh + (g.kh - 1 - i)) * g.kw + (g.kw - 1 - j)] =
              w[((oc * g.in_c + ic) * g.kh + i) * g.kw + j];
  const std::size_t qh = (g.kh - 1) * g.dil, qw = (g.kw - 1) * g.dil;
  for (std::size_t n = 0; n < g.batch; ++n) {
    const PaddedPlanes in(gy + n * g.out_c * g.out_h * g.out_w, g.out_c, g.out_h, g.out_w, qh, qw);
    correlate(in.planes(), g.pad, wt.data(), g.in_c, g.kh, g.kw, g.dil, g.in_h, g.in_w, nullptr,
              gx + n * g.in_c * g.in_h * g.in_w, true);
  }
}

inline void fast_backward_weight(const ConvGeometry& g, const double* gy, const double* x, double* gw) {
  for (std::size_t n = 0; n < g.batch; ++n) {
    const PaddedPlanes in = padded_sample(g, x, n);
    correlate_weight_grad(in.planes(), gy + n * g.out_c * g.out_h * g.out_w, g.out_c, g.kh, g.kw, g.dil, g.out_h, g.out_w, gw);
  }
}

// Stride 2, dilation 1: split the padded input into its four row/column
// parity planes, after which the convolution is a stride-1 correlation
// with a ceil(k/2) kernel over 4x the input channels.
struct PhaseSplit {
  std::size_t kh2, kw2, rows, cols;

  explicit PhaseSplit(const ConvGeometry& g)
      : kh2((g.kh + 1) / 2), kw2((g.kw + 1) / 2), rows(g.out_h + kh2 - 1), cols(g.out_w + kw2 - 1) {}

  std::vector<double> planes(const ConvGeometry& g, const double* x, std::size_t n) const {
    std::vector<double> out(g.in_c * 4 * rows * cols, 0.0);
    const double* src = x + n * g.in_c * g.in_h * g.in_w;
    for (std::size_t ic = 0; ic < g.in_c; ++ic)
      for (std::size_t a = 0; a < 2; ++a)
        for (std::size_t b = 0; b < 2; ++b) {
          double* dst = out.data() + ((ic * 4 + a * 2 + b) * rows) * cols;
          for (std::size_t r = 0; r < rows; ++r) {
            const std::ptrdiff_t sr = static_cast<std::ptrdiff_t>(2 * r + a) - static_cast<std::ptrdiff_t>(g.pad);
            if (sr < 0 || sr >= static_cast<std::ptrdiff_t>(g.in_h)) continue;
            const double* srow = src + (ic * g.in_h + static_cast<std::size_t>(sr)) * g.in_w;
            for (std::size_t c = 0; c < cols; ++c) {
              const std::ptrdiff_t sc = static_cast<std::ptrdiff_t>(2 * c + b) - static_cast<std::ptrdiff_t>(g.pad);
              if (sc >= 0 && sc < static_cast<std::ptrdiff_t>(g.in_w)) dst[r * cols + c] = srow[sc];
            }
          }
        }
    return out;
  }

  std::size_t sub_index(const ConvGeometry& g, std::size_t oc, std::size_t ic, std::size_t i, std::size_t j) const {
    return ((oc * g.in_c * 4 + ic * 4 + (i % 2) * 2 + (j % 2)) * kh2 + i / 2) * kw2 + j / 2;
  }

  std::vector<double> kernel(const ConvGeometry& g, const double* w) const {
    std::vector<double> out(g.out_c * g.in_c * 4 * kh2 * kw2, 0.0);
    for (std::size_t oc = 0; oc < g.out_c; ++oc)
      for (std::size_t ic = 0; ic < g.in_c; ++ic)
        for (std::size_t i = 0; i < g.kh; ++i)
          for (std::size_t j = 0; j < g.kw; ++j)
            out[sub_index(g, oc, ic, i, j)] = w[((oc * g.in_c + ic) * g.kh + i) * g.kw + j];
    return out;
  }
};

inline void phase_forward(const ConvGeometry& g, const double* x, const double* w, const double* b, double* y) {
  const PhaseSplit ps(g);
  const auto ws = ps.kernel(g, w);
  for (std::size_t n = 0; n < g.batch; ++n) {
    const auto p = ps.planes(g, x, n);
    const Planes in{p.data(), g.in_c * 4, ps.rows, ps.cols};
    correlate(in, 0, ws.data(), g.out_c, ps.kh2, ps.kw2, 1, g.out_h, g.out_w, b,
              y + n * g.out_c * g.out_h * g.out_w, false);
  }
}

inline void phase_backward_weight(const ConvGeometry& g, const double* gy, const double* x, double* gw) {
  const PhaseSplit ps(g);
  std::vector<double> gs(g.out_c * g.in_c * 4 * ps.kh2 * ps.kw2, 0.0);
  for (std::size_t n = 0; n < g.batch; ++n) {
    const auto p = ps.planes(g, x, n);
    const Planes in{p.data(), g.in_c * 4, ps.rows, ps.cols};
    correlate_weight_grad(in, gy + n * g.out_c * g.out_h * g.out_w, g.out_c, ps.kh2, ps.kw2, 1, g.out_h, g.out_w,
                          gs.data());
  }
  for (std::size_t oc = 0; oc < g.out_c; ++oc)
    for (std::size_t ic = 0; ic < g.in_c; ++ic)
      for (std::size_t i = 0; i < g.kh; ++i)
        for (std::size_t j = 0; j < g.kw; ++j)
          gw[((oc * g.in_c + ic) * g.kh + i) * g.kw + j] += gs[ps.sub_index(g, oc, ic, i, j)];
}

}  // namespace detail

/// Cross-correlation with zero padding, stride and dilation (no kernel flip).
inline Tensor conv2d(const Tensor& x, const ConvSpec& spec, const Tensor& weight, const std::optional<Tensor>& bias = {}) {
  const Shape& xs = x.shape();
  if (xs.c() != spec.in_channels)
    throw ShapeError("conv2d: input has " + std::to_string(xs.c()) + " channels, spec expects " +
                     std::to_string(spec.in_channels));
  if (!(weight.shape() == spec.weight_shape()))
    throw ShapeError("conv2d: weight " + weight.shape().str() + " does not match " + spec.weight_shape().str());
  if (spec.bias != bias.has_value()) throw ShapeError("conv2d: bias presence disagrees with spec");
  if (bias && !(bias->shape() == spec.bias_shape())) throw ShapeError("conv2d: bad bias shape " + bias->shape().str());

  detail::ConvGeometry geo(xs, spec);
  const Shape shape(xs.n(), spec.out_channels, geo.out_h, geo.out_w);
  std::vector<double> v(shape.numel());
  const double* bp = bias ? bias->data().data() : nullptr;
  const bool unit = geo.stride == 1;
  const bool phased = geo.stride == 2 && geo.dil == 1;
  if (unit)
    detail::fast_forward(geo, x.data().data(), weight.data().data(), bp, v.data());
  else if (phased)
    detail::phase_forward(geo, x.data().data(), weight.data().data(), bp, v.data());
  else
    detail::conv_forward(geo, x.data().data(), weight.data().data(), bp, v.data());

  Tensor out = bias ? make_result(shape, std::move(v), {x, weight, *bias}) : make_result(shape, std::move(v), {x, weight});
  set_backward(out, [geo = std::move(geo), unit, phased, px = x.node(), pw = weight.node(),
                     pb = bias ? bias->node() : nullptr](detail::Node& self) {
    const double* gy = self.grad.data();
    if (px->requires_grad) {
      if (unit)
        detail::fast_backward_input(geo, gy, pw->value.data(), px->grad_buffer().data());
      else
        detail::conv_backward_input(geo, gy, pw->value.data(), px->grad_buffer().data());
    }
    if (pw->requires_grad) {
      if (unit)
        detail::fast_backward_weight(geo, gy, px->value.data(), pw->grad_buffer().data());
      else if (phased)
        detail::phase_backward_weight(geo, gy, px->value.data(), pw->grad_buffer().data());
      else
        detail::conv_backward_weight(geo, gy, px->value.data(), pw->grad_buffer().data());
    }
    if (pb && pb->requires_grad) {
      auto& gb = pb->grad_buffer();
      const std::size_t plane = geo.out_h * geo.out_w;
      for (std::size_t n = 0; n < geo.batch; ++n)
        for (std::size_t oc = 0; oc < geo.out_c; ++oc) {
          const double* row = gy + (n * geo.out_c + oc) * plane;
          double acc = 0.0;
          for (std::size_t i = 0; i < plane; ++i) acc += row[i];
          gb[oc] += acc;
        }
    }
  });
  return out;
}

/// Transposed convolution with kernel 2 and stride 2; weights are
/// [in, out, 2, 2]. Every output pixel receives exactly one input tap.
inline Tensor transposed_conv2d(const Tensor& x, const Tensor& weight) {
  const Shape& xs = x.shape();
  const Shape& ws = weight.shape();
  if (ws.n() != xs.c() || ws.h() != 2 || ws.w() != 2)
    throw ShapeError("transposed_conv2d: weight " + ws.str() + " does not fit input " + xs.str());
  const std::size_t batch = xs.n(), in_c = xs.c(), out_c = ws.c(), h = xs.h(), w = xs.w();
  const Shape shape(batch, out_c, 2 * h, 2 * w);
  const std::size_t in_plane = h * w;
  const std::size_t out_plane = 4 * in_plane;
  std::vector<double> v(shape.numel(), 0.0);
  const double* xv = x.data().data();
  const double* wv = weight.data().data();
  for (std::size_t n = 0; n < batch; ++n)
    for (std::size_t oc = 0; oc < out_c; ++oc) {
      double* out = v.data() + (n * out_c + oc) * out_plane;
      for (std::size_t ic = 0; ic < in_c; ++ic) {
        const double* in = xv + (n * in_c + ic) * in_plane;
        const double* k = wv + (ic * out_c + oc) * 4;
        for (std::size_t i = 0; i < h; ++i) {
          const double* in_row = in + i * w;
          for (std::size_t a = 0; a < 2; ++a) {
            double* out_row = out + (2 * i + a) * 2 * w;
            const double k0 = k[2 * a], k1 = k[2 * a + 1];
            for (std::size_t j = 0; j < w; ++j) {
              out_row[2 * j] += k0 * in_row[j];
              out_row[2 * j + 1] += k1 * in_row[j];
            }
          }
        }
      }
    }

  Tensor out = make_result(shape, std::move(v), {x, weight});
  set_backward(out, [px = x.node(), pw = weight.node(), batch, in_c, out_c, h, w](detail::Node& self) {
    const std::size_t in_plane = h * w;
    const std::size_t out_plane = 4 * in_plane;
    const double* gy = self.grad.data();
    if (px->requires_grad) {
      double* gx = px->grad_buffer().data();
      const double* wv = pw->value.data();
      for (std::size_t n = 0; n < batch; ++n)
        for (std::size_t ic = 0; ic < in_c; ++ic) {
          double* gin = gx + (n * in_c + ic) * in_plane;
          for (std::size_t oc = 0; oc < out_c; ++oc) {
            const double* gout = gy + (n * out_c + oc) * out_plane;
            const double* k = wv + (ic * out_c + oc) * 4;
            for (std::size_t i = 0; i < h; ++i)
              for (std::size_t a = 0; a < 2; ++a) {
                const double* g_row = gout + (2 * i + a) * 2 * w;
                double* gin_row = gin + i * w;
                const double k0 = k[2 * a], k1 = k[2 * a + 1];
                for (std::size_t j = 0; j < w; ++j) gin_row[j] += k0 * g_row[2 * j] + k1 * g_row[2 * j + 1];
              }
          }
        }
    }
    if (pw->requires_grad) {
      double* gw = pw->grad_buffer().data();
      const double* xv = px->value.data();
      for (std::size_t n = 0; n < batch; ++n)
        for (std::size_t ic = 0; ic < in_c; ++ic) {
          const double* in = xv + (n * in_c + ic) * in_plane;
          for (std::size_t oc = 0; oc < out_c; ++oc) {
            const double* gout = gy + (n * out_c + oc) * out_plane;
            double* k = gw + (ic * out_c + oc) * 4;
            for (std::size_t a = 0; a < 2; ++a)
              for (std::size_t b = 0; b < 2; ++b) {
                double acc = 0.0;
                for (std::size_t i = 0; i < h; ++i)
                  acc += detail::dot_strided(in + i * w, gout + (2 * i + a) * 2 * w + b, w, 2);
                k[2 * a + b] += acc;
              }
          }
        }
    }
  });
  return out;
}

}  // namespace vasl
