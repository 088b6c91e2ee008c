#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "vasl/tensor.hpp"

namespace vasl {

enum class PoolKind { avg, max };

/// Max pooling with arbitrary window, stride and implicit -inf padding.
/// Ties resolve to the first element in row-major window scan.
inline Tensor max_pool2d(const Tensor& x, std::size_t k, std::size_t stride, std::size_t pad) {
  const Shape& s = x.shape();
  if (k == 0 || stride == 0) throw ShapeError("max_pool2d: window and stride must be positive");
  if (s.h() + 2 * pad < k || s.w() + 2 * pad < k) throw ShapeError("max_pool2d: window exceeds padded input " + s.str());
  const std::size_t oh_n = (s.h() + 2 * pad - k) / stride + 1;
  const std::size_t ow_n = (s.w() + 2 * pad - k) / stride + 1;
  const Shape shape(s.n(), s.c(), oh_n, ow_n);
  std::vector<double> v(shape.numel());
  std::vector<std::uint32_t> arg(shape.numel());
  const double* xv = x.data().data();
  const std::size_t planes = s.n() * s.c();
  const bool record = kink::active();
  for (std::size_t p = 0; p < planes; ++p) {
    const double* in = xv + p * s.plane();
    for (std::size_t oh = 0; oh < oh_n; ++oh)
      for (std::size_t ow = 0; ow < ow_n; ++ow) {
        double best = -std::numeric_limits<double>::infinity();
        std::size_t best_i = SIZE_MAX;
        for (std::size_t a = 0; a < k; ++a) {
          const auto r = static_cast<std::ptrdiff_t>(oh * stride + a) - static_cast<std::ptrdiff_t>(pad);
          if (r < 0 || r >= static_cast<std::ptrdiff_t>(s.h())) continue;
          for (std::size_t b = 0; b < k; ++b) {
            const auto c = static_cast<std::ptrdiff_t>(ow * stride + b) - static_cast<std::ptrdiff_t>(pad);
            if (c < 0 || c >= static_cast<std::ptrdiff_t>(s.w())) continue;
            const std::size_t idx = static_cast<std::size_t>(r) * s.w() + static_cast<std::size_t>(c);
            if (best_i == SIZE_MAX || in[idx] > best) {
              best = in[idx];
              best_i = idx;
            }
          }
        }
        const std::size_t o = (p * oh_n + oh) * ow_n + ow;
        v[o] = best;
        arg[o] = static_cast<std::uint32_t>(best_i);
        if (record) kink::note(best_i);
      }
  }
  Tensor out = make_result(shape, std::move(v), {x});
  set_backward(out, [px = x.node(), arg = std::move(arg), planes, out_plane = oh_n * ow_n](detail::Node& self) {
    if (!px->requires_grad) return;
    auto& g = px->grad_buffer();
    const std::size_t in_plane = px->shape.plane();
    for (std::size_t p = 0; p < planes; ++p)
      for (std::size_t i = 0; i < out_plane; ++i) g[p * in_plane + arg[p * out_plane + i]] += self.grad[p * out_plane + i];
  });
  return out;
}

/// 2x2 window, stride 2, no padding. Height and width must be even.
inline Tensor pool2d(const Tensor& x, PoolKind kind) {
  const Shape& s = x.shape();
  if (s.h() % 2 != 0 || s.w() % 2 != 0) throw ShapeError("pool2d: odd spatial extent in " + s.str());
  if (kind == PoolKind::max) return max_pool2d(x, 2, 2, 0);

  const std::size_t oh_n = s.h() / 2, ow_n = s.w() / 2;
  const Shape shape(s.n(), s.c(), oh_n, ow_n);
  std::vector<double> v(shape.numel());
  const double* xv = x.data().data();
  const std::size_t planes = s.n() * s.c();
  for (std::size_t p = 0; p < planes; ++p) {
    const double* in = xv + p * s.plane();
    double* out = v.data() + p * shape.plane();
    for (std::size_t i = 0; i < oh_n; ++i) {
      const double* r0 = in + 2 * i * s.w();
      const double* r1 = r0 + s.w();
      for (std::size_t j = 0; j < ow_n; ++j)
        out[i * ow_n + j] = 0.25 * ((r0[2 * j] + r0[2 * j + 1]) + (r1[2 * j] + r1[2 * j + 1]));
    }
  }
  Tensor out = make_result(shape, std::move(v), {x});
  set_backward(out, [px = x.node(), planes, oh_n, ow_n](detail::Node& self) {
    if (!px->requires_grad) return;
    auto& g = px->grad_buffer();
    const std::size_t w = px->shape.w();
    for (std::size_t p = 0; p < planes; ++p) {
      double* gin = g.data() + p * px->shape.plane();
      const double* gout = self.grad.data() + p * oh_n * ow_n;
      for (std::size_t i = 0; i < oh_n; ++i)
        for (std::size_t j = 0; j < ow_n; ++j) {
          const double q = 0.25 * gout[i * ow_n + j];
          gin[2 * i * w + 2 * j] += q;
          gin[2 * i * w + 2 * j + 1] += q;
          gin[(2 * i + 1) * w + 2 * j] += q;
          gin[(2 * i + 1) * w + 2 * j + 1] += q;
        }
    }
  });
  return out;
}

enum class Axis { channel = 1, height = 2, width = 3 };

/// Z-pool: reduces one axis to extent 2, holding [max, mean] along it.
/// Max ties resolve to the lowest index along the axis.
inline Tensor zpool(const Tensor& x, Axis axis) {
  const Shape& s = x.shape();
  const auto ax = static_cast<std::size_t>(axis);
  const std::size_t extent = s[ax];
  if (extent == 0) throw ShapeError("zpool: empty reduction axis in " + s.str());
  auto d = s.dims();
  d[ax] = 2;
  const Shape shape(d[0], d[1], d[2], d[3]);

  // View x as [outer][extent][inner] and the result as [outer][2][inner].
  std::size_t outer = 1, inner = 1;
  for (std::size_t a = 0; a < ax; ++a) outer *= s[a];
  for (std::size_t a = ax + 1; a < 4; ++a) inner *= s[a];

  std::vector<double> v(shape.numel());
  std::vector<std::uint32_t> arg(outer * inner, 0);
  const double* xv = x.data().data();
  const double inv = 1.0 / static_cast<double>(extent);
  for (std::size_t o = 0; o < outer; ++o) {
    const double* src = xv + o * extent * inner;
    double* best = v.data() + o * 2 * inner;
    double* total = best + inner;
    std::uint32_t* which = arg.data() + o * inner;
    std::copy(src, src + inner, best);
    std::copy(src, src + inner, total);
    for (std::size_t j = 1; j < extent; ++j) {
      const double* row = src + j * inner;
      for (std::size_t i = 0; i < inner; ++i) {
        total[i] += row[i];
        if (row[i] > best[i]) {
          best[i] = row[i];
          which[i] = static_cast<std::uint32_t>(j);
        }
      }
    }
    for (std::size_t i = 0; i < inner; ++i) total[i] *= inv;
  }
  if (kink::active())
    for (std::uint32_t j : arg) kink::note(j);

  Tensor out = make_result(shape, std::move(v), {x});
  set_backward(out, [px = x.node(), arg = std::move(arg), outer, inner, extent, inv](detail::Node& self) {
    if (!px->requires_grad) return;
    auto& g = px->grad_buffer();
    for (std::size_t o = 0; o < outer; ++o) {
      const double* gmax = self.grad.data() + o * 2 * inner;
      const double* gmean = gmax + inner;
      const std::uint32_t* which = arg.data() + o * inner;
      double* dst = g.data() + o * extent * inner;
      for (std::size_t j = 0; j < extent; ++j) {
        double* row = dst + j * inner;
        for (std::size_t i = 0; i < inner; ++i) row[i] += gmean[i] * inv + (which[i] == j ? gmax[i] : 0.0);
      }
    }
  });
  return out;
}

}  // namespace vasl
