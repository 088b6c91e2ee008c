#pragma once

#include <array>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "vasl/tensor.hpp"

namespace vasl {

namespace detail {

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!(a.shape() == b.shape()))
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape().str() + " vs " + b.shape().str());
}

inline void accumulate(Node* in, std::span<const double> g) {
  if (!in->requires_grad) return;
  auto& buf = in->grad_buffer();
  for (std::size_t i = 0; i < g.size(); ++i) buf[i] += g[i];
}

inline void accumulate_scaled(Node* in, std::span<const double> g, double s) {
  if (!in->requires_grad) return;
  auto& buf = in->grad_buffer();
  for (std::size_t i = 0; i < g.size(); ++i) buf[i] += s * g[i];
}

}  // namespace detail

inline Tensor add(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "add");
  std::vector<double> v(a.numel());
  const auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = x[i] + y[i];
  Tensor out = make_result(a.shape(), std::move(v), {a, b});
  set_backward(out, [pa = a.node(), pb = b.node()](detail::Node& self) {
    detail::accumulate(pa, self.grad);
    detail::accumulate(pb, self.grad);
  });
  return out;
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "sub");
  std::vector<double> v(a.numel());
  const auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = x[i] - y[i];
  Tensor out = make_result(a.shape(), std::move(v), {a, b});
  set_backward(out, [pa = a.node(), pb = b.node()](detail::Node& self) {
    detail::accumulate(pa, self.grad);
    detail::accumulate_scaled(pb, self.grad, -1.0);
  });
  return out;
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "mul");
  std::vector<double> v(a.numel());
  const auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = x[i] * y[i];
  Tensor out = make_result(a.shape(), std::move(v), {a, b});
  set_backward(out, [pa = a.node(), pb = b.node()](detail::Node& self) {
    const auto& g = self.grad;
    if (pa->requires_grad) {
      auto& ga = pa->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * pb->value[i];
    }
    if (pb->requires_grad) {
      auto& gb = pb->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * pa->value[i];
    }
  });
  return out;
}

inline Tensor scale(const Tensor& a, double s) {
  std::vector<double> v(a.numel());
  const auto x = a.data();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = s * x[i];
  Tensor out = make_result(a.shape(), std::move(v), {a});
  set_backward(out, [pa = a.node(), s](detail::Node& self) { detail::accumulate_scaled(pa, self.grad, s); });
  return out;
}

inline Tensor add_scalar(const Tensor& a, double s) {
  std::vector<double> v(a.numel());
  const auto x = a.data();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = x[i] + s;
  Tensor out = make_result(a.shape(), std::move(v), {a});
  set_backward(out, [pa = a.node()](detail::Node& self) { detail::accumulate(pa, self.grad); });
  return out;
}

inline Tensor relu(const Tensor& a) {
  std::vector<double> v(a.numel());
  const auto x = a.data();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = x[i] > 0.0 ? x[i] : 0.0;
  if (kink::active())
    for (std::size_t i = 0; i < v.size(); ++i) kink::note(x[i] > 0.0 ? i : ~i);
  Tensor out = make_result(a.shape(), std::move(v), {a});
  set_backward(out, [pa = a.node()](detail::Node& self) {
    if (!pa->requires_grad) return;
    double* __restrict ga = pa->grad_buffer().data();
    const double* __restrict g = self.grad.data();
    const double* __restrict x = pa->value.data();
    const std::size_t n = self.grad.size();
    for (std::size_t i = 0; i < n; ++i) ga[i] += x[i] > 0.0 ? g[i] : 0.0;
  });
  return out;
}

inline double sigmoid_value(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline Tensor sigmoid(const Tensor& a) {
  std::vector<double> v(a.numel());
  const auto x = a.data();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = sigmoid_value(x[i]);
  Tensor out = make_result(a.shape(), std::move(v), {a});
  set_backward(out, [pa = a.node()](detail::Node& self) {
    if (!pa->requires_grad) return;
    auto& ga = pa->grad_buffer();
    const auto& g = self.grad;
    const auto& s = self.value;
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * s[i] * (1.0 - s[i]);
  });
  return out;
}

// Sum of all elements as a [1,1,1,1] tensor, accumulated in index order.
inline Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (double x : a.data()) total += x;
  Tensor out = make_result(Shape(1, 1, 1, 1), {total}, {a});
  set_backward(out, [pa = a.node()](detail::Node& self) {
    if (!pa->requires_grad) return;
    const double g = self.grad[0];
    for (double& x : pa->grad_buffer()) x += g;
  });
  return out;
}

inline Tensor mean(const Tensor& a) {
  if (a.numel() == 0) throw ShapeError("mean of an empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.numel()));
}

/// Concatenates along the channel axis; part k occupies a contiguous slab
/// of channels in argument order.
inline Tensor concat_channels(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_channels: empty list");
  if (parts.size() == 1) return parts.front();
  const Shape& s0 = parts.front().shape();
  std::size_t channels = 0;
  for (const Tensor& p : parts) {
    const Shape& s = p.shape();
    if (s.n() != s0.n() || s.h() != s0.h() || s.w() != s0.w())
      throw ShapeError("concat_channels: mismatched dims " + s.str() + " vs " + s0.str());
    channels += s.c();
  }
  const Shape shape(s0.n(), channels, s0.h(), s0.w());
  const std::size_t plane = s0.plane();
  std::vector<double> v(shape.numel());
  for (std::size_t n = 0; n < s0.n(); ++n) {
    std::size_t offset = n * channels * plane;
    for (const Tensor& p : parts) {
      const std::size_t len = p.shape().c() * plane;
      const auto src = p.data().subspan(n * len, len);
      std::copy(src.begin(), src.end(), v.begin() + static_cast<std::ptrdiff_t>(offset));
      offset += len;
    }
  }

  Tensor out = make_result(shape, std::move(v), {});
  if (grad_enabled() && std::any_of(parts.begin(), parts.end(), [](const Tensor& p) { return p.requires_grad(); })) {
    auto* node = out.node();
    node->requires_grad = true;
    std::vector<detail::Node*> raw;
    for (const Tensor& p : parts) {
      node->inputs.push_back(p.node_ptr());
      raw.push_back(p.node());
    }
    node->backward = [raw, channels, plane](detail::Node& self) {
      const std::size_t batch = self.shape.n();
      std::size_t start = 0;
      for (detail::Node* p : raw) {
        const std::size_t len = p->shape.c() * plane;
        if (p->requires_grad) {
          auto& g = p->grad_buffer();
          for (std::size_t n = 0; n < batch; ++n) {
            const double* src = self.grad.data() + n * channels * plane + start;
            double* dst = g.data() + n * len;
            for (std::size_t i = 0; i < len; ++i) dst[i] += src[i];
          }
        }
        start += len;
      }
    };
  }
  return out;
}

// Channels [begin, begin + count) of x.
inline Tensor slice_channels(const Tensor& x, std::size_t begin, std::size_t count) {
  const Shape& s = x.shape();
  if (begin + count > s.c()) throw ShapeError("slice_channels: range exceeds " + s.str());
  const Shape shape(s.n(), count, s.h(), s.w());
  const std::size_t plane = s.plane();
  std::vector<double> v(shape.numel());
  for (std::size_t n = 0; n < s.n(); ++n) {
    const double* src = x.data().data() + (n * s.c() + begin) * plane;
    std::copy(src, src + count * plane, v.begin() + static_cast<std::ptrdiff_t>(n * count * plane));
  }
  Tensor out = make_result(shape, std::move(v), {x});
  set_backward(out, [px = x.node(), begin, count, plane](detail::Node& self) {
    if (!px->requires_grad) return;
    auto& g = px->grad_buffer();
    const std::size_t channels = px->shape.c();
    for (std::size_t n = 0; n < self.shape.n(); ++n) {
      const double* src = self.grad.data() + n * count * plane;
      double* dst = g.data() + (n * channels + begin) * plane;
      for (std::size_t i = 0; i < count * plane; ++i) dst[i] += src[i];
    }
  });
  return out;
}

namespace detail {

// out[i0,i1,i2,i3] = in[j] where out axis k is input axis axes[k].
inline void permute_copy(std::span<const double> in, const Shape& in_shape, std::span<double> out,
                         const std::array<int, 4>& axes, bool accumulate) {
  const auto& d = in_shape.dims();
  const std::array<std::size_t, 4> in_stride{d[1] * d[2] * d[3], d[2] * d[3], d[3], 1};
  const std::array<std::size_t, 4> od{d[axes[0]], d[axes[1]], d[axes[2]], d[axes[3]]};
  const std::array<std::size_t, 4> st{in_stride[axes[0]], in_stride[axes[1]], in_stride[axes[2]],
                                      in_stride[axes[3]]};
  std::size_t o = 0;
  for (std::size_t a = 0; a < od[0]; ++a)
    for (std::size_t b = 0; b < od[1]; ++b)
      for (std::size_t c = 0; c < od[2]; ++c) {
        const std::size_t base = a * st[0] + b * st[1] + c * st[2];
        if (accumulate) {
          for (std::size_t e = 0; e < od[3]; ++e) out[base + e * st[3]] += in[o++];
        } else {
          for (std::size_t e = 0; e < od[3]; ++e) out[o++] = in[base + e * st[3]];
        }
      }
}

}  // namespace detail

/// Axis permutation: output axis k is input axis axes[k].
inline Tensor permute(const Tensor& x, std::array<int, 4> axes) {
  std::array<bool, 4> used{};
  for (int a : axes) {
    if (a < 0 || a > 3 || used[a]) throw ShapeError("permute: axes must be a permutation of 0..3");
    used[a] = true;
  }
  const auto& d = x.shape().dims();
  const Shape shape(d[axes[0]], d[axes[1]], d[axes[2]], d[axes[3]]);
  std::vector<double> v(shape.numel());
  detail::permute_copy(x.data(), x.shape(), v, axes, false);
  Tensor out = make_result(shape, std::move(v), {x});
  set_backward(out, [px = x.node(), axes](detail::Node& self) {
    if (!px->requires_grad) return;
    // Scatter the output gradient back through the same index map.
    detail::permute_copy(self.grad, px->shape, px->grad_buffer(), axes, true);
  });
  return out;
}

/// Multiplies every channel of x by a single-channel gate of matching
/// batch and spatial dims.
inline Tensor gate_mul(const Tensor& x, const Tensor& gate) {
  const Shape& s = x.shape();
  const Shape& gs = gate.shape();
  if (gs.c() != 1 || gs.n() != s.n() || gs.h() != s.h() || gs.w() != s.w())
    throw ShapeError("gate_mul: gate " + gs.str() + " does not fit " + s.str());
  const std::size_t plane = s.plane();
  std::vector<double> v(s.numel());
  const auto xv = x.data();
  const auto gv = gate.data();
  for (std::size_t n = 0; n < s.n(); ++n)
    for (std::size_t c = 0; c < s.c(); ++c) {
      const std::size_t base = (n * s.c() + c) * plane;
      const double* g = gv.data() + n * plane;
      for (std::size_t i = 0; i < plane; ++i) v[base + i] = xv[base + i] * g[i];
    }
  Tensor out = make_result(s, std::move(v), {x, gate});
  set_backward(out, [px = x.node(), pg = gate.node(), plane](detail::Node& self) {
    const std::size_t batch = self.shape.n();
    const std::size_t channels = self.shape.c();
    const auto& go = self.grad;
    if (px->requires_grad) {
      auto& gx = px->grad_buffer();
      for (std::size_t n = 0; n < batch; ++n)
        for (std::size_t c = 0; c < channels; ++c) {
          const std::size_t base = (n * channels + c) * plane;
          const double* g = pg->value.data() + n * plane;
          for (std::size_t i = 0; i < plane; ++i) gx[base + i] += go[base + i] * g[i];
        }
    }
    if (pg->requires_grad) {
      auto& gg = pg->grad_buffer();
      for (std::size_t n = 0; n < batch; ++n)
        for (std::size_t c = 0; c < channels; ++c) {
          const std::size_t base = (n * channels + c) * plane;
          double* g = gg.data() + n * plane;
          for (std::size_t i = 0; i < plane; ++i) g[i] += go[base + i] * px->value[base + i];
        }
    }
  });
  return out;
}

}  // namespace vasl
