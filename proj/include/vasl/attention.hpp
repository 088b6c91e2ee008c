#pragma once

#include <array>
#include <string>

#include "vasl/nn.hpp"
#include "vasl/ops.hpp"
#include "vasl/pool.hpp"

namespace vasl {

// Swap channel and height axes. Self-inverse.
inline Tensor rotate_channel_height(const Tensor& x) { return permute(x, {0, 2, 1, 3}); }

// Swap channel and width axes. Self-inverse.
inline Tensor rotate_channel_width(const Tensor& x) { return permute(x, {0, 3, 2, 1}); }

/// y = (x * g_ch + x * g_cw + x * g_hw) / 3, each gate broadcast along the
/// axis it was pooled over: g_ch is [N,1,C,W] (pooled over height), g_cw is
/// [N,1,H,C] (pooled over width) and g_hw is [N,1,H,W] (pooled over
/// channels). Equivalent to gating the rotated tensors and rotating back,
/// without materializing the rotations.
inline Tensor triplet_gate(const Tensor& x, const Tensor& g_ch, const Tensor& g_cw, const Tensor& g_hw) {
  const Shape& s = x.shape();
  const std::size_t N = s.n(), C = s.c(), H = s.h(), W = s.w();
  if (!(g_ch.shape() == Shape(N, 1, C, W)) || !(g_cw.shape() == Shape(N, 1, H, C)) ||
      !(g_hw.shape() == Shape(N, 1, H, W)))
    throw ShapeError("triplet_gate: gates " + g_ch.shape().str() + " " + g_cw.shape().str() + " " +
                     g_hw.shape().str() + " do not fit " + s.str());
  constexpr double third = 1.0 / 3.0;
  std::vector<double> v(s.numel());
  const double* xv = x.data().data();
  const double* a = g_ch.data().data();
  const double* b = g_cw.data().data();
  const double* c = g_hw.data().data();
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t ch = 0; ch < C; ++ch)
      for (std::size_t h = 0; h < H; ++h) {
        const std::size_t base = ((n * C + ch) * H + h) * W;
        const double* ga = a + (n * C + ch) * W;
        const double gb = b[(n * H + h) * C + ch];
        const double* gc = c + (n * H + h) * W;
        for (std::size_t w = 0; w < W; ++w) {
          const double xi = xv[base + w];
          v[base + w] = (xi * ga[w] + xi * gb + xi * gc[w]) * third;
        }
      }

  Tensor out = make_result(s, std::move(v), {x, g_ch, g_cw, g_hw});
  set_backward(out, [px = x.node(), pa = g_ch.node(), pb = g_cw.node(), pc = g_hw.node(), N, C, H,
                     W](detail::Node& self) {
    const double* go = self.grad.data();
    const double* xv = px->value.data();
    const double* a = pa->value.data();
    const double* b = pb->value.data();
    const double* c = pc->value.data();
    double* gx = px->requires_grad ? px->grad_buffer().data() : nullptr;
    double* ga = pa->requires_grad ? pa->grad_buffer().data() : nullptr;
    double* gb = pb->requires_grad ? pb->grad_buffer().data() : nullptr;
    double* gc = pc->requires_grad ? pc->grad_buffer().data() : nullptr;
    std::vector<double> sg(W);
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t ch = 0; ch < C; ++ch)
        for (std::size_t h = 0; h < H; ++h) {
          const std::size_t base = ((n * C + ch) * H + h) * W;
          const std::size_t ia = (n * C + ch) * W;
          const std::size_t ib = (n * H + h) * C + ch;
          const std::size_t ic = (n * H + h) * W;
          for (std::size_t w = 0; w < W; ++w) sg[w] = go[base + w] * third;
          if (gx)
            for (std::size_t w = 0; w < W; ++w) gx[base + w] += sg[w] * a[ia + w] + sg[w] * b[ib] + sg[w] * c[ic + w];
          if (ga)
            for (std::size_t w = 0; w < W; ++w) ga[ia + w] += sg[w] * xv[base + w];
          if (gb) {
            double acc = 0.0;
            for (std::size_t w = 0; w < W; ++w) acc += sg[w] * xv[base + w];
            gb[ib] += acc;
          }
          if (gc)
            for (std::size_t w = 0; w < W; ++w) gc[ic + w] += sg[w] * xv[base + w];
        }
  });
  return out;
}

/// Triplet attention. Branches 0 and 1 rotate channels into the height or
/// width axis, Z-pool over the axis that now holds the channels, and gate
/// the rotated tensor before rotating back; branch 2 is plain spatial
/// attention over Z-pooled channels. Each branch gate is
/// sigmoid(BN(conv_kxk(zpool))) with a 2-in/1-out bias-free conv, so the
/// layer holds 3 * (2 k^2 + 2) learnable scalars (300 for k = 7).
///
/// Only the two-plane pooled maps are physically rotated; the full tensor
/// is gated in place by triplet_gate.
class TripletAttention {
 public:
  struct Branch {
    Conv conv;
    BatchNorm bn;
  };

  static TripletAttention create(ParamStore& store, const std::string& name, std::uint64_t seed,
                                 std::size_t kernel = 7) {
    TripletAttention t;
    const char* suffix[3] = {"ch", "cw", "hw"};
    for (std::size_t b = 0; b < 3; ++b) {
      const std::string prefix = name + "." + suffix[b];
      t.branches_[b].conv = Conv::create(store, prefix + ".conv", ConvSpec::square(2, 1, kernel, 1, kernel / 2), seed);
      t.branches_[b].bn = BatchNorm::create(store, prefix + ".bn", 1);
    }
    return t;
  }

  /// gates, when non-null, receives the three sigmoid gate maps in branch
  /// order, each in its rotated frame: [N,1,C,W], [N,1,H,C], [N,1,H,W].
  Tensor forward(const Tensor& x, std::array<Tensor, 3>* gates = nullptr) {
    if (bypass_gates_) return x;
    // zpool over the rotated channel axis == zpool over the original axis,
    // with the two pooled planes moved to the channel slot.
    const Tensor g0 = gate(0, rotate_channel_height(zpool(x, Axis::height)));
    const Tensor g1 = gate(1, rotate_channel_width(zpool(x, Axis::width)));
    const Tensor g2 = gate(2, zpool(x, Axis::channel));
    if (gates) *gates = {g0, g1, g2};
    return triplet_gate(x, g0, g1, g2);
  }

  Tensor operator()(const Tensor& x) { return forward(x); }

  // Test hook: every gate becomes exactly 1, making the layer the identity.
  void set_bypass_gates(bool on) { bypass_gates_ = on; }

  void set_mode(Mode m) {
    for (auto& b : branches_) b.bn.set_mode(m);
  }

  std::size_t param_count() const {
    std::size_t total = 0;
    for (const auto& b : branches_) total += b.conv.param_count() + b.bn.param_count();
    return total;
  }

  const std::array<Branch, 3>& branches() const { return branches_; }
  std::array<Branch, 3>& branches() { return branches_; }

 private:
  Tensor gate(std::size_t b, const Tensor& pooled) { return sigmoid(branches_[b].bn(branches_[b].conv(pooled))); }

  std::array<Branch, 3> branches_;
  bool bypass_gates_ = false;
};

inline std::size_t attention_param_count(const TripletAttention& layer) { return layer.param_count(); }

}  // namespace vasl
