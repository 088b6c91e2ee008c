#pragma once

#include <algorithm>
#include <cmath>

#include "vasl/tensor.hpp"

namespace vasl {

inline constexpr double kProbClamp = 1e-7;

/// Mean over pixels of -alpha_t (1 - p_t)^gamma log(p_t), where p_t is the
/// predicted probability of the true class and alpha_t = alpha for the
/// positive class, 1 - alpha otherwise. Predictions are clamped to
/// [1e-7, 1 - 1e-7]; the gradient is zero where the clamp is active.
inline Tensor focal_loss(const Tensor& pred, const Tensor& target, double gamma, double alpha) {
  if (!(pred.shape() == target.shape()))
    throw ShapeError("focal_loss: prediction " + pred.shape().str() + " vs target " + target.shape().str());
  if (pred.numel() == 0) throw ShapeError("focal_loss: empty prediction");
  const auto p = pred.data();
  const auto t = target.data();
  const std::size_t n = p.size();
  for (double v : t)
    if (v != 0.0 && v != 1.0) throw ShapeError("focal_loss: target must be binary");

  const bool record = kink::active();
  std::vector<double> dloss(n);
  double total = 0.0;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const bool pos = t[i] == 1.0;
    const bool clamped = p[i] < kProbClamp || p[i] > 1.0 - kProbClamp;
    if (record) kink::note(clamped ? i : ~i);
    const double pc = std::clamp(p[i], kProbClamp, 1.0 - kProbClamp);
    const double pt = pos ? pc : 1.0 - pc;
    const double at = pos ? alpha : 1.0 - alpha;
    const double one_minus = 1.0 - pt;
    const double mod = std::pow(one_minus, gamma);
    const double logp = std::log(pt);
    total += -at * mod * logp;
    // d/dpt [-(1-pt)^g log pt] = g (1-pt)^(g-1) log pt - (1-pt)^g / pt
    double dpt = -at * mod / pt;
    if (gamma != 0.0) dpt += -at * (-gamma * std::pow(one_minus, gamma - 1.0) * logp);
    const double dp = pos ? dpt : -dpt;
    dloss[i] = clamped ? 0.0 : dp * inv_n;
  }

  Tensor out = make_result(Shape(1, 1, 1, 1), {total * inv_n}, {pred});
  set_backward(out, [pp = pred.node(), dloss = std::move(dloss)](detail::Node& self) {
    if (!pp->requires_grad) return;
    auto& g = pp->grad_buffer();
    const double go = self.grad[0];
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += go * dloss[i];
  });
  return out;
}

}  // namespace vasl
