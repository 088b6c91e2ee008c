#pragma once

#include <cmath>
#include <vector>

#include "vasl/tensor.hpp"

namespace vasl {

enum class Mode { train, eval };

/// Per-channel batch normalization state. gamma/beta are learnable
/// [1,C,1,1] tensors; the running statistics are non-learnable buffers of
/// the same shape.
struct BatchNormState {
  Tensor gamma;
  Tensor beta;
  Tensor running_mean;
  Tensor running_var;
  double momentum = 0.1;
  double eps = 1e-5;
  Mode mode = Mode::train;

  static BatchNormState make(std::size_t channels, double momentum = 0.1, double eps = 1e-5) {
    const Shape s(1, channels, 1, 1);
    return BatchNormState{Tensor::full(s, 1.0, true), Tensor::zeros(s, true), Tensor::zeros(s),
                          Tensor::full(s, 1.0), momentum, eps, Mode::train};
  }

  std::size_t channels() const { return gamma.shape().c(); }
};

/// Train mode normalizes by the biased batch statistics over (N, H, W) and
/// folds the unbiased variance into the running buffers. Eval mode applies
/// the running statistics as a fixed per-channel affine map.
inline Tensor batch_norm(const Tensor& x, BatchNormState& state) {
  const Shape& s = x.shape();
  const std::size_t channels = s.c();
  if (channels != state.channels())
    throw ShapeError("batch_norm: input has " + std::to_string(channels) + " channels, state has " +
                     std::to_string(state.channels()));
  const std::size_t plane = s.plane();
  const std::size_t count = s.n() * plane;
  if (count == 0) throw ShapeError("batch_norm: zero batch*spatial extent in " + s.str());

  const double* xv = x.data().data();
  const double* gamma = state.gamma.data().data();
  const double* beta = state.beta.data().data();
  std::vector<double> v(s.numel());

  if (state.mode == Mode::eval) {
    const double* rm = state.running_mean.data().data();
    const double* rv = state.running_var.data().data();
    std::vector<double> mul(channels), add(channels);
    for (std::size_t c = 0; c < channels; ++c) {
      mul[c] = gamma[c] / std::sqrt(rv[c] + state.eps);
      add[c] = beta[c] - rm[c] * mul[c];
    }
    for (std::size_t n = 0; n < s.n(); ++n)
      for (std::size_t c = 0; c < channels; ++c) {
        const std::size_t base = (n * channels + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) v[base + i] = xv[base + i] * mul[c] + add[c];
      }
    // Eval mode keeps the scale factors; the shift does not affect gradients.
    Tensor out = make_result(s, std::move(v), {x, state.gamma, state.beta});
    set_backward(out, [px = x.node(), pg = state.gamma.node(), pb = state.beta.node(), mul, channels, plane,
                       rm = std::vector<double>(rm, rm + channels), rv = std::vector<double>(rv, rv + channels),
                       eps = state.eps](detail::Node& self) {
      const auto& g = self.grad;
      const std::size_t batch = self.shape.n();
      for (std::size_t c = 0; c < channels; ++c) {
        const double inv_std = 1.0 / std::sqrt(rv[c] + eps);
        double dgamma = 0.0, dbeta = 0.0;
        for (std::size_t n = 0; n < batch; ++n) {
          const std::size_t base = (n * channels + c) * plane;
          for (std::size_t i = 0; i < plane; ++i) {
            dbeta += g[base + i];
            dgamma += g[base + i] * (px->value[base + i] - rm[c]) * inv_std;
          }
          if (px->requires_grad) {
            double* gx = px->grad_buffer().data() + base;
            for (std::size_t i = 0; i < plane; ++i) gx[i] += g[base + i] * mul[c];
          }
        }
        if (pg->requires_grad) pg->grad_buffer()[c] += dgamma;
        if (pb->requires_grad) pb->grad_buffer()[c] += dbeta;
      }
    });
    return out;
  }

  std::vector<double> mean(channels, 0.0), inv_std(channels, 0.0);
  std::vector<double> xhat(s.numel());
  for (std::size_t c = 0; c < channels; ++c) {
    double acc = 0.0;
    for (std::size_t n = 0; n < s.n(); ++n) {
      const double* p = xv + (n * channels + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) acc += p[i];
    }
    const double mu = acc / static_cast<double>(count);
    double sq = 0.0;
    for (std::size_t n = 0; n < s.n(); ++n) {
      const double* p = xv + (n * channels + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) sq += (p[i] - mu) * (p[i] - mu);
    }
    const double var = sq / static_cast<double>(count);
    mean[c] = mu;
    inv_std[c] = 1.0 / std::sqrt(var + state.eps);

    for (std::size_t n = 0; n < s.n(); ++n) {
      const std::size_t base = (n * channels + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        const double h = (xv[base + i] - mu) * inv_std[c];
        xhat[base + i] = h;
        v[base + i] = gamma[c] * h + beta[c];
      }
    }

    const double unbiased = count > 1 ? sq / static_cast<double>(count - 1) : var;
    double& rm = state.running_mean.mutable_data()[c];
    double& rv = state.running_var.mutable_data()[c];
    rm = (1.0 - state.momentum) * rm + state.momentum * mu;
    rv = (1.0 - state.momentum) * rv + state.momentum * unbiased;
  }

  Tensor out = make_result(s, std::move(v), {x, state.gamma, state.beta});
  set_backward(out, [px = x.node(), pg = state.gamma.node(), pb = state.beta.node(), xhat = std::move(xhat),
                     inv_std = std::move(inv_std), channels, plane, count](detail::Node& self) {
    const auto& g = self.grad;
    const std::size_t batch = self.shape.n();
    for (std::size_t c = 0; c < channels; ++c) {
      double sum_g = 0.0, sum_gh = 0.0;
      for (std::size_t n = 0; n < batch; ++n) {
        const std::size_t base = (n * channels + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          sum_g += g[base + i];
          sum_gh += g[base + i] * xhat[base + i];
        }
      }
      if (pg->requires_grad) pg->grad_buffer()[c] += sum_gh;
      if (pb->requires_grad) pb->grad_buffer()[c] += sum_g;
      if (px->requires_grad) {
        const double gamma = pg->value[c];
        const double mean_g = sum_g / static_cast<double>(count);
        const double mean_gh = sum_gh / static_cast<double>(count);
        const double k = gamma * inv_std[c];
        auto& gx = px->grad_buffer();
        for (std::size_t n = 0; n < batch; ++n) {
          const std::size_t base = (n * channels + c) * plane;
          for (std::size_t i = 0; i < plane; ++i)
            gx[base + i] += k * (g[base + i] - mean_g - xhat[base + i] * mean_gh);
        }
      }
    }
  });
  return out;
}

}  // namespace vasl
