#pragma once

#include <cmath>
#include <cstdint>

#include "vasl/config.hpp"
#include "vasl/nn.hpp"

namespace vasl {

/// Learning rate for a zero-based epoch index.
///   exponential: base * (1 - decay)^e
///   linear:      base * max(0, 1 - decay * e)
///   constant:    base
inline double lr_at_epoch(std::size_t epoch, double base_lr, LrSchedule schedule = LrSchedule::exponential,
                          double decay = 0.1) {
  const auto e = static_cast<double>(epoch);
  switch (schedule) {
    case LrSchedule::exponential: return base_lr * std::pow(1.0 - decay, e);
    case LrSchedule::linear: return base_lr * std::max(0.0, 1.0 - decay * e);
    case LrSchedule::constant: return base_lr;
  }
  return base_lr;
}

inline double lr_at_epoch(std::size_t epoch, const ModelConfig& cfg) {
  return lr_at_epoch(epoch, cfg.lr, cfg.lr_schedule, cfg.lr_decay);
}

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamOptions from(const ModelConfig& cfg) { return {cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps}; }
};

/// One bias-corrected Adam update over every parameter, then clears the
/// gradients. A parameter that received no gradient this step is treated
/// as having a zero gradient. Throws if no parameter has a gradient at all.
inline void adam_step(ParamStore& store, double lr, const AdamOptions& opt = {}) {
  bool any = false;
  for (const auto& [name, p] : store.params()) any = any || p.has_grad();
  if (!any) throw GraphError("adam_step: no parameter has a gradient; run backward() first");

  const std::uint64_t t = store.step() + 1;
  store.set_step(t);
  const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(t));
  for (const auto& [name, param] : store.params()) {
    Tensor p = param;
    auto& mom = store.moments()[name];
    const std::size_t n = p.numel();
    if (mom.m.size() != n) {
      mom.m.assign(n, 0.0);
      mom.v.assign(n, 0.0);
    }
    const auto g = p.grad();
    auto values = p.mutable_data();
    for (std::size_t i = 0; i < n; ++i) {
      const double gi = g.empty() ? 0.0 : g[i];
      mom.m[i] = opt.beta1 * mom.m[i] + (1.0 - opt.beta1) * gi;
      mom.v[i] = opt.beta2 * mom.v[i] + (1.0 - opt.beta2) * gi * gi;
      const double mhat = mom.m[i] / bc1;
      const double vhat = mom.v[i] / bc2;
      values[i] -= lr * mhat / (std::sqrt(vhat) + opt.eps);
    }
    p.clear_grad();
  }
}

}  // namespace vasl
