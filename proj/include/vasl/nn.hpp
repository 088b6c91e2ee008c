#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vasl/conv.hpp"
#include "vasl/norm.hpp"
#include "vasl/rng.hpp"
#include "vasl/tensor.hpp"

namespace vasl {

/// Named learnable tensors and non-learnable buffers, iterated in
/// lexicographic name order, plus Adam moment buffers.
class ParamStore {
 public:
  struct Moments {
    std::vector<double> m;
    std::vector<double> v;
  };

  Tensor add_param(const std::string& name, Tensor t) {
    t.set_requires_grad(true);
    if (!params_.emplace(name, t).second) throw ConfigError("duplicate parameter name: " + name);
    return t;
  }

  Tensor add_buffer(const std::string& name, Tensor t) {
    if (!buffers_.emplace(name, t).second) throw ConfigError("duplicate buffer name: " + name);
    return t;
  }

  const std::map<std::string, Tensor>& params() const { return params_; }
  const std::map<std::string, Tensor>& buffers() const { return buffers_; }

  Tensor param(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw ConfigError("unknown parameter: " + name);
    return it->second;
  }

  std::size_t scalar_count() const {
    std::size_t total = 0;
    for (const auto& [name, t] : params_) total += t.numel();
    return total;
  }

  void zero_grad() {
    for (auto& [name, t] : params_) t.clear_grad();
  }

  std::map<std::string, Moments>& moments() { return moments_; }
  const std::map<std::string, Moments>& moments() const { return moments_; }
  std::uint64_t step() const { return step_; }
  void set_step(std::uint64_t s) { step_ = s; }

 private:
  std::map<std::string, Tensor> params_;
  std::map<std::string, Tensor> buffers_;
  std::map<std::string, Moments> moments_;
  std::uint64_t step_ = 0;
};

/// Each parameter draws from its own stream keyed by (seed, name), so the
/// initial value of a tensor does not depend on construction order or on
/// which other modules exist.
inline Rng param_rng(std::uint64_t seed, const std::string& name) {
  return Rng(derive_seed(seed, hash_name(name)));
}

// Normal with std sqrt(2 / fan_in).
inline Tensor he_normal(Shape shape, std::size_t fan_in, std::uint64_t seed, const std::string& name) {
  Rng rng = param_rng(seed, name);
  const double std_dev = std::sqrt(2.0 / static_cast<double>(fan_in));
  std::vector<double> v(shape.numel());
  for (double& x : v) x = std_dev * rng.normal();
  return Tensor(shape, std::move(v));
}

struct Conv {
  ConvSpec spec;
  Tensor weight;
  std::optional<Tensor> bias;

  static Conv create(ParamStore& store, const std::string& name, const ConvSpec& spec, std::uint64_t seed) {
    Conv c{spec, {}, {}};
    c.weight = store.add_param(name + ".weight", he_normal(spec.weight_shape(), spec.fan_in(), seed, name + ".weight"));
    if (spec.bias) c.bias = store.add_param(name + ".bias", Tensor::zeros(spec.bias_shape()));
    return c;
  }

  Tensor operator()(const Tensor& x) const { return conv2d(x, spec, weight, bias); }
  std::size_t param_count() const { return spec.param_count(); }
};

inline constexpr std::size_t kTransposedStride = 2;

struct TransposedConv {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  Tensor weight;

  // Fan-in counts the inputs reaching one output pixel, i.e. in_channels.
  static TransposedConv create(ParamStore& store, const std::string& name, std::size_t in, std::size_t out,
                               std::uint64_t seed) {
    TransposedConv t{in, out, {}};
    t.weight = store.add_param(name + ".weight", he_normal(Shape(in, out, 2, 2), in, seed, name + ".weight"));
    return t;
  }

  Tensor operator()(const Tensor& x) const { return transposed_conv2d(x, weight); }
  std::size_t param_count() const { return weight.numel(); }
  std::size_t kernel() const { return weight.shape().h(); }
  std::size_t stride() const { return kTransposedStride; }
};

struct BatchNorm {
  BatchNormState state;

  static BatchNorm create(ParamStore& store, const std::string& name, std::size_t channels) {
    BatchNorm b{BatchNormState::make(channels)};
    store.add_param(name + ".gamma", b.state.gamma);
    store.add_param(name + ".beta", b.state.beta);
    store.add_buffer(name + ".running_mean", b.state.running_mean);
    store.add_buffer(name + ".running_var", b.state.running_var);
    return b;
  }

  Tensor operator()(const Tensor& x) { return batch_norm(x, state); }
  void set_mode(Mode m) { state.mode = m; }
  std::size_t param_count() const { return 2 * state.channels(); }
};

}  // namespace vasl
