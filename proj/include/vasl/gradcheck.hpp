#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "vasl/attention.hpp"
#include "vasl/extractor.hpp"
#include "vasl/fusion.hpp"
#include "vasl/loss.hpp"
#include "vasl/model.hpp"
#include "vasl/ops.hpp"
#include "vasl/pool.hpp"

namespace vasl {

struct GradcheckOptions {
  double step = 1e-5;
  // Denominator floor: rel = |a - n| / max(|a|, |n|, floor). Keeps
  // near-zero gradient entries from turning rounding noise into large ratios.
  double floor = 1e-6;
  std::size_t max_coords = 48;  // per checked tensor; all coordinates when smaller
};

struct GradcheckResult {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // perturbation changed a relu sign, argmax or clamp side
};

namespace detail {

inline std::vector<std::size_t> pick_coords(std::size_t n, std::size_t cap, Rng& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  if (n <= cap) return idx;
  for (std::size_t i = 0; i < cap; ++i) std::swap(idx[i], idx[i + rng.below(n - i)]);
  idx.resize(cap);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace detail

/// Compares the analytic gradient of L = sum(f() * R) with central
/// differences, for a fixed random R in [-1,1]. f must rebuild its output
/// from the current values of the tensors in wrt. Coordinates whose
/// perturbation changes the branch-decision hash sit within one step of a
/// kink and are skipped. With total_coords set, that many coordinates are
/// drawn across all of wrt instead of up to max_coords per tensor.
inline GradcheckResult gradcheck(const std::string& name, const std::function<Tensor()>& f, std::vector<Tensor> wrt,
                                 std::uint64_t seed, const GradcheckOptions& opt = {},
                                 std::optional<std::size_t> total_coords = std::nullopt) {
  GradcheckResult res;
  res.name = name;
  Rng rng(derive_seed(seed, hash_name(name)));

  for (auto& t : wrt) {
    t.set_requires_grad(true);
    t.clear_grad();
  }
  std::uint64_t base_hash = 0;
  Tensor out;
  {
    kink::Scope scope;
    out = f();
    base_hash = scope.hash();
  }
  std::vector<double> r(out.numel());
  for (double& v : r) v = rng.uniform(-1.0, 1.0);
  backward(sum(mul(out, Tensor(out.shape(), r))));

  // (tensor, coordinate) pairs to probe.
  std::vector<std::pair<std::size_t, std::size_t>> probes;
  if (total_coords) {
    std::size_t n = 0;
    for (const auto& t : wrt) n += t.numel();
    for (std::size_t flat : detail::pick_coords(n, *total_coords, rng)) {
      std::size_t k = 0;
      while (flat >= wrt[k].numel()) flat -= wrt[k++].numel();
      probes.emplace_back(k, flat);
    }
  } else {
    for (std::size_t k = 0; k < wrt.size(); ++k)
      for (std::size_t i : detail::pick_coords(wrt[k].numel(), opt.max_coords, rng)) probes.emplace_back(k, i);
  }

  std::vector<std::vector<double>> analytic;
  for (auto& t : wrt) analytic.emplace_back(t.grad().begin(), t.grad().end());

  auto probe = [&](std::uint64_t& hash) {
    NoGradGuard guard;
    kink::Scope scope;
    Tensor o = f();
    hash = scope.hash();
    return std::vector<double>(o.values());
  };

  for (const auto& [k, i] : probes) {
    auto values = wrt[k].mutable_data();
    const double saved = values[i];
    std::uint64_t hp = 0, hm = 0;
    values[i] = saved + opt.step;
    const auto plus = probe(hp);
    values[i] = saved - opt.step;
    const auto minus = probe(hm);
    values[i] = saved;
    if (hp != base_hash || hm != base_hash) {
      ++res.skipped;
      continue;
    }
    // Differencing outputs before weighting avoids cancellation in L itself.
    double diff = 0.0;
    for (std::size_t j = 0; j < r.size(); ++j) diff += (plus[j] - minus[j]) * r[j];
    const double numeric = diff / (2.0 * opt.step);
    const double a = analytic[k].empty() ? 0.0 : analytic[k][i];
    const double denom = std::max({std::abs(a), std::abs(numeric), opt.floor});
    res.max_rel_error = std::max(res.max_rel_error, std::abs(a - numeric) / denom);
    ++res.checked;
  }
  for (auto& t : wrt) t.clear_grad();
  return res;
}

/// Small three-domain network at 32x32: focal loss of the full forward
/// pass, checked on `coords` random parameter scalars.
inline ModelConfig micro_config(std::uint64_t seed) {
  ModelConfig cfg;
  cfg.image_size = 32;
  cfg.stem_channels = 4;
  cfg.block1_layers = 2;
  cfg.block2_layers = 2;
  cfg.growth_rate = 2;
  cfg.bottleneck_factor = 2;
  cfg.squeeze_out = 8;
  cfg.mrfu_widths = {4, 4, 4, 4};
  cfg.batch_size = 2;
  cfg.seed = seed;
  return cfg;
}

inline GradcheckResult gradcheck_micro_network(std::uint64_t seed, const GradcheckOptions& opt = {},
                                               std::size_t coords = 20) {
  const ModelConfig cfg = micro_config(seed);
  auto net = std::make_shared<SpliceNet>(build_model(cfg));
  const std::size_t s = cfg.image_size;
  DomainInputs in;
  in.rgb = uniform(Shape(2, 3, s, s), derive_seed(seed, hash_name("micro.rgb")), 0.0, 1.0);
  in.edge = uniform(Shape(2, 1, s, s), derive_seed(seed, hash_name("micro.edge")), 0.0, 1.0);
  in.depth = uniform(Shape(2, 1, s, s), derive_seed(seed, hash_name("micro.depth")), 0.0, 1.0);
  Tensor target = uniform(Shape(2, 1, s, s), derive_seed(seed, hash_name("micro.mask")), 0.0, 1.0);
  for (double& v : target.mutable_data()) v = v < 0.3 ? 1.0 : 0.0;
  std::vector<Tensor> wrt;
  for (const auto& [n, t] : net->params().params()) wrt.push_back(t);
  return gradcheck(
      "micro_network",
      [=] { return focal_loss(net->forward(in), target, cfg.focal_gamma, cfg.focal_alpha); }, wrt, seed, opt,
      coords);
}

/// The op suite run by `vasl gradcheck`: every layer type on small random
/// shapes plus one end-to-end micro network.
inline std::vector<GradcheckResult> gradcheck_suite(std::uint64_t seed, const GradcheckOptions& opt = {}) {
  std::vector<GradcheckResult> out;
  auto input = [&](const char* tag, Shape s) { return randn(s, derive_seed(seed, hash_name(tag)), true); };
  auto run = [&](const std::string& name, const std::function<Tensor()>& f, std::vector<Tensor> wrt) {
    out.push_back(gradcheck(name, f, std::move(wrt), seed, opt));
  };

  {
    Tensor a = input("add.a", Shape(2, 3, 4, 4)), b = input("add.b", Shape(2, 3, 4, 4));
    run("add", [=] { return add(a, b); }, {a, b});
    run("sub", [=] { return sub(a, b); }, {a, b});
    run("mul", [=] { return mul(a, b); }, {a, b});
    run("scalar_mul", [=] { return scale(a, -1.75); }, {a});
    run("relu", [=] { return relu(a); }, {a});
    run("sigmoid", [=] { return sigmoid(a); }, {a});
  }
  {
    Tensor a = input("concat.a", Shape(2, 2, 4, 4)), b = input("concat.b", Shape(2, 3, 4, 4));
    run("concat_channels", [=] { return concat_channels({a, b}); }, {a, b});
  }
  {
    Tensor x = input("conv.x", Shape(2, 3, 8, 8));
    Tensor w = input("conv.w", Shape(4, 3, 3, 3)), bias = input("conv.b", Shape(1, 4, 1, 1));
    const ConvSpec spec = ConvSpec::square(3, 4, 3, 1, 2, 2, true);
    run("conv2d_3x3_dil2", [=] { return conv2d(x, spec, w, bias); }, {x, w, bias});
    Tensor w7 = input("conv7.w", Shape(4, 3, 7, 7));
    const ConvSpec stem = ConvSpec::square(3, 4, 7, 2, 3);
    run("conv2d_7x7_stride2", [=] { return conv2d(x, stem, w7); }, {x, w7});
    Tensor w1 = input("conv1.w", Shape(4, 3, 1, 1));
    run("conv2d_1x1", [=] { return conv2d(x, ConvSpec::square(3, 4, 1), w1); }, {x, w1});
  }
  {
    Tensor x = input("tconv.x", Shape(2, 3, 4, 4)), w = input("tconv.w", Shape(3, 2, 2, 2));
    run("transposed_conv2d", [=] { return transposed_conv2d(x, w); }, {x, w});
  }
  {
    Tensor x = input("bn.x", Shape(2, 4, 8, 8));
    auto state = std::make_shared<BatchNormState>(BatchNormState::make(4));
    for (double& v : state->gamma.mutable_data()) v = 0.5 + v;  // away from the identity scale
    run("batch_norm_train", [=] { return batch_norm(x, *state); }, {x, state->gamma, state->beta});
  }
  {
    Tensor x = input("pool.x", Shape(2, 3, 8, 8));
    run("avg_pool", [=] { return pool2d(x, PoolKind::avg); }, {x});
    run("max_pool", [=] { return pool2d(x, PoolKind::max); }, {x});
    run("max_pool_k3s2p1", [=] { return max_pool2d(x, 3, 2, 1); }, {x});
    run("zpool_channel", [=] { return zpool(x, Axis::channel); }, {x});
    run("zpool_height", [=] { return zpool(x, Axis::height); }, {x});
    run("zpool_width", [=] { return zpool(x, Axis::width); }, {x});
  }
  {
    Tensor p = sigmoid(input("focal.p", Shape(2, 1, 4, 4))).detach();
    Tensor t = uniform(Shape(2, 1, 4, 4), derive_seed(seed, hash_name("focal.t")), 0.0, 1.0);
    for (double& v : t.mutable_data()) v = v < 0.5 ? 0.0 : 1.0;
    run("focal_loss", [=] { return focal_loss(p, t, 2.0, 0.25); }, {p});
  }
  {
    auto store = std::make_shared<ParamStore>();
    auto att = std::make_shared<TripletAttention>(TripletAttention::create(*store, "att", seed));
    Tensor x = input("att.x", Shape(2, 4, 8, 8));
    std::vector<Tensor> wrt{x};
    for (const auto& [n, t] : store->params()) wrt.push_back(t);
    run("triplet_attention", [=] { return (*att)(x); }, wrt);
  }
  {
    auto store = std::make_shared<ParamStore>();
    auto layer = std::make_shared<DenseLayer>(DenseLayer::create(*store, "dense", 4, DenseBlockSpec{1, 3, 2}, seed));
    Tensor x = input("dense.x", Shape(2, 4, 8, 8));
    std::vector<Tensor> wrt{x};
    for (const auto& [n, t] : store->params()) wrt.push_back(t);
    run("dense_layer", [=] { return (*layer)(x); }, wrt);
  }
  {
    auto store = std::make_shared<ParamStore>();
    auto stage = std::make_shared<VaMrfu>(VaMrfu::create(*store, "mrfu", 3, 4, {2, 3, 4}, seed));
    Tensor x = input("mrfu.x", Shape(2, 3, 4, 4));
    std::vector<Tensor> wrt{x};
    for (const auto& [n, t] : store->params()) wrt.push_back(t);
    run("va_mrfu_stage", [=] { return (*stage)(x); }, wrt);
  }
  out.push_back(gradcheck_micro_network(seed, opt));
  return out;
}

}  // namespace vasl
