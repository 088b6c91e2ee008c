#pragma once

#include <array>
#include <string>
#include <vector>

#include "vasl/attention.hpp"
#include "vasl/nn.hpp"
#include "vasl/ops.hpp"
#include "vasl/pool.hpp"

namespace vasl {

enum class Domain { rgb, edge, depth };

inline const char* domain_name(Domain d) {
  switch (d) {
    case Domain::rgb: return "rgb";
    case Domain::edge: return "edge";
    case Domain::depth: return "depth";
  }
  return "?";
}

inline std::size_t domain_channels(Domain d) { return d == Domain::rgb ? 3 : 1; }

struct DenseBlockSpec {
  std::size_t num_layers = 4;
  std::size_t growth_rate = 8;
  std::size_t bottleneck_factor = 4;

  std::size_t out_channels(std::size_t in) const { return in + num_layers * growth_rate; }
};

struct ExtractorConfig {
  Domain domain = Domain::rgb;
  std::size_t stem_channels = 16;
  std::array<DenseBlockSpec, 2> blocks{};
  std::size_t attention_kernel = 7;

  std::size_t in_channels() const { return domain_channels(domain); }
  std::size_t transition_in() const { return blocks[0].out_channels(stem_channels); }
  std::size_t transition_out() const { return transition_in() / 2; }
  std::size_t out_channels() const { return blocks[1].out_channels(transition_out()); }
};

/// BN -> ReLU -> 1x1 conv (bottleneck) -> BN -> ReLU -> 3x3 conv (growth).
class DenseLayer {
 public:
  static DenseLayer create(ParamStore& store, const std::string& name, std::size_t in_channels,
                           const DenseBlockSpec& spec, std::uint64_t seed) {
    const std::size_t width = spec.bottleneck_factor * spec.growth_rate;
    DenseLayer l;
    l.in_channels_ = in_channels;
    l.bn1_ = BatchNorm::create(store, name + ".bn1", in_channels);
    l.conv1_ = Conv::create(store, name + ".conv1", ConvSpec::square(in_channels, width, 1), seed);
    l.bn2_ = BatchNorm::create(store, name + ".bn2", width);
    l.conv2_ = Conv::create(store, name + ".conv2", ConvSpec::square(width, spec.growth_rate, 3, 1, 1), seed);
    return l;
  }

  Tensor operator()(const Tensor& x) {
    if (x.shape().c() != in_channels_)
      throw ShapeError("dense layer expects " + std::to_string(in_channels_) + " input channels, got " +
                       std::to_string(x.shape().c()));
    return conv2_(relu(bn2_(conv1_(relu(bn1_(x))))));
  }

  void set_mode(Mode m) {
    bn1_.set_mode(m);
    bn2_.set_mode(m);
  }

  std::size_t in_channels() const { return in_channels_; }
  std::size_t out_channels() const { return conv2_.spec.out_channels; }
  Conv& conv2() { return conv2_; }

 private:
  std::size_t in_channels_ = 0;
  BatchNorm bn1_;
  Conv conv1_;
  BatchNorm bn2_;
  Conv conv2_;
};

/// Layer k consumes the concatenation of the block input and the outputs of
/// layers 0..k-1; the block returns the concatenation of all of them.
class DenseBlock {
 public:
  static DenseBlock create(ParamStore& store, const std::string& name, std::size_t in_channels,
                           const DenseBlockSpec& spec, std::uint64_t seed) {
    if (spec.num_layers == 0 || spec.growth_rate == 0 || spec.bottleneck_factor == 0)
      throw ConfigError(name + ": dense block sizes must be positive");
    DenseBlock b;
    b.in_channels_ = in_channels;
    b.spec_ = spec;
    for (std::size_t k = 0; k < spec.num_layers; ++k) {
      b.layers_.push_back(
          DenseLayer::create(store, name + ".layer" + std::to_string(k), in_channels + k * spec.growth_rate, spec, seed));
      if (b.layers_.back().in_channels() != in_channels + k * spec.growth_rate)
        throw ConfigError(name + ": dense wiring width mismatch at layer " + std::to_string(k));
    }
    return b;
  }

  /// skip_layer, when set, zeroes that layer's output before later layers
  /// and the final concatenation see it (used to probe feature reuse).
  Tensor forward(const Tensor& x, std::optional<std::size_t> skip_layer = std::nullopt) {
    std::vector<Tensor> features{x};
    for (std::size_t k = 0; k < layers_.size(); ++k) {
      Tensor y = layers_[k](concat_channels(features));
      if (skip_layer && *skip_layer == k) y = scale(y, 0.0);
      features.push_back(y);
    }
    return concat_channels(features);
  }

  Tensor operator()(const Tensor& x) { return forward(x); }

  void set_mode(Mode m) {
    for (auto& l : layers_) l.set_mode(m);
  }

  std::size_t in_channels() const { return in_channels_; }
  std::size_t out_channels() const { return spec_.out_channels(in_channels_); }
  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

 private:
  std::size_t in_channels_ = 0;
  DenseBlockSpec spec_;
  std::vector<DenseLayer> layers_;
};

/// BN -> ReLU -> 1x1 conv (half channels) -> 2x2 average pool.
class Transition {
 public:
  static Transition create(ParamStore& store, const std::string& name, std::size_t in, std::size_t out,
                           std::uint64_t seed) {
    Transition t;
    t.bn_ = BatchNorm::create(store, name + ".bn", in);
    t.conv_ = Conv::create(store, name + ".conv", ConvSpec::square(in, out, 1), seed);
    return t;
  }

  Tensor operator()(const Tensor& x) { return pool2d(conv_(relu(bn_(x))), PoolKind::avg); }
  void set_mode(Mode m) { bn_.set_mode(m); }

 private:
  BatchNorm bn_;
  Conv conv_;
};

/// Attentive dense feature extractor for one input domain: stem (/4) ->
/// dense block -> attention -> transition (/2) -> dense block -> attention.
class Extractor {
 public:
  static Extractor create(ParamStore& store, const std::string& name, const ExtractorConfig& cfg, std::uint64_t seed) {
    Extractor e;
    e.cfg_ = cfg;
    e.stem_conv_ =
        Conv::create(store, name + ".stem.conv", ConvSpec::square(cfg.in_channels(), cfg.stem_channels, 7, 2, 3), seed);
    e.stem_bn_ = BatchNorm::create(store, name + ".stem.bn", cfg.stem_channels);
    e.block1_ = DenseBlock::create(store, name + ".block1", cfg.stem_channels, cfg.blocks[0], seed);
    e.attention1_ = TripletAttention::create(store, name + ".att1", seed, cfg.attention_kernel);
    e.transition_ = Transition::create(store, name + ".transition", cfg.transition_in(), cfg.transition_out(), seed);
    e.block2_ = DenseBlock::create(store, name + ".block2", cfg.transition_out(), cfg.blocks[1], seed);
    e.attention2_ = TripletAttention::create(store, name + ".att2", seed, cfg.attention_kernel);
    return e;
  }

  Tensor operator()(const Tensor& image) {
    if (image.shape().c() != cfg_.in_channels())
      throw ShapeError(std::string(domain_name(cfg_.domain)) + " extractor expects " +
                       std::to_string(cfg_.in_channels()) + " channels, got " + image.shape().str());
    Tensor x = max_pool2d(relu(stem_bn_(stem_conv_(image))), 3, 2, 1);
    x = attention1_(block1_(x));
    x = transition_(x);
    return attention2_(block2_(x));
  }

  void set_mode(Mode m) {
    stem_bn_.set_mode(m);
    block1_.set_mode(m);
    attention1_.set_mode(m);
    transition_.set_mode(m);
    block2_.set_mode(m);
    attention2_.set_mode(m);
  }

  const ExtractorConfig& config() const { return cfg_; }
  std::size_t out_channels() const { return cfg_.out_channels(); }
  std::size_t dense_block_count() const { return 2; }
  std::size_t transition_count() const { return 1; }
  std::array<const TripletAttention*, 2> attention_layers() const { return {&attention1_, &attention2_}; }
  std::array<const DenseBlock*, 2> dense_blocks() const { return {&block1_, &block2_}; }

 private:
  ExtractorConfig cfg_;
  Conv stem_conv_;
  BatchNorm stem_bn_;
  DenseBlock block1_;
  TripletAttention attention1_;
  Transition transition_;
  DenseBlock block2_;
  TripletAttention attention2_;
};

}  // namespace vasl
