#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "vasl/attention.hpp"
#include "vasl/nn.hpp"
#include "vasl/ops.hpp"
#include "vasl/pool.hpp"

namespace vasl {

/// Attentive downsampler: merge (channel concat) -> attention -> 1x1
/// squeeze -> 2x2 average pool.
class VaDs {
 public:
  static VaDs create(ParamStore& store, const std::string& name, std::size_t in_channels, std::size_t out_channels,
                     std::uint64_t seed, std::size_t attention_kernel = 7) {
    VaDs d;
    d.in_channels_ = in_channels;
    d.attention_ = TripletAttention::create(store, name + ".att", seed, attention_kernel);
    d.squeeze_ = Conv::create(store, name + ".squeeze", ConvSpec::square(in_channels, out_channels, 1, 1, 0, 1, true), seed);
    return d;
  }

  Tensor operator()(const std::vector<Tensor>& features) {
    if (features.empty()) throw ShapeError("VA-DS needs at least one feature map");
    const Shape& s0 = features.front().shape();
    for (const Tensor& f : features)
      if (f.shape().n() != s0.n() || f.shape().h() != s0.h() || f.shape().w() != s0.w())
        throw ShapeError("VA-DS: spatial mismatch " + f.shape().str() + " vs " + s0.str());
    const Tensor merged = concat_channels(features);
    if (merged.shape().c() != in_channels_)
      throw ShapeError("VA-DS expects " + std::to_string(in_channels_) + " merged channels, got " +
                       std::to_string(merged.shape().c()));
    return pool2d(squeeze_(attention_(merged)), PoolKind::avg);
  }

  void set_mode(Mode m) { attention_.set_mode(m); }
  const TripletAttention& attention() const { return attention_; }
  std::size_t out_channels() const { return squeeze_.spec.out_channels; }

 private:
  std::size_t in_channels_ = 0;
  TripletAttention attention_;
  Conv squeeze_;
};

/// Three parallel 3x3 dilated convs (padding = dilation, shape preserving),
/// concatenated and fused back to the input width by a 1x1 conv.
class Aspp {
 public:
  static Aspp create(ParamStore& store, const std::string& name, std::size_t width,
                     const std::array<std::size_t, 3>& dilations, std::uint64_t seed) {
    Aspp a;
    a.dilations_ = dilations;
    for (std::size_t b = 0; b < 3; ++b) {
      const std::size_t d = dilations[b];
      a.branches_[b] =
          Conv::create(store, name + ".d" + std::to_string(d), ConvSpec::square(width, width, 3, 1, d, d), seed);
    }
    a.fuse_ = Conv::create(store, name + ".fuse", ConvSpec::square(3 * width, width, 1, 1, 0, 1, true), seed);
    return a;
  }

  Tensor operator()(const Tensor& x) {
    std::vector<Tensor> parts;
    for (auto& b : branches_) parts.push_back(b(x));
    return fuse_(concat_channels(parts));
  }

  const std::array<std::size_t, 3>& dilations() const { return dilations_; }
  std::array<Conv, 3>& branches() { return branches_; }
  const std::array<Conv, 3>& branches() const { return branches_; }
  Conv& fuse() { return fuse_; }

 private:
  std::array<std::size_t, 3> dilations_{2, 3, 4};
  std::array<Conv, 3> branches_;
  Conv fuse_;
};

/// One upsampling stage: transposed conv (k=s=2) -> BN -> ReLU -> ASPP ->
/// attention. Doubles height and width.
class VaMrfu {
 public:
  static VaMrfu create(ParamStore& store, const std::string& name, std::size_t in_channels, std::size_t width,
                       const std::array<std::size_t, 3>& dilations, std::uint64_t seed,
                       std::size_t attention_kernel = 7) {
    VaMrfu u;
    u.up_ = TransposedConv::create(store, name + ".up", in_channels, width, seed);
    u.bn_ = BatchNorm::create(store, name + ".bn", width);
    u.aspp_ = Aspp::create(store, name + ".aspp", width, dilations, seed);
    u.attention_ = TripletAttention::create(store, name + ".att", seed, attention_kernel);
    return u;
  }

  Tensor operator()(const Tensor& x) { return attention_(aspp_(relu(bn_(up_(x))))); }

  void set_mode(Mode m) {
    bn_.set_mode(m);
    attention_.set_mode(m);
  }

  const TransposedConv& up() const { return up_; }
  const Aspp& aspp() const { return aspp_; }
  Aspp& aspp() { return aspp_; }
  const TripletAttention& attention() const { return attention_; }
  std::size_t out_channels() const { return up_.out_channels; }

 private:
  TransposedConv up_;
  BatchNorm bn_;
  Aspp aspp_;
  TripletAttention attention_;
};

/// 1x1 conv to one channel followed by a sigmoid: per-pixel splice probability.
class MaskHead {
 public:
  // prior sets the initial output probability through the bias; 0.5 leaves it at zero.
  static MaskHead create(ParamStore& store, const std::string& name, std::size_t in_channels, std::uint64_t seed,
                         double prior = 0.5) {
    MaskHead h;
    h.conv_ = Conv::create(store, name + ".conv", ConvSpec::square(in_channels, 1, 1, 1, 0, 1, true), seed);
    h.conv_.bias->mutable_data()[0] = std::log(prior / (1.0 - prior));
    return h;
  }

  Tensor operator()(const Tensor& x) const { return sigmoid(conv_(x)); }
  Conv& conv() { return conv_; }

 private:
  Conv conv_;
};

}  // namespace vasl
