#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vasl/config.hpp"
#include "vasl/extractor.hpp"
#include "vasl/fusion.hpp"
#include "vasl/nn.hpp"

namespace vasl {

/// Per-domain network inputs, each [N, 3 or 1, H, W] with values in [0,1].
struct DomainInputs {
  std::optional<Tensor> rgb;
  std::optional<Tensor> edge;
  std::optional<Tensor> depth;

  const std::optional<Tensor>& get(Domain d) const {
    switch (d) {
      case Domain::rgb: return rgb;
      case Domain::edge: return edge;
      case Domain::depth: return depth;
    }
    return rgb;
  }

  std::optional<Tensor>& get(Domain d) { return const_cast<std::optional<Tensor>&>(std::as_const(*this).get(d)); }
};

/// Summary of what build_model wired together, for structural checks.
struct NetworkStructure {
  struct ExtractorInfo {
    Domain domain;
    std::size_t dense_blocks;
    std::size_t transitions;
    std::size_t attention_layers;
    std::vector<std::size_t> dense_layer_inputs;  // per block, per layer input width
    std::size_t out_channels;
  };
  struct StageInfo {
    std::size_t transposed_kernel;
    std::size_t transposed_stride;
    bool batch_norm;
    bool relu;
    std::array<std::size_t, 3> aspp_dilations;
    bool attention;
    std::size_t width;
  };
  std::vector<ExtractorInfo> extractors;
  std::size_t va_ds = 0;
  std::vector<StageInfo> stages;
  std::vector<std::size_t> attention_params;  // one entry per attention layer
  std::size_t parameter_scalars = 0;
};

/// Splice localization network: one attentive dense extractor per enabled
/// domain, a single attentive downsampler fusing them, four
/// multi-receptive-field upsampling stages and a sigmoid mask head.
class SpliceNet {
 public:
  static SpliceNet build(const ModelConfig& cfg) {
    cfg.validate();
    SpliceNet net;
    net.cfg_ = cfg;
    const std::uint64_t seed = cfg.seed;
    std::size_t fused = 0;
    for (Domain d : cfg.domains) {
      net.extractors_.push_back(
          Extractor::create(net.store_, std::string("mdfe.") + domain_name(d), cfg.extractor(d), seed));
      fused += net.extractors_.back().out_channels();
    }
    net.va_ds_ = VaDs::create(net.store_, "vads", fused, cfg.squeeze_out, seed, cfg.attention_kernel);
    std::size_t width = cfg.squeeze_out;
    for (std::size_t i = 0; i < cfg.mrfu_widths.size(); ++i) {
      net.stages_.push_back(VaMrfu::create(net.store_, "mrfu" + std::to_string(i), width, cfg.mrfu_widths[i],
                                           cfg.dilations, seed, cfg.attention_kernel));
      width = cfg.mrfu_widths[i];
    }
    net.head_ = MaskHead::create(net.store_, "head", width, seed, cfg.head_prior);
    return net;
  }

  SpliceNet(SpliceNet&&) = default;
  SpliceNet& operator=(SpliceNet&&) = default;
  SpliceNet(const SpliceNet&) = delete;
  SpliceNet& operator=(const SpliceNet&) = delete;

  /// Returns the [N,1,H,W] probability map.
  Tensor forward(const DomainInputs& inputs) {
    std::optional<Shape> ref;
    std::vector<Tensor> features;
    for (auto& e : extractors_) {
      const Domain d = e.config().domain;
      const auto& x = inputs.get(d);
      if (!x) throw ShapeError(std::string("missing input for enabled domain ") + domain_name(d));
      const Shape& s = x->shape();
      if (s.h() % 16 != 0 || s.w() % 16 != 0 || s.h() == 0 || s.w() == 0)
        throw ShapeError("input spatial dims must be positive multiples of 16, got " + s.str());
      if (ref && (ref->n() != s.n() || ref->h() != s.h() || ref->w() != s.w()))
        throw ShapeError("domain inputs disagree: " + s.str() + " vs " + ref->str());
      ref = s;
      features.push_back(e(*x));
    }
    Tensor x = va_ds_(features);
    for (auto& stage : stages_) x = stage(x);
    return head_(x);
  }

  void set_mode(Mode m) {
    for (auto& e : extractors_) e.set_mode(m);
    va_ds_.set_mode(m);
    for (auto& s : stages_) s.set_mode(m);
  }

  const ModelConfig& config() const { return cfg_; }
  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }

  std::size_t attention_layer_count() const { return 2 * extractors_.size() + 1 + stages_.size(); }

  NetworkStructure structure() const {
    NetworkStructure s;
    for (const auto& e : extractors_) {
      NetworkStructure::ExtractorInfo info{e.config().domain, 0, e.transition_count(), 0, {}, e.out_channels()};
      for (const DenseBlock* b : e.dense_blocks()) {
        ++info.dense_blocks;
        for (const auto& l : b->layers()) info.dense_layer_inputs.push_back(l.in_channels());
      }
      for (const TripletAttention* a : e.attention_layers()) {
        ++info.attention_layers;
        s.attention_params.push_back(a->param_count());
      }
      s.extractors.push_back(std::move(info));
    }
    s.va_ds = 1;
    s.attention_params.push_back(va_ds_.attention().param_count());
    for (const auto& st : stages_) {
      s.stages.push_back({st.up().kernel(), st.up().stride(), true, true, st.aspp().dilations(), true, st.out_channels()});
      s.attention_params.push_back(st.attention().param_count());
    }
    s.parameter_scalars = store_.scalar_count();
    return s;
  }

  std::vector<Extractor>& extractors() { return extractors_; }
  VaDs& va_ds() { return va_ds_; }
  std::vector<VaMrfu>& stages() { return stages_; }
  MaskHead& head() { return head_; }

 private:
  SpliceNet() = default;

  ModelConfig cfg_;
  ParamStore store_;
  std::vector<Extractor> extractors_;
  VaDs va_ds_;
  std::vector<VaMrfu> stages_;
  MaskHead head_;
};

inline SpliceNet build_model(const ModelConfig& cfg) { return SpliceNet::build(cfg); }

}  // namespace vasl
