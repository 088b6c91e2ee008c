#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "vasl/model.hpp"

using namespace vasl;

namespace {

void zero(Tensor t) {
  for (double& v : t.mutable_data()) v = 0.0;
}

bool all_zero(const Tensor& t) {
  for (double v : t.data())
    if (v != 0.0) return false;
  return true;
}

}  // namespace

TEST(DenseLayer, ZeroGrowthConvGivesZeroOutput) {
  ParamStore store;
  auto layer = DenseLayer::create(store, "l", 8, DenseBlockSpec{1, 4, 4}, 3);
  zero(layer.conv2().weight);
  const Tensor y = layer(randn(Shape(2, 8, 6, 6), 1));
  EXPECT_EQ(y.shape(), Shape(2, 4, 6, 6));
  EXPECT_TRUE(all_zero(y));
}

TEST(DenseLayer, OutputHasGrowthRateChannels) {
  ParamStore store;
  auto layer = DenseLayer::create(store, "l", 5, DenseBlockSpec{1, 3, 2}, 3);
  EXPECT_EQ(layer(randn(Shape(1, 5, 7, 9), 2)).shape(), Shape(1, 3, 7, 9));
  EXPECT_THROW(layer(randn(Shape(1, 4, 7, 9), 2)), ShapeError);
}

TEST(DenseBlock, WidthGrowsByGrowthRatePerLayer) {
  ParamStore store;
  auto block = DenseBlock::create(store, "b", 8, DenseBlockSpec{3, 4, 4}, 5);
  EXPECT_EQ(block(randn(Shape(1, 8, 8, 8), 3)).shape(), Shape(1, 20, 8, 8));
  ASSERT_EQ(block.layers().size(), 3u);
  EXPECT_EQ(block.layers()[0].in_channels(), 8u);
  EXPECT_EQ(block.layers()[1].in_channels(), 12u);
  EXPECT_EQ(block.layers()[2].in_channels(), 16u);
}

TEST(DenseBlock, SingleLayerIsInputConcatLayerOutput) {
  ParamStore s1, s2;
  auto block = DenseBlock::create(s1, "b", 4, DenseBlockSpec{1, 3, 2}, 5);
  auto layer = DenseLayer::create(s2, "b.layer0", 4, DenseBlockSpec{1, 3, 2}, 5);
  const Tensor x = randn(Shape(2, 4, 5, 5), 4);
  EXPECT_EQ(block(x).values(), concat_channels({x, layer(x)}).values());
}

TEST(DenseBlock, InputPassesThroughUnchanged) {
  ParamStore store;
  auto block = DenseBlock::create(store, "b", 6, DenseBlockSpec{2, 4, 2}, 5);
  const Tensor x = randn(Shape(1, 6, 5, 5), 4);
  EXPECT_EQ(slice_channels(block(x), 0, 6).values(), x.values());
}

// Zeroing layer 0 must change what layer 1 computes: layer 1 reads it.
TEST(DenseBlock, LaterLayersReuseEarlierFeatures) {
  ParamStore store;
  auto block = DenseBlock::create(store, "b", 4, DenseBlockSpec{2, 3, 2}, 9);
  const Tensor x = randn(Shape(2, 4, 6, 6), 4);
  const Tensor full = block.forward(x);
  const Tensor probed = block.forward(x, 0);
  EXPECT_TRUE(all_zero(slice_channels(probed, 4, 3)));
  const Tensor l1_full = slice_channels(full, 7, 3);
  const Tensor l1_probed = slice_channels(probed, 7, 3);
  double diff = 0.0;
  for (std::size_t i = 0; i < l1_full.numel(); ++i) diff = std::max(diff, std::abs(l1_full.data()[i] - l1_probed.data()[i]));
  EXPECT_GT(diff, 1e-3);
  // Skipping the last layer leaves the earlier ones untouched.
  EXPECT_EQ(slice_channels(block.forward(x, 1), 0, 7).values(), slice_channels(full, 0, 7).values());
}

TEST(DenseBlock, RejectsZeroSizes) {
  ParamStore store;
  EXPECT_THROW(DenseBlock::create(store, "b", 4, DenseBlockSpec{0, 3, 2}, 1), ConfigError);
  EXPECT_THROW(DenseBlock::create(store, "c", 4, DenseBlockSpec{2, 0, 2}, 1), ConfigError);
}

TEST(Extractor, RgbAt256GivesFiftySixChannelsAtOneEighth) {
  ParamStore store;
  auto e = Extractor::create(store, "mdfe.rgb", ModelConfig{}.extractor(Domain::rgb), 7);
  NoGradGuard g;
  const Tensor y = e(randn(Shape(1, 3, 256, 256), 1));
  EXPECT_EQ(y.shape(), Shape(1, 56, 32, 32));
  EXPECT_EQ(e.out_channels(), 56u);
}

TEST(Extractor, SingleChannelDomainsTakeOneChannel) {
  ParamStore store;
  auto e = Extractor::create(store, "mdfe.edge", ModelConfig{}.extractor(Domain::edge), 7);
  NoGradGuard g;
  EXPECT_EQ(e(randn(Shape(2, 1, 64, 64), 1)).shape(), Shape(2, 56, 8, 8));
  EXPECT_THROW(e(randn(Shape(1, 3, 64, 64), 1)), ShapeError);
}

TEST(Extractor, StructureMatchesConfiguration) {
  const SpliceNet net = SpliceNet::build(ModelConfig{});
  const auto s = net.structure();
  ASSERT_EQ(s.extractors.size(), 3u);
  for (const auto& e : s.extractors) {
    EXPECT_EQ(e.dense_blocks, 2u);
    EXPECT_EQ(e.transitions, 1u);
    EXPECT_EQ(e.attention_layers, 2u);
    EXPECT_EQ(e.out_channels, 56u);
    EXPECT_EQ(e.dense_layer_inputs, (std::vector<std::size_t>{16, 24, 32, 40, 24, 32, 40, 48}));
  }
}

TEST(Extractor, DomainsOwnDisjointParameterPrefixes) {
  const SpliceNet net = SpliceNet::build(ModelConfig{});
  std::map<std::string, std::size_t> per_domain;
  for (const auto& [name, t] : net.params().params()) {
    if (name.rfind("mdfe.", 0) != 0) continue;
    const std::string domain = name.substr(5, name.find('.', 5) - 5);
    per_domain[domain] += t.numel();
  }
  ASSERT_EQ(per_domain.size(), 3u);
  // rgb differs only in the stem's input channels: 2 extra * 16 * 49 weights.
  EXPECT_EQ(per_domain["edge"], per_domain["depth"]);
  EXPECT_EQ(per_domain["rgb"], per_domain["edge"] + 2 * 16 * 49);
  // Same parameter name suffix, different values: streams are keyed by name.
  const Tensor a = net.params().param("mdfe.edge.block1.layer0.conv1.weight");
  const Tensor b = net.params().param("mdfe.depth.block1.layer0.conv1.weight");
  EXPECT_NE(a.values(), b.values());
}

TEST(Extractor, SameSeedSameOutput) {
  ParamStore s1, s2;
  auto e1 = Extractor::create(s1, "x", ModelConfig{}.extractor(Domain::depth), 11);
  auto e2 = Extractor::create(s2, "x", ModelConfig{}.extractor(Domain::depth), 11);
  const Tensor x = randn(Shape(1, 1, 32, 32), 6);
  EXPECT_EQ(e1(x).values(), e2(x).values());
}
