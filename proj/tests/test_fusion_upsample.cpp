#include <gtest/gtest.h>

#include <cmath>

#include "vasl/model.hpp"

using namespace vasl;

namespace {

void fill(Tensor t, double v) {
  for (double& x : t.mutable_data()) x = v;
}

ModelConfig small_config(std::vector<Domain> domains) {
  ModelConfig c;
  c.domains = std::move(domains);
  c.image_size = 32;
  c.stem_channels = 4;
  c.block1_layers = 1;
  c.block2_layers = 1;
  c.growth_rate = 2;
  c.bottleneck_factor = 2;
  c.squeeze_out = 8;
  c.mrfu_widths = {4, 4, 4, 4};
  return c;
}

DomainInputs inputs_for(const ModelConfig& c, std::size_t n, std::uint64_t seed) {
  DomainInputs in;
  const std::size_t s = c.image_size;
  if (c.has_domain(Domain::rgb)) in.rgb = randn(Shape(n, 3, s, s), seed);
  if (c.has_domain(Domain::edge)) in.edge = randn(Shape(n, 1, s, s), seed + 1);
  if (c.has_domain(Domain::depth)) in.depth = randn(Shape(n, 1, s, s), seed + 2);
  return in;
}

}  // namespace

TEST(VaDs, ThreeDomainsFuseToSqueezeWidthAtHalfResolution) {
  ParamStore store;
  auto ds = VaDs::create(store, "vads", 168, 64, 7);
  NoGradGuard g;
  std::vector<Tensor> f{randn(Shape(1, 56, 32, 32), 1), randn(Shape(1, 56, 32, 32), 2), randn(Shape(1, 56, 32, 32), 3)};
  EXPECT_EQ(ds(f).shape(), Shape(1, 64, 16, 16));
}

TEST(VaDs, SingleDomainAndMismatches) {
  ParamStore store;
  auto ds = VaDs::create(store, "vads", 6, 4, 7);
  EXPECT_EQ(ds({randn(Shape(2, 6, 8, 8), 1)}).shape(), Shape(2, 4, 4, 4));
  EXPECT_THROW(ds({}), ShapeError);
  EXPECT_THROW(ds({randn(Shape(2, 5, 8, 8), 1)}), ShapeError);
  EXPECT_THROW(ds({randn(Shape(2, 3, 8, 8), 1), randn(Shape(2, 3, 4, 4), 1)}), ShapeError);
}

// Merge is concatenation, so swapping domains feeds the squeeze conv a
// different channel layout and changes the output.
TEST(VaDs, DomainOrderMatters) {
  ParamStore store;
  auto ds = VaDs::create(store, "vads", 6, 4, 7);
  const Tensor a = randn(Shape(1, 3, 8, 8), 1), b = randn(Shape(1, 3, 8, 8), 2);
  EXPECT_NE(ds({a, b}).values(), ds({b, a}).values());
}

TEST(Aspp, PreservesShapeForEveryDilation) {
  ParamStore store;
  auto aspp = Aspp::create(store, "aspp", 4, {2, 3, 4}, 7);
  EXPECT_EQ(aspp(randn(Shape(2, 4, 16, 16), 1)).shape(), Shape(2, 4, 16, 16));
  EXPECT_EQ(aspp(randn(Shape(1, 4, 9, 13), 1)).shape(), Shape(1, 4, 9, 13));
}

// An impulse reaches exactly (2d+1)^2 output pixels per branch: the union of
// three dilated 3x3 footprints around the centre.
TEST(Aspp, ImpulseSupportIsUnionOfDilatedFootprints) {
  ParamStore store;
  auto aspp = Aspp::create(store, "aspp", 1, {2, 3, 4}, 7);
  for (auto& b : aspp.branches()) fill(b.weight, 1.0);
  fill(aspp.fuse().weight, 1.0);
  Tensor x = Tensor::zeros(Shape(1, 1, 21, 21));
  x.mutable_data()[10 * 21 + 10] = 1.0;
  const Tensor y = aspp(x);
  std::size_t nonzero = 0;
  for (std::size_t h = 0; h < 21; ++h)
    for (std::size_t w = 0; w < 21; ++w) {
      const long dh = static_cast<long>(h) - 10, dw = static_cast<long>(w) - 10;
      bool expected = false;
      for (long d : {2L, 3L, 4L})
        expected = expected || (dh % d == 0 && dw % d == 0 && std::abs(dh) <= d && std::abs(dw) <= d);
      const bool got = y.at(0, 0, h, w) != 0.0;
      EXPECT_EQ(got, expected) << h << "," << w;
      nonzero += got;
    }
  EXPECT_EQ(nonzero, 1u + 3 * 8);
}

TEST(Aspp, ZeroBranchWeightsLeaveFuseBias) {
  ParamStore store;
  auto aspp = Aspp::create(store, "aspp", 3, {2, 3, 4}, 7);
  for (auto& b : aspp.branches()) fill(b.weight, 0.0);
  auto bias = *aspp.fuse().bias;
  bias.mutable_data()[0] = 0.5;
  bias.mutable_data()[1] = -1.0;
  bias.mutable_data()[2] = 2.0;
  const Tensor y = aspp(randn(Shape(1, 3, 6, 6), 1));
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < 36; ++i) EXPECT_EQ(y.data()[c * 36 + i], bias.data()[c]);
}

TEST(VaMrfu, DoublesSpatialDims) {
  ParamStore store;
  auto u = VaMrfu::create(store, "u", 8, 4, {2, 3, 4}, 7);
  EXPECT_EQ(u(randn(Shape(2, 8, 5, 7), 1)).shape(), Shape(2, 4, 10, 14));
  EXPECT_EQ(u.up().kernel(), 2u);
  EXPECT_EQ(u.up().stride(), 2u);
}

TEST(MaskHead, ProbabilityValues) {
  ParamStore store;
  auto head = MaskHead::create(store, "head", 4, 7);
  fill(head.conv().weight, 0.0);
  EXPECT_EQ(head(randn(Shape(1, 4, 3, 3), 1)).data()[4], 0.5);
  head.conv().bias->mutable_data()[0] = 20.0;
  const Tensor y = head(randn(Shape(1, 4, 3, 3), 1));
  for (double v : y.data()) EXPECT_GT(v, 0.999);
}

TEST(MaskHead, OutputInUnitInterval) {
  ParamStore store;
  auto head = MaskHead::create(store, "head", 4, 7);
  const Tensor y = head(scale(randn(Shape(2, 4, 8, 8), 2), 10.0));
  for (double v : y.data()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(SpliceNet, EndToEndShapes) {
  for (std::size_t n : {1u, 2u}) {
    const ModelConfig c = small_config({Domain::rgb, Domain::edge, Domain::depth});
    SpliceNet net = SpliceNet::build(c);
    const Tensor y = net.forward(inputs_for(c, n, 3));
    EXPECT_EQ(y.shape(), Shape(n, 1, 32, 32));
  }
}

TEST(SpliceNet, EveryDomainSubsetBuildsAndRuns) {
  const std::vector<std::vector<Domain>> subsets{{Domain::rgb},
                                                 {Domain::edge},
                                                 {Domain::depth},
                                                 {Domain::rgb, Domain::edge},
                                                 {Domain::rgb, Domain::depth},
                                                 {Domain::edge, Domain::depth},
                                                 {Domain::rgb, Domain::edge, Domain::depth}};
  for (const auto& d : subsets) {
    const ModelConfig c = small_config(d);
    SpliceNet net = SpliceNet::build(c);
    EXPECT_EQ(net.attention_layer_count(), 2 * d.size() + 5);
    EXPECT_EQ(net.forward(inputs_for(c, 1, 5)).shape(), Shape(1, 1, 32, 32));
  }
}

TEST(SpliceNet, InputErrors) {
  const ModelConfig c = small_config({Domain::rgb, Domain::depth});
  SpliceNet net = SpliceNet::build(c);
  DomainInputs in = inputs_for(c, 1, 1);
  in.depth.reset();
  EXPECT_THROW(net.forward(in), ShapeError);
  in = inputs_for(c, 1, 1);
  in.depth = randn(Shape(1, 1, 16, 16), 1);
  EXPECT_THROW(net.forward(in), ShapeError);
  in.rgb = randn(Shape(1, 3, 24, 24), 1);
  in.depth = randn(Shape(1, 1, 24, 24), 1);
  EXPECT_THROW(net.forward(in), ShapeError);
}
