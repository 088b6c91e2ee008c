#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "vasl/dataset.hpp"
#include "vasl/synth.hpp"

using namespace vasl;

namespace {

std::filesystem::path fresh_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "vasl_test_data" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

double mask_fraction(const Image& m) {
  std::size_t on = 0;
  for (auto v : m.samples) on += v != 0;
  return static_cast<double>(on) / static_cast<double>(m.samples.size());
}

}  // namespace

TEST(Synth, MaskAreaWithinConfiguredRange) {
  SynthSpec spec;
  spec.count = 40;
  spec.size = 64;
  for (std::size_t i = 0; i < spec.count; ++i) {
    const double f = mask_fraction(synth_sample(spec, i).sample.mask);
    EXPECT_GE(f, spec.min_area) << i;
    EXPECT_LE(f, spec.max_area) << i;
  }
}

TEST(Synth, DeterministicPerSeedAndIndex) {
  SynthSpec spec;
  spec.size = 48;
  const Sample a = synth_sample(spec, 3).sample;
  const Sample b = synth_sample(spec, 3).sample;
  EXPECT_EQ(encode_pnm(a.rgb), encode_pnm(b.rgb));
  EXPECT_EQ(encode_pnm(a.depth), encode_pnm(b.depth));
  EXPECT_EQ(encode_pnm(a.mask), encode_pnm(b.mask));
  EXPECT_NE(encode_pnm(a.rgb), encode_pnm(synth_sample(spec, 4).sample.rgb));
  spec.seed = 8;
  EXPECT_NE(encode_pnm(a.rgb), encode_pnm(synth_sample(spec, 3).sample.rgb));
}

TEST(Synth, DatasetFilesAreReproducible) {
  SynthSpec spec;
  spec.count = 3;
  spec.size = 32;
  const auto d1 = fresh_dir("repro1"), d2 = fresh_dir("repro2");
  write_synth_dataset(d1, spec);
  write_synth_dataset(d2, spec);
  for (const auto& entry : std::filesystem::directory_iterator(d1)) {
    const auto name = entry.path().filename();
    EXPECT_EQ(read_file(entry.path().string()), read_file((d2 / name).string())) << name;
  }
  EXPECT_EQ(read_manifest(d1), (std::vector<std::string>{"s00000", "s00001", "s00002"}));
}

// Difference the composite against the background-only render: the changed
// pixels are exactly the mask.
TEST(Synth, MaskIsTheSetOfChangedPixels) {
  SynthSpec spec;
  spec.size = 64;
  for (std::size_t i = 0; i < 20; ++i) {
    const SynthRender r = synth_sample(spec, i);
    const std::size_t plane = spec.size * spec.size;
    for (std::size_t p = 0; p < plane; ++p) {
      bool changed = false;
      for (std::size_t c = 0; c < 3; ++c) changed = changed || r.sample.rgb.samples[p * 3 + c] != r.background.samples[p * 3 + c];
      ASSERT_EQ(changed, r.sample.mask.samples[p] == 255) << "sample " << i << " pixel " << p;
    }
  }
}

TEST(Synth, PastedDepthIsConstantAndBackgroundIsARamp) {
  SynthSpec spec;
  spec.size = 64;
  const Sample s = synth_sample(spec, 1).sample;
  std::optional<std::uint16_t> pasted;
  for (std::size_t p = 0; p < s.mask.samples.size(); ++p)
    if (s.mask.samples[p]) {
      if (!pasted) pasted = s.depth.samples[p];
      EXPECT_EQ(s.depth.samples[p], *pasted);
    }
  ASSERT_TRUE(pasted);
  EXPECT_GT(*pasted / 65535.0, 0.8);
}

TEST(Synth, InfeasibleSpecsRejected) {
  SynthSpec spec;
  spec.size = 8;
  EXPECT_THROW(synth_sample(spec, 0), ConfigError);
  spec = SynthSpec{};
  spec.min_area = 0.3;
  spec.max_area = 0.2;
  EXPECT_THROW(spec.validate(), ConfigError);
  spec = SynthSpec{};
  spec.size = 16;
  spec.min_area = 0.01;  // 2.56 pixels
  EXPECT_THROW(spec.validate(), ConfigError);
}

TEST(Sobel, ConstantImageGivesZero) {
  const std::vector<double> rgb(3 * 8 * 8, 0.4);
  for (double v : sobel_edge(rgb, 8, 8)) EXPECT_EQ(v, 0.0);
}

TEST(Sobel, VerticalStepPeaksAtTheStep) {
  const std::size_t h = 8, w = 10;
  std::vector<double> rgb(3 * h * w, 0.0);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 5; x < w; ++x) rgb[c * h * w + y * w + x] = 1.0;
  const auto e = sobel_edge(rgb, h, w);
  for (std::size_t y = 0; y < h; ++y) {
    // Columns 4 and 5 straddle the step: gx = 4 on both, normalized to 1.
    EXPECT_EQ(e[y * w + 4], 1.0);
    EXPECT_EQ(e[y * w + 5], 1.0);
    for (std::size_t x : {0u, 1u, 2u, 3u, 6u, 7u, 8u, 9u}) EXPECT_EQ(e[y * w + x], 0.0);
  }
}

TEST(Sobel, RangeIsUnitInterval) {
  SynthSpec spec;
  spec.size = 32;
  const auto rgb = synth_sample(spec, 0).sample.rgb.planes();
  double peak = 0.0;
  for (double v : sobel_edge(rgb, 32, 32)) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
    peak = std::max(peak, v);
  }
  EXPECT_EQ(peak, 1.0);
}

// Mean edge magnitude on the one-pixel band either side of the mask border
// beats the mask interior on at least 90% of samples.
TEST(Sobel, BoundaryBandOutshinesInterior) {
  SynthSpec spec;
  spec.size = 64;
  const std::size_t S = spec.size, n = 50;
  std::size_t wins = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const Sample s = synth_sample(spec, i).sample;
    const auto e = s.edge.planes();
    auto in = [&](std::ptrdiff_t y, std::ptrdiff_t x) {
      y = std::clamp<std::ptrdiff_t>(y, 0, S - 1);
      x = std::clamp<std::ptrdiff_t>(x, 0, S - 1);
      return s.mask.samples[y * S + x] != 0;
    };
    double band = 0, interior = 0;
    std::size_t nb = 0, ni = 0;
    for (std::ptrdiff_t y = 0; y < static_cast<std::ptrdiff_t>(S); ++y)
      for (std::ptrdiff_t x = 0; x < static_cast<std::ptrdiff_t>(S); ++x) {
        bool mixed = false;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) mixed = mixed || in(y + dy, x + dx) != in(y, x);
        if (mixed) {
          band += e[y * S + x];
          ++nb;
        } else if (in(y, x)) {
          interior += e[y * S + x];
          ++ni;
        }
      }
    if (nb > 0 && ni > 0 && band / nb > interior / ni) ++wins;
  }
  EXPECT_GE(wins, 45u);
}

TEST(Depth, SyntheticDepthPassesThroughFiles) {
  SynthSpec spec;
  spec.count = 2;
  spec.size = 32;
  const auto dir = fresh_dir("depth");
  write_synth_dataset(dir, spec);
  const auto loaded = load_dataset(dir, 32);
  const auto mem = synth_dataset(spec);
  ASSERT_EQ(loaded.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(loaded[i].depth, mem[i].depth);
    EXPECT_EQ(loaded[i].edge, mem[i].edge);
  }
}

TEST(Depth, EightBitWhiteIsOne) {
  Image img = Image::blank(2, 2, 1, 255);
  img.samples = {255, 0, 51, 255};
  const auto p = img.planes();
  EXPECT_EQ(p[0], 1.0);
  EXPECT_EQ(p[1], 0.0);
  EXPECT_NEAR(p[2], 0.2, 1e-15);
}

TEST(Pnm, SaveLoadSaveIsByteIdentical) {
  SynthSpec spec;
  spec.size = 32;
  const Sample s = synth_sample(spec, 2).sample;
  for (const Image* img : {&s.rgb, &s.edge, &s.mask}) {
    const std::string bytes = encode_pnm(*img);
    const Image back = decode_pnm(bytes);
    EXPECT_EQ(back, *img);
    EXPECT_EQ(encode_pnm(back), bytes);
  }
}

TEST(Pnm, HalfProbabilityStoresAs32768) {
  const Image img = probability_image({0.5, 0.0, 1.0, 0.25}, 2, 2);
  EXPECT_EQ(img.maxval, 65535);
  EXPECT_EQ(img.samples, (std::vector<std::uint16_t>{32768, 0, 65535, 16384}));
  const std::string bytes = encode_pnm(img);
  EXPECT_EQ(bytes.substr(0, 14), "P5\n2 2\n65535\n\x80");
}

TEST(Pnm, RejectsUnsupportedAndBrokenFiles) {
  EXPECT_THROW(decode_pnm("P6\n1 1\n1023\n\0\0\0\0\0\0"), DataError);
  EXPECT_THROW(decode_pnm("P3\n1 1\n255\n0 0 0\n"), DataError);
  EXPECT_THROW(decode_pnm("P5\n2 2\n255\nab"), DataError);
  EXPECT_THROW(decode_pnm("P5\nx 2\n255\nabcd"), DataError);
  EXPECT_THROW(decode_pnm("P5\n0 2\n255\n"), DataError);
  EXPECT_THROW(decode_pnm(""), DataError);
  EXPECT_EQ(decode_pnm("P5 # comment\n2 1 255\nab").samples, (std::vector<std::uint16_t>{'a', 'b'}));
}

TEST(Resize, SameSizeIsIdentity) {
  std::vector<double> v(2 * 5 * 7);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i) / 70.0;
  EXPECT_EQ(resize_bilinear(v, 2, 5, 7, 5, 7), v);
}

TEST(Resize, ConstantStaysConstant) {
  const std::vector<double> v(13 * 9, 0.3);
  for (double x : resize_bilinear(v, 1, 13, 9, 32, 20)) EXPECT_NEAR(x, 0.3, 1e-15);
}

TEST(Resize, LinearRampStaysLinearUnderDownscale) {
  const std::size_t n = 512, m = 256;
  std::vector<double> v(n * n);
  for (std::size_t y = 0; y < n; ++y)
    for (std::size_t x = 0; x < n; ++x) v[y * n + x] = 0.25 + 0.5 * x / (n - 1.0) + 0.125 * y / (n - 1.0);
  const auto r = resize_bilinear(v, 1, n, n, m, m);
  for (std::size_t y = 0; y < m; ++y)
    for (std::size_t x = 0; x < m; ++x)
      ASSERT_NEAR(r[y * m + x], 0.25 + 0.5 * x / (m - 1.0) + 0.125 * y / (m - 1.0), 1e-9);
}

TEST(Resize, DegenerateAxisRejected) {
  EXPECT_THROW(resize_bilinear(std::vector<double>(5), 1, 1, 5, 4, 4), DataError);
}

TEST(Dataset, LoadResamplesToRequestedSizeAndKeepsMaskBinary) {
  SynthSpec spec;
  spec.count = 2;
  spec.size = 48;
  const auto dir = fresh_dir("resample");
  write_synth_dataset(dir, spec);
  for (const Sample& s : load_dataset(dir, 32)) {
    EXPECT_EQ(s.width(), 32u);
    EXPECT_EQ(s.edge.width, 32u);
    for (auto v : s.mask.samples) EXPECT_TRUE(v == 0 || v == 255);
  }
}

TEST(Dataset, ManifestAndValidationErrors) {
  const auto dir = fresh_dir("bad");
  EXPECT_THROW(read_manifest(dir), DataError);
  write_file((dir / "manifest.txt").string(), "a\nb\na\n");
  EXPECT_THROW(read_manifest(dir), DataError);

  SynthSpec spec;
  spec.size = 16;
  spec.min_area = 0.05;
  Sample s = synth_sample(spec, 0).sample;
  s.mask.samples[0] = 7;
  EXPECT_THROW(validate_sample(s), DataError);
  s = synth_sample(spec, 0).sample;
  s.depth = Image::blank(8, 8, 1, 255);
  EXPECT_THROW(validate_sample(s), DataError);
}

TEST(Dataset, BatchStacksPlanes) {
  SynthSpec spec;
  spec.count = 3;
  spec.size = 16;
  const auto data = synth_dataset(spec);
  const std::vector<std::size_t> idx{2, 0};
  const Batch b = make_batch(data, idx, {Domain::rgb, Domain::depth});
  EXPECT_EQ(b.inputs.rgb->shape(), Shape(2, 3, 16, 16));
  EXPECT_FALSE(b.inputs.edge.has_value());
  EXPECT_EQ(b.inputs.depth->shape(), Shape(2, 1, 16, 16));
  EXPECT_EQ(b.target.shape(), Shape(2, 1, 16, 16));
  EXPECT_EQ(b.inputs.rgb->at(0, 1, 3, 4), data[2].rgb.planes()[256 + 3 * 16 + 4]);
}
