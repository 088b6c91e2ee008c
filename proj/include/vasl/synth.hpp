#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "vasl/dataset.hpp"
#include "vasl/rng.hpp"

namespace vasl {

struct SynthSpec {
  std::size_t count = 8;
  std::size_t size = 256;
  std::uint64_t seed = 7;
  double min_area = 0.05;  // pasted region, as a fraction of the image
  double max_area = 0.25;

  void validate() const {
    if (size < 16) throw ConfigError("synth: image size must be at least 16");
    if (!(min_area > 0.0 && min_area <= max_area && max_area < 1.0))
      throw ConfigError("synth: need 0 < min_area <= max_area < 1");
    // The smallest region must cover at least a few pixels and the range
    // must contain at least one achievable pixel count.
    const double px = static_cast<double>(size * size);
    if (std::floor(max_area * px) < std::ceil(min_area * px) || min_area * px < 4.0)
      throw ConfigError("synth: area range is infeasible for a " + std::to_string(size) + "px image");
  }
};

/// A composited sample plus the background-only render it was pasted into.
struct SynthRender {
  Sample sample;
  Image background;
};

namespace detail {

struct Wave {
  double fx, fy, phase, amp;
};

inline Wave random_wave(Rng& rng, double min_cycles, double max_cycles, double min_amp, double max_amp) {
  const double theta = rng.uniform(0.0, std::numbers::pi);
  const double f = rng.uniform(min_cycles, max_cycles);
  return {f * std::cos(theta), f * std::sin(theta), rng.uniform(0.0, 2.0 * std::numbers::pi),
          rng.uniform(min_amp, max_amp)};
}

// Per channel: base + linear gradient + sum of sinusoids, then per-pixel
// uniform noise of the given half-width. Coordinates are normalized to [0,1).
struct Texture {
  std::array<double, 3> base{};
  std::array<double, 3> gx{}, gy{};
  std::array<std::vector<Wave>, 3> waves;
  double noise = 0.0;

  std::vector<double> render(std::size_t size, Rng& rng) const {
    const std::size_t plane = size * size;
    std::vector<double> out(3 * plane);
    const double inv = 1.0 / static_cast<double>(size);
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t y = 0; y < size; ++y)
        for (std::size_t x = 0; x < size; ++x) {
          const double u = static_cast<double>(x) * inv, v = static_cast<double>(y) * inv;
          double val = base[c] + gx[c] * (u - 0.5) + gy[c] * (v - 0.5);
          for (const Wave& w : waves[c])
            val += w.amp * std::sin(2.0 * std::numbers::pi * (w.fx * u + w.fy * v) + w.phase);
          if (noise > 0.0) val += rng.uniform(-noise, noise);
          out[c * plane + y * size + x] = std::clamp(val, 0.0, 1.0);
        }
    return out;
  }

  double gray_base() const { return (base[0] + base[1] + base[2]) / 3.0; }
};

inline Texture background_texture(Rng& rng) {
  Texture t;
  for (std::size_t c = 0; c < 3; ++c) {
    t.base[c] = rng.uniform(0.25, 0.75);
    t.gx[c] = rng.uniform(-0.2, 0.2);
    t.gy[c] = rng.uniform(-0.2, 0.2);
    for (int k = 0; k < 3; ++k) t.waves[c].push_back(random_wave(rng, 0.5, 4.0, 0.01, 0.05));
  }
  return t;
}

// Donor: mean gray shifted by 0.3 away from the background, higher-frequency
// texture and per-pixel noise, so its statistics differ from the host.
inline Texture donor_texture(Rng& rng, double host_gray) {
  Texture t;
  const double target = host_gray < 0.5 ? host_gray + 0.3 : host_gray - 0.3;
  for (std::size_t c = 0; c < 3; ++c) {
    t.base[c] = std::clamp(target + rng.uniform(-0.08, 0.08), 0.1, 0.9);
    t.gx[c] = rng.uniform(-0.05, 0.05);
    t.gy[c] = rng.uniform(-0.05, 0.05);
    for (int k = 0; k < 2; ++k) t.waves[c].push_back(random_wave(rng, 8.0, 20.0, 0.03, 0.07));
  }
  t.noise = 0.04;
  return t;
}

// Rectangle or ellipse footprint whose area fraction lies in
// [min_area, max_area]. Redraws up to 64 times before giving up.
inline std::vector<std::uint8_t> random_region(Rng& rng, const SynthSpec& spec) {
  const std::size_t S = spec.size;
  const double total = static_cast<double>(S * S);
  for (int attempt = 0; attempt < 64; ++attempt) {
    const bool ellipse = rng.below(2) == 1;
    const double area = rng.uniform(spec.min_area, spec.max_area) * total;
    const double aspect = std::exp(rng.uniform(std::log(0.5), std::log(2.0)));
    double half_w, half_h;
    if (ellipse) {
      half_w = std::sqrt(area * aspect / std::numbers::pi);
      half_h = area / (std::numbers::pi * half_w);
    } else {
      half_w = std::sqrt(area * aspect) / 2.0;
      half_h = area / (4.0 * half_w);
    }
    if (2.0 * half_w >= S - 2 || 2.0 * half_h >= S - 2) continue;
    const double cx = rng.uniform(half_w + 1.0, S - half_w - 1.0);
    const double cy = rng.uniform(half_h + 1.0, S - half_h - 1.0);
    std::vector<std::uint8_t> m(S * S, 0);
    std::size_t count = 0;
    for (std::size_t y = 0; y < S; ++y)
      for (std::size_t x = 0; x < S; ++x) {
        const double dx = (static_cast<double>(x) + 0.5 - cx) / half_w;
        const double dy = (static_cast<double>(y) + 0.5 - cy) / half_h;
        const bool in = ellipse ? dx * dx + dy * dy <= 1.0 : std::abs(dx) <= 1.0 && std::abs(dy) <= 1.0;
        if (in) {
          m[y * S + x] = 1;
          ++count;
        }
      }
    const double frac = static_cast<double>(count) / total;
    if (frac >= spec.min_area && frac <= spec.max_area) return m;
  }
  throw DataError("synth: could not place a region with area in [" + std::to_string(spec.min_area) + ", " +
                  std::to_string(spec.max_area) + "]");
}

}  // namespace detail

inline std::string synth_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "s%05zu", index);
  return buf;
}

/// Deterministic in (spec.seed, index): every random draw comes from a
/// stream derived from that pair.
inline SynthRender synth_sample(const SynthSpec& spec, std::size_t index) {
  spec.validate();
  const std::size_t S = spec.size;
  const std::size_t plane = S * S;
  Rng rng(derive_seed(spec.seed, index), 0x5eed);

  const detail::Texture host = detail::background_texture(rng);
  const auto bg = host.render(S, rng);
  const auto region = detail::random_region(rng, spec);
  const detail::Texture donor_tex = detail::donor_texture(rng, host.gray_base());
  const auto donor = donor_tex.render(S, rng);

  Image background = image_from_planes(bg, S, S, 3, 255);
  Image rgb = background;
  const Image donor_img = image_from_planes(donor, S, S, 3, 255);
  for (std::size_t i = 0; i < plane; ++i) {
    if (!region[i]) continue;
    bool differs = false;
    for (std::size_t c = 0; c < 3; ++c) {
      rgb.samples[i * 3 + c] = donor_img.samples[i * 3 + c];
      differs = differs || rgb.samples[i * 3 + c] != background.samples[i * 3 + c];
    }
    // Keep every pasted pixel distinguishable from the host after 8-bit
    // quantization, so the footprint is exactly the set of changed pixels.
    if (!differs) {
      std::uint16_t& r = rgb.samples[i * 3];
      r = r < 255 ? r + 1 : r - 1;
    }
  }

  // Pseudo-depth: a smooth ramp behind, one constant plane for the paste.
  const double d0 = rng.uniform(0.1, 0.3);
  const double dx = rng.uniform(-0.2, 0.2), dy = rng.uniform(0.1, 0.35);
  const double pasted_depth = rng.uniform(0.85, 0.95);
  std::vector<double> depth(plane);
  for (std::size_t y = 0; y < S; ++y)
    for (std::size_t x = 0; x < S; ++x) {
      const double u = static_cast<double>(x) / static_cast<double>(S - 1);
      const double v = static_cast<double>(y) / static_cast<double>(S - 1);
      depth[y * S + x] = region[y * S + x] ? pasted_depth : d0 + dx * (u - 0.5) + dy * v;
    }

  std::vector<double> mask(plane);
  for (std::size_t i = 0; i < plane; ++i) mask[i] = region[i];

  Sample s;
  s.id = synth_id(index);
  s.rgb = rgb;
  s.edge = image_from_planes(sobel_edge(rgb.planes(), S, S), S, S, 1, 65535);
  s.depth = image_from_planes(depth, S, S, 1, 65535);
  s.mask = mask_image(mask, S, S);
  return {std::move(s), std::move(background)};
}

/// Writes spec.count samples and the manifest into dir (created if needed).
inline std::vector<std::string> write_synth_dataset(const std::filesystem::path& dir, const SynthSpec& spec) {
  spec.validate();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir))
    throw DataError("synth: cannot create output directory '" + dir.string() + "'");
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < spec.count; ++i) {
    SynthRender r = synth_sample(spec, i);
    write_sample(dir, r.sample);
    ids.push_back(r.sample.id);
  }
  write_manifest(dir, ids);
  return ids;
}

/// In-memory equivalent of write_synth_dataset followed by load_dataset.
inline std::vector<Sample> synth_dataset(const SynthSpec& spec) {
  std::vector<Sample> out;
  for (std::size_t i = 0; i < spec.count; ++i) out.push_back(synth_sample(spec, i).sample);
  return out;
}

}  // namespace vasl
