#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "vasl/extractor.hpp"
#include "vasl/image_io.hpp"
#include "vasl/model.hpp"
#include "vasl/preprocess.hpp"

namespace vasl {

/// One training example. Planes keep their integer codes; conversion to
/// [0,1] happens when a batch is assembled.
struct Sample {
  std::string id;
  Image rgb;    // 3 channels
  Image edge;   // 1 channel
  Image depth;  // 1 channel
  Image mask;   // 1 channel, codes 0 or maxval

  std::size_t width() const { return rgb.width; }
  std::size_t height() const { return rgb.height; }
};

inline void validate_sample(const Sample& s) {
  auto fail = [&](const std::string& why) { throw DataError("sample '" + s.id + "': " + why); };
  if (s.rgb.channels != 3) fail("rgb must have 3 channels");
  for (const Image* p : {&s.edge, &s.depth, &s.mask})
    if (p->channels != 1) fail("edge, depth and mask must be single-channel");
  for (const Image* p : {&s.edge, &s.depth, &s.mask})
    if (p->width != s.rgb.width || p->height != s.rgb.height)
      fail("plane sizes disagree (" + std::to_string(p->width) + "x" + std::to_string(p->height) + " vs " +
           std::to_string(s.rgb.width) + "x" + std::to_string(s.rgb.height) + ")");
  for (std::uint16_t v : s.mask.samples)
    if (v != 0 && v != s.mask.maxval) fail("mask is not binary");
}

struct SamplePaths {
  std::filesystem::path rgb, edge, depth, mask;
};

inline SamplePaths sample_paths(const std::filesystem::path& dir, const std::string& id) {
  return {dir / (id + ".rgb.ppm"), dir / (id + ".edge.pgm"), dir / (id + ".depth.pgm"), dir / (id + ".mask.pgm")};
}

inline void write_sample(const std::filesystem::path& dir, const Sample& s) {
  const auto p = sample_paths(dir, s.id);
  save_image(p.rgb.string(), s.rgb);
  save_image(p.edge.string(), s.edge);
  save_image(p.depth.string(), s.depth);
  save_image(p.mask.string(), s.mask);
}

inline std::vector<std::string> read_manifest(const std::filesystem::path& dir) {
  const auto path = dir / "manifest.txt";
  std::istringstream in(read_file(path.string()));
  std::vector<std::string> ids;
  std::set<std::string> seen;
  std::string line;
  while (std::getline(in, line)) {
    line = detail::trim(line);
    if (line.empty()) continue;
    if (!seen.insert(line).second) throw DataError(path.string() + ": duplicate id '" + line + "'");
    ids.push_back(line);
  }
  return ids;
}

inline void write_manifest(const std::filesystem::path& dir, const std::vector<std::string>& ids) {
  std::string text;
  for (const auto& id : ids) text += id + "\n";
  write_file((dir / "manifest.txt").string(), text);
}

// Resamples one plane to size x size, keeping its bit depth.
inline Image resample_plane(const Image& img, std::size_t size) {
  return image_from_planes(resize_normalize(img, size), size, size, img.channels, img.maxval);
}

/// Loads and validates one sample. Planes that are not size x size are
/// resampled bilinearly; the mask is resampled and re-thresholded at 0.5.
inline Sample load_sample(const std::filesystem::path& dir, const std::string& id, std::size_t size) {
  const auto p = sample_paths(dir, id);
  Sample s{id, load_image(p.rgb.string()), load_image(p.edge.string()), load_image(p.depth.string()),
           load_image(p.mask.string())};
  validate_sample(s);
  if (s.width() != size || s.height() != size) {
    s.rgb = resample_plane(s.rgb, size);
    s.edge = resample_plane(s.edge, size);
    s.depth = resample_plane(s.depth, size);
    auto m = resize_normalize(s.mask, size);
    for (double& v : m) v = v >= 0.5 ? 1.0 : 0.0;
    s.mask = mask_image(m, size, size);
  }
  return s;
}

inline std::vector<Sample> load_dataset(const std::filesystem::path& dir, std::size_t size) {
  std::vector<Sample> out;
  for (const auto& id : read_manifest(dir)) out.push_back(load_sample(dir, id, size));
  return out;
}

struct Batch {
  DomainInputs inputs;
  Tensor target;  // [N,1,H,W] in {0,1}
};

/// Stacks the chosen samples into per-domain [N,C,H,W] tensors.
inline Batch make_batch(const std::vector<Sample>& samples, std::span<const std::size_t> indices,
                        const std::vector<Domain>& domains) {
  if (indices.empty()) throw DataError("make_batch: empty batch");
  const std::size_t h = samples[indices[0]].height(), w = samples[indices[0]].width();
  const std::size_t plane = h * w;
  auto stack = [&](auto pick, std::size_t channels) {
    std::vector<double> v;
    v.reserve(indices.size() * channels * plane);
    for (std::size_t i : indices) {
      const Image& img = pick(samples[i]);
      if (img.width != w || img.height != h) throw DataError("make_batch: sample '" + samples[i].id + "' has a different size");
      const auto planes = img.planes();
      v.insert(v.end(), planes.begin(), planes.end());
    }
    return Tensor(Shape(indices.size(), channels, h, w), std::move(v));
  };
  Batch b;
  for (Domain d : domains) {
    switch (d) {
      case Domain::rgb: b.inputs.rgb = stack([](const Sample& s) -> const Image& { return s.rgb; }, 3); break;
      case Domain::edge: b.inputs.edge = stack([](const Sample& s) -> const Image& { return s.edge; }, 1); break;
      case Domain::depth: b.inputs.depth = stack([](const Sample& s) -> const Image& { return s.depth; }, 1); break;
    }
  }
  b.target = stack([](const Sample& s) -> const Image& { return s.mask; }, 1);
  return b;
}

}  // namespace vasl
