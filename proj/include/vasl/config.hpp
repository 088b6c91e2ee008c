#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdint>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "vasl/error.hpp"
#include "vasl/extractor.hpp"

namespace vasl {

enum class LrSchedule { exponential, linear, constant };

inline const char* schedule_name(LrSchedule s) {
  switch (s) {
    case LrSchedule::exponential: return "exponential";
    case LrSchedule::linear: return "linear";
    case LrSchedule::constant: return "constant";
  }
  return "?";
}

/// Architecture and training hyperparameters. Serialized as a flat
/// `key = value` document with keys in sorted order; that canonical text is
/// what checkpoints embed.
struct ModelConfig {
  std::vector<Domain> domains{Domain::rgb, Domain::edge, Domain::depth};
  std::size_t image_size = 256;
  std::size_t stem_channels = 16;
  std::size_t block1_layers = 4;
  std::size_t block2_layers = 4;
  std::size_t growth_rate = 8;
  std::size_t bottleneck_factor = 4;
  std::size_t attention_kernel = 7;
  std::size_t squeeze_out = 64;
  std::vector<std::size_t> mrfu_widths{32, 16, 8, 8};
  std::array<std::size_t, 3> dilations{2, 3, 4};
  bool dilation_override = false;
  double focal_gamma = 2.0;
  double focal_alpha = 0.25;
  // Initial foreground probability of the mask head; its bias starts at
  // log(p / (1 - p)).
  double head_prior = 0.1;
  double lr = 1e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t epochs = 20;
  double lr_decay = 0.1;
  LrSchedule lr_schedule = LrSchedule::exponential;
  std::size_t batch_size = 4;
  std::uint64_t seed = 7;

  ExtractorConfig extractor(Domain d) const {
    ExtractorConfig e;
    e.domain = d;
    e.stem_channels = stem_channels;
    e.blocks[0] = DenseBlockSpec{block1_layers, growth_rate, bottleneck_factor};
    e.blocks[1] = DenseBlockSpec{block2_layers, growth_rate, bottleneck_factor};
    e.attention_kernel = attention_kernel;
    return e;
  }

  bool has_domain(Domain d) const { return std::find(domains.begin(), domains.end(), d) != domains.end(); }

  void validate() const {
    if (domains.empty()) throw ConfigError("domains: at least one input domain must be enabled");
    for (std::size_t i = 1; i < domains.size(); ++i)
      if (static_cast<int>(domains[i]) <= static_cast<int>(domains[i - 1]))
        throw ConfigError("domains: must be distinct and in rgb,edge,depth order");
    if (mrfu_widths.size() != 4)
      throw ConfigError("mrfu_widths: the /16 encoder needs exactly 4 upsampling stages");
    if (image_size < 16 || image_size % 16 != 0) throw ConfigError("image_size: must be a positive multiple of 16");
    for (std::size_t w : mrfu_widths)
      if (w == 0) throw ConfigError("mrfu_widths: widths must be positive");
    if (stem_channels == 0 || growth_rate == 0 || bottleneck_factor == 0 || block1_layers == 0 ||
        block2_layers == 0 || squeeze_out == 0)
      throw ConfigError("extractor widths must be positive");
    if (attention_kernel % 2 == 0) throw ConfigError("attention_kernel: must be odd");
    if (!dilation_override && dilations != std::array<std::size_t, 3>{2, 3, 4})
      throw ConfigError("dilations: must be 2,3,4 unless dilation_override = 1");
    for (std::size_t d : dilations)
      if (d == 0) throw ConfigError("dilations: must be positive");
    if (batch_size == 0) throw ConfigError("batch_size: must be positive");
    if (!(lr > 0.0)) throw ConfigError("lr: must be positive");
    if (!(focal_alpha >= 0.0 && focal_alpha <= 1.0)) throw ConfigError("focal_alpha: must lie in [0,1]");
    if (!(focal_gamma >= 0.0)) throw ConfigError("focal_gamma: must be non-negative");
    if (!(head_prior > 0.0 && head_prior < 1.0)) throw ConfigError("head_prior: must lie in (0,1)");
    if (!(lr_decay >= 0.0 && lr_decay < 1.0)) throw ConfigError("lr_decay: must lie in [0,1)");
  }

  std::string to_text() const;
  static ModelConfig from_text(const std::string& text);
};

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(trim(cur));
  return out;
}

inline double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size())
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  return out;
}

inline std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size())
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  return out;
}

inline Domain parse_domain(const std::string& v) {
  if (v == "rgb") return Domain::rgb;
  if (v == "edge") return Domain::edge;
  if (v == "depth") return Domain::depth;
  throw ConfigError("domains: unknown domain '" + v + "'");
}

template <typename T>
std::string join(const T& items) {
  std::string out;
  for (const auto& x : items) {
    if (!out.empty()) out += ",";
    if constexpr (std::is_same_v<std::decay_t<decltype(x)>, Domain>)
      out += domain_name(x);
    else
      out += std::to_string(x);
  }
  return out;
}

}  // namespace detail

inline std::string ModelConfig::to_text() const {
  std::map<std::string, std::string> kv;
  kv["adam_beta1"] = detail::format_double(adam_beta1);
  kv["adam_beta2"] = detail::format_double(adam_beta2);
  kv["adam_eps"] = detail::format_double(adam_eps);
  kv["attention_kernel"] = std::to_string(attention_kernel);
  kv["batch_size"] = std::to_string(batch_size);
  kv["block1_layers"] = std::to_string(block1_layers);
  kv["block2_layers"] = std::to_string(block2_layers);
  kv["bottleneck_factor"] = std::to_string(bottleneck_factor);
  kv["dilation_override"] = dilation_override ? "1" : "0";
  kv["dilations"] = detail::join(dilations);
  kv["domains"] = detail::join(domains);
  kv["epochs"] = std::to_string(epochs);
  kv["focal_alpha"] = detail::format_double(focal_alpha);
  kv["focal_gamma"] = detail::format_double(focal_gamma);
  kv["growth_rate"] = std::to_string(growth_rate);
  kv["head_prior"] = detail::format_double(head_prior);
  kv["image_size"] = std::to_string(image_size);
  kv["lr"] = detail::format_double(lr);
  kv["lr_decay"] = detail::format_double(lr_decay);
  kv["lr_schedule"] = schedule_name(lr_schedule);
  kv["mrfu_widths"] = detail::join(mrfu_widths);
  kv["seed"] = std::to_string(seed);
  kv["squeeze_out"] = std::to_string(squeeze_out);
  kv["stem_channels"] = std::to_string(stem_channels);
  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

/// Parses the key-value document. Every key must be present exactly once;
/// unknown keys are rejected. '#' starts a comment line.
inline ModelConfig ModelConfig::from_text(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = detail::trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (!kv.emplace(key, value).second) throw ConfigError("duplicate config key: " + key);
  }

  static const std::set<std::string> known{
      "adam_beta1",  "adam_beta2",    "adam_eps", "attention_kernel", "batch_size",        "block1_layers",
      "block2_layers", "bottleneck_factor", "dilation_override", "dilations",   "domains",  "epochs",
      "focal_alpha", "focal_gamma",   "growth_rate", "head_prior", "image_size",     "lr",                "lr_decay",
      "lr_schedule", "mrfu_widths",   "seed",     "squeeze_out",      "stem_channels"};
  for (const auto& [k, v] : kv)
    if (!known.count(k)) throw ConfigError("unknown config key: " + k);
  for (const auto& k : known)
    if (!kv.count(k)) throw ConfigError("missing config key: " + k);

  ModelConfig c;
  auto u = [&](const char* k) { return static_cast<std::size_t>(detail::parse_uint(k, kv.at(k))); };
  auto d = [&](const char* k) { return detail::parse_double(k, kv.at(k)); };
  c.adam_beta1 = d("adam_beta1");
  c.adam_beta2 = d("adam_beta2");
  c.adam_eps = d("adam_eps");
  c.attention_kernel = u("attention_kernel");
  c.batch_size = u("batch_size");
  c.block1_layers = u("block1_layers");
  c.block2_layers = u("block2_layers");
  c.bottleneck_factor = u("bottleneck_factor");
  const std::size_t override_flag = u("dilation_override");
  if (override_flag > 1) throw ConfigError("dilation_override: expected 0 or 1");
  c.dilation_override = override_flag == 1;
  const auto dil = detail::split(kv.at("dilations"), ',');
  if (dil.size() != 3) throw ConfigError("dilations: expected three comma-separated values");
  for (std::size_t i = 0; i < 3; ++i) c.dilations[i] = static_cast<std::size_t>(detail::parse_uint("dilations", dil[i]));
  c.domains.clear();
  for (const auto& name : detail::split(kv.at("domains"), ',')) c.domains.push_back(detail::parse_domain(name));
  std::sort(c.domains.begin(), c.domains.end());
  c.epochs = u("epochs");
  c.focal_alpha = d("focal_alpha");
  c.focal_gamma = d("focal_gamma");
  c.growth_rate = u("growth_rate");
  c.head_prior = d("head_prior");
  c.image_size = u("image_size");
  c.lr = d("lr");
  c.lr_decay = d("lr_decay");
  const std::string sched = kv.at("lr_schedule");
  if (sched == "exponential") c.lr_schedule = LrSchedule::exponential;
  else if (sched == "linear") c.lr_schedule = LrSchedule::linear;
  else if (sched == "constant") c.lr_schedule = LrSchedule::constant;
  else throw ConfigError("lr_schedule: expected exponential, linear or constant, got '" + sched + "'");
  c.mrfu_widths.clear();
  for (const auto& w : detail::split(kv.at("mrfu_widths"), ','))
    c.mrfu_widths.push_back(static_cast<std::size_t>(detail::parse_uint("mrfu_widths", w)));
  c.seed = detail::parse_uint("seed", kv.at("seed"));
  c.squeeze_out = u("squeeze_out");
  c.stem_channels = u("stem_channels");
  c.validate();
  return c;
}

}  // namespace vasl
