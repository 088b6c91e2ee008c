// vasl: synthetic data, training, prediction, evaluation and gradient checks
// for the splice localization network.
//
// Exit codes: 0 success, 1 usage or config error, 2 data error, 3 numeric failure.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "vasl/allocator.hpp"
#include "vasl/checkpoint.hpp"
#include "vasl/evaluation.hpp"
#include "vasl/gradcheck.hpp"
#include "vasl/synth.hpp"
#include "vasl/train.hpp"

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

struct SynthArgs {
  std::string out;
  vasl::SynthSpec spec;
};

int run_synth(const SynthArgs& a) {
  const auto ids = vasl::write_synth_dataset(a.out, a.spec);
  std::printf("wrote %zu samples to %s\n", ids.size(), a.out.c_str());
  return 0;
}

struct TrainArgs {
  std::string data, config, out;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> max_steps;
};

int run_train(const TrainArgs& a) {
  const vasl::ModelConfig cfg = vasl::ModelConfig::from_text(vasl::read_file(a.config));
  const auto samples = vasl::load_dataset(a.data, cfg.image_size);
  if (samples.empty()) throw vasl::DataError("train: manifest in '" + a.data + "' lists no samples");
  vasl::SpliceNet net = vasl::build_model(cfg);

  const std::string log_path = a.out + ".log";
  std::ofstream log(log_path, std::ios::trunc);
  if (!log) throw vasl::DataError("train: cannot open '" + log_path + "' for writing");
  vasl::FitOptions opt;
  opt.epochs = a.epochs;
  opt.max_steps = a.max_steps;
  opt.on_epoch = [&](const vasl::EpochLog& e) {
    const std::string line = vasl::format_epoch(e);
    std::printf("%s\n", line.c_str());
    std::fflush(stdout);
    log << line << "\n" << std::flush;
  };
  const auto result = vasl::fit(net, samples, opt);
  vasl::save_checkpoint(a.out, net, result.log.size());
  std::printf("saved %s after %zu steps\n", a.out.c_str(), result.steps);
  return 0;
}

struct PredictArgs {
  std::string ckpt, rgb, edge, depth, out;
  bool prob = false;
  bool depth_proxy = false;
  double threshold = 0.5;
};

// Planar values of a single-channel file matching the rgb size.
std::vector<double> load_plane(const std::string& path, std::size_t w, std::size_t h) {
  const vasl::Image img = vasl::load_image(path);
  if (img.channels != 1) throw vasl::DataError(path + ": expected a single-channel PGM");
  if (img.width != w || img.height != h)
    throw vasl::DataError(path + ": size " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                          " does not match the rgb image " + std::to_string(w) + "x" + std::to_string(h));
  return img.planes();
}

int run_predict(const PredictArgs& a) {
  vasl::Checkpoint ck = vasl::load_checkpoint(a.ckpt);
  const vasl::ModelConfig& cfg = ck.net.config();
  if (!(a.threshold >= 0.0 && a.threshold <= 1.0)) throw vasl::ConfigError("--threshold must lie in [0,1]");

  const vasl::Image rgb = vasl::load_image(a.rgb);
  if (rgb.channels != 3) throw vasl::DataError(a.rgb + ": expected a 3-channel PPM");
  const std::size_t w = rgb.width, h = rgb.height, size = cfg.image_size;
  const auto rgb_planes = rgb.planes();

  if (!cfg.has_domain(vasl::Domain::edge) && !a.edge.empty())
    std::fprintf(stderr, "warning: checkpoint does not use the edge domain; ignoring --edge\n");
  if (!cfg.has_domain(vasl::Domain::depth) && (!a.depth.empty() || a.depth_proxy))
    std::fprintf(stderr, "warning: checkpoint does not use the depth domain; ignoring --depth/--depth-proxy\n");
  if (cfg.has_domain(vasl::Domain::depth) && a.depth.empty() && !a.depth_proxy)
    throw vasl::ConfigError("checkpoint uses the depth domain: pass --depth FILE or opt in to --depth-proxy");
  if (!a.depth.empty() && a.depth_proxy) throw vasl::ConfigError("--depth and --depth-proxy are mutually exclusive");

  auto to_tensor = [&](const std::vector<double>& planes, std::size_t channels) {
    return vasl::Tensor(vasl::Shape(1, channels, size, size),
                        vasl::resize_bilinear(planes, channels, h, w, size, size));
  };
  vasl::DomainInputs in;
  if (cfg.has_domain(vasl::Domain::rgb)) in.rgb = to_tensor(rgb_planes, 3);
  if (cfg.has_domain(vasl::Domain::edge))
    in.edge = to_tensor(a.edge.empty() ? vasl::sobel_edge(rgb_planes, h, w) : load_plane(a.edge, w, h), 1);
  if (cfg.has_domain(vasl::Domain::depth))
    in.depth = to_tensor(a.depth.empty() ? vasl::depth_proxy(rgb_planes, h, w) : load_plane(a.depth, w, h), 1);

  const vasl::Tensor prob = vasl::predict(ck.net, in);
  if (!vasl::all_finite(prob.data())) throw vasl::NumericError("predict: non-finite probabilities");
  const auto full = vasl::resize_bilinear(prob.values(), 1, size, size, h, w);
  if (a.prob) {
    vasl::save_image(a.out, vasl::probability_image(full, w, h));
  } else {
    vasl::save_image(a.out, vasl::mask_image(vasl::binarize(full, a.threshold), w, h));
  }
  return 0;
}

struct EvalArgs {
  std::string pred, gt, report, csv;
  std::vector<double> thresholds{0.5};
};

int run_eval(const EvalArgs& a) {
  for (double t : a.thresholds)
    if (!(t >= 0.0 && t <= 1.0)) throw vasl::ConfigError("--threshold values must lie in [0,1]");
  if (!a.csv.empty() && a.thresholds.size() != 1) throw vasl::ConfigError("--csv needs exactly one --threshold");
  const auto pairs = vasl::load_eval_pairs(a.pred, a.gt);
  const auto reports = vasl::threshold_sweep(pairs, a.thresholds);
  std::string text;
  for (const auto& r : reports) {
    std::printf("%s\n", vasl::summary_line(r).c_str());
    if (!text.empty()) text += "\n";
    text += vasl::report_text(r);
  }
  vasl::write_file(a.report, text);
  if (!a.csv.empty()) vasl::write_file(a.csv, vasl::report_csv(reports.front()));
  return 0;
}

int run_gradcheck(std::uint64_t seed) {
  constexpr double kLimit = 1e-5;
  bool ok = true;
  for (const auto& r : vasl::gradcheck_suite(seed)) {
    const bool pass = r.max_rel_error < kLimit;
    ok = ok && pass;
    std::printf("%-22s max_rel_err %.3e checked %4zu skipped %3zu %s\n", r.name.c_str(), r.max_rel_error, r.checked,
                r.skipped, pass ? "ok" : "FAIL");
  }
  return ok ? 0 : kExitNumeric;
}

}  // namespace

int main(int argc, char** argv) {
  vasl::configure_allocator();
  CLI::App app{"splice localization: synth, train, predict, eval, gradcheck"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "generate a synthetic splice dataset");
  s->add_option("--out", synth.out, "output directory")->required();
  s->add_option("--count", synth.spec.count, "number of samples")->capture_default_str();
  s->add_option("--seed", synth.spec.seed, "generator seed")->capture_default_str();
  s->add_option("--size", synth.spec.size, "image side in pixels")->capture_default_str();

  TrainArgs train;
  auto* t = app.add_subcommand("train", "train a model on a dataset directory");
  t->add_option("--data", train.data, "dataset directory with manifest.txt")->required();
  t->add_option("--config", train.config, "model config file")->required();
  t->add_option("--out", train.out, "checkpoint path; the epoch log goes to <out>.log")->required();
  t->add_option("--epochs", train.epochs, "override the config's epoch count");
  t->add_option("--max-steps", train.max_steps, "stop after this many optimizer steps");

  PredictArgs pred;
  auto* p = app.add_subcommand("predict", "predict a splice mask for one image");
  p->add_option("--ckpt", pred.ckpt, "checkpoint")->required();
  p->add_option("--rgb", pred.rgb, "RGB image (binary PPM)")->required();
  p->add_option("--edge", pred.edge, "edge map (PGM); Sobel of the RGB image when omitted");
  p->add_option("--depth", pred.depth, "depth map (PGM)");
  p->add_flag("--depth-proxy", pred.depth_proxy, "use a blurred-grayscale stand-in when no depth map exists");
  p->add_option("--out", pred.out, "output PGM")->required();
  p->add_flag("--prob", pred.prob, "write the 16-bit probability map instead of the binary mask");
  p->add_option("--threshold", pred.threshold, "binarization threshold")->capture_default_str();

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "score predicted masks against ground truth");
  e->add_option("--pred", ev.pred, "directory of <id>.mask.pgm predictions")->required();
  e->add_option("--gt", ev.gt, "dataset directory with manifest.txt")->required();
  e->add_option("--threshold", ev.thresholds, "one or more thresholds")->delimiter(',')->capture_default_str();
  e->add_option("--report", ev.report, "text report path")->required();
  e->add_option("--csv", ev.csv, "CSV report path (single threshold)");

  std::uint64_t gc_seed = 7;
  auto* g = app.add_subcommand("gradcheck", "finite-difference check of every layer and a micro network");
  g->add_option("--seed", gc_seed, "seed for inputs and parameters")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*s) return run_synth(synth);
    if (*t) return run_train(train);
    if (*p) return run_predict(pred);
    if (*e) return run_eval(ev);
    if (*g) return run_gradcheck(gc_seed);
  } catch (const vasl::ConfigError& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return kExitUsage;
  } catch (const vasl::NumericError& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return kExitNumeric;
  } catch (const vasl::DataError& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return kExitData;
  } catch (const vasl::ShapeError& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return kExitData;
  } catch (const std::exception& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return kExitUsage;
  }
  return kExitUsage;
}
