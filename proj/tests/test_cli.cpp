#include <gtest/gtest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "vasl/gradcheck.hpp"
#include "vasl/image_io.hpp"

using namespace vasl;
namespace fs = std::filesystem;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "vasl_test_cli";

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult cli(const std::string& args) {
  static int counter = 0;
  fs::create_directories(kRoot);
  const fs::path out = kRoot / ("stdout." + std::to_string(counter));
  const fs::path err = kRoot / ("stderr." + std::to_string(counter++));
  const std::string cmd = std::string(VASL_CLI_PATH) + " " + args + " >" + out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  const int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return {code, read_file(out.string()), read_file(err.string())};
}

fs::path fresh(const std::string& name) {
  const fs::path d = kRoot / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

// Tiny network at 32x32 so a train run takes a second.
fs::path write_config(const fs::path& dir, std::vector<Domain> domains = {Domain::rgb, Domain::edge, Domain::depth}) {
  ModelConfig c = micro_config(5);
  c.domains = std::move(domains);
  c.epochs = 1;
  const fs::path p = dir / "tiny.cfg";
  write_file(p.string(), c.to_text());
  return p;
}

// Synth 4 samples at 32px and train one epoch; returns the checkpoint path.
fs::path trained(const fs::path& dir, std::vector<Domain> domains = {Domain::rgb, Domain::edge, Domain::depth}) {
  const fs::path cfg = write_config(dir, std::move(domains));
  EXPECT_EQ(cli("synth --out " + (dir / "data").string() + " --count 4 --size 32").code, 0);
  const fs::path ckpt = dir / "model.ckpt";
  EXPECT_EQ(cli("train --data " + (dir / "data").string() + " --config " + cfg.string() + " --out " + ckpt.string()).code,
            0);
  return ckpt;
}

}  // namespace

TEST(Cli, NoSubcommandOrUnknownFlagIsUsageError) {
  EXPECT_EQ(cli("").code, 1);
  EXPECT_EQ(cli("synth --out " + (kRoot / "x").string() + " --bogus 3").code, 1);
  EXPECT_EQ(cli("frobnicate").code, 1);
  EXPECT_EQ(cli("--help").code, 0);
}

TEST(Cli, SynthWritesSamplesAndManifest) {
  const fs::path d = fresh("synth8");
  ASSERT_EQ(cli("synth --out " + d.string() + " --count 8 --seed 3 --size 32").code, 0);
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(d)) files += e.path().filename() != "manifest.txt";
  EXPECT_EQ(files, 32u);
  EXPECT_TRUE(fs::exists(d / "manifest.txt"));

  const fs::path again = fresh("synth8b");
  ASSERT_EQ(cli("synth --out " + again.string() + " --count 8 --seed 3 --size 32").code, 0);
  for (const auto& e : fs::directory_iterator(d))
    EXPECT_EQ(read_file(e.path().string()), read_file((again / e.path().filename()).string()));
}

TEST(Cli, SynthCountZeroGivesEmptyManifest) {
  const fs::path d = fresh("synth0");
  ASSERT_EQ(cli("synth --out " + d.string() + " --count 0").code, 0);
  EXPECT_EQ(read_file((d / "manifest.txt").string()), "");
}

TEST(Cli, SynthIntoUnwritableLocationIsDataError) {
  const fs::path d = fresh("blocked");
  write_file((d / "file").string(), "x");
  EXPECT_EQ(cli("synth --out " + (d / "file" / "sub").string() + " --count 1 --size 32").code, 2);
}

TEST(Cli, TrainWritesCheckpointAndLog) {
  const fs::path d = fresh("train");
  const fs::path ckpt = trained(d);
  ASSERT_TRUE(fs::exists(ckpt));
  const std::string log = read_file(ckpt.string() + ".log");
  EXPECT_EQ(log.rfind("epoch 0 steps 2 lr 0.0001 loss ", 0), 0u) << log;
  EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), 1);
}

TEST(Cli, TrainMissingConfigKeyNamesIt) {
  const fs::path d = fresh("badcfg");
  std::string text = ModelConfig{}.to_text();
  text.erase(text.find("growth_rate"), text.find('\n', text.find("growth_rate")) - text.find("growth_rate") + 1);
  write_file((d / "bad.cfg").string(), text);
  ASSERT_EQ(cli("synth --out " + (d / "data").string() + " --count 1 --size 32").code, 0);
  const CliResult r = cli("train --data " + (d / "data").string() + " --config " + (d / "bad.cfg").string() + " --out " +
                    (d / "m.ckpt").string());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("growth_rate"), std::string::npos) << r.err;
}

TEST(Cli, TrainMissingDataIsDataError) {
  const fs::path d = fresh("nodata");
  const fs::path cfg = write_config(d);
  EXPECT_EQ(cli("train --data " + (d / "nowhere").string() + " --config " + cfg.string() + " --out " +
                (d / "m.ckpt").string())
                .code,
            2);
}

TEST(Cli, PredictWritesMaskAndProbabilityMap) {
  const fs::path d = fresh("predict");
  const fs::path ckpt = trained(d);
  const std::string rgb = (d / "data" / "s00000.rgb.ppm").string();
  const std::string depth = (d / "data" / "s00000.depth.pgm").string();
  ASSERT_EQ(cli("predict --ckpt " + ckpt.string() + " --rgb " + rgb + " --depth " + depth + " --out " +
                (d / "mask.pgm").string())
                .code,
            0);
  const Image mask = load_image((d / "mask.pgm").string());
  EXPECT_EQ(mask.maxval, 255);
  EXPECT_EQ(mask.width, 32u);
  for (auto v : mask.samples) EXPECT_TRUE(v == 0 || v == 255);

  ASSERT_EQ(cli("predict --ckpt " + ckpt.string() + " --rgb " + rgb + " --depth-proxy --prob --out " +
                (d / "prob.pgm").string())
                .code,
            0);
  EXPECT_EQ(load_image((d / "prob.pgm").string()).maxval, 65535);
}

TEST(Cli, PredictWithoutDepthIsUsageError) {
  const fs::path d = fresh("nodepth");
  const fs::path ckpt = trained(d);
  const CliResult r = cli("predict --ckpt " + ckpt.string() + " --rgb " + (d / "data" / "s00000.rgb.ppm").string() +
                    " --out " + (d / "m.pgm").string());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("--depth-proxy"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(d / "m.pgm"));
}

TEST(Cli, RgbOnlyCheckpointWarnsAboutIgnoredDomains) {
  const fs::path d = fresh("rgbonly");
  const fs::path ckpt = trained(d, {Domain::rgb});
  const CliResult r = cli("predict --ckpt " + ckpt.string() + " --rgb " + (d / "data" / "s00000.rgb.ppm").string() +
                    " --edge " + (d / "data" / "s00000.edge.pgm").string() + " --depth " +
                    (d / "data" / "s00000.depth.pgm").string() + " --out " + (d / "m.pgm").string());
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.err.find("ignoring --edge"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("ignoring --depth"), std::string::npos) << r.err;
}

TEST(Cli, EvalSelfComparisonAndSweep) {
  const fs::path d = fresh("eval");
  const std::string data = (d / "data").string();
  ASSERT_EQ(cli("synth --out " + data + " --count 3 --size 32").code, 0);
  const CliResult self = cli("eval --pred " + data + " --gt " + data + " --report " + (d / "r.txt").string() + " --csv " +
                       (d / "r.csv").string());
  ASSERT_EQ(self.code, 0) << self.err;
  EXPECT_NE(self.out.find("mean_iou 1.000000 mean_acc 1.000000 mean_f1 1.000000"), std::string::npos) << self.out;
  EXPECT_EQ(read_file((d / "r.csv").string()).rfind("id,iou,acc,f1,auc\n", 0), 0u);

  const CliResult sweep = cli("eval --pred " + data + " --gt " + data + " --report " + (d / "s.txt").string() +
                        " --threshold 0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9");
  ASSERT_EQ(sweep.code, 0) << sweep.err;
  EXPECT_EQ(std::count(sweep.out.begin(), sweep.out.end(), '\n'), 9);
  EXPECT_EQ(cli("eval --pred " + data + " --gt " + data + " --report " + (d / "s.txt").string() +
                " --threshold 0.2,0.4 --csv " + (d / "x.csv").string())
                .code,
            1);
  EXPECT_EQ(cli("eval --pred " + data + " --gt " + data + " --report " + (d / "s.txt").string() + " --threshold 1.5")
                .code,
            1);
}

TEST(Cli, EvalMissingPredictionIsDataError) {
  const fs::path d = fresh("evalmiss");
  const std::string data = (d / "data").string();
  ASSERT_EQ(cli("synth --out " + data + " --count 2 --size 32").code, 0);
  fs::create_directories(d / "pred");
  fs::copy_file(d / "data" / "s00000.mask.pgm", d / "pred" / "s00000.mask.pgm");
  const CliResult r = cli("eval --pred " + (d / "pred").string() + " --gt " + data + " --report " + (d / "r.txt").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("s00001"), std::string::npos) << r.err;
}

TEST(Cli, GradcheckPassesAndIsReproducible) {
  const CliResult a = cli("gradcheck --seed 4");
  ASSERT_EQ(a.code, 0) << a.out;
  EXPECT_GE(std::count(a.out.begin(), a.out.end(), '\n'), 8);
  EXPECT_EQ(a.out.find("FAIL"), std::string::npos);
  EXPECT_EQ(cli("gradcheck --seed 4").out, a.out);
}
