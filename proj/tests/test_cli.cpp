#include <gtest/gtest.h>

#include <sstream>

#include "lews/cli.hpp"
#include "lews/run_config.hpp"
#include "test_support.hpp"

namespace lews {
namespace {

namespace fs = std::filesystem;

struct CliRun {
  int code;
  std::string out, err;
};

CliRun run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli_main(args, out, err);
  return {code, out.str(), err.str()};
}

// 3 regions of 6x6 cells over 150 hours, with quick training settings.
void write_tiny_config(const fs::path& path) {
  write_text_file(path,
                  "synth.n_regions = 3\nsynth.hours = 150\nsynth.height = 6\nsynth.width = 6\n"
                  "train.pretrain_epochs = 1\ntrain.finetune_epochs = 1\ntrain.batch_size = 8\n"
                  "train.steps_per_epoch = 2\ntrain.probe_size = 8\n");
}

void expect_same_directory(const fs::path& a, const fs::path& b) {
  std::size_t files = 0;
  for (const auto& entry : fs::directory_iterator(a)) {
    const auto name = entry.path().filename();
    ASSERT_TRUE(fs::exists(b / name)) << name;
    EXPECT_EQ(test::file_bytes(entry.path()), test::file_bytes(b / name)) << name;
    ++files;
  }
  EXPECT_EQ(files, static_cast<std::size_t>(std::distance(fs::directory_iterator(b), fs::directory_iterator())));
}

TEST(RunConfig, ManifestRoundTrip) {
  RunConfig cfg;
  cfg.seed = 12;
  cfg.synth.hours = 99;
  cfg.flow.ridge_lambda = 0.25;
  cfg.train.trainable = "head";
  cfg.train.finetune_augment = true;
  cfg.augment.sigma_disp = 1.5;
  cfg.encoder.heads = 4;
  cfg.target_recall = 0.7;
  RunConfig back;
  back.apply(Manifest::parse(cfg.to_manifest().to_string()));
  EXPECT_EQ(back.to_manifest().to_string(), cfg.to_manifest().to_string());
  EXPECT_EQ(back.encoder.heads, 4);
  EXPECT_TRUE(back.train.finetune_augment);
}

TEST(RunConfig, RejectsUnknownKeysAndBadValues) {
  RunConfig cfg;
  EXPECT_THROW(cfg.apply(Manifest::parse("synth.n_region = 3\n")), ValidationError);
  EXPECT_THROW(cfg.apply(Manifest::parse("synth.hours = many\n")), ValidationError);
  EXPECT_THROW(cfg.apply(Manifest::parse("train.finetune_augment = maybe\n")), ValidationError);
  EXPECT_THROW(cfg.apply(Manifest::parse("run.seed = -1\n")), ValidationError);
}

TEST(RunConfig, PropagateSharesSeedAndSections) {
  RunConfig cfg;
  cfg.seed = 9;
  cfg.augment.sigma_disp = 2.0;
  cfg.encoder.ff_width = 16;
  cfg.propagate();
  EXPECT_EQ(cfg.synth.seed, 9u);
  EXPECT_EQ(cfg.train.seed, 9u);
  EXPECT_EQ(cfg.train.augment.sigma_disp, 2.0);
  EXPECT_EQ(cfg.train.encoder.ff_width, 16);
}

TEST(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(run({}).code, 1);
  EXPECT_EQ(run({"fly"}).code, 1);
  EXPECT_EQ(run({"synth", "--bogus"}).code, 1);
  EXPECT_EQ(run({"--help"}).code, 0);
  test::TempDir dir("cli");
  write_text_file(dir / "bad.txt", "synth.api_decay = 1.5\n");
  EXPECT_EQ(run({"--config", (dir / "bad.txt").string(), "synth", "--out", (dir / "o").string()}).code, 1);
}

TEST(Cli, IoErrorsExitTwo) {
  test::TempDir dir("cli");
  EXPECT_EQ(run({"--config", (dir / "missing.txt").string(), "synth"}).code, 2);
  EXPECT_EQ(run({"pretrain", "--data", (dir / "nothing").string(), "--out", (dir / "o").string()}).code, 2);
  EXPECT_EQ(run({"forecast", "--input", (dir / "none.rain").string(), "--out", (dir / "o").string()}).code, 2);
}

TEST(Cli, SynthIsByteIdenticalAcrossRuns) {
  test::TempDir dir("cli");
  write_tiny_config(dir / "cfg.txt");
  const auto cfg = (dir / "cfg.txt").string();
  ASSERT_EQ(run({"--config", cfg, "synth", "--seed", "7", "--out", (dir / "a").string()}).code, 0);
  ASSERT_EQ(run({"--config", cfg, "synth", "--seed", "7", "--out", (dir / "b").string()}).code, 0);
  EXPECT_TRUE(fs::exists(dir / "a" / "dataset.txt"));
  EXPECT_TRUE(fs::exists(dir / "a" / "config.txt"));
  // The resolved config differs only in the output path.
  RunConfig a = RunConfig::load(dir / "a" / "config.txt");
  EXPECT_EQ(a.seed, 7u);
  EXPECT_EQ(a.synth.hours, 150);
  fs::remove(dir / "a" / "config.txt");
  fs::remove(dir / "b" / "config.txt");
  expect_same_directory(dir / "a", dir / "b");
}

TEST(Cli, ForecastOnStaticStackRepeatsLastFrame) {
  test::TempDir dir("cli");
  std::mt19937_64 rng(4);
  const Region region = test::make_region(8, 8);
  RainfallSequence seq = test::random_sequence(rng, region, 4, 0);
  for (std::size_t t = 1; t < seq.size(); ++t) seq.fields[t].values = seq.fields[0].values;
  write_rainfall_stack(seq, dir / "stack.rain");
  const std::string before = test::file_bytes(dir / "stack.rain");
  const CliRun r = run({"forecast", "--input", (dir / "stack.rain").string(), "--out", (dir / "fc").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const RainfallSequence out = read_rainfall_stack(dir / "fc" / "forecast.rain");
  ASSERT_EQ(out.size(), 8u);
  for (const auto& f : out.fields) EXPECT_EQ(f.values, seq.fields.back().values);
  EXPECT_EQ(test::file_bytes(dir / "stack.rain"), before);
  EXPECT_TRUE(fs::exists(dir / "fc" / "config.txt"));
}

TEST(Cli, AugmentWritesViewAndPath) {
  test::TempDir dir("cli");
  std::mt19937_64 rng(5);
  write_rainfall_stack(test::random_sequence(rng, test::make_region(8, 8), 48, 0), dir / "stack.rain");
  const std::string before = test::file_bytes(dir / "stack.rain");
  for (const char* out : {"a", "b"}) {
    ASSERT_EQ(run({"augment", "--input", (dir / "stack.rain").string(), "--seed", "3", "--out", (dir / out).string()})
                  .code,
              0);
  }
  EXPECT_EQ(test::file_bytes(dir / "stack.rain"), before);
  EXPECT_EQ(read_rainfall_stack(dir / "a" / "augmented.rain").size(), 48u);
  const std::string path = test::file_bytes(dir / "a" / "displacement.csv");
  EXPECT_EQ(path.substr(0, path.find('\n')), "t,dx,dy,ex,ey");
  fs::remove(dir / "a" / "config.txt");
  fs::remove(dir / "b" / "config.txt");
  expect_same_directory(dir / "a", dir / "b");
}

TEST(Cli, TrainingCommandsAreDeterministicAndAblateHasSixRows) {
  test::TempDir dir("cli");
  write_tiny_config(dir / "cfg.txt");
  const auto cfg = (dir / "cfg.txt").string();
  const auto data = (dir / "data").string();
  ASSERT_EQ(run({"--config", cfg, "--seed", "1", "synth", "--out", data}).code, 0);
  for (const char* tag : {"x", "y"}) {
    const fs::path root = dir / tag;
    const std::vector<std::string> common{"--config", cfg, "--seed", "1", "--data", data};
    auto with = [&](std::vector<std::string> rest) {
      std::vector<std::string> args = common;
      args.insert(args.end(), rest.begin(), rest.end());
      return run(args);
    };
    CliRun r = with({"pretrain", "--out", (root / "pre").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    r = with({"finetune", "--encoder", (root / "pre" / "encoder.ckpt").string(), "--out", (root / "fine").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    r = with({"train-baseline", "--mode", "end-to-end-forecast", "--out", (root / "base").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    r = with({"evaluate", "--model", (root / "fine" / "model.ckpt").string(), "--setting", "forecast", "--out",
              (root / "eval").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    r = with({"ablate", "--out", (root / "abl").string()});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  for (const char* sub : {"pre", "fine", "base", "eval", "abl"}) {
    fs::remove(dir / "x" / sub / "config.txt");
    fs::remove(dir / "y" / sub / "config.txt");
    expect_same_directory(dir / "x" / sub, dir / "y" / sub);
  }
  const std::string csv = test::file_bytes(dir / "x" / "abl" / "ablation.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 7);
  EXPECT_EQ(run({"--config", cfg, "--data", data, "train-baseline", "--mode", "rmcl", "--out", (dir / "z").string()}).code,
            1);
}

}  // namespace
}  // namespace lews
