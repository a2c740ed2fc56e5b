#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "gravis/errors.hpp"
#include "gravis/pretrain.hpp"
#include "gravis/synth.hpp"

using namespace gravis;

namespace {

namespace fs = std::filesystem;

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::path("/tmp") / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::vector<char> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::vector<char>((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
}

// Small fast config over a fresh synthetic dataset.
PretrainConfig small_config(const TempDir& dir, std::uint64_t seed) {
  SynthConfig synth;
  synth.num_sources = 8;
  synth.num_classes = 2;
  synth.image_size = 16;
  synth.seed = 77;
  generate_synthetic_dataset(synth, (dir.path / "data").string());

  PretrainConfig cfg;
  cfg.manifest_path = (dir.path / "data" / "manifest.json").string();
  cfg.batch_size = 4;
  cfg.n_aug = 3;
  cfg.epochs = 2;
  cfg.base_lr = 0.002;
  cfg.seed = seed;
  cfg.augmentation.output_size = 16;
  cfg.checkpoint_out = (dir.path / "ck.grvs").string();
  cfg.metrics_out = (dir.path / "metrics.csv").string();
  return cfg;
}

}  // namespace

TEST_CASE("config json parsing honors defaults, presets and overrides") {
  const PretrainConfig d = parse_pretrain_config_json("{}");
  CHECK(d.batch_size == 32);
  CHECK(d.n_aug == 20);
  CHECK(d.tau == 0.2);
  CHECK(d.epochs == 240);
  CHECK(d.base_lr == 1e-3);
  CHECK(d.momentum == 0.9);
  CHECK(d.loss == LossKind::vgl);
  CHECK(d.attention_enabled);

  const PretrainConfig desk = parse_pretrain_config_json(R"({"preset": "desk"})");
  CHECK(desk.batch_size == 8);
  CHECK(desk.n_aug == 6);
  CHECK(desk.epochs == 50);

  const PretrainConfig c = parse_pretrain_config_json(R"({
    "preset": "desk",
    "batch_size": 12,
    "loss": "nce",
    "tau": 0.5,
    "augmentation": {"output_size": 16, "crop_scale": [0.5, 1.0]}
  })");
  CHECK(c.batch_size == 12);
  CHECK(c.n_aug == 6);
  CHECK(c.loss == LossKind::nce);
  CHECK(c.tau == 0.5);
  CHECK(c.augmentation.output_size == 16);
  CHECK(c.augmentation.crop_scale_lo == 0.5);
}

TEST_CASE("config json rejects unknown keys at any level") {
  CHECK_THROWS_WITH_AS(parse_pretrain_config_json(R"({"batchsize": 4})"),
                       "ConfigError: unknown key 'batchsize' in config",
                       ConfigError);
  CHECK_THROWS_AS(
      parse_pretrain_config_json(R"({"augmentation": {"flip": 0.5}})"),
      ConfigError);
  CHECK_THROWS_AS(parse_pretrain_config_json(R"({"loss": "bag"})"), ConfigError);
  CHECK_THROWS_AS(parse_pretrain_config_json("[1,2]"), ConfigError);
  CHECK_THROWS_AS(parse_pretrain_config_json("{"), ConfigError);
}

TEST_CASE("config validation catches bad values") {
  PretrainConfig cfg;
  cfg.n_aug = 1;
  CHECK_THROWS_AS(cfg.validate(), InvalidN);
  cfg = PretrainConfig{};
  cfg.tau = 0.0;
  CHECK_THROWS_AS(cfg.validate(), InvalidTemperature);
  cfg = PretrainConfig{};
  cfg.momentum = 1.0;
  CHECK_THROWS_AS(cfg.validate(), OutOfRange);
}

TEST_CASE("zero-epoch run leaves the initialization untouched") {
  TempDir dir("gravis_test_pretrain_zero");
  PretrainConfig cfg = small_config(dir, 5);
  cfg.epochs = 0;
  const PretrainResult res = pretrain_run(cfg);
  CHECK(res.metrics.rows.empty());
  for (const auto& t : res.state.velocity)
    for (float v : t.data) CHECK(v == 0.0f);

  // Byte-identical across repeats, and distinct from a trained checkpoint.
  const std::vector<char> ck0 = slurp(dir.path / "ck.grvs");
  pretrain_run(cfg);
  CHECK(slurp(dir.path / "ck.grvs") == ck0);
  cfg.epochs = 1;
  pretrain_run(cfg);
  CHECK(slurp(dir.path / "ck.grvs") != ck0);
}

TEST_CASE("identical config and seed reproduce checkpoint and metrics bytes") {
  TempDir dir("gravis_test_pretrain_det");
  const PretrainConfig cfg = small_config(dir, 42);
  pretrain_run(cfg);
  const std::vector<char> ck1 = slurp(dir.path / "ck.grvs");
  const std::vector<char> m1 = slurp(dir.path / "metrics.csv");
  pretrain_run(cfg);
  CHECK(slurp(dir.path / "ck.grvs") == ck1);
  CHECK(slurp(dir.path / "metrics.csv") == m1);

  PretrainConfig other = cfg;
  other.seed = 43;
  pretrain_run(other);
  CHECK(slurp(dir.path / "ck.grvs") != ck1);
}

TEST_CASE("metrics csv carries the documented header and one row per epoch") {
  TempDir dir("gravis_test_pretrain_metrics");
  const PretrainConfig cfg = small_config(dir, 1);
  const PretrainResult res = pretrain_run(cfg);
  REQUIRE(res.metrics.rows.size() == 2);
  for (const MetricsRow& r : res.metrics.rows) {
    CHECK(std::isfinite(r.loss));
    CHECK(r.loss > 0.0);
    CHECK(r.seconds == 0.0);  // timing off by default
  }
  std::ifstream in(dir.path / "metrics.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "epoch,loss,lr,seconds");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 2);
}

TEST_CASE("each loss selector trains and reports finite losses") {
  for (LossKind kind : {LossKind::vgl, LossKind::triplet, LossKind::nce}) {
    TempDir dir("gravis_test_pretrain_loss");
    PretrainConfig cfg = small_config(dir, 3);
    cfg.loss = kind;
    cfg.epochs = 1;
    const PretrainResult res = pretrain_run(cfg);
    REQUIRE(res.metrics.rows.size() == 1);
    CHECK(std::isfinite(res.metrics.rows[0].loss));
  }
}

TEST_CASE("n_aug 0 trains with duplicated views") {
  TempDir dir("gravis_test_pretrain_n0");
  PretrainConfig cfg = small_config(dir, 3);
  cfg.n_aug = 0;
  cfg.epochs = 1;
  const PretrainResult res = pretrain_run(cfg);
  CHECK(res.metrics.rows.size() == 1);
}

TEST_CASE("a dataset smaller than one batch is rejected") {
  TempDir dir("gravis_test_pretrain_small");
  PretrainConfig cfg = small_config(dir, 3);
  cfg.batch_size = 64;
  CHECK_THROWS_AS(pretrain_run(cfg), DatasetTooSmall);
}

TEST_CASE("a short run decreases the training loss") {
  TempDir dir("gravis_test_pretrain_down");
  PretrainConfig cfg = small_config(dir, 11);
  cfg.epochs = 10;
  cfg.base_lr = 0.01;
  const PretrainResult res = pretrain_run(cfg);
  REQUIRE(res.metrics.rows.size() == 10);
  CHECK(res.metrics.rows.back().loss < res.metrics.rows.front().loss);
}
