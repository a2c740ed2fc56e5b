#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "gravis/cli.hpp"

namespace {

namespace fs = std::filesystem;

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"gravis"};
  for (const std::string& a : args) argv.push_back(a.c_str());
  return gravis::cli_main(static_cast<int>(argv.size()), argv.data());
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::path("/tmp") / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("help exits zero, bad usage exits two") {
  CHECK(run({"--help"}) == 0);
  CHECK(run({"frobnicate"}) == 2);
  CHECK(run({"pretrain", "--no-such-flag"}) == 2);
  CHECK(run({}) == 2);  // a subcommand is required
  CHECK(run({"analyze"}) == 2);
}

TEST_CASE("runtime failures exit one") {
  CHECK(run({"pretrain", "--manifest", "/tmp/gravis_definitely_missing.json"}) == 1);
  CHECK(run({"eval", "retrieval", "--checkpoint", "/tmp/missing.grvs",
             "--manifest", "/tmp/missing.json"}) == 1);
  CHECK(run({"synth"}) == 1);  // --out is required
}

TEST_CASE("end-to-end workflow through the command surface") {
  TempDir dir("gravis_test_cli_flow");
  const std::string data = (dir.path / "data").string();
  const std::string manifest = data + "/manifest.json";
  const std::string ck = (dir.path / "ck.grvs").string();
  const std::string metrics = (dir.path / "metrics.csv").string();

  CHECK(run({"synth", "--out", data, "--num-sources", "8", "--num-classes", "2",
             "--image-size", "16", "--seed", "3"}) == 0);
  CHECK(fs::exists(manifest));

  CHECK(run({"--config", "/dev/null/definitely-bad", "pretrain", "--manifest",
             manifest}) == 1);

  // Tiny but real training run; flags override the desk preset.
  {
    std::ofstream cfg(dir.path / "cfg.json");
    cfg << R"({"preset": "desk", "augmentation": {"output_size": 16}})";
  }
  CHECK(run({"--config", (dir.path / "cfg.json").string(), "--seed", "9", "--out",
             ck, "pretrain", "--manifest", manifest, "--metrics", metrics,
             "--batch", "4", "--n-aug", "2", "--epochs", "1"}) == 0);
  CHECK(fs::exists(ck));
  CHECK(fs::exists(metrics));

  CHECK(run({"eval", "retrieval", "--checkpoint", ck, "--manifest", manifest,
             "--n-views", "2", "--k", "1", "--seed", "4", "--out",
             (dir.path / "retrieval.json").string()}) == 0);
  CHECK(fs::exists(dir.path / "retrieval.json"));

  CHECK(run({"eval", "probe", "--checkpoint", ck, "--manifest", manifest,
             "--steps", "40", "--seed", "4", "--out",
             (dir.path / "probe.json").string()}) == 0);
  CHECK(fs::exists(dir.path / "probe.json"));

  CHECK(run({"analyze", "grad-gap", "--tau", "0.2", "--out",
             (dir.path / "gg.csv").string()}) == 0);
  CHECK(run({"analyze", "loss-gap", "--no-attention", "--out",
             (dir.path / "lg.csv").string()}) == 0);
  CHECK(run({"analyze", "sigmoid-margin", "--tau", "0.05", "--out",
             (dir.path / "sm.csv").string()}) == 0);
  CHECK(run({"analyze", "tau-sweep", "--taus", "0.1,0.2", "--c-count", "5",
             "--out", (dir.path / "ts.csv").string()}) == 0);
  for (const char* f : {"gg.csv", "lg.csv", "sm.csv", "ts.csv"})
    CHECK(fs::exists(dir.path / f));

  // Rejected N=1 surfaces as a runtime failure, not a crash.
  CHECK(run({"pretrain", "--manifest", manifest, "--batch", "4", "--n-aug", "1",
             "--epochs", "1"}) == 1);
}

TEST_CASE("gradcheck subcommand passes and exits zero") {
  CHECK(run({"gradcheck", "--seed", "17"}) == 0);
}
