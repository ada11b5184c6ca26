// End-to-end checks of the command-line tool: determinism of emitted files,
// config round-trips, and the evaluation fixture.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

const std::string kBin = MHT3D_BIN_PATH;

struct WorkDir {
  fs::path dir;
  WorkDir() {
    dir = fs::temp_directory_path() / "mht3d_cli_test";
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  std::string operator/(const std::string& name) const { return (dir / name).string(); }
};

int run(const std::string& args) {
  const std::string cmd = kBin + " " + args + " > /dev/null 2>&1";
  return std::system(cmd.c_str());
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("simulate is deterministic and honors the config round-trip") {
  WorkDir wd;
  const std::string a = wd / "a";
  const std::string b = wd / "b";
  const std::string c = wd / "c";

  REQUIRE(run("simulate --out " + a + " --scenes 2 --frames 18 --vehicles 2 --pedestrians 1 "
              "--cyclists 0 --seed 33") == 0);
  REQUIRE(run("simulate --out " + b + " --scenes 2 --frames 18 --vehicles 2 --pedestrians 1 "
              "--cyclists 0 --seed 33") == 0);
  CHECK(slurp(a + "/scene_33_000.jsonl") == slurp(b + "/scene_33_000.jsonl"));
  CHECK(slurp(a + "/scene_33_001.jsonl") == slurp(b + "/scene_33_001.jsonl"));

  // rerun purely from the emitted config, redirected to a fresh directory
  REQUIRE(run("simulate --config " + a + "/config.json --out " + c) == 0);
  CHECK(slurp(a + "/scene_33_000.jsonl") == slurp(c + "/scene_33_000.jsonl"));
}

TEST_CASE("training, tracking and evaluation chain together deterministically") {
  WorkDir wd;
  const std::string scenes = wd / "scenes";
  REQUIRE(run("simulate --out " + scenes +
              " --scenes 2 --frames 18 --vehicles 3 --pedestrians 0 --cyclists 0 --seed 44") == 0);

  const std::string train_args =
      " --scenes " + scenes + " --epochs1 8 --epochs2 2 --batch2 4 --d 16 --y-points 6 "
      "--heads 2 --blocks 1 --rounds 1 --point-frames 3";
  REQUIRE(run("train --out " + (wd / "run") + train_args) == 0);
  REQUIRE(fs::exists(wd / "run/model.ckpt"));
  REQUIRE(fs::exists(wd / "run/motion.ckpt"));
  REQUIRE(fs::exists(wd / "run/loss_stage1.json"));
  REQUIRE(fs::exists(wd / "run/loss_stage2.json"));

  // identical rerun produces a byte-identical checkpoint
  REQUIRE(run("train --out " + (wd / "run2") + train_args) == 0);
  CHECK(slurp(wd / "run/model.ckpt") == slurp(wd / "run2/model.ckpt"));

  REQUIRE(run("track --scenes " + scenes + " --checkpoint " + (wd / "run/model.ckpt") +
              " --out " + (wd / "tracks")) == 0);
  REQUIRE(run("track --scenes " + scenes + " --checkpoint " + (wd / "run/model.ckpt") +
              " --out " + (wd / "tracks_b")) == 0);
  CHECK(slurp(wd / "tracks/tracks_scene_44_000.jsonl") ==
        slurp(wd / "tracks_b/tracks_scene_44_000.jsonl"));

  REQUIRE(run("eval --scenes " + scenes + " --tracks " + (wd / "tracks") + " --out " +
              (wd / "report.json") + " --csv " + (wd / "report.csv") + " --label smoke") == 0);
  const auto j = nlohmann::json::parse(slurp(wd / "report.json"));
  CHECK(j.at("label") == "smoke");
  CHECK(j.at("per_class").contains("vehicle"));

  // ablation flags are accepted and produce distinct outputs
  REQUIRE(run("track --scenes " + scenes + " --checkpoint " + (wd / "run/model.ckpt") +
              " --out " + (wd / "tracks_nopred") + " --no-pred-boxes") == 0);
  REQUIRE(run("track --scenes " + scenes + " --checkpoint " + (wd / "run/model.ckpt") +
              " --out " + (wd / "tracks_nointer") + " --interaction none") == 0);
  REQUIRE(fs::exists(wd / "tracks_nopred/tracks_scene_44_000.jsonl"));
  REQUIRE(fs::exists(wd / "tracks_nointer/tracks_scene_44_000.jsonl"));
}

TEST_CASE("track exits with a diagnostic when the checkpoint is missing") {
  WorkDir wd;
  const std::string scenes = wd / "scenes";
  REQUIRE(run("simulate --out " + scenes +
              " --scenes 1 --frames 16 --vehicles 1 --pedestrians 0 --cyclists 0 --seed 5") == 0);
  CHECK(run("track --scenes " + scenes + " --checkpoint " + (wd / "nothing.ckpt") + " --out " +
            (wd / "t")) != 0);
}

TEST_CASE("plotdata emits one row per (report, class)") {
  WorkDir wd;
  // synthesize two minimal reports
  for (int i = 0; i < 2; ++i) {
    nlohmann::ordered_json j;
    j["version"] = 1;
    j["label"] = "arm" + std::to_string(i);
    nlohmann::ordered_json t;
    t["gt"] = 10;
    t["fp"] = 1;
    t["miss"] = 2;
    t["ids"] = 0;
    t["matches"] = 8;
    t["mota"] = 0.7;
    t["fp_rate"] = 0.1;
    t["miss_rate"] = 0.2;
    t["ids_rate"] = 0.0;
    j["per_class"]["vehicle"] = t;
    std::ofstream(wd / ("r" + std::to_string(i) + ".json")) << j.dump(2);
  }
  REQUIRE(run("plotdata --reports " + (wd / "r0.json") + "," + (wd / "r1.json") + " --out " +
              (wd / "series.csv")) == 0);
  const std::string csv = slurp(wd / "series.csv");
  int lines = 0;
  for (char ch : csv)
    if (ch == '\n') ++lines;
  CHECK(lines == 3);  // header + 2 rows
}

TEST_CASE("environment variable roots relative outputs") {
  WorkDir wd;
  setenv("MHT3D_OUT_ROOT", wd.dir.c_str(), 1);
  REQUIRE(run("simulate --out rooted --scenes 1 --frames 16 --vehicles 1 --pedestrians 0 "
              "--cyclists 0 --seed 6") == 0);
  unsetenv("MHT3D_OUT_ROOT");
  CHECK(fs::exists(wd / "rooted/scene_6_000.jsonl"));
}
