#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "mht3d/io.hpp"
#include "mht3d/train.hpp"

using namespace mht;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempDir {
  std::filesystem::path dir;
  TempDir() {
    dir = std::filesystem::temp_directory_path() / "mht3d_io_test";
    std::filesystem::create_directories(dir);
  }
  std::string path(const std::string& name) const { return (dir / name).string(); }
};

}  // namespace

TEST_CASE("checkpoints round-trip bit-exactly") {
  TempDir tmp;
  ParamStore store;
  Rng rng(201);
  Mlp mlp(store, "net", MlpSpec{{7, 13, 5}}, rng);
  // exercise values with awkward bit patterns
  Tensor w = store.get("net.l0.w");
  w.data()[0] = 0.1 + 0.2;
  w.data()[1] = -0.0;
  w.data()[2] = 1e-300;

  const std::string path = tmp.path("a.ckpt");
  save_checkpoint(path, store.items());

  ParamStore copy;
  Rng rng2(999);  // different init, must be fully overwritten
  Mlp mlp2(copy, "net", MlpSpec{{7, 13, 5}}, rng2);
  load_checkpoint_into(path, copy);

  const auto a = store.items();
  const auto b = copy.items();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].first == b[i].first);
    REQUIRE(a[i].second.shape() == b[i].second.shape());
    const auto* pa = reinterpret_cast<const unsigned char*>(a[i].second.data());
    const auto* pb = reinterpret_cast<const unsigned char*>(b[i].second.data());
    CHECK(std::memcmp(pa, pb, a[i].second.numel() * sizeof(double)) == 0);
  }

  // saving the reloaded store reproduces the file byte for byte
  const std::string path2 = tmp.path("b.ckpt");
  save_checkpoint(path2, copy.items());
  CHECK(slurp(path) == slurp(path2));
}

TEST_CASE("checkpoint loader rejects shape mismatches and junk") {
  TempDir tmp;
  ParamStore store;
  Rng rng(202);
  Mlp mlp(store, "net", MlpSpec{{3, 4}}, rng);
  const std::string path = tmp.path("c.ckpt");
  save_checkpoint(path, store.items());

  ParamStore other;
  Rng rng2(203);
  Mlp mlp2(other, "net", MlpSpec{{3, 5}}, rng2);  // different widths
  CHECK_THROWS(load_checkpoint_into(path, other));

  const std::string junk = tmp.path("junk.ckpt");
  std::ofstream(junk) << "not a checkpoint";
  CHECK_THROWS(load_checkpoint_into(junk, store));
  CHECK_THROWS(load_checkpoint_into(tmp.path("missing.ckpt"), store));
}

TEST_CASE("params_hash detects any value change") {
  ParamStore store;
  Rng rng(204);
  Mlp mlp(store, "net", MlpSpec{{4, 4}}, rng);
  const std::uint64_t h0 = params_hash(store.items());
  Tensor w = store.get("net.l0.w");
  w.data()[5] += 1e-12;
  CHECK(params_hash(store.items()) != h0);
}

TEST_CASE("scene files round-trip through JSONL") {
  TempDir tmp;
  SceneSpec spec;
  spec.frames = 16;
  spec.counts = {2, 1, 0};
  spec.seed = 205;
  const Scene scene = make_scene(spec, DetectionNoise::centerpoint_like());

  const std::string path = tmp.path("scene.jsonl");
  write_scene_jsonl(path, scene);
  const Scene loaded = read_scene_jsonl(path);

  CHECK(loaded.spec.seed == spec.seed);
  CHECK(loaded.frames() == scene.frames());
  for (int f = 0; f < scene.frames(); ++f) {
    REQUIRE(loaded.gt[static_cast<std::size_t>(f)].size() ==
            scene.gt[static_cast<std::size_t>(f)].size());
    for (std::size_t i = 0; i < scene.gt[static_cast<std::size_t>(f)].size(); ++i) {
      const GtBox& a = scene.gt[static_cast<std::size_t>(f)][i];
      const GtBox& b = loaded.gt[static_cast<std::size_t>(f)][i];
      CHECK(a.object_id == b.object_id);
      CHECK(a.cls == b.cls);
      CHECK(a.box.x == b.box.x);  // shortest round-trip repr is exact
      CHECK(a.box.heading == b.box.heading);
      CHECK(a.n_points == b.n_points);
    }
    REQUIRE(loaded.detections[static_cast<std::size_t>(f)].size() ==
            scene.detections[static_cast<std::size_t>(f)].size());
    REQUIRE(loaded.clouds[static_cast<std::size_t>(f)].pts.size() ==
            scene.clouds[static_cast<std::size_t>(f)].pts.size());
    for (std::size_t i = 0; i < scene.clouds[static_cast<std::size_t>(f)].pts.size(); ++i)
      CHECK(scene.clouds[static_cast<std::size_t>(f)].pts[i].x ==
            loaded.clouds[static_cast<std::size_t>(f)].pts[i].x);
  }

  // rewriting the loaded scene reproduces the file byte for byte
  const std::string path2 = tmp.path("scene2.jsonl");
  write_scene_jsonl(path2, loaded);
  CHECK(slurp(path) == slurp(path2));
}

TEST_CASE("track outputs round-trip through JSONL") {
  TempDir tmp;
  TrackOutput out;
  out.frames.resize(3);
  for (int f = 0; f < 3; ++f) out.frames[static_cast<std::size_t>(f)].t = f;

  TrackRecord rec;
  rec.id = 12;
  rec.cls = ObjectClass::kPedestrian;
  rec.box = make_box(1.5, -2.25, 0.9, 0.9, 0.85, 1.75, 0.3, 1, 0.77);
  rec.score = 0.77;
  rec.provenance = Provenance::kPredicted;
  rec.pred_lag = 2;
  out.frames[0].new_born.push_back(rec);
  out.frames[1].surviving.push_back(rec);
  out.frames[2].killed.push_back(12);

  const std::string path = tmp.path("tracks.jsonl");
  write_tracks_jsonl(path, out);
  const TrackOutput loaded = read_tracks_jsonl(path);

  REQUIRE(loaded.frames.size() == 3);
  REQUIRE(loaded.frames[0].new_born.size() == 1);
  CHECK(loaded.frames[0].new_born[0].id == 12);
  CHECK(loaded.frames[0].new_born[0].cls == ObjectClass::kPedestrian);
  CHECK(loaded.frames[0].new_born[0].box.x == rec.box.x);
  CHECK(loaded.frames[0].new_born[0].provenance == Provenance::kPredicted);
  CHECK(loaded.frames[0].new_born[0].pred_lag == 2);
  REQUIRE(loaded.frames[1].surviving.size() == 1);
  REQUIRE(loaded.frames[2].killed.size() == 1);

  const std::string path2 = tmp.path("tracks2.jsonl");
  write_tracks_jsonl(path2, loaded);
  CHECK(slurp(path) == slurp(path2));
}

TEST_CASE("eval report serializes per-class and aggregate tallies") {
  TempDir tmp;
  std::map<ObjectClass, MotTally> per_class;
  MotTally t;
  t.gt = 6;
  t.miss = 1;
  t.ids = 1;
  per_class[ObjectClass::kVehicle] = t;
  const std::string path = tmp.path("report.json");
  write_eval_report(path, per_class, EvalConfig{}, "fixture");

  const std::string text = slurp(path);
  CHECK(text.find("\"label\": \"fixture\"") != std::string::npos);
  CHECK(text.find("\"vehicle\"") != std::string::npos);
  CHECK(text.find("\"mota\"") != std::string::npos);
}

TEST_CASE("model checkpoint split by prefix restores subsystems independently") {
  TempDir tmp;
  ModelConfig mc;
  mc.motion.d = 16;
  mc.motion.t_h = 4;
  mc.motion.t_f = 2;
  mc.motion.enc_hidden = {16};
  mc.motion.head_hidden = {16};
  mc.tracknet.encoder.d = 8;
  mc.tracknet.encoder.y_points = 4;
  mc.tracknet.encoder.heads = 2;
  mc.tracknet.encoder.blocks = 1;
  mc.tracknet.encoder.motion_hidden = {8};
  mc.tracknet.encoder.point_in_hidden = {8};
  mc.tracknet.encoder.fuse_hidden = {8};
  mc.tracknet.interaction.d = 8;
  mc.tracknet.interaction.heads = 2;
  mc.tracknet.interaction.rounds = 1;

  Model a(mc);
  const std::string path = tmp.path("model.ckpt");
  save_checkpoint(path, a.store.items());

  ModelConfig mc2 = mc;
  mc2.init_seed = 777;
  Model b(mc2);
  CHECK(params_hash(b.store.items()) != params_hash(a.store.items()));
  load_checkpoint_into(path, b.store);
  CHECK(params_hash(b.store.items()) == params_hash(a.store.items()));
  CHECK(params_hash(b.motion_params()) == params_hash(a.motion_params()));
  CHECK(params_hash(b.tracknet_params()) == params_hash(a.tracknet_params()));
}
