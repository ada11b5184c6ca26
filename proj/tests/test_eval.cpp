#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "mht3d/eval.hpp"

using namespace mht;

namespace {

GtBox gt_at(int obj, double x, double y, ObjectClass cls = ObjectClass::kVehicle) {
  GtBox g;
  g.object_id = obj;
  g.cls = cls;
  g.box = make_box(x, y, 0.85, 4.6, 2.0, 1.7, 0.0, 0, 1.0);
  return g;
}

TrackRecord track_at(int id, double x, double y, ObjectClass cls = ObjectClass::kVehicle) {
  TrackRecord r;
  r.id = id;
  r.cls = cls;
  r.box = make_box(x, y, 0.85, 4.6, 2.0, 1.7, 0.0, 0, 0.9);
  r.score = 0.9;
  r.provenance = Provenance::kDetected;
  return r;
}

}  // namespace

TEST_CASE("match_frame pairs identical sets with no leftovers") {
  const std::vector<GtBox> gt = {gt_at(1, 0, 0), gt_at(2, 10, 0)};
  const std::vector<TrackRecord> tracks = {track_at(7, 0, 0), track_at(8, 10, 0)};
  const FrameMatch m = match_frame(gt, tracks, {}, EvalConfig{});
  CHECK(m.matches.size() == 2);
  CHECK(m.unmatched_gt.empty());
  CHECK(m.unmatched_tracks.empty());
}

TEST_CASE("match_frame counts a lone GT as a miss") {
  const std::vector<GtBox> gt = {gt_at(1, 0, 0)};
  const FrameMatch m = match_frame(gt, {}, {}, EvalConfig{});
  CHECK(m.matches.empty());
  REQUIRE(m.unmatched_gt.size() == 1);
}

TEST_CASE("continuation preference prevents a spurious switch in a crossing") {
  // two GT objects approach until both tracks are equidistant to both
  EvalConfig cfg;
  std::map<int, int> prev = {{1, 100}, {2, 200}};
  const std::vector<GtBox> gt = {gt_at(1, 0, 0.5), gt_at(2, 0, -0.5)};
  // both tracks sit exactly between the two GT boxes in x, ties in distance
  const std::vector<TrackRecord> tracks = {track_at(100, 0, 0.5), track_at(200, 0, -0.5)};
  const FrameMatch m = match_frame(gt, tracks, prev, cfg);
  REQUIRE(m.matches.size() == 2);
  // continuation keeps 1->100 and 2->200 even though a distance-greedy pass
  // could pair them either way on symmetric geometry
  for (const auto& [gi, ti] : m.matches) {
    if (gt[static_cast<std::size_t>(gi)].object_id == 1)
      CHECK(tracks[static_cast<std::size_t>(ti)].id == 100);
    else
      CHECK(tracks[static_cast<std::size_t>(ti)].id == 200);
  }
}

TEST_CASE("hand-traced fixture: one miss and one identity switch give MOTA 2/3") {
  // 3 frames, 2 GT objects; frame 1 loses object 2's track; at frame 2 object
  // 2 reappears under a new id -> GT=6, Miss=1, IDS=1, FP=0
  std::vector<std::vector<GtBox>> gt(3);
  std::vector<std::vector<TrackRecord>> tracks(3);
  for (int f = 0; f < 3; ++f)
    gt[static_cast<std::size_t>(f)] = {gt_at(1, 1.0 * f, 0), gt_at(2, 1.0 * f, 10)};

  tracks[0] = {track_at(100, 0, 0), track_at(200, 0, 10)};
  tracks[1] = {track_at(100, 1, 0)};                        // object 2 missed
  tracks[2] = {track_at(100, 2, 0), track_at(300, 2, 10)};  // object 2 under a new id

  const MotTally tally = compute_mota(gt, tracks, ObjectClass::kVehicle, EvalConfig{});
  CHECK(tally.gt == 6);
  CHECK(tally.miss == 1);
  CHECK(tally.ids == 1);
  CHECK(tally.fp == 0);
  CHECK(tally.mota() == doctest::Approx(1.0 - 2.0 / 6.0).epsilon(1e-12));
}

TEST_CASE("perfect tracks give MOTA exactly 1") {
  std::vector<std::vector<GtBox>> gt(4);
  std::vector<std::vector<TrackRecord>> tracks(4);
  for (int f = 0; f < 4; ++f) {
    gt[static_cast<std::size_t>(f)] = {gt_at(1, 1.0 * f, 0), gt_at(2, 1.0 * f, 8)};
    tracks[static_cast<std::size_t>(f)] = {track_at(10, 1.0 * f, 0), track_at(20, 1.0 * f, 8)};
  }
  const MotTally tally = compute_mota(gt, tracks, ObjectClass::kVehicle, EvalConfig{});
  CHECK(tally.mota() == 1.0);
  CHECK(tally.fp == 0);
  CHECK(tally.miss == 0);
  CHECK(tally.ids == 0);
}

TEST_CASE("MOTA is invariant under consistent track relabeling") {
  Rng rng(101);
  std::vector<std::vector<GtBox>> gt(6);
  std::vector<std::vector<TrackRecord>> tracks(6);
  for (int f = 0; f < 6; ++f) {
    for (int o = 0; o < 3; ++o) {
      gt[static_cast<std::size_t>(f)].push_back(gt_at(o, 2.0 * f + rng.uniform(-0.2, 0.2), 7.0 * o));
      if (rng.uniform() < 0.85)
        tracks[static_cast<std::size_t>(f)].push_back(
            track_at(50 + o, 2.0 * f + rng.uniform(-0.2, 0.2), 7.0 * o));
    }
    if (rng.uniform() < 0.3)
      tracks[static_cast<std::size_t>(f)].push_back(track_at(99, 60, 60));  // stray FP
  }

  const MotTally base = compute_mota(gt, tracks, ObjectClass::kVehicle, EvalConfig{});

  // permute ids consistently across all frames: id -> id * 7 + 3
  std::vector<std::vector<TrackRecord>> relabeled = tracks;
  for (auto& frame : relabeled)
    for (TrackRecord& r : frame) r.id = r.id * 7 + 3;
  const MotTally perm = compute_mota(gt, relabeled, ObjectClass::kVehicle, EvalConfig{});

  CHECK(base.gt == perm.gt);
  CHECK(base.fp == perm.fp);
  CHECK(base.miss == perm.miss);
  CHECK(base.ids == perm.ids);
  CHECK(base.mota() == perm.mota());
}

TEST_CASE("per-frame accounting identity holds") {
  Rng rng(102);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<GtBox> gt;
    std::vector<TrackRecord> tracks;
    const int ng = rng.uniform_int(6);
    const int nt = rng.uniform_int(6);
    for (int i = 0; i < ng; ++i) gt.push_back(gt_at(i, rng.uniform(-20, 20), rng.uniform(-20, 20)));
    for (int i = 0; i < nt; ++i)
      tracks.push_back(track_at(100 + i, rng.uniform(-20, 20), rng.uniform(-20, 20)));

    const FrameMatch m = match_frame(gt, tracks, {}, EvalConfig{});
    CHECK(m.matches.size() + m.unmatched_gt.size() == gt.size());
    CHECK(m.matches.size() + m.unmatched_tracks.size() == tracks.size());
  }
}

TEST_CASE("IoU-gated matching is available behind the flag") {
  EvalConfig cfg;
  cfg.use_iou_gate = true;
  cfg.iou_gate = 0.5;
  const std::vector<GtBox> gt = {gt_at(1, 0, 0)};
  const std::vector<TrackRecord> near_hit = {track_at(5, 0.2, 0)};
  const std::vector<TrackRecord> near_miss = {track_at(5, 1.9, 0)};  // inside 2 m, IoU < 0.5
  CHECK(match_frame(gt, near_hit, {}, cfg).matches.size() == 1);
  CHECK(match_frame(gt, near_miss, {}, cfg).matches.empty());
}

TEST_CASE("minimum-point filter drops sparse GT when enabled") {
  EvalConfig cfg;
  cfg.min_points = 5;
  std::vector<std::vector<GtBox>> gt(1);
  GtBox sparse = gt_at(1, 0, 0);
  sparse.n_points = 2;
  GtBox dense = gt_at(2, 10, 0);
  dense.n_points = 50;
  gt[0] = {sparse, dense};
  std::vector<std::vector<TrackRecord>> tracks(1);
  tracks[0] = {track_at(7, 10, 0)};

  const MotTally tally = compute_mota(gt, tracks, ObjectClass::kVehicle, cfg);
  CHECK(tally.gt == 1);  // sparse GT excluded
  CHECK(tally.miss == 0);
}

TEST_CASE("evaluate_scene aggregates per class and checks alignment") {
  SceneSpec spec;
  spec.frames = 16;
  spec.counts = {1, 1, 0};
  spec.seed = 31;
  const Scene scene = make_scene(spec, DetectionNoise::noiseless());

  TrackOutput out;
  for (int f = 0; f < scene.frames(); ++f) {
    FrameResult r;
    r.t = f;
    for (const GtBox& g : scene.gt[static_cast<std::size_t>(f)]) {
      TrackRecord rec = track_at(1000 + g.object_id, g.box.x, g.box.y, g.cls);
      if (f == 0)
        r.new_born.push_back(rec);
      else
        r.surviving.push_back(rec);
    }
    out.frames.push_back(r);
  }
  const auto per_class = evaluate_scene(scene, out, EvalConfig{});
  CHECK(per_class.at(ObjectClass::kVehicle).mota() == 1.0);
  CHECK(per_class.at(ObjectClass::kPedestrian).mota() == 1.0);
  CHECK(per_class.at(ObjectClass::kCyclist).gt == 0);

  TrackOutput short_out = out;
  short_out.frames.pop_back();
  CHECK_THROWS(evaluate_scene(scene, short_out, EvalConfig{}));
}
