// Acceptance suite: runs every acceptance criterion end to end and prints one
// pass/fail line per criterion. Exit code 0 iff all criteria hold.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "helpers.hpp"
#include "mht3d/eval.hpp"
#include "mht3d/gradsuite.hpp"
#include "mht3d/io.hpp"
#include "mht3d/tracker.hpp"
#include "mht3d/train.hpp"

namespace fs = std::filesystem;
using namespace mht;
using mht::testing::OracleScorer;
using mht::testing::dyadic;

namespace {

constexpr double kPi = 3.14159265358979323846;

int g_failures = 0;

void report(int criterion, const std::string& name, bool ok, const std::string& detail) {
  std::printf("[%s] criterion %d: %-22s %s\n", ok ? "PASS" : "FAIL", criterion, name.c_str(),
              detail.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

double elapsed_s(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, int prec = 4) {
  std::ostringstream ss;
  ss << std::setprecision(prec) << v;
  return ss.str();
}

// ---- shared scene / model builders ------------------------------------------------

DetectionNoise benchmark_noise() {
  DetectionNoise n;
  n.drop_prob = {0.2, 0.2, 0.2};
  n.sigma_center = 0.1;
  n.sigma_heading = 0.03;
  n.sigma_size_rel = 0.02;
  n.fp_rate = 0.5;
  n.score_alpha_true = 14.0;
  n.score_beta_true = 2.0;
  return n;
}

PointSimConfig point_config() {
  PointSimConfig p;
  p.base_points = {48, 20, 24};
  p.clutter_per_frame = 20.0;
  return p;
}

std::vector<Scene> build_scenes(int count, std::uint64_t seed0, int frames,
                                const std::array<int, 3>& counts, const DetectionNoise& noise) {
  std::vector<Scene> scenes;
  for (int i = 0; i < count; ++i) {
    SceneSpec spec;
    spec.frames = frames;
    spec.counts = counts;
    spec.seed = seed0 + static_cast<std::uint64_t>(i);
    scenes.push_back(make_scene(spec, noise, point_config()));
  }
  return scenes;
}

ModelConfig acceptance_model_config(InteractionMode mode) {
  ModelConfig mc;
  mc.init_seed = 42;
  mc.motion.t_h = 10;
  mc.motion.t_f = 5;
  mc.motion.d = 32;
  mc.motion.enc_hidden = {32};
  mc.motion.head_hidden = {32};
  EncoderConfig& e = mc.tracknet.encoder;
  e.d = 32;
  e.y_points = 16;
  e.heads = 4;
  e.blocks = 2;
  e.point_frames = 3;
  e.t_h = 10;
  e.motion_hidden = {32};
  e.point_in_hidden = {32};
  e.fuse_hidden = {64};
  InteractionConfig& i = mc.tracknet.interaction;
  i.d = 32;
  i.heads = 4;
  i.rounds = 2;
  i.mode = mode;
  return mc;
}

TrackerConfig acceptance_tracker_config() {
  TrackerConfig tc;
  tc.point_frames = 3;
  return tc;
}

MotTally run_and_tally(const Scene& scene, const TrackerConfig& cfg,
                       const MotionPredictor& motion, HypothesisScorer& scorer,
                       const EvalConfig& ec) {
  const TrackOutput out = run_tracker(scene, cfg, motion, scorer);
  MotTally total;
  for (const auto& [cls, tally] : evaluate_scene(scene, out, ec)) total += tally;
  return total;
}

// ---- criterion 1 -------------------------------------------------------------------

void criterion_1() {
  const GradSuiteReport r = run_gradient_suite(1e-5, 1e-4);
  double worst = 0.0;
  for (const GradSuiteEntry& e : r.entries) worst = std::max(worst, e.max_rel_err);
  const bool ok = r.all_ok && r.seconds < 60.0;
  report(1, "gradient-suite",
         ok, std::to_string(r.entries.size()) + " blocks, max rel err " + fmt(worst, 3) +
                 ", " + fmt(r.seconds, 3) + " s (< 60 s)");
}

// ---- criterion 2 -------------------------------------------------------------------

bool maxpool_permutation_exact() {
  Rng rng(8101);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + rng.uniform_int(10);
    const int d = 1 + rng.uniform_int(12);
    Tensor x = Tensor::zeros({n, d});
    for (std::size_t i = 0; i < x.numel(); ++i) x.data()[i] = rng.uniform(-5, 5);
    std::vector<int> perm(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
    for (int i = n - 1; i > 0; --i) std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(rng.uniform_int(i + 1))]);
    Tensor xp = Tensor::zeros({n, d});
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j)
        xp.data()[static_cast<std::size_t>(i) * d + j] =
            x.data()[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)]) * d + j];
    const Tensor a = max_pool_rows(x);
    const Tensor b = max_pool_rows(xp);
    for (int j = 0; j < d; ++j)
      if (a.at(j) != b.at(j)) return false;
  }
  return true;
}

bool attention_equivariance_exact() {
  ParamStore store;
  Rng rng(8102);
  AttentionBlock block(store, "a", 16, 4, rng);
  Rng data_rng(8103);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 2 + data_rng.uniform_int(8);
    Tensor x = Tensor::zeros({n, 16});
    for (std::size_t i = 0; i < x.numel(); ++i) x.data()[i] = data_rng.uniform(-2, 2);
    std::vector<int> perm(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
    for (int i = n - 1; i > 0; --i)
      std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(data_rng.uniform_int(i + 1))]);
    Tensor xp = Tensor::zeros({n, 16});
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < 16; ++j)
        xp.data()[static_cast<std::size_t>(i) * 16 + j] =
            x.data()[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)]) * 16 + j];
    const Tensor y = block.forward(x, x);
    const Tensor yp = block.forward(xp, xp);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < 16; ++j)
        if (yp.at(i, j) != y.at(perm[static_cast<std::size_t>(i)], j)) return false;
  }
  return true;
}

bool embeddings_translation_exact() {
  EncoderConfig cfg;
  cfg.d = 16;
  cfg.y_points = 8;
  cfg.heads = 2;
  cfg.blocks = 2;
  cfg.point_frames = 2;
  cfg.t_h = 6;
  cfg.motion_hidden = {16};
  cfg.point_in_hidden = {16};
  cfg.fuse_hidden = {16};
  ParamStore store;
  Rng rng(8104);
  HypothesisEncoder enc(store, "enc", cfg, rng);
  Rng coords(8105);

  for (int trial = 0; trial < 10; ++trial) {
    const BoxState cand = make_box(dyadic(coords, -20, 20), dyadic(coords, -20, 20), 0.875, 4.5,
                                   2.0, 1.75, coords.uniform(-kPi, kPi), 10, 0.9);
    Hypothesis h;
    h.track_id = 1;
    h.cls = ObjectClass::kVehicle;
    h.provenance = Provenance::kDetected;
    h.candidate = cand;
    h.seq.assign(6, BoxState{});
    for (int k = 0; k < 4; ++k) {
      BoxState b = cand;
      b.x -= 0.25 * (4 - k);
      b.timestamp = 10 - (4 - k);
      h.seq[static_cast<std::size_t>(2 + k)] = b;
    }
    h.seq.push_back(cand);

    PointCloud cloud;
    for (int i = 0; i < 24; ++i)
      cloud.pts.push_back({cand.x + dyadic(coords, -1.5, 1.5), cand.y + dyadic(coords, -0.75, 0.75),
                           cand.z + dyadic(coords, -0.5, 0.5)});

    const double tx = dyadic(coords, -25, 25), ty = dyadic(coords, -25, 25);
    Hypothesis moved = h;
    moved.candidate.x += tx;
    moved.candidate.y += ty;
    for (BoxState& b : moved.seq)
      if (!b.is_sentinel()) {
        b.x += tx;
        b.y += ty;
      }
    PointCloud moved_cloud = cloud;
    for (Vec3& p : moved_cloud.pts) {
      p.x += tx;
      p.y += ty;
    }

    PointContext ctx;
    ctx.t = 10;
    ctx.clouds = {&cloud};
    ctx.sample_seed = 17;
    PointContext mctx = ctx;
    mctx.clouds = {&moved_cloud};

    const std::vector<Hypothesis> hyp_a{h};
    const std::vector<Hypothesis> hyp_b{moved};
    const Tensor em_a = enc.encode_motion(hyp_a);
    const Tensor em_b = enc.encode_motion(hyp_b);
    for (std::size_t i = 0; i < em_a.numel(); ++i)
      if (em_a.data()[i] != em_b.data()[i]) return false;

    std::vector<Tensor> fa{enc.appearance_features(h, 0, ctx)};
    std::vector<Tensor> fb{enc.appearance_features(moved, 0, mctx)};
    const Tensor ea_a = enc.encode_appearance(fa);
    const Tensor ea_b = enc.encode_appearance(fb);
    for (std::size_t i = 0; i < ea_a.numel(); ++i)
      if (ea_a.data()[i] != ea_b.data()[i]) return false;
  }
  return true;
}

bool mota_relabel_invariant() {
  Rng rng(8106);
  std::vector<std::vector<GtBox>> gt(8);
  std::vector<std::vector<TrackRecord>> tracks(8);
  for (int f = 0; f < 8; ++f)
    for (int o = 0; o < 4; ++o) {
      GtBox g;
      g.object_id = o;
      g.cls = ObjectClass::kVehicle;
      g.box = make_box(2.0 * f + rng.uniform(-0.2, 0.2), 8.0 * o, 0.9, 4.6, 2, 1.7, 0, f, 1);
      gt[static_cast<std::size_t>(f)].push_back(g);
      if (rng.uniform() < 0.8) {
        TrackRecord r;
        r.id = 10 + o + (rng.uniform() < 0.1 ? 100 : 0);  // occasional switches
        r.cls = ObjectClass::kVehicle;
        r.box = g.box;
        tracks[static_cast<std::size_t>(f)].push_back(r);
      }
    }
  const MotTally base = compute_mota(gt, tracks, ObjectClass::kVehicle, EvalConfig{});
  std::vector<std::vector<TrackRecord>> relabeled = tracks;
  for (auto& frame : relabeled)
    for (TrackRecord& r : frame) r.id = 12345 - 3 * r.id;
  const MotTally perm = compute_mota(gt, relabeled, ObjectClass::kVehicle, EvalConfig{});
  return base.gt == perm.gt && base.fp == perm.fp && base.miss == perm.miss &&
         base.ids == perm.ids;
}

void criterion_2() {
  const bool a = maxpool_permutation_exact();
  const bool b = attention_equivariance_exact();
  const bool c = embeddings_translation_exact();
  const bool d = mota_relabel_invariant();
  report(2, "symmetry-suite", a && b && c && d,
         std::string("max-pool perm ") + (a ? "exact" : "BROKEN") + ", attention equivariance " +
             (b ? "exact" : "BROKEN") + ", embedding translation " + (c ? "exact" : "BROKEN") +
             ", MOTA relabel " + (d ? "invariant" : "BROKEN"));
}

// ---- criterion 3 -------------------------------------------------------------------

bool greedy_matches_oracle(int trials, std::string& detail) {
  Rng rng(8201);
  for (int trial = 0; trial < trials; ++trial) {
    const int nt = rng.uniform_int(9);
    const int nd = rng.uniform_int(9);
    std::vector<BoxState> poses;
    std::vector<ObjectClass> classes;
    for (int i = 0; i < nt; ++i) {
      poses.push_back(make_box(rng.uniform(-6, 6), rng.uniform(-6, 6), 0.9, 4.6, 2, 1.7, 0, 0, 1));
      classes.push_back(static_cast<ObjectClass>(rng.uniform_int(3)));
    }
    std::vector<Detection> dets;
    for (int j = 0; j < nd; ++j) {
      Detection d;
      d.det_id = j;
      d.cls = static_cast<ObjectClass>(rng.uniform_int(3));
      d.box = make_box(rng.uniform(-6, 6), rng.uniform(-6, 6), 0.9, 4.6, 2, 1.7, 0, 0, 0.9);
      dets.push_back(d);
    }
    const std::array<double, 3> gates = {2.0, 0.5, 1.0};

    struct P {
      double d;
      int t, j;
    };
    std::vector<P> pairs;
    for (int t = 0; t < nt; ++t)
      for (int j = 0; j < nd; ++j) {
        if (dets[static_cast<std::size_t>(j)].cls != classes[static_cast<std::size_t>(t)]) continue;
        const double dist = bev_center_dist(poses[static_cast<std::size_t>(t)], dets[static_cast<std::size_t>(j)].box);
        if (dist <= gates[static_cast<std::size_t>(static_cast<int>(classes[static_cast<std::size_t>(t)]))])
          pairs.push_back({dist, t, j});
      }
    std::sort(pairs.begin(), pairs.end(), [](const P& a, const P& b) {
      if (a.d != b.d) return a.d < b.d;
      if (a.t != b.t) return a.t < b.t;
      return a.j < b.j;
    });
    std::vector<std::uint8_t> tu(static_cast<std::size_t>(nt), 0), du(static_cast<std::size_t>(nd), 0);
    std::vector<std::pair<int, int>> oracle;
    for (const P& p : pairs) {
      if (tu[static_cast<std::size_t>(p.t)] || du[static_cast<std::size_t>(p.j)]) continue;
      tu[static_cast<std::size_t>(p.t)] = 1;
      du[static_cast<std::size_t>(p.j)] = 1;
      oracle.emplace_back(p.t, p.j);
    }

    const auto got = greedy_match(poses, classes, dets, gates);
    if (got != oracle) {
      detail = "mismatch at instance " + std::to_string(trial);
      return false;
    }
  }
  detail = std::to_string(trials) + " instances exact";
  return true;
}

bool iou_matches_monte_carlo(double& max_err) {
  Rng rng(8202);
  Rng mc_rng(8203);
  max_err = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const BoxState a = make_box(rng.uniform(-3, 3), rng.uniform(-3, 3), 0, rng.uniform(1, 5),
                                rng.uniform(1, 3), 1.5, rng.uniform(-kPi, kPi));
    const BoxState b = make_box(rng.uniform(-3, 3), rng.uniform(-3, 3), 0, rng.uniform(1, 5),
                                rng.uniform(1, 3), 1.5, rng.uniform(-kPi, kPi));

    auto inside = [](double px, double py, const BoxState& box) {
      const double dx = px - box.x, dy = py - box.y;
      const double c = std::cos(box.heading), s = std::sin(box.heading);
      return std::fabs(c * dx + s * dy) <= 0.5 * box.length &&
             std::fabs(-s * dx + c * dy) <= 0.5 * box.width;
    };
    const double reach_a = 0.5 * std::hypot(a.length, a.width);
    const double reach_b = 0.5 * std::hypot(b.length, b.width);
    const double lo_x = std::min(a.x - reach_a, b.x - reach_b), hi_x = std::max(a.x + reach_a, b.x + reach_b);
    const double lo_y = std::min(a.y - reach_a, b.y - reach_b), hi_y = std::max(a.y + reach_a, b.y + reach_b);
    long both = 0, either = 0;
    for (int i = 0; i < 100000; ++i) {
      const double px = mc_rng.uniform(lo_x, hi_x), py = mc_rng.uniform(lo_y, hi_y);
      const bool ia = inside(px, py, a), ib = inside(px, py, b);
      if (ia && ib) ++both;
      if (ia || ib) ++either;
    }
    const double mc = either ? static_cast<double>(both) / static_cast<double>(either) : 0.0;
    max_err = std::max(max_err, std::fabs(bev_iou(a, b) - mc));
  }
  return max_err < 0.01;
}

bool mota_fixture_exact() {
  auto gt_at = [](int obj, double x, double y) {
    GtBox g;
    g.object_id = obj;
    g.cls = ObjectClass::kVehicle;
    g.box = make_box(x, y, 0.85, 4.6, 2.0, 1.7, 0.0, 0, 1.0);
    return g;
  };
  auto track_at = [](int id, double x, double y) {
    TrackRecord r;
    r.id = id;
    r.cls = ObjectClass::kVehicle;
    r.box = make_box(x, y, 0.85, 4.6, 2.0, 1.7, 0.0, 0, 0.9);
    return r;
  };
  std::vector<std::vector<GtBox>> gt(3);
  std::vector<std::vector<TrackRecord>> tracks(3);
  for (int f = 0; f < 3; ++f) gt[static_cast<std::size_t>(f)] = {gt_at(1, 1.0 * f, 0), gt_at(2, 1.0 * f, 10)};
  tracks[0] = {track_at(100, 0, 0), track_at(200, 0, 10)};
  tracks[1] = {track_at(100, 1, 0)};
  tracks[2] = {track_at(100, 2, 0), track_at(300, 2, 10)};
  const MotTally t = compute_mota(gt, tracks, ObjectClass::kVehicle, EvalConfig{});
  return t.gt == 6 && t.miss == 1 && t.ids == 1 && t.fp == 0 &&
         t.mota() == 1.0 - 2.0 / 6.0;
}

bool hypothesis_counts_exact() {
  Rng rng(8204);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = rng.uniform_int(6);
    const int t_f = 1 + rng.uniform_int(6);
    const int w = 1 + rng.uniform_int(3);
    std::vector<Trajectory> trajs;
    for (int i = 0; i < n; ++i) {
      Trajectory traj;
      traj.id = i + 1;
      traj.cls = static_cast<ObjectClass>(rng.uniform_int(3));
      for (int f = 0; f < 6; ++f)
        traj.boxes.push_back(make_box(3.0 * i, 0.4 * f, 0.9, 4.6, 2, 1.7, 0, f, 1));
      trajs.push_back(traj);
    }
    std::vector<Detection> dets;
    for (int j = 0; j < rng.uniform_int(7); ++j) {
      Detection d;
      d.det_id = j;
      d.cls = static_cast<ObjectClass>(rng.uniform_int(3));
      d.box = make_box(rng.uniform(-10, 10), rng.uniform(-10, 10), 0.9, 4.6, 2, 1.7, 0, 6, 0.9);
      dets.push_back(d);
    }
    HypothesisGenConfig cfg;
    cfg.t_f = t_f;
    cfg.w = w;
    const auto hyps = build_hypotheses(trajs, dets, 6, cfg);
    if (hyps.size() != static_cast<std::size_t>(n) * static_cast<std::size_t>(t_f + w))
      return false;
  }
  return true;
}

void criterion_3() {
  std::string greedy_detail;
  const bool a = greedy_matches_oracle(1000, greedy_detail);
  double iou_err = 0.0;
  const bool b = iou_matches_monte_carlo(iou_err);
  const bool c = mota_fixture_exact();
  const bool d = hypothesis_counts_exact();
  report(3, "oracle-suite", a && b && c && d,
         "greedy " + greedy_detail + "; iou-vs-MC max err " + fmt(iou_err, 3) +
             " (< 0.01); MOTA fixture " + (c ? "exact 0.667" : "WRONG") + "; counts " +
             (d ? "exact" : "WRONG"));
}

// ---- criteria 4-8 ------------------------------------------------------------------

struct TrainedArms {
  Model full{acceptance_model_config(InteractionMode::kGlobalLocal)};
  Model none{acceptance_model_config(InteractionMode::kNone)};
};

void criterion_4(const Model& trained) {
  // (a) perfect-scoring oracle on noiseless scenes: MOTA exactly 1
  const std::vector<Scene> oracle_scenes =
      build_scenes(20, 9100, 26, {4, 2, 1}, DetectionNoise::noiseless());
  MotTally oracle_total;
  for (const Scene& scene : oracle_scenes) {
    OracleScorer scorer(scene, 2.0);
    oracle_total += run_and_tally(scene, acceptance_tracker_config(), trained.motion, scorer,
                                  EvalConfig{});
  }
  const bool exact = oracle_total.fp == 0 && oracle_total.miss == 0 && oracle_total.ids == 0 &&
                     oracle_total.gt > 0;

  // (b) trained network on fresh noiseless scenes
  const std::vector<Scene> eval_scenes =
      build_scenes(20, 9300, 26, {4, 2, 1}, DetectionNoise::noiseless());
  NetworkScorer scorer(trained.tracknet);
  MotTally net_total;
  for (const Scene& scene : eval_scenes)
    net_total += run_and_tally(scene, acceptance_tracker_config(), trained.motion, scorer,
                               EvalConfig{});
  const bool net_ok = net_total.mota() >= 0.95;

  report(4, "closed-loop-sanity", exact && net_ok,
         "oracle MOTA " + std::string(exact ? "exactly 1.0" : fmt(oracle_total.mota(), 4)) +
             " on " + std::to_string(oracle_total.gt) + " GT; trained net MOTA " +
             fmt(net_total.mota(), 4) + " (>= 0.95)");
}

struct ArmTally {
  MotTally full, nopred, none;
};

std::vector<ArmTally> run_benchmark(const TrainedArms& arms) {
  std::vector<ArmTally> per_seed;
  for (std::uint64_t seed : {9501ull, 9601ull, 9701ull}) {
    const std::vector<Scene> scenes = build_scenes(50, seed, 26, {5, 1, 0}, benchmark_noise());
    ArmTally tally;
    for (const Scene& scene : scenes) {
      NetworkScorer full_scorer(arms.full.tracknet);
      tally.full += run_and_tally(scene, acceptance_tracker_config(), arms.full.motion,
                                  full_scorer, EvalConfig{});

      TrackerConfig nopred_cfg = acceptance_tracker_config();
      nopred_cfg.use_predicted_boxes = false;
      NetworkScorer nopred_scorer(arms.full.tracknet);
      tally.nopred += run_and_tally(scene, nopred_cfg, arms.full.motion, nopred_scorer,
                                    EvalConfig{});

      NetworkScorer none_scorer(arms.none.tracknet);
      tally.none += run_and_tally(scene, acceptance_tracker_config(), arms.none.motion,
                                  none_scorer, EvalConfig{});
    }
    per_seed.push_back(tally);
  }
  return per_seed;
}

void criterion_5(const std::vector<ArmTally>& per_seed) {
  bool ok = true;
  std::string detail;
  for (std::size_t s = 0; s < per_seed.size(); ++s) {
    const MotTally& f = per_seed[s].full;
    const MotTally& n = per_seed[s].nopred;
    const bool seed_ok = f.miss_rate() < n.miss_rate() && f.mota() > n.mota();
    ok = ok && seed_ok;
    detail += "seed" + std::to_string(s) + " miss " + fmt(f.miss_rate(), 3) + "<" +
              fmt(n.miss_rate(), 3) + " mota " + fmt(f.mota(), 3) + ">" + fmt(n.mota(), 3) +
              (s + 1 < per_seed.size() ? "; " : "");
  }
  report(5, "miss-recovery", ok, detail);
}

void criterion_6(const std::vector<ArmTally>& per_seed) {
  bool ok = true;
  std::string detail;
  for (std::size_t s = 0; s < per_seed.size(); ++s) {
    const MotTally& f = per_seed[s].full;
    const MotTally& n = per_seed[s].none;
    ok = ok && f.mota() >= n.mota();
    detail += "seed" + std::to_string(s) + " global-local " + fmt(f.mota(), 3) + " >= none " +
              fmt(n.mota(), 3) + (s + 1 < per_seed.size() ? "; " : "");
  }
  report(6, "interaction-direction", ok, detail);
}

void criterion_7() {
  const std::vector<Scene> scenes = build_scenes(10, 9800, 16, {3, 0, 0}, benchmark_noise());
  Model model(acceptance_model_config(InteractionMode::kGlobalLocal));
  Stage1Config s1;
  s1.epochs = 30;
  train_motion_stage1(model, {scenes.data(), scenes.size()}, s1);

  Stage2Config s2;
  s2.epochs = 200;
  s2.batch = 4;
  const Stage2Result r = train_tracknet_stage2(model, {scenes.data(), scenes.size()}, s2);
  const double ratio = r.epoch_loss.front() / std::max(r.epoch_loss.back(), 1e-12);

  const std::vector<HypoSample> samples =
      build_stage2_samples(model, {scenes.data(), scenes.size()}, s2);
  const double auc = stage2_score_auc(model, {samples.data(), samples.size()});

  report(7, "training-sanity", ratio >= 10.0 && auc > 0.9,
         "overfit loss " + fmt(r.epoch_loss.front(), 4) + " -> " + fmt(r.epoch_loss.back(), 4) +
             " (x" + fmt(ratio, 3) + " >= 10), AUC " + fmt(auc, 4) + " (> 0.9)");
}

void criterion_8() {
  SceneSpec spec;
  spec.frames = 26;
  spec.counts = {4, 0, 0};
  spec.p_const_velocity = 1.0;
  spec.p_const_turn = 0.0;
  spec.p_stop_go = 0.0;
  std::vector<Scene> scenes;
  for (std::uint64_t s = 0; s < 6; ++s) {
    spec.seed = 9900 + s;
    scenes.push_back(generate_scene(spec));
  }
  Model model(acceptance_model_config(InteractionMode::kGlobalLocal));
  Stage1Config s1;
  s1.epochs = 60;
  train_motion_stage1(model, {scenes.data(), scenes.size()}, s1);

  // evaluate on held-out constant-velocity scenes
  std::vector<Scene> eval_scenes;
  for (std::uint64_t s = 0; s < 3; ++s) {
    spec.seed = 9950 + s;
    eval_scenes.push_back(generate_scene(spec));
  }
  const double err = motion_center_error(model, {eval_scenes.data(), eval_scenes.size()});
  report(8, "motion-predictor", err < 0.25,
         "mean center error over the 5-frame horizon " + fmt(err, 4) + " m (< 0.25)");
}

// ---- criterion 9 --------------------------------------------------------------------

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void criterion_9() {
  const std::string bin = MHT3D_BIN_PATH;
  const fs::path dir = fs::temp_directory_path() / "mht3d_acceptance_det";
  fs::remove_all(dir);
  fs::create_directories(dir);
  auto sh = [&](const std::string& args) {
    return std::system((bin + " " + args + " > /dev/null 2>&1").c_str());
  };
  auto p = [&](const std::string& name) { return (dir / name).string(); };

  bool ok = true;
  std::string detail;

  const std::string sim_args =
      " --scenes 2 --frames 18 --vehicles 3 --pedestrians 1 --cyclists 0 --seed 77";
  ok = ok && sh("simulate --out " + p("sa") + sim_args) == 0;
  ok = ok && sh("simulate --out " + p("sb") + sim_args) == 0;
  const bool sim_same = slurp(p("sa") + "/scene_77_000.jsonl") ==
                        slurp(p("sb") + "/scene_77_000.jsonl");
  detail += std::string("simulate ") + (sim_same ? "byte-identical" : "DIFFERS");

  const std::string train_args = " --scenes " + p("sa") +
                                 " --epochs1 6 --epochs2 2 --batch2 4 --d 16 --y-points 6 "
                                 "--heads 2 --blocks 1 --rounds 1 --point-frames 3";
  ok = ok && sh("train --out " + p("ra") + train_args) == 0;
  ok = ok && sh("train --out " + p("rb") + train_args) == 0;
  const bool train_same = slurp(p("ra") + "/model.ckpt") == slurp(p("rb") + "/model.ckpt");
  detail += std::string(", train ") + (train_same ? "byte-identical" : "DIFFERS");

  ok = ok && sh("track --scenes " + p("sa") + " --checkpoint " + p("ra") + "/model.ckpt --out " +
                p("ta")) == 0;
  ok = ok && sh("track --scenes " + p("sa") + " --checkpoint " + p("ra") + "/model.ckpt --out " +
                p("tb")) == 0;
  const bool track_same = slurp(p("ta") + "/tracks_scene_77_000.jsonl") ==
                          slurp(p("tb") + "/tracks_scene_77_000.jsonl");
  detail += std::string(", track ") + (track_same ? "byte-identical" : "DIFFERS");

  ok = ok && sh("eval --scenes " + p("sa") + " --tracks " + p("ta") + " --out " + p("ea.json")) == 0;
  ok = ok && sh("eval --scenes " + p("sa") + " --tracks " + p("ta") + " --out " + p("eb.json")) == 0;
  const bool eval_same = slurp(p("ea.json")) == slurp(p("eb.json"));
  detail += std::string(", eval ") + (eval_same ? "byte-identical" : "DIFFERS");

  report(9, "determinism", ok && sim_same && train_same && track_same && eval_same, detail);
}

}  // namespace

int main() {
  const auto t0 = std::chrono::steady_clock::now();
  std::printf("acceptance suite\n");

  criterion_1();
  criterion_2();
  criterion_3();

  // shared training for criteria 4-6: stage 1 + two stage-2 arms
  const auto t_train = std::chrono::steady_clock::now();
  const std::vector<Scene> train_scenes = build_scenes(16, 9000, 26, {5, 1, 0}, benchmark_noise());
  TrainedArms arms;
  {
    Stage1Config s1;
    s1.epochs = 40;
    train_motion_stage1(arms.full, {train_scenes.data(), train_scenes.size()}, s1);
    train_motion_stage1(arms.none, {train_scenes.data(), train_scenes.size()}, s1);
    Stage2Config s2;
    s2.epochs = 12;
    s2.batch = 4;
    train_tracknet_stage2(arms.full, {train_scenes.data(), train_scenes.size()}, s2);
    train_tracknet_stage2(arms.none, {train_scenes.data(), train_scenes.size()}, s2);
  }
  std::printf("       (shared training for criteria 4-6: %.1f s)\n", elapsed_s(t_train));

  criterion_4(arms.full);
  const auto t_bench = std::chrono::steady_clock::now();
  const std::vector<ArmTally> per_seed = run_benchmark(arms);
  std::printf("       (benchmark tracking for criteria 5-6: %.1f s)\n", elapsed_s(t_bench));
  criterion_5(per_seed);
  criterion_6(per_seed);
  criterion_7();
  criterion_8();
  criterion_9();

  std::printf("%d criterion(s) failed; total %.1f s\n", g_failures, elapsed_s(t0));
  return g_failures == 0 ? 0 : 1;
}
