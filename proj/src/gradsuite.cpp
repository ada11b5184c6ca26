#include "mht3d/gradsuite.hpp"

#include <chrono>
#include <cmath>
#include <functional>

#include "mht3d/encoder.hpp"
#include "mht3d/interaction.hpp"
#include "mht3d/motion.hpp"
#include "mht3d/scorer.hpp"

namespace mht {

namespace {

Tensor probe_tensor(std::vector<int> shape, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (std::size_t i = 0; i < t.numel(); ++i) t.data()[i] = rng.uniform(-1.0, 1.0);
  return t;
}

// Weighted sum scaled small: keeps finite-difference cancellation noise on
// structurally-zero gradients (key biases, the zero-initialized query) below
// the 1e-8 relative-error floor.
Tensor probe_loss(const Tensor& out, const Tensor& probe) {
  return scale(sum_all(mul(out, probe)), 1e-3);
}

std::vector<BoxState> demo_history(Rng& rng, int frames, int last_t) {
  std::vector<BoxState> boxes;
  const double x0 = rng.uniform(-10, 10), y0 = rng.uniform(-10, 10);
  const double heading = rng.uniform(-3.1, 3.1);
  const double step = rng.uniform(0.2, 0.8);
  for (int i = 0; i < frames; ++i)
    boxes.push_back(make_box(x0 + step * i * std::cos(heading),
                             y0 + step * i * std::sin(heading), 0.9, 4.5, 2.0, 1.7, heading,
                             last_t - frames + 1 + i, 1.0));
  return boxes;
}

Hypothesis demo_hypothesis(int track_id, const std::vector<BoxState>& history, int t_h,
                           const BoxState& candidate) {
  Hypothesis h;
  h.track_id = track_id;
  h.cls = ObjectClass::kVehicle;
  h.provenance = Provenance::kDetected;
  h.candidate = candidate;
  h.seq.assign(static_cast<std::size_t>(t_h), BoxState{});
  const int take = std::min<int>(t_h, static_cast<int>(history.size()));
  for (int i = 0; i < take; ++i)
    h.seq[static_cast<std::size_t>(t_h - take + i)] =
        history[history.size() - static_cast<std::size_t>(take) + i];
  h.seq.push_back(candidate);
  return h;
}

struct ScoringFixture {
  ParamStore store;
  HypothesisEncoder encoder;
  InteractionStack interaction;
  ScoringHeads heads;
  std::vector<Hypothesis> hyps;
  PointCloud cloud;
  PointContext ctx;
  std::vector<double> labels;
  std::vector<double> residual_targets;
  std::vector<double> residual_weights;

  ScoringFixture() {
    EncoderConfig ecfg;
    ecfg.d = 8;
    ecfg.y_points = 4;
    ecfg.heads = 2;
    ecfg.blocks = 2;
    ecfg.point_frames = 2;
    ecfg.t_h = 4;
    ecfg.motion_hidden = {8};
    ecfg.point_in_hidden = {8};
    ecfg.fuse_hidden = {8};
    InteractionConfig icfg;
    icfg.d = 8;
    icfg.heads = 2;
    icfg.rounds = 2;

    Rng rng(4242);
    encoder = HypothesisEncoder(store, "enc", ecfg, rng);
    interaction = InteractionStack(store, "inter", icfg, rng);
    heads = ScoringHeads(store, "head", 8, rng);

    // two trajectories, two hypotheses each
    Rng scene_rng(11);
    const std::vector<BoxState> hist_a = demo_history(scene_rng, 4, 9);
    const std::vector<BoxState> hist_b = demo_history(scene_rng, 3, 9);
    BoxState cand_a1 = hist_a.back();
    cand_a1.x += 0.4;
    cand_a1.timestamp = 10;
    BoxState cand_a2 = cand_a1;
    cand_a2.y += 0.8;
    BoxState cand_b1 = hist_b.back();
    cand_b1.x -= 0.3;
    cand_b1.timestamp = 10;
    hyps = {demo_hypothesis(1, hist_a, 4, cand_a1), demo_hypothesis(1, hist_a, 4, cand_a2),
            demo_hypothesis(2, hist_b, 4, cand_b1), demo_hypothesis(2, hist_b, 4, BoxState{})};

    for (int i = 0; i < 60; ++i)
      cloud.pts.push_back({scene_rng.uniform(-12, 12), scene_rng.uniform(-12, 12),
                           scene_rng.uniform(0, 2)});
    for (const Hypothesis& h : hyps)
      if (!h.candidate.is_sentinel())
        for (int i = 0; i < 10; ++i)
          cloud.pts.push_back({h.candidate.x + scene_rng.uniform(-1.5, 1.5),
                               h.candidate.y + scene_rng.uniform(-0.8, 0.8),
                               h.candidate.z + scene_rng.uniform(-0.6, 0.6)});
    ctx.t = 10;
    ctx.clouds = {&cloud, &cloud};
    ctx.sample_seed = 77;

    labels = {1.0, 0.0, 1.0, 0.0};
    residual_targets.assign(hyps.size() * 7, 0.0);
    for (std::size_t i = 0; i < hyps.size(); ++i)
      residual_weights.push_back(labels[i] > 0.5 ? 1.0 : 0.0);
    for (int j = 0; j < 7; ++j) residual_targets[0 * 7 + j] = 0.05 * (j + 1);
  }
};

}  // namespace

GradSuiteReport run_gradient_suite(double eps, double tol) {
  const auto start = std::chrono::steady_clock::now();
  GradSuiteReport report;

  auto add_check = [&](const std::string& name,
                       const std::vector<std::pair<std::string, Tensor>>& params,
                       const std::function<Tensor()>& forward) {
    const GradCheckResult res = grad_check(forward, params, eps);
    GradSuiteEntry entry;
    entry.name = name;
    entry.max_rel_err = res.max_rel_err;
    entry.worst_param = res.worst_param;
    entry.ok = res.max_rel_err < tol;
    report.entries.push_back(entry);
  };

  // --- motion predictor: history encoder and prediction head -----------------
  {
    ParamStore store;
    MotionConfig cfg;
    cfg.t_h = 4;
    cfg.t_f = 2;
    cfg.d = 8;
    cfg.enc_hidden = {8};
    cfg.head_hidden = {8};
    Rng rng(1001);
    MotionPredictor motion(store, "motion", cfg, rng);

    Rng scene_rng(21);
    const std::vector<BoxState> hist_a = demo_history(scene_rng, 4, 9);
    const std::vector<BoxState> hist_b = demo_history(scene_rng, 2, 9);
    const std::vector<HistoryWindow> windows = {
        make_history_window({hist_a.data(), hist_a.size()}, cfg.t_h),
        make_history_window({hist_b.data(), hist_b.size()}, cfg.t_h)};
    Rng probe_rng(22);
    const Tensor enc_probe = probe_tensor({2, cfg.d}, probe_rng);

    add_check("history_encoder", store.items_with_prefix("motion.enc"), [&]() {
      return probe_loss(motion.encode_history_batch({windows.data(), windows.size()}), enc_probe);
    });

    std::vector<std::array<double, 3>> anchors;
    for (const HistoryWindow& w : windows) anchors.push_back(w.anchor);
    const Tensor head_probe = probe_tensor({2, cfg.t_f, 3}, probe_rng);
    add_check("prediction_head", store.items(), [&]() {
      const Tensor feats = motion.encode_history_batch({windows.data(), windows.size()});
      const Tensor deltas = motion.predict_deltas(feats);
      return probe_loss(decode_future(deltas, anchors, cfg.t_f), head_probe);
    });
  }

  // --- scoring network blocks --------------------------------------------------
  {
    ScoringFixture fx;
    Rng probe_rng(23);
    const int m = static_cast<int>(fx.hyps.size());
    const Tensor embed_probe = probe_tensor({m, 8}, probe_rng);

    add_check("motion_embedding", fx.store.items_with_prefix("enc.motion"), [&]() {
      return probe_loss(fx.encoder.encode_motion(fx.hyps), embed_probe);
    });

    std::vector<Tensor> feats;
    for (int i = 0; i < m; ++i) feats.push_back(fx.encoder.appearance_features(fx.hyps[static_cast<std::size_t>(i)], i, fx.ctx));
    add_check("appearance_attention_stack", fx.store.items_with_prefix("enc.app"), [&]() {
      return probe_loss(fx.encoder.encode_appearance(feats), embed_probe);
    });
    add_check("appearance_input_mlp", fx.store.items_with_prefix("enc.point_in"), [&]() {
      return probe_loss(fx.encoder.encode_appearance(feats), embed_probe);
    });
    add_check("fusion_mlp", fx.store.items_with_prefix("enc.fuse"), [&]() {
      return probe_loss(fx.encoder.encode(fx.hyps, fx.ctx), embed_probe);
    });

    const Grouping grouping = Grouping::from_hypotheses(fx.hyps);
    add_check("global_local_interaction", fx.store.items_with_prefix("inter."), [&]() {
      const Tensor e = fx.encoder.encode(fx.hyps, fx.ctx);
      return probe_loss(fx.interaction.interact(e, grouping), embed_probe);
    });

    add_check("confidence_head", fx.store.items_with_prefix("head.conf"), [&]() {
      const Tensor e = fx.interaction.interact(fx.encoder.encode(fx.hyps, fx.ctx), grouping);
      const Tensor logits = reshape(fx.heads.confidence_logits(e), {m});
      return scale(bce_with_logits_mean(logits, fx.labels), 1e-3);
    });
    add_check("refine_head", fx.store.items_with_prefix("head.refine"), [&]() {
      const Tensor e = fx.interaction.interact(fx.encoder.encode(fx.hyps, fx.ctx), grouping);
      return scale(
          smooth_l1_rows(fx.heads.residuals(e), fx.residual_targets, fx.residual_weights), 1e-3);
    });

    add_check("full_scoring_network", fx.store.items(), [&]() {
      const Tensor e = fx.interaction.interact(fx.encoder.encode(fx.hyps, fx.ctx), grouping);
      const Tensor logits = reshape(fx.heads.confidence_logits(e), {m});
      const Tensor conf = bce_with_logits_mean(logits, fx.labels);
      const Tensor reg =
          smooth_l1_rows(fx.heads.residuals(e), fx.residual_targets, fx.residual_weights);
      return scale(add(conf, reg), 1e-3);
    });
  }

  report.all_ok = true;
  for (const GradSuiteEntry& e : report.entries) report.all_ok = report.all_ok && e.ok;
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace mht
