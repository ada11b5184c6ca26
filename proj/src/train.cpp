#include "mht3d/train.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mht3d/io.hpp"

namespace mht {

Model::Model(const ModelConfig& cfg) : config(cfg) {
  Rng rng(cfg.init_seed);
  motion = MotionPredictor(store, "motion", cfg.motion, rng);
  tracknet = TrackNet(store, "tracknet", cfg.tracknet, rng);
}

std::vector<std::pair<std::string, Tensor>> Model::motion_params() const {
  return store.items_with_prefix("motion.");
}

std::vector<std::pair<std::string, Tensor>> Model::tracknet_params() const {
  return store.items_with_prefix("tracknet.");
}

// ---- stage 1 -------------------------------------------------------------------

namespace {

struct MotionSample {
  HistoryWindow window;
  std::array<double, 3> anchor;
  std::vector<double> target;        // t_f x 3 global (x, y, heading)
  std::vector<std::uint8_t> mask;    // t_f
};

std::vector<MotionSample> build_motion_samples(std::span<const Scene> scenes, int t_h, int t_f,
                                               double input_noise, std::uint64_t noise_seed) {
  Rng noise_rng(noise_seed);
  std::vector<MotionSample> samples;
  for (const Scene& scene : scenes) {
    // per-object box sequences in frame order
    std::map<int, std::vector<BoxState>> tracks;
    for (int f = 0; f < scene.frames(); ++f)
      for (const GtBox& g : scene.gt[static_cast<std::size_t>(f)]) tracks[g.object_id].push_back(g.box);

    for (const auto& [obj, boxes] : tracks) {
      for (std::size_t end = 0; end + 1 < boxes.size(); ++end) {
        // window over boxes[.. end], targets end+1 .. end+t_f
        const std::size_t take = std::min<std::size_t>(end + 1, static_cast<std::size_t>(t_h));
        std::vector<BoxState> hist(boxes.begin() + static_cast<std::ptrdiff_t>(end + 1 - take),
                                   boxes.begin() + static_cast<std::ptrdiff_t>(end + 1));
        if (input_noise > 0.0) {
          // half iid jitter, half random-walk: tracked histories carry
          // correlated (lagged) errors, and the predictor must still aim at
          // the true future rather than extrapolate the lag
          const bool walk = noise_rng.uniform() < 0.5;
          double wx = 0.0, wy = 0.0;
          for (BoxState& b : hist) {
            if (walk) {
              wx += noise_rng.normal(0.0, input_noise);
              wy += noise_rng.normal(0.0, input_noise);
              b.x += wx;
              b.y += wy;
            } else {
              b.x += noise_rng.normal(0.0, input_noise);
              b.y += noise_rng.normal(0.0, input_noise);
            }
            b.heading = wrap_angle(b.heading + noise_rng.normal(0.0, 0.3 * input_noise));
          }
        }
        MotionSample s;
        s.window = make_history_window(std::span<const BoxState>(hist.data(), hist.size()), t_h);
        s.anchor = s.window.anchor;
        s.target.assign(static_cast<std::size_t>(t_f) * 3, 0.0);
        s.mask.assign(static_cast<std::size_t>(t_f), 0);
        bool any = false;
        for (int j = 0; j < t_f; ++j) {
          const std::size_t idx = end + 1 + static_cast<std::size_t>(j);
          if (idx >= boxes.size()) break;
          s.target[static_cast<std::size_t>(j) * 3 + 0] = boxes[idx].x;
          s.target[static_cast<std::size_t>(j) * 3 + 1] = boxes[idx].y;
          s.target[static_cast<std::size_t>(j) * 3 + 2] = boxes[idx].heading;
          s.mask[static_cast<std::size_t>(j)] = 1;
          any = true;
        }
        if (any) samples.push_back(std::move(s));
      }
    }
  }
  return samples;
}

}  // namespace

Stage1Result train_motion_stage1(Model& model, std::span<const Scene> scenes,
                                 const Stage1Config& cfg) {
  const int t_h = model.config.motion.t_h;
  const int t_f = model.config.motion.t_f;
  std::vector<MotionSample> samples =
      build_motion_samples(scenes, t_h, t_f, cfg.input_noise, cfg.noise_seed);
  if (samples.empty()) throw std::invalid_argument("stage1: no training samples");

  Adam opt(model.motion_params(), cfg.lr);
  Rng shuffle_rng(cfg.shuffle_seed);
  Stage1Result result;

  std::vector<int> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = 0; i + 1 < order.size(); ++i) {
      const std::size_t j = i + static_cast<std::size_t>(
                                    shuffle_rng.uniform_int(static_cast<int>(order.size() - i)));
      std::swap(order[i], order[j]);
    }

    double epoch_loss = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch));
      std::vector<const MotionSample*> batch;
      for (std::size_t i = start; i < stop; ++i)
        batch.push_back(&samples[static_cast<std::size_t>(order[i])]);

      opt.zero_grad();
      std::vector<Tensor> feats;
      std::vector<std::array<double, 3>> anchors;
      std::vector<double> targets;
      std::vector<std::uint8_t> mask;
      for (const MotionSample* s : batch) {
        feats.push_back(model.motion.encode_history(s->window));
        anchors.push_back(s->anchor);
        targets.insert(targets.end(), s->target.begin(), s->target.end());
        mask.insert(mask.end(), s->mask.begin(), s->mask.end());
      }
      const Tensor stacked = stack_rows(std::span<const Tensor>(feats.data(), feats.size()));
      const Tensor deltas = model.motion.predict_deltas(stacked);
      const Tensor decoded = decode_future(deltas, anchors, t_f);
      const Tensor pred = reshape(decoded, {static_cast<int>(batch.size()), t_f, 3});
      const Tensor loss = motion_loss(pred, targets, mask);
      if (!std::isfinite(loss.item()))
        throw std::runtime_error("stage1: non-finite loss at batch " + std::to_string(batches) +
                                 " epoch " + std::to_string(epoch));
      backward(loss);
      opt.step();
      epoch_loss += loss.item();
      ++batches;
    }
    result.epoch_loss.push_back(batches ? epoch_loss / batches : 0.0);
  }
  return result;
}

double motion_center_error(const Model& model, std::span<const Scene> scenes) {
  NoGradGuard no_grad;
  const int t_h = model.config.motion.t_h;
  const int t_f = model.config.motion.t_f;
  const std::vector<MotionSample> samples = build_motion_samples(scenes, t_h, t_f, 0.0, 0);
  double err = 0.0;
  long count = 0;
  for (const MotionSample& s : samples) {
    const FuturePrediction pred = model.motion.predict(s.window);
    for (int j = 0; j < t_f; ++j) {
      if (!s.mask[static_cast<std::size_t>(j)]) continue;
      const BoxState& b = pred.boxes[static_cast<std::size_t>(j)];
      const double dx = b.x - s.target[static_cast<std::size_t>(j) * 3 + 0];
      const double dy = b.y - s.target[static_cast<std::size_t>(j) * 3 + 1];
      err += std::hypot(dx, dy);
      ++count;
    }
  }
  return count ? err / static_cast<double>(count) : 0.0;
}

// ---- stage 2 ---------------------------------------------------------------------

namespace {

bool positive_label(const Hypothesis& h, const BoxState& gt, const Stage2Config& cfg) {
  if (h.candidate.is_sentinel()) return false;
  if (h.cls == ObjectClass::kVehicle) return bev_iou(h.candidate, gt) >= cfg.pos_iou_vehicle;
  return bev_center_dist(h.candidate, gt) <= cfg.pos_dist_ped_cyc;
}

}  // namespace

std::vector<HypoSample> build_stage2_samples(const Model& model, std::span<const Scene> scenes,
                                             const Stage2Config& cfg) {
  NoGradGuard no_grad;
  const int t_h = model.config.tracknet.encoder.t_h;
  const int point_frames = model.config.tracknet.encoder.point_frames;
  std::vector<HypoSample> samples;

  for (int si = 0; si < static_cast<int>(scenes.size()); ++si) {
    const Scene& scene = scenes[static_cast<std::size_t>(si)];
    std::map<int, std::vector<BoxState>> history;   // object id -> boxes so far
    std::map<int, ObjectClass> cls_of;

    for (int t = 0; t < scene.frames(); ++t) {
      std::map<int, BoxState> gt_now;
      for (const GtBox& g : scene.gt[static_cast<std::size_t>(t)]) {
        gt_now[g.object_id] = g.box;
        cls_of[g.object_id] = g.cls;
      }

      if (t >= 1) {
        HypoSample sample;
        sample.scene_index = si;
        sample.frame = t;
        sample.ctx.t = t;
        const int start = std::max(0, t - point_frames + 1);
        for (int f = start; f <= t; ++f)
          sample.ctx.clouds.push_back(&scene.clouds[static_cast<std::size_t>(f)]);
        sample.ctx.sample_seed =
            Rng(cfg.augment_seed).fork(static_cast<std::uint64_t>(si) * 100003u +
                                       static_cast<std::uint64_t>(t)).next_u64();

        const auto& dets = scene.detections[static_cast<std::size_t>(t)];
        for (const auto& [obj, boxes] : history) {
          if (!gt_now.count(obj)) continue;  // object must exist at t for labels
          const BoxState& gt_box = gt_now.at(obj);

          Trajectory traj;
          traj.id = obj;
          traj.cls = cls_of.at(obj);
          const std::size_t take = std::min<std::size_t>(boxes.size(), static_cast<std::size_t>(t_h));
          traj.boxes.assign(boxes.end() - static_cast<std::ptrdiff_t>(take), boxes.end());

          Rng drift_rng = Rng(cfg.augment_seed ^ 0xD51F00ull)
                              .fork(static_cast<std::uint64_t>(si) * 1000003u +
                                    static_cast<std::uint64_t>(t) * 101u +
                                    static_cast<std::uint64_t>(obj));
          if (drift_rng.uniform() < cfg.drift_prob) {
            const double ang = drift_rng.uniform(-3.14159265358979, 3.14159265358979);
            const double mag = drift_rng.uniform(0.5, cfg.drift_max);
            // half the drifted tracks diverge over the window, half run at a
            // constant offset (a stalled ghost following a parallel path)
            const bool growing = drift_rng.uniform() < 0.5;
            const int n = static_cast<int>(traj.boxes.size());
            for (int k = 0; k < n; ++k) {
              const double g =
                  growing ? (n == 1 ? 1.0 : static_cast<double>(k) / (n - 1)) : 1.0;
              traj.boxes[static_cast<std::size_t>(k)].x += g * mag * std::cos(ang);
              traj.boxes[static_cast<std::size_t>(k)].y += g * mag * std::sin(ang);
            }
          }

          // 1 predicted candidate: the frozen predictor's next-frame box
          const HistoryWindow window = make_history_window(
              std::span<const BoxState>(traj.boxes.data(), traj.boxes.size()), t_h);
          const FuturePrediction pred = model.motion.predict(window);
          traj.pred_cache[t - 1] = pred;

          HypothesisGenConfig gen;
          gen.t_h = t_h;
          gen.t_f = 1;  // training uses the lag-1 prediction only
          gen.w = 1;
          std::vector<Trajectory> one{traj};
          std::vector<Hypothesis> hyps = build_hypotheses(
              std::span<const Trajectory>(one.data(), 1),
              std::span<const Detection>(dets.data(), dets.size()), t, gen, nullptr);

          // 2 augmented copies of the generated pair. The first probes the
          // positive/negative boundary; the second jitters wide so the
          // confidence head sees drift-regime hard negatives (real box
          // geometry over an off-object crop), which is what a wandering
          // track looks like at inference.
          Rng aug = Rng(cfg.augment_seed)
                        .fork(static_cast<std::uint64_t>(si) * 1000003u +
                              static_cast<std::uint64_t>(t) * 101u +
                              static_cast<std::uint64_t>(obj));
          const Hypothesis near_aug = augment_hypothesis(hyps[0], aug);
          const Hypothesis wide_src = hyps[1].candidate.is_sentinel() ? hyps[0] : hyps[1];
          const Hypothesis wide_aug = augment_hypothesis_scaled(wide_src, aug, 6.0, 3.0, 3.0);
          hyps.push_back(near_aug);
          hyps.push_back(wide_aug);

          for (const Hypothesis& h : hyps) {
            const bool pos = positive_label(h, gt_box, cfg);
            sample.labels.push_back(pos ? 1.0 : 0.0);
            std::array<double, 7> res{};
            if (pos) res = encode_box_residual(h.candidate, gt_box);
            for (double r : res) sample.residual_targets.push_back(r);
            sample.residual_weights.push_back(pos ? 1.0 : 0.0);
            sample.hyps.push_back(h);
          }
        }
        if (!sample.hyps.empty()) samples.push_back(std::move(sample));
      }

      // Histories grow from the matched detections (the noise the tracker
      // actually sees), falling back to GT on dropped frames: this gives the
      // frozen predictor realistic input errors, so predicted candidates span
      // both positives and hard negatives.
      for (const auto& [obj, gt_box] : gt_now) {
        const Detection* matched = nullptr;
        double best = 2.0;
        for (const Detection& d : scene.detections[static_cast<std::size_t>(t)]) {
          if (d.cls != cls_of.at(obj)) continue;
          const double dist = bev_center_dist(d.box, gt_box);
          if (dist <= best) {
            best = dist;
            matched = &d;
          }
        }
        history[obj].push_back(matched ? matched->box : gt_box);
      }
    }
  }
  return samples;
}

namespace {

struct Stage2Losses {
  Tensor total, conf, reg;
};

Stage2Losses stage2_sample_loss(const Model& model, const HypoSample& s,
                                const Stage2Config& cfg) {
  const Tensor feats = model.tracknet.features(
      std::span<const Hypothesis>(s.hyps.data(), s.hyps.size()), s.ctx);
  const Tensor logits =
      reshape(model.tracknet.heads().confidence_logits(feats), {static_cast<int>(s.hyps.size())});
  Stage2Losses out;
  out.conf = bce_with_logits_mean(logits, s.labels);
  const Tensor residuals = model.tracknet.heads().residuals(feats);
  out.reg = smooth_l1_rows(residuals, s.residual_targets, s.residual_weights);
  out.total = add(out.conf, scale(out.reg, cfg.reg_weight));
  return out;
}

}  // namespace

Stage2Result train_tracknet_stage2(Model& model, std::span<const Scene> scenes,
                                   const Stage2Config& cfg) {
  const std::vector<HypoSample> samples = build_stage2_samples(model, scenes, cfg);
  if (samples.empty()) throw std::invalid_argument("stage2: no training samples");

  const std::uint64_t frozen_hash = params_hash(model.motion_params());
  Adam opt(model.tracknet_params(), cfg.lr);
  Rng shuffle_rng(cfg.shuffle_seed);
  Stage2Result result;

  std::vector<int> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = 0; i + 1 < order.size(); ++i) {
      const std::size_t j = i + static_cast<std::size_t>(
                                    shuffle_rng.uniform_int(static_cast<int>(order.size() - i)));
      std::swap(order[i], order[j]);
    }

    double total = 0.0, conf = 0.0, reg = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch));
      opt.zero_grad();
      Tensor batch_loss;
      double batch_conf = 0.0, batch_reg = 0.0;
      for (std::size_t i = start; i < stop; ++i) {
        const HypoSample& s = samples[static_cast<std::size_t>(order[i])];
        const Stage2Losses losses = stage2_sample_loss(model, s, cfg);
        if (!std::isfinite(losses.total.item()))
          throw std::runtime_error("stage2: non-finite loss at scene " +
                                   std::to_string(s.scene_index) + " frame " +
                                   std::to_string(s.frame));
        batch_conf += losses.conf.item();
        batch_reg += losses.reg.item();
        batch_loss = batch_loss.defined() ? add(batch_loss, losses.total) : losses.total;
      }
      const double n = static_cast<double>(stop - start);
      batch_loss = scale(batch_loss, 1.0 / n);
      backward(batch_loss);
      opt.step();
      total += batch_loss.item();
      conf += batch_conf / n;
      reg += batch_reg / n;
      ++batches;
    }
    result.epoch_loss.push_back(batches ? total / batches : 0.0);
    result.epoch_conf_loss.push_back(batches ? conf / batches : 0.0);
    result.epoch_reg_loss.push_back(batches ? reg / batches : 0.0);
  }

  if (params_hash(model.motion_params()) != frozen_hash)
    throw std::logic_error("stage2: frozen motion parameters changed");
  return result;
}

double stage2_score_auc(const Model& model, std::span<const HypoSample> samples) {
  NoGradGuard no_grad;
  std::vector<double> pos, neg;
  for (const HypoSample& s : samples) {
    const std::vector<ScoredHypothesis> scored = model.tracknet.score(
        std::span<const Hypothesis>(s.hyps.data(), s.hyps.size()), s.ctx);
    for (std::size_t i = 0; i < scored.size(); ++i) {
      if (s.labels[i] > 0.5)
        pos.push_back(scored[i].confidence);
      else
        neg.push_back(scored[i].confidence);
    }
  }
  return score_auc(pos, neg);
}

double score_auc(std::span<const double> positives, std::span<const double> negatives) {
  if (positives.empty() || negatives.empty()) return 0.5;
  double wins = 0.0;
  for (double p : positives)
    for (double n : negatives) {
      if (p > n) wins += 1.0;
      else if (p == n) wins += 0.5;
    }
  return wins / (static_cast<double>(positives.size()) * static_cast<double>(negatives.size()));
}

}  // namespace mht
