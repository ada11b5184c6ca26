#include "mht3d/tracker.hpp"

#include <algorithm>
#include <stdexcept>

namespace mht {

void TrackerConfig::validate() const {
  if (t_h < 1 || t_f < 1 || w < 1)
    throw std::invalid_argument("tracker config: t_h, t_f and w must be >= 1");
  for (int c = 0; c < 3; ++c) {
    if (kill_threshold[static_cast<std::size_t>(c)] < 0.0 ||
        kill_threshold[static_cast<std::size_t>(c)] > 1.0 ||
        birth_threshold[static_cast<std::size_t>(c)] < 0.0 ||
        birth_threshold[static_cast<std::size_t>(c)] > 1.0)
      throw std::invalid_argument("tracker config: thresholds must lie in [0, 1]");
  }
}

HypothesisGenConfig TrackerConfig::hypo_config() const {
  HypothesisGenConfig h;
  h.t_h = t_h;
  h.t_f = t_f;
  h.w = w;
  h.max_match_dist = max_match_dist;
  h.use_predicted_boxes = use_predicted_boxes;
  h.rank_by_last_observed = rank_by_last_observed;
  return h;
}

std::vector<std::pair<int, int>> greedy_match(std::span<const BoxState> ref_poses,
                                              std::span<const ObjectClass> classes,
                                              std::span<const Detection> detections,
                                              const std::array<double, 3>& max_dist) {
  if (ref_poses.size() != classes.size())
    throw std::invalid_argument("greedy_match: pose/class count mismatch");

  struct Pair {
    double dist;
    int track, det;
  };
  std::vector<Pair> pairs;
  for (int ti = 0; ti < static_cast<int>(ref_poses.size()); ++ti) {
    const double gate = max_dist[static_cast<std::size_t>(static_cast<int>(classes[ti]))];
    for (int di = 0; di < static_cast<int>(detections.size()); ++di) {
      if (detections[static_cast<std::size_t>(di)].cls != classes[ti]) continue;
      const double dist = bev_center_dist(ref_poses[ti], detections[static_cast<std::size_t>(di)].box);
      if (dist <= gate) pairs.push_back({dist, ti, di});
    }
  }

  std::vector<std::uint8_t> track_used(ref_poses.size(), 0), det_used(detections.size(), 0);
  std::vector<std::pair<int, int>> out;
  for (;;) {
    // pick the globally smallest remaining pair, ties by (track, det) index
    int best = -1;
    for (int i = 0; i < static_cast<int>(pairs.size()); ++i) {
      const Pair& p = pairs[static_cast<std::size_t>(i)];
      if (track_used[static_cast<std::size_t>(p.track)] || det_used[static_cast<std::size_t>(p.det)])
        continue;
      if (best < 0) {
        best = i;
        continue;
      }
      const Pair& b = pairs[static_cast<std::size_t>(best)];
      if (p.dist < b.dist || (p.dist == b.dist && (p.track < b.track ||
                                                   (p.track == b.track && p.det < b.det))))
        best = i;
    }
    if (best < 0) break;
    const Pair& p = pairs[static_cast<std::size_t>(best)];
    track_used[static_cast<std::size_t>(p.track)] = 1;
    det_used[static_cast<std::size_t>(p.det)] = 1;
    out.emplace_back(p.track, p.det);
  }
  return out;
}

namespace {

// Lower rank wins ties: Detected, Predicted lag 1..t_f, then ZeroPad.
int provenance_rank(const Hypothesis& h) {
  switch (h.provenance) {
    case Provenance::kDetected: return 0;
    case Provenance::kPredicted: return h.pred_lag;
    case Provenance::kZeroPad: return 1 << 20;
  }
  return 1 << 20;
}

}  // namespace

int select_best(std::span<const Hypothesis> group, std::span<const double> scores) {
  if (group.empty()) throw std::invalid_argument("select_best: empty group");
  if (group.size() != scores.size())
    throw std::invalid_argument("select_best: score count differs");
  int best = 0;
  for (int i = 1; i < static_cast<int>(group.size()); ++i) {
    const double s = scores[static_cast<std::size_t>(i)];
    const double bs = scores[static_cast<std::size_t>(best)];
    if (s > bs ||
        (s == bs && provenance_rank(group[static_cast<std::size_t>(i)]) <
                        provenance_rank(group[static_cast<std::size_t>(best)])))
      best = i;
  }
  return best;
}

FrameResult life_cycle(std::span<const TrackChoice> choices,
                       std::span<const Detection> detections,
                       std::span<const std::uint8_t> det_consumed, const TrackerConfig& cfg,
                       int t, int first_new_id) {
  FrameResult result;
  result.t = t;

  for (const TrackChoice& c : choices) {
    const double kill = cfg.kill_threshold[static_cast<std::size_t>(static_cast<int>(c.cls))];
    if (c.provenance == Provenance::kZeroPad || c.score < kill) {
      result.killed.push_back(c.track_id);
      continue;
    }
    TrackRecord rec;
    rec.id = c.track_id;
    rec.cls = c.cls;
    rec.box = c.refined;
    rec.box.timestamp = t;
    rec.score = c.score;
    rec.provenance = c.provenance;
    rec.pred_lag = c.pred_lag;
    result.surviving.push_back(rec);
  }

  int next_id = first_new_id;
  for (int di = 0; di < static_cast<int>(detections.size()); ++di) {
    if (det_consumed[static_cast<std::size_t>(di)]) continue;
    const Detection& d = detections[static_cast<std::size_t>(di)];
    const double birth = cfg.birth_threshold[static_cast<std::size_t>(static_cast<int>(d.cls))];
    if (d.box.score <= birth) continue;
    bool overlaps = false;
    for (const TrackRecord& rec : result.surviving)
      if (bev_iou(d.box, rec.box) > cfg.newborn_overlap_iou) {
        overlaps = true;
        break;
      }
    if (overlaps) continue;
    TrackRecord rec;
    rec.id = next_id++;
    rec.cls = d.cls;
    rec.box = d.box;
    rec.box.timestamp = t;
    rec.score = d.box.score;
    rec.provenance = Provenance::kDetected;
    result.new_born.push_back(rec);
  }
  return result;
}

std::vector<Detection> nms_filter(std::span<const Detection> detections, double iou_thresh,
                                  double score_thresh) {
  std::vector<int> order;
  for (int i = 0; i < static_cast<int>(detections.size()); ++i)
    if (detections[static_cast<std::size_t>(i)].box.score >= score_thresh) order.push_back(i);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return detections[static_cast<std::size_t>(a)].box.score >
           detections[static_cast<std::size_t>(b)].box.score;
  });

  std::vector<Detection> kept;
  for (int idx : order) {
    const Detection& d = detections[static_cast<std::size_t>(idx)];
    bool suppressed = false;
    for (const Detection& k : kept)
      if (k.cls == d.cls && bev_iou(k.box, d.box) > iou_thresh) {
        suppressed = true;
        break;
      }
    if (!suppressed) kept.push_back(d);
  }
  // restore detection-id order so downstream indexing stays stable
  std::sort(kept.begin(), kept.end(),
            [](const Detection& a, const Detection& b) { return a.det_id < b.det_id; });
  return kept;
}

Tracker::Tracker(const TrackerConfig& cfg, const MotionPredictor& motion,
                 HypothesisScorer& scorer)
    : cfg_(cfg), motion_(&motion), scorer_(&scorer) {
  cfg_.validate();
  if (motion.config().t_f < cfg.t_f)
    throw std::invalid_argument("tracker: motion predictor horizon shorter than t_f");
}

FrameResult Tracker::step(int t, std::span<const Detection> detections,
                          std::span<const PointCloud* const> clouds) {
  if (started_ && t <= last_frame_)
    throw std::invalid_argument("tracker: frames must arrive in increasing order");
  started_ = true;
  last_frame_ = t;

  std::vector<Detection> dets;
  if (cfg_.nms_enabled) {
    dets = nms_filter(detections, cfg_.nms_iou, cfg_.nms_score_threshold);
  } else {
    dets.assign(detections.begin(), detections.end());
  }

  // association reference poses + one-to-one greedy match
  const HypothesisGenConfig hypo_cfg = cfg_.hypo_config();
  std::vector<BoxState> ref_poses;
  std::vector<ObjectClass> classes;
  for (const Trajectory& traj : tracks_) {
    ref_poses.push_back(association_ref_pose(traj, t, hypo_cfg));
    classes.push_back(traj.cls);
  }
  const auto matches =
      greedy_match(ref_poses, classes, std::span<const Detection>(dets.data(), dets.size()),
                   cfg_.max_match_dist);

  std::map<int, int> assigned;  // track id -> detection index
  std::vector<std::uint8_t> det_consumed(dets.size(), 0);
  for (const auto& [ti, di] : matches) {
    assigned[tracks_[static_cast<std::size_t>(ti)].id] = di;
    det_consumed[static_cast<std::size_t>(di)] = 1;
  }

  const std::vector<Hypothesis> hyps = build_hypotheses(
      tracks_, std::span<const Detection>(dets.data(), dets.size()), t, hypo_cfg, &assigned);

  PointContext ctx;
  ctx.t = t;
  ctx.clouds.assign(clouds.begin(), clouds.end());
  ctx.sample_seed = Rng(cfg_.sample_seed).fork(static_cast<std::uint64_t>(t)).next_u64();

  const std::vector<ScoredHypothesis> scored =
      scorer_->score(std::span<const Hypothesis>(hyps.data(), hyps.size()), ctx);
  if (scored.size() != hyps.size())
    throw std::runtime_error("tracker: scorer returned wrong count");

  std::vector<double> scores(scored.size());
  for (std::size_t i = 0; i < scored.size(); ++i) scores[i] = scored[i].confidence;

  // per-group argmax selection
  std::map<int, int> det_id_to_index;
  for (int di = 0; di < static_cast<int>(dets.size()); ++di)
    det_id_to_index[dets[static_cast<std::size_t>(di)].det_id] = di;

  const Grouping grouping = Grouping::from_hypotheses(hyps);
  grouping.validate(static_cast<int>(hyps.size()));
  std::vector<TrackChoice> choices;
  for (const auto& [start, count] : grouping.groups) {
    const auto group = std::span<const Hypothesis>(hyps.data() + start, static_cast<std::size_t>(count));
    const auto group_scores = std::span<const double>(scores.data() + start, static_cast<std::size_t>(count));
    const int local = select_best(group, group_scores);
    const Hypothesis& h = group[static_cast<std::size_t>(local)];
    const ScoredHypothesis& s = scored[static_cast<std::size_t>(start + local)];
    TrackChoice c;
    c.track_id = h.track_id;
    c.cls = h.cls;
    c.score = s.confidence;
    c.refined = s.refined;
    c.provenance = h.provenance;
    c.pred_lag = h.pred_lag;
    c.det_id = h.det_id;
    choices.push_back(c);
    if (h.provenance == Provenance::kDetected && h.det_id >= 0) {
      auto it = det_id_to_index.find(h.det_id);
      if (it != det_id_to_index.end()) det_consumed[static_cast<std::size_t>(it->second)] = 1;
    }
  }

  FrameResult result = life_cycle(choices, std::span<const Detection>(dets.data(), dets.size()),
                                  det_consumed, cfg_, t, next_id_);
  next_id_ += static_cast<int>(result.new_born.size());
  result.scores = scores;

  // apply kills / survivals / births to the track set
  std::vector<Trajectory> next_tracks;
  for (Trajectory& traj : tracks_) {
    bool keep = false;
    for (const TrackRecord& rec : result.surviving)
      if (rec.id == traj.id) {
        traj.boxes.push_back(rec.box);
        traj.last_confidence = rec.score;
        keep = true;
        break;
      }
    if (keep) next_tracks.push_back(std::move(traj));
  }
  for (const TrackRecord& rec : result.new_born) {
    Trajectory traj;
    traj.id = rec.id;
    traj.cls = rec.cls;
    traj.birth_frame = t;
    traj.boxes.push_back(rec.box);
    traj.last_confidence = rec.score;
    next_tracks.push_back(std::move(traj));
  }
  std::sort(next_tracks.begin(), next_tracks.end(),
            [](const Trajectory& a, const Trajectory& b) { return a.id < b.id; });
  tracks_ = std::move(next_tracks);

  // refresh prediction caches for everything alive at t
  for (Trajectory& traj : tracks_) {
    const HistoryWindow window =
        make_history_window(std::span<const BoxState>(traj.boxes.data(), traj.boxes.size()),
                            cfg_.t_h);
    traj.pred_cache[t] = motion_->predict(window);
    traj.prune(t, cfg_.t_h, cfg_.t_f);
  }
  return result;
}

TrackOutput run_tracker(const Scene& scene, const TrackerConfig& cfg,
                        const MotionPredictor& motion, HypothesisScorer& scorer) {
  Tracker tracker(cfg, motion, scorer);
  TrackOutput out;
  for (int t = 0; t < scene.frames(); ++t) {
    std::vector<const PointCloud*> clouds;
    const int start = std::max(0, t - cfg.point_frames + 1);
    for (int f = start; f <= t; ++f)
      clouds.push_back(&scene.clouds[static_cast<std::size_t>(f)]);
    const auto& dets = scene.detections[static_cast<std::size_t>(t)];
    out.frames.push_back(tracker.step(
        t, std::span<const Detection>(dets.data(), dets.size()),
        std::span<const PointCloud* const>(clouds.data(), clouds.size())));
  }
  return out;
}

}  // namespace mht
