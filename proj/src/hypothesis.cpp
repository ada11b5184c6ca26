#include "mht3d/hypothesis.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace mht {

const BoxState& Trajectory::last_box() const {
  if (boxes.empty()) throw std::logic_error("trajectory: no boxes");
  return boxes.back();
}

void Trajectory::prune(int t, int t_h, int t_f) {
  const int keep_from = t - (t_h + t_f + 2);
  while (!boxes.empty() && boxes.front().timestamp < keep_from) boxes.erase(boxes.begin());
  while (!pred_cache.empty() && pred_cache.begin()->first < t - t_f)
    pred_cache.erase(pred_cache.begin());
}

const char* provenance_name(Provenance p) {
  switch (p) {
    case Provenance::kPredicted: return "predicted";
    case Provenance::kDetected: return "detected";
    case Provenance::kZeroPad: return "zeropad";
  }
  return "unknown";
}

std::vector<BoxState> collect_predicted_candidates(const Trajectory& traj, int t, int t_f) {
  std::vector<BoxState> out;
  out.reserve(static_cast<std::size_t>(t_f));

  // most recent prediction that still covers frame t (young-track fallback)
  const BoxState* fallback = nullptr;
  for (int tau = t - 1; tau >= t - t_f; --tau) {
    auto it = traj.pred_cache.find(tau);
    if (it != traj.pred_cache.end()) {
      if (const BoxState* b = it->second.box_for_frame(t)) {
        fallback = b;
        break;
      }
    }
  }

  for (int lag = 1; lag <= t_f; ++lag) {
    auto it = traj.pred_cache.find(t - lag);
    const BoxState* box = it == traj.pred_cache.end() ? nullptr : it->second.box_for_frame(t);
    if (box)
      out.push_back(*box);
    else if (fallback)
      out.push_back(*fallback);
    else
      out.push_back(BoxState{});
  }
  for (BoxState& b : out) b.timestamp = t;
  return out;
}

std::vector<RankedDetection> nearest_detections(const Trajectory& traj, const BoxState& ref_pose,
                                                std::span<const Detection> detections, int w,
                                                double max_dist) {
  std::vector<std::pair<double, int>> ranked;
  for (std::size_t i = 0; i < detections.size(); ++i) {
    const Detection& d = detections[i];
    if (d.cls != traj.cls) continue;
    const double dist = bev_center_dist(ref_pose, d.box);
    if (dist <= max_dist) ranked.emplace_back(dist, static_cast<int>(i));
  }
  std::sort(ranked.begin(), ranked.end());

  std::vector<RankedDetection> out;
  for (int k = 0; k < w; ++k) {
    RankedDetection rd;
    if (k < static_cast<int>(ranked.size())) {
      rd.det_index = ranked[static_cast<std::size_t>(k)].second;
      rd.box = detections[static_cast<std::size_t>(rd.det_index)].box;
    }
    out.push_back(rd);
  }
  return out;
}

BoxState association_ref_pose(const Trajectory& traj, int t, const HypothesisGenConfig& cfg) {
  if (cfg.use_predicted_boxes && !cfg.rank_by_last_observed) {
    auto it = traj.pred_cache.find(t - 1);
    if (it != traj.pred_cache.end())
      if (const BoxState* b = it->second.box_for_frame(t))
        if (!b->is_sentinel()) return *b;
  }
  return traj.last_box();
}

namespace {

std::vector<BoxState> history_rows(const Trajectory& traj, int t_h) {
  std::vector<BoxState> seq(static_cast<std::size_t>(t_h));
  const int take = std::min<int>(t_h, static_cast<int>(traj.boxes.size()));
  for (int i = 0; i < take; ++i)
    seq[static_cast<std::size_t>(t_h - take + i)] =
        traj.boxes[traj.boxes.size() - static_cast<std::size_t>(take) + i];
  return seq;
}

Hypothesis make_hypothesis(const Trajectory& traj, const std::vector<BoxState>& history,
                           const BoxState& candidate, Provenance prov, int pred_lag, int det_id) {
  Hypothesis h;
  h.track_id = traj.id;
  h.cls = traj.cls;
  h.provenance = prov;
  h.pred_lag = pred_lag;
  h.det_id = det_id;
  h.candidate = candidate;
  h.seq = history;
  h.seq.push_back(candidate);
  return h;
}

}  // namespace

std::vector<Hypothesis> build_hypotheses(std::span<const Trajectory> trajectories,
                                         std::span<const Detection> detections, int t,
                                         const HypothesisGenConfig& cfg,
                                         const std::map<int, int>* assigned) {
  std::set<int> ids;
  for (const Trajectory& traj : trajectories)
    if (!ids.insert(traj.id).second)
      throw std::invalid_argument("build_hypotheses: duplicate track id");

  std::vector<const Trajectory*> ordered;
  for (const Trajectory& traj : trajectories) ordered.push_back(&traj);
  std::sort(ordered.begin(), ordered.end(),
            [](const Trajectory* a, const Trajectory* b) { return a->id < b->id; });

  std::vector<Hypothesis> out;
  out.reserve(ordered.size() * static_cast<std::size_t>(cfg.group_size()));
  for (const Trajectory* traj : ordered) {
    const std::vector<BoxState> history = history_rows(*traj, cfg.t_h);

    if (cfg.use_predicted_boxes) {
      const std::vector<BoxState> preds = collect_predicted_candidates(*traj, t, cfg.t_f);
      for (int j = 0; j < cfg.t_f; ++j) {
        const BoxState& cand = preds[static_cast<std::size_t>(j)];
        out.push_back(make_hypothesis(*traj, history, cand,
                                      cand.is_sentinel() ? Provenance::kZeroPad
                                                         : Provenance::kPredicted,
                                      j + 1, -1));
      }
    }

    const double max_dist = cfg.max_match_dist[static_cast<std::size_t>(static_cast<int>(traj->cls))];
    int slots = cfg.w;
    std::set<int> used;
    if (assigned) {
      auto it = assigned->find(traj->id);
      if (it != assigned->end() && it->second >= 0) {
        const Detection& d = detections[static_cast<std::size_t>(it->second)];
        BoxState cand = d.box;
        cand.timestamp = t;
        out.push_back(make_hypothesis(*traj, history, cand, Provenance::kDetected, 0, d.det_id));
        used.insert(it->second);
        --slots;
      }
    }
    if (slots > 0) {
      const BoxState ref = association_ref_pose(*traj, t, cfg);
      const std::vector<RankedDetection> ranked =
          nearest_detections(*traj, ref, detections, cfg.w + static_cast<int>(used.size()),
                             max_dist);
      for (const RankedDetection& rd : ranked) {
        if (slots == 0) break;
        if (rd.det_index >= 0 && used.count(rd.det_index)) continue;
        if (rd.det_index >= 0) {
          BoxState cand = rd.box;
          cand.timestamp = t;
          out.push_back(make_hypothesis(*traj, history, cand, Provenance::kDetected, 0,
                                        detections[static_cast<std::size_t>(rd.det_index)].det_id));
          used.insert(rd.det_index);
        } else {
          out.push_back(
              make_hypothesis(*traj, history, BoxState{}, Provenance::kZeroPad, 0, -1));
        }
        --slots;
      }
      // nearest_detections already sentinel-pads, but a fully-consumed ranking
      // can still leave empty slots when w > 1
      for (; slots > 0; --slots)
        out.push_back(make_hypothesis(*traj, history, BoxState{}, Provenance::kZeroPad, 0, -1));
    }
  }
  return out;
}

Hypothesis augment_hypothesis_scaled(const Hypothesis& source, Rng& rng, double center_scale,
                                     double heading_scale, double size_scale) {
  Hypothesis h = source;
  h.augmented = true;
  if (h.candidate.is_sentinel()) return h;
  BoxState& b = h.candidate;
  b.x += rng.uniform(-0.5, 0.5) * center_scale;
  b.y += rng.uniform(-0.5, 0.5) * center_scale;
  b.heading = wrap_angle(b.heading + rng.uniform(-0.1, 0.1) * heading_scale);
  b.length *= 1.0 + rng.uniform(-0.05, 0.05) * size_scale;
  b.width *= 1.0 + rng.uniform(-0.05, 0.05) * size_scale;
  b.height *= 1.0 + rng.uniform(-0.05, 0.05) * size_scale;
  h.seq.back() = b;
  return h;
}

Hypothesis augment_hypothesis(const Hypothesis& source, Rng& rng) {
  return augment_hypothesis_scaled(source, rng, 1.0, 1.0, 1.0);
}

std::vector<Hypothesis> augment_hypotheses(std::span<const Hypothesis> generated, Rng& rng) {
  std::vector<Hypothesis> out;
  out.reserve(generated.size());
  for (const Hypothesis& h : generated) out.push_back(augment_hypothesis(h, rng));
  return out;
}

}  // namespace mht
