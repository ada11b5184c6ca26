#include "mht3d/eval.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace mht {

MotTally& MotTally::operator+=(const MotTally& o) {
  gt += o.gt;
  fp += o.fp;
  miss += o.miss;
  ids += o.ids;
  matches += o.matches;
  return *this;
}

namespace {

bool within_gate(const BoxState& gt, const BoxState& track, const EvalConfig& cfg) {
  if (cfg.use_iou_gate) return bev_iou(gt, track) >= cfg.iou_gate;
  return bev_center_dist(gt, track) <= cfg.dist_gate;
}

}  // namespace

FrameMatch match_frame(std::span<const GtBox> gt, std::span<const TrackRecord> tracks,
                       const std::map<int, int>& prev, const EvalConfig& cfg) {
  FrameMatch out;
  std::vector<std::uint8_t> gt_used(gt.size(), 0), track_used(tracks.size(), 0);

  // continuation pass: keep last frame's pairing when still within the gate
  for (int gi = 0; gi < static_cast<int>(gt.size()); ++gi) {
    auto it = prev.find(gt[static_cast<std::size_t>(gi)].object_id);
    if (it == prev.end()) continue;
    for (int ti = 0; ti < static_cast<int>(tracks.size()); ++ti) {
      if (track_used[static_cast<std::size_t>(ti)]) continue;
      if (tracks[static_cast<std::size_t>(ti)].id != it->second) continue;
      if (within_gate(gt[static_cast<std::size_t>(gi)].box, tracks[static_cast<std::size_t>(ti)].box,
                      cfg)) {
        out.matches.emplace_back(gi, ti);
        gt_used[static_cast<std::size_t>(gi)] = 1;
        track_used[static_cast<std::size_t>(ti)] = 1;
      }
      break;
    }
  }

  // greedy pass over the remainder
  struct Pair {
    double key;
    int gi, ti;
  };
  std::vector<Pair> pairs;
  for (int gi = 0; gi < static_cast<int>(gt.size()); ++gi) {
    if (gt_used[static_cast<std::size_t>(gi)]) continue;
    for (int ti = 0; ti < static_cast<int>(tracks.size()); ++ti) {
      if (track_used[static_cast<std::size_t>(ti)]) continue;
      const BoxState& g = gt[static_cast<std::size_t>(gi)].box;
      const BoxState& b = tracks[static_cast<std::size_t>(ti)].box;
      if (!within_gate(g, b, cfg)) continue;
      const double key = cfg.use_iou_gate ? -bev_iou(g, b) : bev_center_dist(g, b);
      pairs.push_back({key, gi, ti});
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    if (a.key != b.key) return a.key < b.key;
    if (a.gi != b.gi) return a.gi < b.gi;
    return a.ti < b.ti;
  });
  for (const Pair& p : pairs) {
    if (gt_used[static_cast<std::size_t>(p.gi)] || track_used[static_cast<std::size_t>(p.ti)])
      continue;
    gt_used[static_cast<std::size_t>(p.gi)] = 1;
    track_used[static_cast<std::size_t>(p.ti)] = 1;
    out.matches.emplace_back(p.gi, p.ti);
  }

  for (int gi = 0; gi < static_cast<int>(gt.size()); ++gi)
    if (!gt_used[static_cast<std::size_t>(gi)]) out.unmatched_gt.push_back(gi);
  for (int ti = 0; ti < static_cast<int>(tracks.size()); ++ti)
    if (!track_used[static_cast<std::size_t>(ti)]) out.unmatched_tracks.push_back(ti);
  return out;
}

MotTally compute_mota(const std::vector<std::vector<GtBox>>& gt_frames,
                      const std::vector<std::vector<TrackRecord>>& track_frames,
                      ObjectClass cls, const EvalConfig& cfg) {
  if (gt_frames.size() != track_frames.size())
    throw std::invalid_argument("compute_mota: frame counts differ");

  MotTally tally;
  std::map<int, int> prev;          // gt object id -> track id at last match
  std::map<int, int> last_matched;  // across gaps, for IDS accounting

  for (std::size_t f = 0; f < gt_frames.size(); ++f) {
    std::vector<GtBox> gt;
    for (const GtBox& g : gt_frames[f])
      if (g.cls == cls && (cfg.min_points <= 0 || g.n_points < 0 || g.n_points >= cfg.min_points))
        gt.push_back(g);
    std::vector<TrackRecord> tracks;
    for (const TrackRecord& t : track_frames[f])
      if (t.cls == cls) tracks.push_back(t);

    const FrameMatch fm = match_frame(std::span<const GtBox>(gt.data(), gt.size()),
                                      std::span<const TrackRecord>(tracks.data(), tracks.size()),
                                      prev, cfg);

    tally.gt += static_cast<long>(gt.size());
    tally.miss += static_cast<long>(fm.unmatched_gt.size());
    tally.fp += static_cast<long>(fm.unmatched_tracks.size());
    tally.matches += static_cast<long>(fm.matches.size());

    std::map<int, int> next_prev;
    for (const auto& [gi, ti] : fm.matches) {
      const int obj = gt[static_cast<std::size_t>(gi)].object_id;
      const int tid = tracks[static_cast<std::size_t>(ti)].id;
      auto it = last_matched.find(obj);
      if (it != last_matched.end() && it->second != tid) tally.ids += 1;
      last_matched[obj] = tid;
      next_prev[obj] = tid;
    }
    prev = std::move(next_prev);
  }
  return tally;
}

std::map<ObjectClass, MotTally> evaluate_scene(const Scene& scene, const TrackOutput& output,
                                               const EvalConfig& cfg) {
  if (static_cast<int>(output.frames.size()) != scene.frames())
    throw std::invalid_argument("evaluate_scene: track output frame count differs from scene");

  std::vector<std::vector<TrackRecord>> track_frames(static_cast<std::size_t>(scene.frames()));
  for (std::size_t f = 0; f < output.frames.size(); ++f) {
    const FrameResult& r = output.frames[f];
    if (r.t != static_cast<int>(f))
      throw std::invalid_argument("evaluate_scene: track output frames misaligned");
    track_frames[f] = r.surviving;
    for (const TrackRecord& rec : r.new_born) track_frames[f].push_back(rec);
  }

  std::map<ObjectClass, MotTally> out;
  for (int c = 0; c < kNumClasses; ++c)
    out[static_cast<ObjectClass>(c)] =
        compute_mota(scene.gt, track_frames, static_cast<ObjectClass>(c), cfg);
  return out;
}

}  // namespace mht
