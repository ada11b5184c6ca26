#pragma once

#include <map>
#include <span>
#include <vector>

#include "mht3d/sim.hpp"
#include "mht3d/tracker.hpp"

namespace mht {

// Per-class CLEAR-MOT counts. MOTA = 1 - (FP + Miss + IDS) / GT; it can be
// negative and is defined as 1 for an empty class.
struct MotTally {
  long gt = 0;
  long fp = 0;
  long miss = 0;
  long ids = 0;
  long matches = 0;

  double mota() const { return gt == 0 ? 1.0 : 1.0 - static_cast<double>(fp + miss + ids) / gt; }
  double fp_rate() const { return gt == 0 ? 0.0 : static_cast<double>(fp) / gt; }
  double miss_rate() const { return gt == 0 ? 0.0 : static_cast<double>(miss) / gt; }
  double ids_rate() const { return gt == 0 ? 0.0 : static_cast<double>(ids) / gt; }

  MotTally& operator+=(const MotTally& o);
};

struct EvalConfig {
  double dist_gate = 2.0;  // BEV center-distance gate (meters)
  bool use_iou_gate = false;
  double iou_gate = 0.5;
  int min_points = 0;      // drop GT boxes with fewer simulator points
};

struct FrameMatch {
  std::vector<std::pair<int, int>> matches;  // (gt index, track index)
  std::vector<int> unmatched_gt;
  std::vector<int> unmatched_tracks;
};

// Single-frame, single-class matching: pairs carried over from the previous
// frame are preferred (continuation), the remainder is greedy by distance (or
// IoU). prev maps GT object id -> track id.
FrameMatch match_frame(std::span<const GtBox> gt, std::span<const TrackRecord> tracks,
                       const std::map<int, int>& prev, const EvalConfig& cfg);

// CLEAR-MOT accumulation for one class over an aligned frame sequence.
MotTally compute_mota(const std::vector<std::vector<GtBox>>& gt_frames,
                      const std::vector<std::vector<TrackRecord>>& track_frames,
                      ObjectClass cls, const EvalConfig& cfg);

// Evaluates a tracker run against the scene ground truth, one tally per class.
std::map<ObjectClass, MotTally> evaluate_scene(const Scene& scene, const TrackOutput& output,
                                               const EvalConfig& cfg);

}  // namespace mht
