#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "mht3d/hypothesis.hpp"
#include "mht3d/motion.hpp"
#include "mht3d/scorer.hpp"
#include "mht3d/sim.hpp"

namespace mht {

struct TrackerConfig {
  int t_h = 10;
  int t_f = 5;
  int w = 1;
  std::array<double, 3> max_match_dist = {2.0, 0.5, 1.0};   // vehicle, pedestrian, cyclist
  std::array<double, 3> kill_threshold = {0.7, 0.6, 0.7};
  std::array<double, 3> birth_threshold = {0.8, 0.72, 0.8};
  double newborn_overlap_iou = 0.1;
  bool use_predicted_boxes = true;
  bool rank_by_last_observed = false;
  bool nms_enabled = false;          // on for external detection streams
  double nms_iou = 0.7;
  double nms_score_threshold = 0.1;
  int point_frames = 5;
  std::uint64_t sample_seed = 9001;  // base for deterministic point sampling

  void validate() const;
  HypothesisGenConfig hypo_config() const;
};

struct TrackRecord {
  int id = -1;
  ObjectClass cls = ObjectClass::kVehicle;
  BoxState box;
  double score = 0.0;
  Provenance provenance = Provenance::kZeroPad;
  int pred_lag = 0;
};

struct FrameResult {
  int t = 0;
  std::vector<TrackRecord> surviving;  // refined boxes appended this frame
  std::vector<int> killed;
  std::vector<TrackRecord> new_born;
  std::vector<double> scores;          // every hypothesis confidence (diagnostics)
};

// One-to-one greedy assignment: repeatedly take the globally smallest
// same-class BEV center distance below the class gate. Ties resolve by
// (distance, track index, detection index). Returns (track idx, det idx).
std::vector<std::pair<int, int>> greedy_match(std::span<const BoxState> ref_poses,
                                              std::span<const ObjectClass> classes,
                                              std::span<const Detection> detections,
                                              const std::array<double, 3>& max_dist);

// Argmax confidence within a group; exact ties prefer Detected, then
// Predicted by ascending lag, then ZeroPad, then the lowest index.
int select_best(std::span<const Hypothesis> group, std::span<const double> scores);

struct TrackChoice {
  int track_id = -1;
  ObjectClass cls = ObjectClass::kVehicle;
  double score = 0.0;
  BoxState refined;
  Provenance provenance = Provenance::kZeroPad;
  int pred_lag = 0;
  int det_id = -1;
};

// Threshold-driven termination, survival, and birth of tracks. Chosen
// zero-pad hypotheses terminate their track (there is no box to extend with).
// det_consumed marks detections already bound to a track this frame; new ids
// start at first_new_id.
FrameResult life_cycle(std::span<const TrackChoice> choices,
                       std::span<const Detection> detections,
                       std::span<const std::uint8_t> det_consumed, const TrackerConfig& cfg,
                       int t, int first_new_id);

// Score-descending same-class suppression at the given IoU; detections below
// score_thresh are dropped first.
std::vector<Detection> nms_filter(std::span<const Detection> detections, double iou_thresh,
                                  double score_thresh);

class Tracker {
 public:
  Tracker(const TrackerConfig& cfg, const MotionPredictor& motion, HypothesisScorer& scorer);

  // clouds: recent point clouds, oldest first, ending at frame t. Frames must
  // arrive in strictly increasing order.
  FrameResult step(int t, std::span<const Detection> detections,
                   std::span<const PointCloud* const> clouds);

  const std::vector<Trajectory>& tracks() const { return tracks_; }

 private:
  TrackerConfig cfg_;
  const MotionPredictor* motion_;
  HypothesisScorer* scorer_;
  std::vector<Trajectory> tracks_;  // kept sorted by id
  bool started_ = false;
  int last_frame_ = 0;
  int next_id_ = 1;
};

struct TrackOutput {
  std::vector<FrameResult> frames;
};

// Runs the tracker over every frame of a scene.
TrackOutput run_tracker(const Scene& scene, const TrackerConfig& cfg,
                        const MotionPredictor& motion, HypothesisScorer& scorer);

}  // namespace mht
