#pragma once

#include <map>
#include <span>
#include <vector>

#include "mht3d/geometry.hpp"
#include "mht3d/motion.hpp"
#include "mht3d/sim.hpp"

namespace mht {

// Identified track: bounded box history plus the motion predictions made at
// each past frame (the source of temporally predicted candidate boxes).
struct Trajectory {
  int id = -1;
  ObjectClass cls = ObjectClass::kVehicle;
  int birth_frame = 0;
  std::vector<BoxState> boxes;                 // strictly increasing timestamps
  std::map<int, FuturePrediction> pred_cache;  // frame -> prediction made there
  double last_confidence = 1.0;

  const BoxState& last_box() const;
  // Drops boxes/cache entries no longer needed once frame t is done.
  void prune(int t, int t_h, int t_f);
};

enum class Provenance { kPredicted, kDetected, kZeroPad };

const char* provenance_name(Provenance p);

// One (history trajectory x candidate current-frame box) pairing.
struct Hypothesis {
  int track_id = -1;
  ObjectClass cls = ObjectClass::kVehicle;
  Provenance provenance = Provenance::kZeroPad;
  int pred_lag = 0;    // 1..t_f for predicted candidates
  int det_id = -1;     // detection id for detected candidates
  bool augmented = false;
  BoxState candidate;  // at the current frame; sentinel for ZeroPad
  // t_h history boxes (front sentinel-padded) followed by the candidate.
  std::vector<BoxState> seq;
};

struct HypothesisGenConfig {
  int t_h = 10;
  int t_f = 5;
  int w = 1;
  std::array<double, 3> max_match_dist = {2.0, 0.5, 1.0};  // vehicle, pedestrian, cyclist
  bool use_predicted_boxes = true;                          // ablation: drop predicted slots
  bool rank_by_last_observed = false;                       // rank detections by last pose
  // slots of predicted provenance actually generated (clamped by t_f)
  int predicted_slots() const { return use_predicted_boxes ? t_f : 0; }
  int group_size() const { return predicted_slots() + w; }
};

// For lag j = 1..t_f: the prediction made at frame t-j read at its j-th step
// (which targets t). A track younger than j frames falls back to the most
// recent prediction that still covers t, else the zero sentinel.
std::vector<BoxState> collect_predicted_candidates(const Trajectory& traj, int t, int t_f);

struct RankedDetection {
  int det_index = -1;  // index into the frame's detection list, -1 = sentinel
  BoxState box;        // sentinel when det_index < 0
};

// Same-class detections ranked by BEV center distance to ref_pose, at most w
// of them within max_dist; remaining slots hold the zero sentinel.
std::vector<RankedDetection> nearest_detections(const Trajectory& traj, const BoxState& ref_pose,
                                                std::span<const Detection> detections, int w,
                                                double max_dist);

// The reference pose used for detection ranking: lag-1 predicted pose when
// available (and enabled), otherwise the last observed box.
BoxState association_ref_pose(const Trajectory& traj, int t, const HypothesisGenConfig& cfg);

// The hybrid hypothesis set for frame t: per trajectory (ascending id), the
// predicted slots followed by the detected/zero-pad slots. `assigned` maps
// track id -> detection index from the one-to-one greedy match; when null all
// detected slots come from nearest_detections ranking.
std::vector<Hypothesis> build_hypotheses(std::span<const Trajectory> trajectories,
                                         std::span<const Detection> detections, int t,
                                         const HypothesisGenConfig& cfg,
                                         const std::map<int, int>* assigned = nullptr);

// Training-time copy with candidate-box noise: center jitter +-0.5 m (x, y),
// heading +-0.1 rad, sizes +-5 %. Sentinels pass through unjittered.
Hypothesis augment_hypothesis(const Hypothesis& source, Rng& rng);
std::vector<Hypothesis> augment_hypotheses(std::span<const Hypothesis> generated, Rng& rng);

// Scaled jitter for hard-negative mining: multiplies the base magnitudes.
Hypothesis augment_hypothesis_scaled(const Hypothesis& source, Rng& rng, double center_scale,
                                     double heading_scale, double size_scale);

}  // namespace mht
