#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "mht3d/geometry.hpp"

namespace mht {

struct SceneSpec {
  int frames = 40;
  double dt = 0.1;                          // seconds per frame
  std::array<int, 3> counts = {5, 2, 1};    // objects per class (vehicle, pedestrian, cyclist)
  double p_const_velocity = 0.5;            // motion model mix, remainder renormalized
  double p_const_turn = 0.3;
  double p_stop_go = 0.2;
  double bound = 75.0;                      // field of view is [-bound, bound] in x and y
  std::uint64_t seed = 0;
};

// Per-class speed caps used by the generator and the physical-consistency checks.
constexpr std::array<double, 3> kMaxSpeed = {15.0, 2.0, 8.0};     // m/s
constexpr double kMaxTurnRate = 1.0;                              // rad/s

struct DetectionNoise {
  std::array<double, 3> drop_prob = {0.0, 0.0, 0.0};
  double sigma_center = 0.0;        // m, per axis
  double sigma_heading = 0.0;       // rad
  double sigma_size_rel = 0.0;      // relative
  double fp_rate = 0.0;             // expected false positives per frame
  double score_alpha_true = 8.0;    // true detections ~ Beta(alpha, beta)
  double score_beta_true = 2.0;
  double score_alpha_fp = 2.0;      // false positives ~ low beta
  double score_beta_fp = 8.0;
  double fixed_true_score = -1.0;   // >= 0 pins every true-detection score

  static DetectionNoise noiseless();
  // Drop 0.15, sigma_center 0.15 m, sigma_heading 0.05 rad, 2 FP/frame.
  static DetectionNoise centerpoint_like();
};

struct PointSimConfig {
  std::array<int, 3> base_points = {64, 24, 32};  // at ref_range
  double ref_range = 10.0;
  double decay = 1.5;                              // density ~ (ref/r)^decay
  int min_points = 2;
  double clutter_per_frame = 40.0;                 // expected background points
};

struct GtBox {
  int object_id = -1;
  ObjectClass cls = ObjectClass::kVehicle;
  BoxState box;
  int n_points = -1;  // filled by sample_points
};

struct Detection {
  int det_id = -1;
  ObjectClass cls = ObjectClass::kVehicle;
  BoxState box;  // box.score carries the detection confidence
};

struct PointCloud {
  std::vector<Vec3> pts;
};

struct Scene {
  SceneSpec spec;
  std::vector<std::vector<GtBox>> gt;            // [frame]
  std::vector<std::vector<Detection>> detections;  // [frame]
  std::vector<PointCloud> clouds;                // [frame]

  int frames() const { return static_cast<int>(gt.size()); }
};

// Ground-truth trajectories under the spec's motion-model mix. Objects keep a
// stable id for the whole scene and never move more than their class speed cap
// allows per frame. Throws if objects cannot be placed in the bounds.
Scene generate_scene(const SceneSpec& spec);

// Drops, perturbs and augments the GT stream into per-frame detections.
void simulate_detections(Scene& scene, const DetectionNoise& noise, std::uint64_t seed);

// Surface-sampled object points (density decays with range) plus uniform
// background clutter for one frame.
PointCloud sample_points_frame(const Scene& scene, int frame, const PointSimConfig& cfg,
                               std::uint64_t seed);

// Fills scene.clouds for every frame and records per-object point counts.
void sample_points(Scene& scene, const PointSimConfig& cfg, std::uint64_t seed);

// generate + detections + points with sub-seeds forked from spec.seed.
Scene make_scene(const SceneSpec& spec, const DetectionNoise& noise,
                 const PointSimConfig& points = PointSimConfig{});

}  // namespace mht
