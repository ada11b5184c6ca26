#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mht3d/motion.hpp"
#include "mht3d/scorer.hpp"
#include "mht3d/sim.hpp"

namespace mht {

struct ModelConfig {
  MotionConfig motion;
  TrackNetConfig tracknet;
  std::uint64_t init_seed = 42;
};

// The full parameter set: a frozen-after-stage-1 motion predictor under
// "motion." and the scoring network under "tracknet.".
struct Model {
  ModelConfig config;
  ParamStore store;
  MotionPredictor motion;
  TrackNet tracknet;

  explicit Model(const ModelConfig& cfg);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  std::vector<std::pair<std::string, Tensor>> motion_params() const;
  std::vector<std::pair<std::string, Tensor>> tracknet_params() const;
};

// ---- stage 1: motion predictor ------------------------------------------------

struct Stage1Config {
  double lr = 1e-3;
  int epochs = 30;
  int batch = 16;  // history windows per optimizer step
  // Center/heading noise added to the input windows (targets stay exact), so
  // the predictor learns to denoise tracked histories instead of copying
  // their errors forward. 0 trains on the raw GT trajectories.
  double input_noise = 0.0;
  std::uint64_t noise_seed = 11;
  std::uint64_t shuffle_seed = 7;
};

struct Stage1Result {
  std::vector<double> epoch_loss;
};

Stage1Result train_motion_stage1(Model& model, std::span<const Scene> scenes,
                                 const Stage1Config& cfg);

// Mean Euclidean center error of decoded predictions over every (object,
// frame) sample and the full horizon.
double motion_center_error(const Model& model, std::span<const Scene> scenes);

// ---- stage 2: scoring network ----------------------------------------------------

struct Stage2Config {
  double lr = 1e-3;
  int epochs = 12;
  int batch = 4;  // frame samples per optimizer step
  double reg_weight = 1.0;  // relative weight of the regression term
  double pos_iou_vehicle = 0.5;      // positive label: BEV IoU gate for vehicles
  double pos_dist_ped_cyc = 0.5;     // positive label: center gate for ped/cyc (m)
  // Fraction of training trajectories given a smoothly growing offset from
  // the ground truth. A wandering track's hypotheses are self-consistent, so
  // the scorer only learns to shut them down (and to prefer the true
  // detection for recovery) if such histories appear in training.
  double drift_prob = 0.3;
  double drift_max = 3.5;  // meters at the newest history frame
  std::uint64_t shuffle_seed = 8;
  std::uint64_t augment_seed = 5;
};

// One training frame: 4 hypotheses per live GT object (1 predicted, 1
// detected, 2 augmented) with confidence labels and residual targets.
struct HypoSample {
  int scene_index = 0;
  int frame = 0;
  std::vector<Hypothesis> hyps;
  std::vector<double> labels;            // 1 = positive
  std::vector<double> residual_targets;  // M x 7, zeros on negatives
  std::vector<double> residual_weights;  // M, 1 on positives
  PointContext ctx;                      // cloud pointers into the source scene
};

// Builds samples with the (frozen) motion predictor providing predicted
// candidates. Scenes must outlive the samples.
std::vector<HypoSample> build_stage2_samples(const Model& model, std::span<const Scene> scenes,
                                             const Stage2Config& cfg);

struct Stage2Result {
  std::vector<double> epoch_loss;
  std::vector<double> epoch_conf_loss;
  std::vector<double> epoch_reg_loss;
};

// Trains "tracknet." parameters only; "motion." stays frozen (verified by
// hash). Throws on non-finite loss, naming the offending sample.
Stage2Result train_tracknet_stage2(Model& model, std::span<const Scene> scenes,
                                   const Stage2Config& cfg);

// Positive-vs-negative ranking quality of the trained confidences over the
// given samples (Mann-Whitney AUC).
double stage2_score_auc(const Model& model, std::span<const HypoSample> samples);

double score_auc(std::span<const double> positives, std::span<const double> negatives);

}  // namespace mht
