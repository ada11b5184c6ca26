#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mht3d/hypothesis.hpp"
#include "mht3d/nn.hpp"

namespace mht {

// Point clouds feeding short-term appearance encoding. clouds.back() is the
// current frame t; clouds[size-1-k] is frame t-k. Entries may be null when a
// frame has no cloud.
struct PointContext {
  int t = 0;
  std::vector<const PointCloud*> clouds;
  std::uint64_t sample_seed = 0;
};

struct EncoderConfig {
  int d = 64;           // embedding width
  int y_points = 32;    // sampled points per hypothesis
  int heads = 4;
  int blocks = 3;       // appearance self/cross iteration blocks
  int point_frames = 5;  // short-term point window length
  int t_h = 10;
  std::vector<int> motion_hidden = {64};
  std::vector<int> point_in_hidden = {64};
  std::vector<int> fuse_hidden = {128};
  bool use_motion = true;      // hypothesis embedding ablation arms
  bool use_appearance = true;
};

// Long short-term hypothesis feature encoding: motion embedding from box
// sequences, appearance embedding from cropped points via iterated self/cross
// attention, fused with the class one-hot.
class HypothesisEncoder {
 public:
  HypothesisEncoder() = default;
  HypothesisEncoder(ParamStore& store, const std::string& prefix, const EncoderConfig& cfg,
                    Rng& rng);

  const EncoderConfig& config() const { return cfg_; }

  // E_m: per-frame MLP over the (t_h + 1) x 8 box rows (normalized to the
  // candidate's local frame) + masked max-pool. [M, d]
  Tensor encode_motion(std::span<const Hypothesis> hyps) const;

  // Raw per-point features for one hypothesis: 27 representative-point
  // differences + time offset + sentinel/empty flag -> [y_points, 29].
  Tensor appearance_features(const Hypothesis& h, int slot, const PointContext& ctx) const;

  // E_a from per-hypothesis raw point features. [M, d]
  Tensor encode_appearance(std::span<const Tensor> point_features) const;

  // E = MLP(concat(E_a, E_m, one-hot class)). [M, d]
  Tensor fuse(const Tensor& e_a, const Tensor& e_m, std::span<const Hypothesis> hyps) const;

  // Full encoding pipeline; M = 0 yields an empty [0, d] tensor.
  Tensor encode(std::span<const Hypothesis> hyps, const PointContext& ctx) const;

 private:
  EncoderConfig cfg_;
  Mlp motion_mlp_;    // 8 -> d per sequence row
  Mlp point_in_mlp_;  // 29 -> d per point
  std::vector<AttentionBlock> self_blocks_;
  std::vector<AttentionBlock> cross_blocks_;
  Tensor query_;      // zero-initialized learnable aggregation query [1, d]
  Mlp fuse_mlp_;      // 2d + n_classes -> d
};

}  // namespace mht
