#pragma once

#include <span>
#include <string>
#include <vector>

#include "mht3d/geometry.hpp"
#include "mht3d/hypothesis.hpp"
#include "mht3d/nn.hpp"

namespace mht {

// Partition of the hypothesis rows into per-track groups of contiguous
// indices, in track order.
struct Grouping {
  std::vector<std::pair<int, int>> groups;  // (start, count)

  static Grouping from_hypotheses(std::span<const Hypothesis> hyps);
  void validate(int m) const;  // must partition 0..m-1 exactly
  int total() const;
};

enum class InteractionMode { kNone, kGlobal, kGlobalLocal };

const char* interaction_mode_name(InteractionMode m);
InteractionMode interaction_mode_from_name(const std::string& name);

struct InteractionConfig {
  int d = 64;
  int heads = 4;
  int rounds = 3;
  InteractionMode mode = InteractionMode::kGlobalLocal;
};

// Alternating scene-level and per-track self-attention over the hypothesis
// embeddings. Local round parameters are shared across groups within a round;
// each round has its own parameters.
class InteractionStack {
 public:
  InteractionStack() = default;
  InteractionStack(ParamStore& store, const std::string& prefix, const InteractionConfig& cfg,
                   Rng& rng);

  const InteractionConfig& config() const { return cfg_; }

  Tensor global_round(const Tensor& x, int round) const;
  Tensor local_round(const Tensor& x, const Grouping& grouping, int round) const;
  // rounds x (global, local) according to the mode; rounds = 0 or mode none
  // is the identity.
  Tensor interact(const Tensor& e, const Grouping& grouping) const;

 private:
  InteractionConfig cfg_;
  std::vector<AttentionBlock> global_blocks_;
  std::vector<AttentionBlock> local_blocks_;
};

// Confidence (sigmoid) and 7-residual box-refinement heads.
class ScoringHeads {
 public:
  ScoringHeads() = default;
  ScoringHeads(ParamStore& store, const std::string& prefix, int d, Rng& rng);

  Tensor confidence_logits(const Tensor& features) const;  // [M, 1]
  Tensor confidence(const Tensor& features) const;         // [M, 1], in (0, 1)
  Tensor residuals(const Tensor& features) const;          // [M, 7]

 private:
  Mlp conf_;
  Mlp refine_;
};

// Residual layout: (dx, dy, dz) normalized by the candidate box diagonal,
// (dl, dw, dh) as log size ratios, dheading in radians. encode/apply are
// exact inverses for non-sentinel candidates.
std::array<double, 7> encode_box_residual(const BoxState& candidate, const BoxState& target);
BoxState apply_box_residual(const BoxState& candidate, std::span<const double> residual);

}  // namespace mht
