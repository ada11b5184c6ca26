#pragma once

#include <span>
#include <string>
#include <vector>

#include "mht3d/encoder.hpp"
#include "mht3d/interaction.hpp"

namespace mht {

struct ScoredHypothesis {
  double confidence = 0.0;          // sigmoid of the head logit
  BoxState refined;                 // candidate with the residual applied
  std::array<double, 7> residual{};
};

// Pluggable scoring: the trained network in production, oracles in tests.
class HypothesisScorer {
 public:
  virtual ~HypothesisScorer() = default;
  virtual std::vector<ScoredHypothesis> score(std::span<const Hypothesis> hyps,
                                              const PointContext& ctx) = 0;
};

struct TrackNetConfig {
  EncoderConfig encoder;
  InteractionConfig interaction;
};

// Encoder + interaction + heads behind one parameter prefix.
class TrackNet {
 public:
  TrackNet() = default;
  TrackNet(ParamStore& store, const std::string& prefix, const TrackNetConfig& cfg, Rng& rng);

  const TrackNetConfig& config() const { return cfg_; }
  const HypothesisEncoder& encoder() const { return encoder_; }
  const InteractionStack& interaction() const { return interaction_; }
  const ScoringHeads& heads() const { return heads_; }

  // Tape-recording path used by training: interacted features [M, d].
  Tensor features(std::span<const Hypothesis> hyps, const PointContext& ctx) const;

  // Inference: confidences + refined boxes, no tape.
  std::vector<ScoredHypothesis> score(std::span<const Hypothesis> hyps,
                                      const PointContext& ctx) const;

 private:
  TrackNetConfig cfg_;
  HypothesisEncoder encoder_;
  InteractionStack interaction_;
  ScoringHeads heads_;
};

class NetworkScorer : public HypothesisScorer {
 public:
  explicit NetworkScorer(const TrackNet& net) : net_(&net) {}
  std::vector<ScoredHypothesis> score(std::span<const Hypothesis> hyps,
                                      const PointContext& ctx) override {
    return net_->score(hyps, ctx);
  }

 private:
  const TrackNet* net_;
};

}  // namespace mht
