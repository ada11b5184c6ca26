#include "mht3d/scorer.hpp"

#include <stdexcept>

namespace mht {

TrackNet::TrackNet(ParamStore& store, const std::string& prefix, const TrackNetConfig& cfg,
                   Rng& rng)
    : cfg_(cfg) {
  if (cfg.encoder.d != cfg.interaction.d)
    throw std::invalid_argument("tracknet: encoder and interaction widths differ");
  encoder_ = HypothesisEncoder(store, prefix + ".enc", cfg.encoder, rng);
  interaction_ = InteractionStack(store, prefix + ".inter", cfg.interaction, rng);
  heads_ = ScoringHeads(store, prefix + ".head", cfg.encoder.d, rng);
}

Tensor TrackNet::features(std::span<const Hypothesis> hyps, const PointContext& ctx) const {
  const Tensor e = encoder_.encode(hyps, ctx);
  const Grouping grouping = Grouping::from_hypotheses(hyps);
  return interaction_.interact(e, grouping);
}

std::vector<ScoredHypothesis> TrackNet::score(std::span<const Hypothesis> hyps,
                                              const PointContext& ctx) const {
  NoGradGuard no_grad;
  std::vector<ScoredHypothesis> out(hyps.size());
  if (hyps.empty()) return out;

  const Tensor feats = features(hyps, ctx);
  const Tensor conf = heads_.confidence(feats);
  const Tensor res = heads_.residuals(feats);
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    ScoredHypothesis& s = out[i];
    s.confidence = conf.at(static_cast<int>(i), 0);
    for (int j = 0; j < 7; ++j) s.residual[static_cast<std::size_t>(j)] = res.at(static_cast<int>(i), j);
    s.refined = apply_box_residual(hyps[i].candidate,
                                   std::span<const double>(s.residual.data(), 7));
  }
  return out;
}

}  // namespace mht
