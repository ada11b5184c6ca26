#include "mht3d/interaction.hpp"

#include <cmath>
#include <stdexcept>

namespace mht {

Grouping Grouping::from_hypotheses(std::span<const Hypothesis> hyps) {
  Grouping g;
  int start = 0;
  for (int i = 0; i < static_cast<int>(hyps.size()); ++i) {
    const bool last = i + 1 == static_cast<int>(hyps.size());
    if (last || hyps[static_cast<std::size_t>(i + 1)].track_id !=
                    hyps[static_cast<std::size_t>(i)].track_id) {
      g.groups.emplace_back(start, i + 1 - start);
      start = i + 1;
    }
  }
  return g;
}

void Grouping::validate(int m) const {
  int expect = 0;
  for (const auto& [start, count] : groups) {
    if (start != expect || count <= 0)
      throw std::invalid_argument("grouping: groups must partition the rows in order");
    expect = start + count;
  }
  if (expect != m) throw std::invalid_argument("grouping: does not cover all rows");
}

int Grouping::total() const {
  int n = 0;
  for (const auto& [start, count] : groups) n += count;
  return n;
}

const char* interaction_mode_name(InteractionMode m) {
  switch (m) {
    case InteractionMode::kNone: return "none";
    case InteractionMode::kGlobal: return "global";
    case InteractionMode::kGlobalLocal: return "global-local";
  }
  return "unknown";
}

InteractionMode interaction_mode_from_name(const std::string& name) {
  if (name == "none") return InteractionMode::kNone;
  if (name == "global") return InteractionMode::kGlobal;
  if (name == "global-local") return InteractionMode::kGlobalLocal;
  throw std::invalid_argument("unknown interaction mode: " + name);
}

InteractionStack::InteractionStack(ParamStore& store, const std::string& prefix,
                                   const InteractionConfig& cfg, Rng& rng)
    : cfg_(cfg) {
  for (int r = 0; r < cfg.rounds; ++r) {
    global_blocks_.emplace_back(store, prefix + ".global" + std::to_string(r), cfg.d, cfg.heads,
                                rng);
    local_blocks_.emplace_back(store, prefix + ".local" + std::to_string(r), cfg.d, cfg.heads,
                               rng);
  }
}

Tensor InteractionStack::global_round(const Tensor& x, int round) const {
  if (x.dim(0) == 0) return x;
  return global_blocks_.at(static_cast<std::size_t>(round)).forward(x, x);
}

Tensor InteractionStack::local_round(const Tensor& x, const Grouping& grouping, int round) const {
  grouping.validate(x.dim(0));
  if (x.dim(0) == 0) return x;
  const AttentionBlock& block = local_blocks_.at(static_cast<std::size_t>(round));
  std::vector<Tensor> outs;
  outs.reserve(grouping.groups.size());
  for (const auto& [start, count] : grouping.groups) {
    const Tensor g = slice_rows(x, start, count);
    outs.push_back(block.forward(g, g));
  }
  return concat_rows(std::span<const Tensor>(outs.data(), outs.size()));
}

Tensor InteractionStack::interact(const Tensor& e, const Grouping& grouping) const {
  if (cfg_.mode == InteractionMode::kNone) return e;
  Tensor x = e;
  for (int r = 0; r < cfg_.rounds; ++r) {
    x = global_round(x, r);
    if (cfg_.mode == InteractionMode::kGlobalLocal) x = local_round(x, grouping, r);
  }
  return x;
}

ScoringHeads::ScoringHeads(ParamStore& store, const std::string& prefix, int d, Rng& rng) {
  MlpSpec conf_spec{{d, d, 1}};
  conf_ = Mlp(store, prefix + ".conf", conf_spec, rng);
  MlpSpec refine_spec{{d, d, 7}};
  refine_ = Mlp(store, prefix + ".refine", refine_spec, rng);
}

Tensor ScoringHeads::confidence_logits(const Tensor& features) const {
  return conf_.forward(features);
}

Tensor ScoringHeads::confidence(const Tensor& features) const {
  return sigmoid(confidence_logits(features));
}

Tensor ScoringHeads::residuals(const Tensor& features) const {
  return refine_.forward(features);
}

std::array<double, 7> encode_box_residual(const BoxState& candidate, const BoxState& target) {
  if (candidate.is_sentinel())
    throw std::invalid_argument("encode_box_residual: sentinel candidate");
  const double diag = std::sqrt(candidate.length * candidate.length +
                                candidate.width * candidate.width +
                                candidate.height * candidate.height);
  // center delta in the candidate's local frame, matching the heading-
  // canonical appearance encoding
  const double c = std::cos(candidate.heading), s = std::sin(candidate.heading);
  const double dx = target.x - candidate.x, dy = target.y - candidate.y;
  return {(c * dx + s * dy) / diag,
          (-s * dx + c * dy) / diag,
          (target.z - candidate.z) / diag,
          std::log(target.length / candidate.length),
          std::log(target.width / candidate.width),
          std::log(target.height / candidate.height),
          wrap_angle(target.heading - candidate.heading)};
}

BoxState apply_box_residual(const BoxState& candidate, std::span<const double> residual) {
  if (residual.size() != 7) throw std::invalid_argument("apply_box_residual: need 7 values");
  if (candidate.is_sentinel()) return candidate;  // refinement skipped on sentinels
  const double diag = std::sqrt(candidate.length * candidate.length +
                                candidate.width * candidate.width +
                                candidate.height * candidate.height);
  const double c = std::cos(candidate.heading), s = std::sin(candidate.heading);
  const double lx = residual[0] * diag, ly = residual[1] * diag;
  BoxState out = candidate;
  out.x = candidate.x + c * lx - s * ly;
  out.y = candidate.y + s * lx + c * ly;
  out.z = candidate.z + residual[2] * diag;
  out.length = candidate.length * std::exp(residual[3]);
  out.width = candidate.width * std::exp(residual[4]);
  out.height = candidate.height * std::exp(residual[5]);
  out.heading = wrap_angle(candidate.heading + residual[6]);
  return out;
}

}  // namespace mht
