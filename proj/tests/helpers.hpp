#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "mht3d/rng.hpp"
#include "mht3d/scorer.hpp"
#include "mht3d/sim.hpp"
#include "mht3d/tensor.hpp"

namespace mht::testing {

inline Tensor rand_tensor(std::vector<int> shape, Rng& rng, double lo = -1.0, double hi = 1.0,
                          bool requires_grad = false) {
  Tensor t = Tensor::zeros(std::move(shape), requires_grad);
  for (std::size_t i = 0; i < t.numel(); ++i) t.data()[i] = rng.uniform(lo, hi);
  return t;
}

// Value on the 2^-10 grid; sums and differences of such values (within range)
// are exact in doubles, which the bit-exact translation-invariance tests rely on.
inline double dyadic(Rng& rng, double lo, double hi) {
  const double span = hi - lo;
  const int steps = static_cast<int>(span * 1024.0);
  return lo + static_cast<double>(rng.uniform_int(steps + 1)) / 1024.0;
}

// Scores 1 for the hypothesis in each group whose candidate lies closest to a
// same-class GT box of the frame (within a sanity gate), 0 otherwise. Refined
// boxes are the raw candidates.
class OracleScorer : public HypothesisScorer {
 public:
  explicit OracleScorer(const Scene& scene, double gate = 2.0) : scene_(&scene), gate_(gate) {}

  std::vector<ScoredHypothesis> score(std::span<const Hypothesis> hyps,
                                      const PointContext& ctx) override {
    std::vector<ScoredHypothesis> out(hyps.size());
    const auto& gt = scene_->gt[static_cast<std::size_t>(ctx.t)];

    auto nearest_gt_dist = [&](const Hypothesis& h) {
      double best = 1e300;
      for (const GtBox& g : gt) {
        if (g.cls != h.cls) continue;
        best = std::min(best, bev_center_dist(g.box, h.candidate));
      }
      return best;
    };

    std::size_t start = 0;
    while (start < hyps.size()) {
      std::size_t stop = start;
      while (stop < hyps.size() && hyps[stop].track_id == hyps[start].track_id) ++stop;
      double best = 1e300;
      std::size_t best_i = start;
      for (std::size_t i = start; i < stop; ++i) {
        out[i].refined = hyps[i].candidate;
        if (hyps[i].candidate.is_sentinel()) continue;
        const double d = nearest_gt_dist(hyps[i]);
        if (d < best) {
          best = d;
          best_i = i;
        }
      }
      if (best <= gate_) out[best_i].confidence = 1.0;
      start = stop;
    }
    return out;
  }

 private:
  const Scene* scene_;
  double gate_;
};

// Returns a fixed score per provenance; refined = candidate.
class StubScorer : public HypothesisScorer {
 public:
  StubScorer(double detected, double predicted, double zeropad)
      : detected_(detected), predicted_(predicted), zeropad_(zeropad) {}

  std::vector<ScoredHypothesis> score(std::span<const Hypothesis> hyps,
                                      const PointContext&) override {
    std::vector<ScoredHypothesis> out(hyps.size());
    for (std::size_t i = 0; i < hyps.size(); ++i) {
      out[i].refined = hyps[i].candidate;
      switch (hyps[i].provenance) {
        case Provenance::kDetected: out[i].confidence = detected_; break;
        case Provenance::kPredicted: out[i].confidence = predicted_; break;
        case Provenance::kZeroPad: out[i].confidence = zeropad_; break;
      }
    }
    return out;
  }

 private:
  double detected_, predicted_, zeropad_;
};

}  // namespace mht::testing
