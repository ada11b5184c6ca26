#include "mht3d/encoder.hpp"

#include <cmath>
#include <stdexcept>

namespace mht {

HypothesisEncoder::HypothesisEncoder(ParamStore& store, const std::string& prefix,
                                     const EncoderConfig& cfg, Rng& rng)
    : cfg_(cfg) {
  MlpSpec motion_spec;
  motion_spec.widths.push_back(8);
  for (int w : cfg.motion_hidden) motion_spec.widths.push_back(w);
  motion_spec.widths.push_back(cfg.d);
  motion_mlp_ = Mlp(store, prefix + ".motion", motion_spec, rng);

  MlpSpec point_spec;
  point_spec.widths.push_back(29);
  for (int w : cfg.point_in_hidden) point_spec.widths.push_back(w);
  point_spec.widths.push_back(cfg.d);
  point_in_mlp_ = Mlp(store, prefix + ".point_in", point_spec, rng);

  for (int b = 0; b < cfg.blocks; ++b) {
    self_blocks_.emplace_back(store, prefix + ".app.self" + std::to_string(b), cfg.d, cfg.heads,
                              rng);
    cross_blocks_.emplace_back(store, prefix + ".app.cross" + std::to_string(b), cfg.d, cfg.heads,
                               rng);
  }
  query_ = store.create_zeros(prefix + ".app.query", {1, cfg.d});

  MlpSpec fuse_spec;
  fuse_spec.widths.push_back(2 * cfg.d + kNumClasses);
  for (int w : cfg.fuse_hidden) fuse_spec.widths.push_back(w);
  fuse_spec.widths.push_back(cfg.d);
  fuse_mlp_ = Mlp(store, prefix + ".fuse", fuse_spec, rng);
}

namespace {

// Anchor for the local frame of one hypothesis sequence: the candidate box,
// or the newest real history box when the candidate is the zero sentinel (so
// zero-pad hypotheses stay translation-invariant too).
const BoxState& sequence_anchor(const Hypothesis& h) {
  if (!h.candidate.is_sentinel()) return h.candidate;
  for (auto it = h.seq.rbegin(); it != h.seq.rend(); ++it)
    if (!it->is_sentinel()) return *it;
  throw std::invalid_argument("encode_motion: hypothesis with no valid boxes");
}

}  // namespace

Tensor HypothesisEncoder::encode_motion(std::span<const Hypothesis> hyps) const {
  const int m = static_cast<int>(hyps.size());
  if (m == 0) return Tensor::zeros({0, cfg_.d});

  std::vector<Tensor> feats;
  feats.reserve(hyps.size());
  for (const Hypothesis& h : hyps) {
    const int rows_n = static_cast<int>(h.seq.size());
    const BoxState& anchor = sequence_anchor(h);
    const double c = std::cos(anchor.heading), s = std::sin(anchor.heading);

    std::vector<double> flat(static_cast<std::size_t>(rows_n) * 8, 0.0);
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(rows_n), 0);
    for (int k = 0; k < rows_n; ++k) {
      const BoxState& b = h.seq[static_cast<std::size_t>(k)];
      if (b.is_sentinel()) continue;
      const double dx = b.x - anchor.x, dy = b.y - anchor.y, dz = b.z - anchor.z;
      double* row = flat.data() + static_cast<std::size_t>(k) * 8;
      row[0] = c * dx + s * dy;
      row[1] = -s * dx + c * dy;
      row[2] = dz;
      row[3] = b.length;
      row[4] = b.width;
      row[5] = b.height;
      row[6] = wrap_angle(b.heading - anchor.heading);
      row[7] = static_cast<double>(k - (rows_n - 1));
      mask[static_cast<std::size_t>(k)] = 1;
    }
    const Tensor rows = Tensor::from_data({rows_n, 8}, std::move(flat));
    feats.push_back(masked_max_pool_rows(motion_mlp_.forward(rows), mask));
  }
  return stack_rows(std::span<const Tensor>(feats.data(), feats.size()));
}

Tensor HypothesisEncoder::appearance_features(const Hypothesis& h, int slot,
                                              const PointContext& ctx) const {
  const int y = cfg_.y_points;
  Tensor out = Tensor::zeros({y, 29});
  if (h.candidate.is_sentinel()) {
    // sentinel hypotheses carry no geometry, only the flag channel
    for (int i = 0; i < y; ++i) out.data()[static_cast<std::size_t>(i) * 29 + 28] = 1.0;
    return out;
  }

  std::vector<TimedPoint> merged;
  const int window = std::min<int>(cfg_.point_frames, static_cast<int>(ctx.clouds.size()));
  for (int k = 0; k < window; ++k) {
    const PointCloud* cloud = ctx.clouds[ctx.clouds.size() - 1 - static_cast<std::size_t>(k)];
    if (!cloud) continue;
    for (const Vec3& p : cloud->pts) merged.push_back({p, -static_cast<double>(k)});
  }

  const std::uint64_t seed =
      Rng(ctx.sample_seed).fork(static_cast<std::uint64_t>(h.track_id) * 131071u +
                                static_cast<std::uint64_t>(slot)).next_u64();
  const SampledPoints sampled = crop_and_sample_points(
      std::span<const TimedPoint>(merged.data(), merged.size()), h.candidate, y, seed);

  const Tensor enc = relative_point_encoding(sampled, h.candidate);
  for (int i = 0; i < y; ++i) {
    double* row = out.data() + static_cast<std::size_t>(i) * 29;
    const double* src = enc.data() + static_cast<std::size_t>(i) * 28;
    std::copy(src, src + 28, row);
    row[28] = sampled.empty_crop ? 1.0 : 0.0;
  }
  return out;
}

Tensor HypothesisEncoder::encode_appearance(std::span<const Tensor> point_features) const {
  const int m = static_cast<int>(point_features.size());
  if (m == 0) return Tensor::zeros({0, cfg_.d});

  std::vector<Tensor> rows;
  rows.reserve(point_features.size());
  for (const Tensor& feat : point_features) {
    Tensor tokens = point_in_mlp_.forward(feat);  // [Y, d]
    Tensor v = query_;
    for (int b = 0; b < cfg_.blocks; ++b) {
      tokens = self_blocks_[static_cast<std::size_t>(b)].forward(tokens, tokens);
      v = cross_blocks_[static_cast<std::size_t>(b)].forward(v, tokens);
    }
    rows.push_back(v);  // [1, d]
  }
  return concat_rows(std::span<const Tensor>(rows.data(), rows.size()));
}

Tensor HypothesisEncoder::fuse(const Tensor& e_a, const Tensor& e_m,
                               std::span<const Hypothesis> hyps) const {
  const int m = static_cast<int>(hyps.size());
  if (e_a.dim(0) != m || e_m.dim(0) != m)
    throw std::invalid_argument("fuse: embedding row count does not match hypotheses");
  if (m == 0) return Tensor::zeros({0, cfg_.d});

  Tensor onehot = Tensor::zeros({m, kNumClasses});
  for (int i = 0; i < m; ++i)
    onehot.data()[static_cast<std::size_t>(i) * kNumClasses +
                  static_cast<int>(hyps[static_cast<std::size_t>(i)].cls)] = 1.0;

  const Tensor parts[3] = {e_a, e_m, onehot};
  return fuse_mlp_.forward(concat_cols(std::span<const Tensor>(parts, 3)));
}

Tensor HypothesisEncoder::encode(std::span<const Hypothesis> hyps, const PointContext& ctx) const {
  const int m = static_cast<int>(hyps.size());
  if (m == 0) return Tensor::zeros({0, cfg_.d});

  Tensor e_m = cfg_.use_motion ? encode_motion(hyps) : Tensor::zeros({m, cfg_.d});

  Tensor e_a;
  if (cfg_.use_appearance) {
    std::vector<Tensor> feats;
    feats.reserve(hyps.size());
    for (int i = 0; i < m; ++i)
      feats.push_back(appearance_features(hyps[static_cast<std::size_t>(i)], i, ctx));
    e_a = encode_appearance(std::span<const Tensor>(feats.data(), feats.size()));
  } else {
    e_a = Tensor::zeros({m, cfg_.d});
  }
  return fuse(e_a, e_m, hyps);
}

}  // namespace mht
