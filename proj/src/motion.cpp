#include "mht3d/motion.hpp"

#include <cmath>
#include <stdexcept>

namespace mht {

int HistoryWindow::valid_count() const {
  int n = 0;
  for (auto m : mask) n += m ? 1 : 0;
  return n;
}

HistoryWindow make_history_window(std::span<const BoxState> boxes, int t_h) {
  if (t_h < 1) throw std::invalid_argument("make_history_window: t_h must be >= 1");
  if (boxes.empty()) throw std::invalid_argument("make_history_window: empty history");

  HistoryWindow win;
  win.t_h = t_h;
  win.rows.assign(static_cast<std::size_t>(t_h), {0, 0, 0, 0, 0, 0, 0, 0});
  win.mask.assign(static_cast<std::size_t>(t_h), 0);

  const BoxState& anchor = boxes.back();
  win.anchor = {anchor.x, anchor.y, anchor.heading};
  win.last_box = anchor;
  const double c = std::cos(anchor.heading), s = std::sin(anchor.heading);

  const int take = std::min<int>(t_h, static_cast<int>(boxes.size()));
  for (int i = 0; i < take; ++i) {
    const BoxState& b = boxes[boxes.size() - static_cast<std::size_t>(take) + i];
    const int k = t_h - take + i;
    // local frame: subtract the anchor center first, then rotate by -heading
    const double dx = b.x - anchor.x, dy = b.y - anchor.y, dz = b.z - anchor.z;
    auto& row = win.rows[static_cast<std::size_t>(k)];
    row[0] = c * dx + s * dy;
    row[1] = -s * dx + c * dy;
    row[2] = dz;
    row[3] = b.length;
    row[4] = b.width;
    row[5] = b.height;
    row[6] = wrap_angle(b.heading - anchor.heading);
    row[7] = static_cast<double>(k - (t_h - 1));
    win.mask[static_cast<std::size_t>(k)] = 1;
  }
  return win;
}

const BoxState* FuturePrediction::box_for_frame(int frame) const {
  const int lag = frame - made_at;
  if (lag < 1 || lag > static_cast<int>(boxes.size())) return nullptr;
  return &boxes[static_cast<std::size_t>(lag - 1)];
}

MotionPredictor::MotionPredictor(ParamStore& store, const std::string& prefix,
                                 const MotionConfig& cfg, Rng& rng)
    : cfg_(cfg) {
  MlpSpec enc_spec;
  enc_spec.widths.push_back(8);
  for (int w : cfg.enc_hidden) enc_spec.widths.push_back(w);
  enc_spec.widths.push_back(cfg.d);
  encoder_ = Mlp(store, prefix + ".enc", enc_spec, rng);

  MlpSpec head_spec;
  head_spec.widths.push_back(cfg.d);
  for (int w : cfg.head_hidden) head_spec.widths.push_back(w);
  head_spec.widths.push_back(cfg.t_f * 3);
  head_ = Mlp(store, prefix + ".head", head_spec, rng);
}

Tensor MotionPredictor::encode_history(const HistoryWindow& window) const {
  if (window.valid_count() == 0)
    throw std::invalid_argument("encode_history: window has no valid frames");
  const int t_h = static_cast<int>(window.rows.size());
  std::vector<double> flat(static_cast<std::size_t>(t_h) * 8);
  for (int k = 0; k < t_h; ++k)
    for (int j = 0; j < 8; ++j)
      flat[static_cast<std::size_t>(k) * 8 + j] = window.rows[static_cast<std::size_t>(k)][j];
  const Tensor rows = Tensor::from_data({t_h, 8}, std::move(flat));
  return masked_max_pool_rows(encoder_.forward(rows), window.mask);
}

Tensor MotionPredictor::encode_history_batch(std::span<const HistoryWindow> windows) const {
  std::vector<Tensor> feats;
  feats.reserve(windows.size());
  for (const HistoryWindow& w : windows) feats.push_back(encode_history(w));
  return stack_rows(std::span<const Tensor>(feats.data(), feats.size()));
}

Tensor MotionPredictor::predict_deltas(const Tensor& encoded) const {
  return head_.forward(encoded);
}

FuturePrediction MotionPredictor::predict(const HistoryWindow& window) const {
  NoGradGuard no_grad;
  Tensor feat = encode_history(window);
  Tensor batch = stack_rows(std::span<const Tensor>(&feat, 1));
  Tensor deltas = predict_deltas(batch);  // [1, t_f * 3]

  FuturePrediction out;
  out.made_at = window.last_box.timestamp;
  const double c = std::cos(window.anchor[2]), s = std::sin(window.anchor[2]);
  for (int j = 0; j < cfg_.t_f; ++j) {
    const double dx = deltas.at(0, j * 3 + 0);
    const double dy = deltas.at(0, j * 3 + 1);
    const double dh = deltas.at(0, j * 3 + 2);
    out.deltas.push_back({dx, dy, dh});
    BoxState b = window.last_box;  // size, z and score carried forward
    b.x = window.anchor[0] + c * dx - s * dy;
    b.y = window.anchor[1] + s * dx + c * dy;
    b.heading = wrap_angle(window.anchor[2] + dh);
    b.timestamp = out.made_at + 1 + j;
    out.boxes.push_back(b);
  }
  return out;
}

Tensor motion_loss(const Tensor& pred, const std::vector<double>& gt,
                   const std::vector<std::uint8_t>& mask, bool* warned_empty) {
  return masked_l1_wrap(pred, gt, mask, warned_empty);
}

}  // namespace mht
