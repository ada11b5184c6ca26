#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "mht3d/geometry.hpp"
#include "mht3d/nn.hpp"
#include "mht3d/tensor.hpp"

namespace mht {

// Fixed-length history window in the local frame of its last valid box:
// centers are translated/rotated so the anchor sits at the origin with
// heading 0. Rows shorter than t_h are front-padded with zeros and mask 0.
// Row k carries time encoding k - (t_h - 1): 0 for the most recent frame.
struct HistoryWindow {
  std::vector<std::array<double, 8>> rows;  // (x, y, z, l, w, h, heading, time)
  std::vector<std::uint8_t> mask;           // 1 = real frame
  std::array<double, 3> anchor = {0, 0, 0};  // global (x, y, heading) of the last valid box
  BoxState last_box;                         // source of copied size / z at decode time
  int t_h = 0;

  int valid_count() const;
};

// boxes: trajectory history in increasing timestamp order; the last entry is
// the window's anchor frame.
HistoryWindow make_history_window(std::span<const BoxState> boxes, int t_h);

struct FuturePrediction {
  int made_at = -1;                              // frame of the anchor box
  std::vector<std::array<double, 3>> deltas;     // local (dx, dy, dheading) per step
  std::vector<BoxState> boxes;                   // decoded, timestamps made_at+1 ...

  // Decoded box targeting frame `frame`, or nullptr when out of horizon.
  const BoxState* box_for_frame(int frame) const;
};

struct MotionConfig {
  int t_h = 10;
  int t_f = 5;
  int d = 64;                      // encoder output width
  std::vector<int> enc_hidden = {64};
  std::vector<int> head_hidden = {64};
};

// History encoder (per-frame MLP + masked max-pool) and future-state head.
class MotionPredictor {
 public:
  MotionPredictor() = default;
  MotionPredictor(ParamStore& store, const std::string& prefix, const MotionConfig& cfg, Rng& rng);

  const MotionConfig& config() const { return cfg_; }

  // [d] feature; throws when the window has no valid frames.
  Tensor encode_history(const HistoryWindow& window) const;
  // [batch, d]
  Tensor encode_history_batch(std::span<const HistoryWindow> windows) const;
  // [batch, t_f * 3] local deltas
  Tensor predict_deltas(const Tensor& encoded) const;

  // Inference: encode, predict and decode; size and z copied from the anchor.
  FuturePrediction predict(const HistoryWindow& window) const;

 private:
  MotionConfig cfg_;
  Mlp encoder_;
  Mlp head_;
};

// Mean absolute error over masked (x, y, heading) entries, heading wrapped to
// (-pi, pi]. All-masked-out batches yield 0 and set *warned_empty.
Tensor motion_loss(const Tensor& pred, const std::vector<double>& gt,
                   const std::vector<std::uint8_t>& mask, bool* warned_empty = nullptr);

}  // namespace mht
