#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace mht {

struct TensorImpl;

// Dense row-major tensor of 64-bit floats. Copying a Tensor copies a handle;
// the buffer is shared. Ops executed while grad mode is on record a node with
// parent handles and a backward closure, forming the reverse-mode tape.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
  static Tensor full(std::vector<int> shape, double value);
  static Tensor from_data(std::vector<int> shape, std::vector<double> data,
                          bool requires_grad = false);
  static Tensor scalar(double value);

  bool defined() const { return impl_ != nullptr; }
  const std::vector<int>& shape() const;
  int ndim() const;
  int dim(int i) const;  // negative i counts from the back
  std::size_t numel() const;

  double* data();
  const double* data() const;
  // Gradient buffer; allocated by backward(). Null until then.
  double* grad();
  const double* grad() const;
  bool has_grad() const;
  void zero_grad();

  double item() const;  // single-element tensors only
  double at(int i) const;
  double at(int i, int j) const;
  double at(int i, int j, int k) const;

  bool requires_grad() const;

  TensorImpl* impl() const { return impl_.get(); }
  const std::shared_ptr<TensorImpl>& handle() const { return impl_; }
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

 private:
  std::shared_ptr<TensorImpl> impl_;
};

struct TensorImpl {
  std::vector<int> shape;
  std::vector<double> data;
  std::vector<double> grad;
  bool requires_grad = false;
  // tracked = participates in some backward pass (parameter or derived node)
  bool tracked = false;
  std::vector<std::shared_ptr<TensorImpl>> parents;
  std::function<void(TensorImpl&)> backward;
};

// Grad mode is thread-local; inference paths run with it off so no tape is built.
bool grad_enabled();
void set_grad_enabled(bool on);

struct NoGradGuard {
  NoGradGuard() : prev_(grad_enabled()) { set_grad_enabled(false); }
  ~NoGradGuard() { set_grad_enabled(prev_); }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

// Reverse pass from a scalar loss. Visits every reachable tape node exactly
// once in reverse topological order, accumulating into .grad buffers.
void backward(const Tensor& loss);

// Sum whose result depends only on the multiset of addends, not their order:
// terms are sorted ascending before sequential accumulation. Used where
// permutation invariance must hold bit-exactly (softmax denominators and the
// attention value contraction).
double canonical_sum(const double* xs, int n);

// ---- elementwise / linear algebra -----------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);

// [n,k] x [k,m] -> [n,m]
Tensor matmul(const Tensor& a, const Tensor& b);
// Same contraction with canonical_sum over k (order-independent output bits).
Tensor matmul_canonical(const Tensor& a, const Tensor& b);
// x: [..., in], w: [in, out], b: [out] -> [..., out]
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);
Tensor transpose(const Tensor& x);

// ---- reductions / shape ----------------------------------------------------

// Elementwise max over the first axis: [n, d] -> [d]. Gradient goes to the
// first (lowest-index) argmax row per column.
Tensor max_pool_rows(const Tensor& x);
// Rows with mask 0 are excluded from the pool; at least one row must be valid.
Tensor masked_max_pool_rows(const Tensor& x, const std::vector<std::uint8_t>& mask);

// Softmax over the trailing axis, max-subtracted, canonical denominator.
Tensor softmax_rows(const Tensor& x);

// Per-row normalization over the trailing axis.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = 1e-5);

Tensor concat_cols(std::span<const Tensor> parts);  // all [n, d_i]
Tensor slice_cols(const Tensor& x, int offset, int length);
Tensor stack_rows(std::span<const Tensor> rows);   // each [d] or [1, d]
Tensor slice_rows(const Tensor& x, int start, int count);  // [n, d] -> [count, d]
Tensor concat_rows(std::span<const Tensor> parts);         // all [n_i, d]
Tensor reshape(const Tensor& x, std::vector<int> shape);
Tensor sum_all(const Tensor& x);
Tensor mean_all(const Tensor& x);

// ---- fused loss / decode ops ------------------------------------------------

// Mean of max(z,0) - z*y + log(1 + exp(-|z|)) over all elements.
Tensor bce_with_logits_mean(const Tensor& logits, const std::vector<double>& labels);

// pred, target: [n, T, 3] (x, y, heading); mask: [n, T]. Mean absolute error
// over masked entries and all 3 channels; the heading channel difference is
// wrapped to (-pi, pi]. If nothing is masked in, returns 0 and sets
// *all_masked_out when provided.
Tensor masked_l1_wrap(const Tensor& pred, const std::vector<double>& target,
                      const std::vector<std::uint8_t>& mask, bool* all_masked_out = nullptr);

// Smooth-L1 (beta = 1) over rows with weight 1, averaged over
// (sum of weights) * columns. Weights select the positive rows.
Tensor smooth_l1_rows(const Tensor& pred, const std::vector<double>& target,
                      const std::vector<double>& row_weights);

// deltas: [B, T*3] local (dx, dy, dheading) per step; anchors: per window
// (x, y, heading) of the last valid frame. Output: global (x, y, heading)
// per step, heading unwrapped.
Tensor decode_future(const Tensor& deltas, const std::vector<std::array<double, 3>>& anchors,
                     int t_future);

}  // namespace mht
