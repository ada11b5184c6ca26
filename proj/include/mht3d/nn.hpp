#pragma once

#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mht3d/rng.hpp"
#include "mht3d/tensor.hpp"

namespace mht {

// Named parameter registry. Names are hierarchical ("motion.enc.l0.w") so a
// checkpoint can be saved or loaded per subsystem. Iteration is sorted by
// name, which pins the serialization order.
class ParamStore {
 public:
  // Weight init is uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)).
  Tensor create_weight(const std::string& name, int fan_in, int fan_out, Rng& rng);
  Tensor create_zeros(const std::string& name, std::vector<int> shape);
  Tensor create_const(const std::string& name, std::vector<int> shape, double value);

  Tensor get(const std::string& name) const;
  bool has(const std::string& name) const;
  std::size_t size() const { return params_.size(); }

  std::vector<std::pair<std::string, Tensor>> items() const;
  std::vector<std::pair<std::string, Tensor>> items_with_prefix(const std::string& prefix) const;

  void zero_grads();

 private:
  Tensor insert(const std::string& name, Tensor t);
  std::map<std::string, Tensor> params_;
};

struct MlpSpec {
  // widths[0] is the input dimension; each consecutive pair is one linear
  // layer. ReLU between hidden layers, identity on the output layer.
  std::vector<int> widths;
};

class Mlp {
 public:
  Mlp() = default;
  Mlp(ParamStore& store, const std::string& prefix, const MlpSpec& spec, Rng& rng);

  Tensor forward(const Tensor& x) const;  // x: [..., in] -> [..., out]
  int in_dim() const { return in_; }
  int out_dim() const { return out_; }

 private:
  std::vector<Tensor> weights_;
  std::vector<Tensor> biases_;
  int in_ = 0;
  int out_ = 0;
};

inline Tensor mlp_forward(const Tensor& x, const Mlp& mlp) { return mlp.forward(x); }

// One transformer encoder block: multi-head scaled dot-product attention with
// learned Q/K/V/output projections, residual + layer norm, then a
// position-wise feed-forward sublayer (hidden width 2*dim), residual +
// layer norm. Self-attention is forward(x, x).
class AttentionBlock {
 public:
  AttentionBlock() = default;
  AttentionBlock(ParamStore& store, const std::string& prefix, int dim, int heads, Rng& rng);

  Tensor forward(const Tensor& query_in, const Tensor& kv_in) const;
  int dim() const { return dim_; }

 private:
  int dim_ = 0;
  int heads_ = 0;
  Tensor wq_, bq_, wk_, bk_, wv_, bv_, wo_, bo_;
  Tensor ln1_g_, ln1_b_;
  Tensor ffn_w1_, ffn_b1_, ffn_w2_, ffn_b2_;
  Tensor ln2_g_, ln2_b_;
};

inline Tensor multi_head_attention(const Tensor& query_in, const Tensor& kv_in,
                                   const AttentionBlock& block) {
  return block.forward(query_in, kv_in);
}

// ---- optimizer ---------------------------------------------------------------

struct AdamState {
  std::vector<double> m, v;
  long step = 0;
};

// Standard Adam with bias correction on one parameter tensor.
void adam_step(Tensor& param, const std::vector<double>& grad, AdamState& state, double lr,
               double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

class Adam {
 public:
  Adam(std::vector<std::pair<std::string, Tensor>> params, double lr, double beta1 = 0.9,
       double beta2 = 0.999, double eps = 1e-8);

  void step();       // consumes .grad buffers; missing grads count as zero
  void zero_grad();
  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }

 private:
  std::vector<std::pair<std::string, Tensor>> params_;
  std::vector<AdamState> states_;
  double lr_, beta1_, beta2_, eps_;
};

// ---- gradient checking ---------------------------------------------------------

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::string worst_param;
  int worst_index = -1;
  double analytic = 0.0;
  double numeric = 0.0;
  bool ok(double tol = 1e-4) const { return max_rel_err < tol; }
};

// Central finite differences per parameter element against the given analytic
// gradients. Relative error denominator is max(|analytic|, |numeric|, 1e-8).
GradCheckResult grad_check_against(const std::function<double()>& forward,
                                   const std::vector<std::pair<std::string, Tensor>>& params,
                                   const std::vector<std::vector<double>>& analytic,
                                   double eps = 1e-5);

// Runs forward once with the tape on, backpropagates, then checks the
// recorded gradients with central differences (forward evaluations only).
GradCheckResult grad_check(const std::function<Tensor()>& forward,
                           const std::vector<std::pair<std::string, Tensor>>& params,
                           double eps = 1e-5);

}  // namespace mht
