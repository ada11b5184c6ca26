#include "mht3d/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace mht {

// ---- ParamStore ---------------------------------------------------------------

Tensor ParamStore::insert(const std::string& name, Tensor t) {
  if (params_.count(name)) throw std::invalid_argument("param exists: " + name);
  params_.emplace(name, t);
  return t;
}

Tensor ParamStore::create_weight(const std::string& name, int fan_in, int fan_out, Rng& rng) {
  if (fan_in <= 0 || fan_out <= 0)
    throw std::invalid_argument("create_weight: non-positive dims for " + name);
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Tensor t = Tensor::zeros({fan_in, fan_out}, /*requires_grad=*/true);
  for (std::size_t i = 0; i < t.numel(); ++i) t.data()[i] = rng.uniform(-bound, bound);
  return insert(name, t);
}

Tensor ParamStore::create_zeros(const std::string& name, std::vector<int> shape) {
  return insert(name, Tensor::zeros(std::move(shape), /*requires_grad=*/true));
}

Tensor ParamStore::create_const(const std::string& name, std::vector<int> shape, double value) {
  Tensor t = Tensor::zeros(std::move(shape), /*requires_grad=*/true);
  std::fill(t.data(), t.data() + t.numel(), value);
  return insert(name, t);
}

Tensor ParamStore::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::invalid_argument("param missing: " + name);
  return it->second;
}

bool ParamStore::has(const std::string& name) const { return params_.count(name) > 0; }

std::vector<std::pair<std::string, Tensor>> ParamStore::items() const {
  return {params_.begin(), params_.end()};
}

std::vector<std::pair<std::string, Tensor>> ParamStore::items_with_prefix(
    const std::string& prefix) const {
  std::vector<std::pair<std::string, Tensor>> out;
  for (const auto& [name, t] : params_)
    if (name.rfind(prefix, 0) == 0) out.emplace_back(name, t);
  return out;
}

void ParamStore::zero_grads() {
  for (auto& [name, t] : params_) t.zero_grad();
}

// ---- Mlp ------------------------------------------------------------------------

Mlp::Mlp(ParamStore& store, const std::string& prefix, const MlpSpec& spec, Rng& rng) {
  if (spec.widths.size() < 2) throw std::invalid_argument("mlp: needs at least one layer");
  for (int w : spec.widths)
    if (w <= 0) throw std::invalid_argument("mlp: widths must be positive");
  in_ = spec.widths.front();
  out_ = spec.widths.back();
  for (std::size_t l = 0; l + 1 < spec.widths.size(); ++l) {
    const std::string base = prefix + ".l" + std::to_string(l);
    weights_.push_back(store.create_weight(base + ".w", spec.widths[l], spec.widths[l + 1], rng));
    biases_.push_back(store.create_zeros(base + ".b", {spec.widths[l + 1]}));
  }
}

Tensor Mlp::forward(const Tensor& x) const {
  if (weights_.empty()) throw std::logic_error("mlp: not initialized");
  if (x.dim(-1) != in_)
    throw std::invalid_argument("mlp: input trailing dimension " + std::to_string(x.dim(-1)) +
                                " does not match spec width " + std::to_string(in_));
  Tensor h = x;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    h = linear(h, weights_[l], biases_[l]);
    if (l + 1 < weights_.size()) h = relu(h);
  }
  return h;
}

// ---- AttentionBlock ---------------------------------------------------------------

AttentionBlock::AttentionBlock(ParamStore& store, const std::string& prefix, int dim, int heads,
                               Rng& rng)
    : dim_(dim), heads_(heads) {
  if (dim <= 0 || heads <= 0 || dim % heads != 0)
    throw std::invalid_argument("attention: dim must be divisible by heads");
  wq_ = store.create_weight(prefix + ".wq", dim, dim, rng);
  bq_ = store.create_zeros(prefix + ".bq", {dim});
  wk_ = store.create_weight(prefix + ".wk", dim, dim, rng);
  bk_ = store.create_zeros(prefix + ".bk", {dim});
  wv_ = store.create_weight(prefix + ".wv", dim, dim, rng);
  bv_ = store.create_zeros(prefix + ".bv", {dim});
  wo_ = store.create_weight(prefix + ".wo", dim, dim, rng);
  bo_ = store.create_zeros(prefix + ".bo", {dim});
  ln1_g_ = store.create_const(prefix + ".ln1.g", {dim}, 1.0);
  ln1_b_ = store.create_zeros(prefix + ".ln1.b", {dim});
  const int hidden = 2 * dim;
  ffn_w1_ = store.create_weight(prefix + ".ffn.w1", dim, hidden, rng);
  ffn_b1_ = store.create_zeros(prefix + ".ffn.b1", {hidden});
  ffn_w2_ = store.create_weight(prefix + ".ffn.w2", hidden, dim, rng);
  ffn_b2_ = store.create_zeros(prefix + ".ffn.b2", {dim});
  ln2_g_ = store.create_const(prefix + ".ln2.g", {dim}, 1.0);
  ln2_b_ = store.create_zeros(prefix + ".ln2.b", {dim});
}

Tensor AttentionBlock::forward(const Tensor& query_in, const Tensor& kv_in) const {
  if (dim_ == 0) throw std::logic_error("attention: not initialized");
  if (query_in.ndim() != 2 || kv_in.ndim() != 2 || query_in.dim(1) != dim_ ||
      kv_in.dim(1) != dim_)
    throw std::invalid_argument("attention: inputs must be [n, dim]");
  if (query_in.dim(0) == 0) return Tensor::zeros({0, dim_});

  const int dh = dim_ / heads_;
  const Tensor q = linear(query_in, wq_, bq_);
  const Tensor k = linear(kv_in, wk_, bk_);
  const Tensor v = linear(kv_in, wv_, bv_);

  std::vector<Tensor> ctx;
  ctx.reserve(static_cast<std::size_t>(heads_));
  for (int h = 0; h < heads_; ++h) {
    const Tensor qh = slice_cols(q, h * dh, dh);
    const Tensor kh = slice_cols(k, h * dh, dh);
    const Tensor vh = slice_cols(v, h * dh, dh);
    const Tensor scores = scale(matmul(qh, transpose(kh)), 1.0 / std::sqrt(double(dh)));
    const Tensor attn = softmax_rows(scores);
    ctx.push_back(matmul_canonical(attn, vh));
  }
  const Tensor merged = concat_cols(std::span<const Tensor>(ctx.data(), ctx.size()));
  const Tensor attn_out = linear(merged, wo_, bo_);
  const Tensor x = layer_norm(add(query_in, attn_out), ln1_g_, ln1_b_);
  const Tensor ffn = linear(relu(linear(x, ffn_w1_, ffn_b1_)), ffn_w2_, ffn_b2_);
  return layer_norm(add(x, ffn), ln2_g_, ln2_b_);
}

// ---- Adam --------------------------------------------------------------------------

void adam_step(Tensor& param, const std::vector<double>& grad, AdamState& state, double lr,
               double beta1, double beta2, double eps) {
  const std::size_t n = param.numel();
  if (grad.size() != n) throw std::invalid_argument("adam_step: grad size differs");
  if (state.m.size() != n) {
    state.m.assign(n, 0.0);
    state.v.assign(n, 0.0);
    state.step = 0;
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < n; ++i) {
    const double g = grad[i];
    state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g;
    state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * g * g;
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    param.data()[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

Adam::Adam(std::vector<std::pair<std::string, Tensor>> params, double lr, double beta1,
           double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  states_.resize(params_.size());
}

void Adam::step() {
  thread_local std::vector<double> zero;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i].second;
    if (p.has_grad()) {
      std::vector<double> g(p.grad(), p.grad() + p.numel());
      adam_step(p, g, states_[i], lr_, beta1_, beta2_, eps_);
    } else {
      zero.assign(p.numel(), 0.0);
      adam_step(p, zero, states_[i], lr_, beta1_, beta2_, eps_);
    }
  }
}

void Adam::zero_grad() {
  for (auto& [name, p] : params_) p.zero_grad();
}

// ---- grad check ----------------------------------------------------------------------

GradCheckResult grad_check_against(const std::function<double()>& forward,
                                   const std::vector<std::pair<std::string, Tensor>>& params,
                                   const std::vector<std::vector<double>>& analytic,
                                   double eps) {
  if (analytic.size() != params.size())
    throw std::invalid_argument("grad_check: analytic gradient count differs");
  NoGradGuard no_grad;
  GradCheckResult res;
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor t = params[p].second;
    if (analytic[p].size() != t.numel())
      throw std::invalid_argument("grad_check: analytic size differs for " + params[p].first);
    for (std::size_t i = 0; i < t.numel(); ++i) {
      const double saved = t.data()[i];
      t.data()[i] = saved + eps;
      const double f_plus = forward();
      t.data()[i] = saved - eps;
      const double f_minus = forward();
      t.data()[i] = saved;
      const double numeric = (f_plus - f_minus) / (2.0 * eps);
      const double a = analytic[p][i];
      const double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-8});
      const double rel = std::fabs(a - numeric) / denom;
      if (rel > res.max_rel_err) {
        res.max_rel_err = rel;
        res.worst_param = params[p].first;
        res.worst_index = static_cast<int>(i);
        res.analytic = a;
        res.numeric = numeric;
      }
    }
  }
  return res;
}

GradCheckResult grad_check(const std::function<Tensor()>& forward,
                           const std::vector<std::pair<std::string, Tensor>>& params,
                           double eps) {
  for (const auto& [name, p] : params) {
    Tensor t = p;
    t.zero_grad();
  }
  Tensor loss = forward();
  backward(loss);
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (const auto& [name, p] : params) {
    if (p.grad())
      analytic.emplace_back(p.grad(), p.grad() + p.numel());
    else
      analytic.emplace_back(p.numel(), 0.0);
  }
  auto scalar_forward = [&forward]() { return forward().item(); };
  return grad_check_against(scalar_forward, params, analytic, eps);
}

}  // namespace mht
