#include "mht3d/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace mht {

namespace {

constexpr double kPi = 3.14159265358979323846;

thread_local bool g_grad_enabled = true;

std::size_t shape_numel(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw std::invalid_argument("tensor: negative dimension");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

std::shared_ptr<TensorImpl> make_impl(std::vector<int> shape) {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data.assign(shape_numel(impl->shape), 0.0);
  return impl;
}

bool tracked(const Tensor& t) { return t.defined() && t.impl()->tracked; }

void attach(Tensor& out, std::vector<std::shared_ptr<TensorImpl>> parents,
            std::function<void(TensorImpl&)> fn) {
  out.impl()->tracked = true;
  out.impl()->parents = std::move(parents);
  out.impl()->backward = std::move(fn);
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw std::invalid_argument(std::string(op) + ": operand shapes differ");
}

}  // namespace

bool grad_enabled() { return g_grad_enabled; }
void set_grad_enabled(bool on) { g_grad_enabled = on; }

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
  Tensor t(make_impl(std::move(shape)));
  t.impl()->requires_grad = requires_grad;
  t.impl()->tracked = requires_grad;
  return t;
}

Tensor Tensor::full(std::vector<int> shape, double value) {
  Tensor t = zeros(std::move(shape));
  std::fill(t.impl()->data.begin(), t.impl()->data.end(), value);
  return t;
}

Tensor Tensor::from_data(std::vector<int> shape, std::vector<double> data, bool requires_grad) {
  if (shape_numel(shape) != data.size())
    throw std::invalid_argument("tensor: data length does not match shape");
  Tensor t(make_impl(std::move(shape)));
  t.impl()->data = std::move(data);
  t.impl()->requires_grad = requires_grad;
  t.impl()->tracked = requires_grad;
  return t;
}

Tensor Tensor::scalar(double value) { return from_data({1}, {value}); }

const std::vector<int>& Tensor::shape() const { return impl_->shape; }
int Tensor::ndim() const { return static_cast<int>(impl_->shape.size()); }

int Tensor::dim(int i) const {
  const int n = ndim();
  if (i < 0) i += n;
  if (i < 0 || i >= n) throw std::out_of_range("tensor: dim index");
  return impl_->shape[static_cast<std::size_t>(i)];
}

std::size_t Tensor::numel() const { return impl_->data.size(); }
double* Tensor::data() { return impl_->data.data(); }
const double* Tensor::data() const { return impl_->data.data(); }
double* Tensor::grad() { return impl_->grad.empty() ? nullptr : impl_->grad.data(); }
const double* Tensor::grad() const { return impl_->grad.empty() ? nullptr : impl_->grad.data(); }
bool Tensor::has_grad() const { return !impl_->grad.empty(); }

void Tensor::zero_grad() {
  impl_->grad.assign(impl_->data.size(), 0.0);
}

double Tensor::item() const {
  if (numel() != 1) throw std::invalid_argument("tensor: item() on non-scalar");
  return impl_->data[0];
}

double Tensor::at(int i) const { return impl_->data.at(static_cast<std::size_t>(i)); }

double Tensor::at(int i, int j) const {
  if (ndim() != 2) throw std::invalid_argument("tensor: at(i,j) needs 2 dims");
  return impl_->data.at(static_cast<std::size_t>(i) * impl_->shape[1] + j);
}

double Tensor::at(int i, int j, int k) const {
  if (ndim() != 3) throw std::invalid_argument("tensor: at(i,j,k) needs 3 dims");
  const std::size_t s1 = impl_->shape[1], s2 = impl_->shape[2];
  return impl_->data.at((static_cast<std::size_t>(i) * s1 + j) * s2 + k);
}

bool Tensor::requires_grad() const { return impl_->requires_grad; }

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1)
    throw std::invalid_argument("backward: loss must be a defined scalar");

  // Iterative post-order DFS over tracked parents.
  std::vector<TensorImpl*> order;
  std::unordered_set<TensorImpl*> visited;
  struct Frame {
    TensorImpl* node;
    std::size_t next;
  };
  std::vector<Frame> stack;
  visited.insert(loss.impl());
  stack.push_back({loss.impl(), 0});
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next < f.node->parents.size()) {
      TensorImpl* p = f.node->parents[f.next++].get();
      if (p->tracked && !visited.count(p)) {
        visited.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }

  for (TensorImpl* n : order) n->grad.assign(n->data.size(), 0.0);
  loss.impl()->grad[0] = 1.0;

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorImpl* n = *it;
    if (n->backward) n->backward(*n);
  }
}

double canonical_sum(const double* xs, int n) {
  if (n <= 0) return 0.0;
  thread_local std::vector<double> buf;
  buf.assign(xs, xs + n);
  std::sort(buf.begin(), buf.end());
  double s = 0.0;
  for (double v : buf) s += v;
  return s;
}

// ---- elementwise ------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  Tensor out = Tensor::zeros(a.shape());
  const std::size_t n = out.numel();
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] + b.data()[i];
  if (grad_enabled() && (tracked(a) || tracked(b))) {
    attach(out, {a.handle(), b.handle()}, [](TensorImpl& o) {
      for (auto& p : o.parents)
        if (p->tracked)
          for (std::size_t i = 0; i < o.grad.size(); ++i) p->grad[i] += o.grad[i];
    });
  }
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  Tensor out = Tensor::zeros(a.shape());
  const std::size_t n = out.numel();
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] - b.data()[i];
  if (grad_enabled() && (tracked(a) || tracked(b))) {
    attach(out, {a.handle(), b.handle()}, [](TensorImpl& o) {
      auto& pa = o.parents[0];
      auto& pb = o.parents[1];
      for (std::size_t i = 0; i < o.grad.size(); ++i) {
        if (pa->tracked) pa->grad[i] += o.grad[i];
        if (pb->tracked) pb->grad[i] -= o.grad[i];
      }
    });
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  Tensor out = Tensor::zeros(a.shape());
  const std::size_t n = out.numel();
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] * b.data()[i];
  if (grad_enabled() && (tracked(a) || tracked(b))) {
    attach(out, {a.handle(), b.handle()}, [](TensorImpl& o) {
      auto& pa = o.parents[0];
      auto& pb = o.parents[1];
      for (std::size_t i = 0; i < o.grad.size(); ++i) {
        if (pa->tracked) pa->grad[i] += o.grad[i] * pb->data[i];
        if (pb->tracked) pb->grad[i] += o.grad[i] * pa->data[i];
      }
    });
  }
  return out;
}

Tensor scale(const Tensor& a, double c) {
  Tensor out = Tensor::zeros(a.shape());
  const std::size_t n = out.numel();
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] * c;
  if (grad_enabled() && tracked(a)) {
    attach(out, {a.handle()}, [c](TensorImpl& o) {
      auto& p = o.parents[0];
      for (std::size_t i = 0; i < o.grad.size(); ++i) p->grad[i] += o.grad[i] * c;
    });
  }
  return out;
}

Tensor relu(const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape());
  const std::size_t n = out.numel();
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = x.data()[i] > 0.0 ? x.data()[i] : 0.0;
  if (grad_enabled() && tracked(x)) {
    attach(out, {x.handle()}, [](TensorImpl& o) {
      auto& p = o.parents[0];
      for (std::size_t i = 0; i < o.grad.size(); ++i)
        if (p->data[i] > 0.0) p->grad[i] += o.grad[i];
    });
  }
  return out;
}

Tensor sigmoid(const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape());
  const std::size_t n = out.numel();
  for (std::size_t i = 0; i < n; ++i) {
    const double v = x.data()[i];
    out.data()[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                             : std::exp(v) / (1.0 + std::exp(v));
  }
  if (grad_enabled() && tracked(x)) {
    attach(out, {x.handle()}, [](TensorImpl& o) {
      auto& p = o.parents[0];
      for (std::size_t i = 0; i < o.grad.size(); ++i) {
        const double y = o.data[i];
        p->grad[i] += o.grad[i] * y * (1.0 - y);
      }
    });
  }
  return out;
}

// ---- matmul / linear ---------------------------------------------------------

namespace {

void matmul_shapes(const Tensor& a, const Tensor& b, int& n, int& k, int& m) {
  if (a.ndim() != 2 || b.ndim() != 2)
    throw std::invalid_argument("matmul: operands must be 2-d");
  n = a.dim(0);
  k = a.dim(1);
  m = b.dim(1);
  if (b.dim(0) != k) throw std::invalid_argument("matmul: inner dimensions differ");
}

void matmul_backward(TensorImpl& o, int n, int k, int m) {
  auto& pa = o.parents[0];
  auto& pb = o.parents[1];
  if (pa->tracked) {
    // dA = dC * B^T
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j) {
        const double g = o.grad[static_cast<std::size_t>(i) * m + j];
        if (g == 0.0) continue;
        for (int kk = 0; kk < k; ++kk)
          pa->grad[static_cast<std::size_t>(i) * k + kk] +=
              g * pb->data[static_cast<std::size_t>(kk) * m + j];
      }
  }
  if (pb->tracked) {
    // dB = A^T * dC
    for (int i = 0; i < n; ++i)
      for (int kk = 0; kk < k; ++kk) {
        const double av = pa->data[static_cast<std::size_t>(i) * k + kk];
        if (av == 0.0) continue;
        for (int j = 0; j < m; ++j)
          pb->grad[static_cast<std::size_t>(kk) * m + j] +=
              av * o.grad[static_cast<std::size_t>(i) * m + j];
      }
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  int n, k, m;
  matmul_shapes(a, b, n, k, m);
  Tensor out = Tensor::zeros({n, m});
  const double* ad = a.data();
  const double* bd = b.data();
  double* od = out.data();
  for (int i = 0; i < n; ++i)
    for (int kk = 0; kk < k; ++kk) {
      const double av = ad[static_cast<std::size_t>(i) * k + kk];
      if (av == 0.0) continue;
      const double* brow = bd + static_cast<std::size_t>(kk) * m;
      double* orow = od + static_cast<std::size_t>(i) * m;
      for (int j = 0; j < m; ++j) orow[j] += av * brow[j];
    }
  if (grad_enabled() && (tracked(a) || tracked(b))) {
    attach(out, {a.handle(), b.handle()},
           [n, k, m](TensorImpl& o) { matmul_backward(o, n, k, m); });
  }
  return out;
}

Tensor matmul_canonical(const Tensor& a, const Tensor& b) {
  int n, k, m;
  matmul_shapes(a, b, n, k, m);
  Tensor out = Tensor::zeros({n, m});
  std::vector<double> terms(static_cast<std::size_t>(k));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) {
      for (int kk = 0; kk < k; ++kk)
        terms[static_cast<std::size_t>(kk)] =
            a.data()[static_cast<std::size_t>(i) * k + kk] *
            b.data()[static_cast<std::size_t>(kk) * m + j];
      out.data()[static_cast<std::size_t>(i) * m + j] = canonical_sum(terms.data(), k);
    }
  if (grad_enabled() && (tracked(a) || tracked(b))) {
    attach(out, {a.handle(), b.handle()},
           [n, k, m](TensorImpl& o) { matmul_backward(o, n, k, m); });
  }
  return out;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (x.ndim() < 1 || w.ndim() != 2 || b.ndim() != 1)
    throw std::invalid_argument("linear: bad operand ranks");
  const int in = w.dim(0);
  const int outw = w.dim(1);
  if (x.dim(-1) != in)
    throw std::invalid_argument("linear: input trailing dimension does not match weight");
  if (b.dim(0) != outw) throw std::invalid_argument("linear: bias does not match weight");

  std::vector<int> out_shape = x.shape();
  out_shape.back() = outw;
  const int rows = static_cast<int>(x.numel() / static_cast<std::size_t>(in));

  Tensor out = Tensor::zeros(out_shape);
  const double* xd = x.data();
  const double* wd = w.data();
  const double* bd = b.data();
  double* od = out.data();
  for (int r = 0; r < rows; ++r) {
    double* orow = od + static_cast<std::size_t>(r) * outw;
    for (int j = 0; j < outw; ++j) orow[j] = bd[j];
    const double* xrow = xd + static_cast<std::size_t>(r) * in;
    for (int kk = 0; kk < in; ++kk) {
      const double xv = xrow[kk];
      if (xv == 0.0) continue;
      const double* wrow = wd + static_cast<std::size_t>(kk) * outw;
      for (int j = 0; j < outw; ++j) orow[j] += xv * wrow[j];
    }
  }
  if (grad_enabled() && (tracked(x) || tracked(w) || tracked(b))) {
    attach(out, {x.handle(), w.handle(), b.handle()}, [rows, in, outw](TensorImpl& o) {
      auto& px = o.parents[0];
      auto& pw = o.parents[1];
      auto& pb = o.parents[2];
      for (int r = 0; r < rows; ++r) {
        const double* grow = o.grad.data() + static_cast<std::size_t>(r) * outw;
        const double* xrow = px->data.data() + static_cast<std::size_t>(r) * in;
        if (px->tracked) {
          double* gx = px->grad.data() + static_cast<std::size_t>(r) * in;
          for (int kk = 0; kk < in; ++kk) {
            const double* wrow = pw->data.data() + static_cast<std::size_t>(kk) * outw;
            double acc = 0.0;
            for (int j = 0; j < outw; ++j) acc += grow[j] * wrow[j];
            gx[kk] += acc;
          }
        }
        if (pw->tracked) {
          for (int kk = 0; kk < in; ++kk) {
            const double xv = xrow[kk];
            if (xv == 0.0) continue;
            double* gw = pw->grad.data() + static_cast<std::size_t>(kk) * outw;
            for (int j = 0; j < outw; ++j) gw[j] += xv * grow[j];
          }
        }
        if (pb->tracked)
          for (int j = 0; j < outw; ++j) pb->grad[static_cast<std::size_t>(j)] += grow[j];
      }
    });
  }
  return out;
}

Tensor transpose(const Tensor& x) {
  if (x.ndim() != 2) throw std::invalid_argument("transpose: operand must be 2-d");
  const int n = x.dim(0), m = x.dim(1);
  Tensor out = Tensor::zeros({m, n});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j)
      out.data()[static_cast<std::size_t>(j) * n + i] =
          x.data()[static_cast<std::size_t>(i) * m + j];
  if (grad_enabled() && tracked(x)) {
    attach(out, {x.handle()}, [n, m](TensorImpl& o) {
      auto& p = o.parents[0];
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j)
          p->grad[static_cast<std::size_t>(i) * m + j] +=
              o.grad[static_cast<std::size_t>(j) * n + i];
    });
  }
  return out;
}

// ---- reductions / shape -------------------------------------------------------

Tensor max_pool_rows(const Tensor& x) {
  if (x.ndim() != 2) throw std::invalid_argument("max_pool_rows: operand must be 2-d");
  const int n = x.dim(0);
  if (n < 1) throw std::invalid_argument("max_pool_rows: empty first axis");
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(n), 1);
  return masked_max_pool_rows(x, mask);
}

Tensor masked_max_pool_rows(const Tensor& x, const std::vector<std::uint8_t>& mask) {
  if (x.ndim() != 2) throw std::invalid_argument("max_pool_rows: operand must be 2-d");
  const int n = x.dim(0), d = x.dim(1);
  if (mask.size() != static_cast<std::size_t>(n))
    throw std::invalid_argument("max_pool_rows: mask length does not match rows");
  int valid = 0;
  for (auto m : mask) valid += m ? 1 : 0;
  if (valid == 0) throw std::invalid_argument("max_pool_rows: no valid rows");

  Tensor out = Tensor::zeros({d});
  std::vector<int> argmax(static_cast<std::size_t>(d), -1);
  for (int j = 0; j < d; ++j) {
    double best = 0.0;
    int best_i = -1;
    for (int i = 0; i < n; ++i) {
      if (!mask[static_cast<std::size_t>(i)]) continue;
      const double v = x.data()[static_cast<std::size_t>(i) * d + j];
      if (best_i < 0 || v > best) {  // strict >: ties keep the first index
        best = v;
        best_i = i;
      }
    }
    out.data()[j] = best;
    argmax[static_cast<std::size_t>(j)] = best_i;
  }
  if (grad_enabled() && tracked(x)) {
    attach(out, {x.handle()}, [d, argmax](TensorImpl& o) {
      auto& p = o.parents[0];
      for (int j = 0; j < d; ++j)
        p->grad[static_cast<std::size_t>(argmax[static_cast<std::size_t>(j)]) * d + j] +=
            o.grad[static_cast<std::size_t>(j)];
    });
  }
  return out;
}

Tensor softmax_rows(const Tensor& x) {
  if (x.ndim() < 1) throw std::invalid_argument("softmax_rows: operand must have >= 1 dim");
  const int k = x.dim(-1);
  if (k < 1) throw std::invalid_argument("softmax_rows: empty trailing axis");
  const int rows = static_cast<int>(x.numel() / static_cast<std::size_t>(k));
  Tensor out = Tensor::zeros(x.shape());
  for (int r = 0; r < rows; ++r) {
    const double* xi = x.data() + static_cast<std::size_t>(r) * k;
    double* oi = out.data() + static_cast<std::size_t>(r) * k;
    double mx = xi[0];
    for (int j = 1; j < k; ++j) mx = std::max(mx, xi[j]);
    for (int j = 0; j < k; ++j) oi[j] = std::exp(xi[j] - mx);
    const double denom = canonical_sum(oi, k);
    for (int j = 0; j < k; ++j) oi[j] /= denom;
  }
  if (grad_enabled() && tracked(x)) {
    attach(out, {x.handle()}, [rows, k](TensorImpl& o) {
      auto& p = o.parents[0];
      for (int r = 0; r < rows; ++r) {
        const double* y = o.data.data() + static_cast<std::size_t>(r) * k;
        const double* g = o.grad.data() + static_cast<std::size_t>(r) * k;
        double dot = 0.0;
        for (int j = 0; j < k; ++j) dot += y[j] * g[j];
        double* gx = p->grad.data() + static_cast<std::size_t>(r) * k;
        for (int j = 0; j < k; ++j) gx[j] += y[j] * (g[j] - dot);
      }
    });
  }
  return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  if (x.ndim() < 1) throw std::invalid_argument("layer_norm: operand must have >= 1 dim");
  const int d = x.dim(-1);
  if (gamma.ndim() != 1 || gamma.dim(0) != d || beta.ndim() != 1 || beta.dim(0) != d)
    throw std::invalid_argument("layer_norm: gamma/beta do not match trailing dim");
  const int rows = static_cast<int>(x.numel() / static_cast<std::size_t>(d));

  Tensor out = Tensor::zeros(x.shape());
  std::vector<double> means(static_cast<std::size_t>(rows));
  std::vector<double> inv_stds(static_cast<std::size_t>(rows));
  for (int r = 0; r < rows; ++r) {
    const double* xi = x.data() + static_cast<std::size_t>(r) * d;
    double mean = 0.0;
    for (int j = 0; j < d; ++j) mean += xi[j];
    mean /= d;
    double var = 0.0;
    for (int j = 0; j < d; ++j) var += (xi[j] - mean) * (xi[j] - mean);
    var /= d;
    const double inv = 1.0 / std::sqrt(var + eps);
    means[static_cast<std::size_t>(r)] = mean;
    inv_stds[static_cast<std::size_t>(r)] = inv;
    double* oi = out.data() + static_cast<std::size_t>(r) * d;
    for (int j = 0; j < d; ++j)
      oi[j] = (xi[j] - mean) * inv * gamma.data()[j] + beta.data()[j];
  }
  if (grad_enabled() && (tracked(x) || tracked(gamma) || tracked(beta))) {
    attach(out, {x.handle(), gamma.handle(), beta.handle()},
           [rows, d, means, inv_stds](TensorImpl& o) {
             auto& px = o.parents[0];
             auto& pg = o.parents[1];
             auto& pb = o.parents[2];
             for (int r = 0; r < rows; ++r) {
               const double* xi = px->data.data() + static_cast<std::size_t>(r) * d;
               const double* g = o.grad.data() + static_cast<std::size_t>(r) * d;
               const double mean = means[static_cast<std::size_t>(r)];
               const double inv = inv_stds[static_cast<std::size_t>(r)];
               if (pg->tracked || pb->tracked) {
                 for (int j = 0; j < d; ++j) {
                   const double xhat = (xi[j] - mean) * inv;
                   if (pg->tracked) pg->grad[static_cast<std::size_t>(j)] += g[j] * xhat;
                   if (pb->tracked) pb->grad[static_cast<std::size_t>(j)] += g[j];
                 }
               }
               if (px->tracked) {
                 // dxhat_j = g_j * gamma_j; dx = inv*(dxhat - mean(dxhat) - xhat*mean(dxhat*xhat))
                 double sum_dxh = 0.0, sum_dxh_xhat = 0.0;
                 for (int j = 0; j < d; ++j) {
                   const double xhat = (xi[j] - mean) * inv;
                   const double dxh = g[j] * pg->data[static_cast<std::size_t>(j)];
                   sum_dxh += dxh;
                   sum_dxh_xhat += dxh * xhat;
                 }
                 double* gx = px->grad.data() + static_cast<std::size_t>(r) * d;
                 for (int j = 0; j < d; ++j) {
                   const double xhat = (xi[j] - mean) * inv;
                   const double dxh = g[j] * pg->data[static_cast<std::size_t>(j)];
                   gx[j] += inv * (dxh - sum_dxh / d - xhat * sum_dxh_xhat / d);
                 }
               }
             }
           });
  }
  return out;
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no operands");
  const int n = parts[0].dim(0);
  int total = 0;
  bool any_tracked = false;
  for (const Tensor& p : parts) {
    if (p.ndim() != 2 || p.dim(0) != n)
      throw std::invalid_argument("concat_cols: operands must be 2-d with equal rows");
    total += p.dim(1);
    any_tracked = any_tracked || tracked(p);
  }
  Tensor out = Tensor::zeros({n, total});
  std::vector<int> widths;
  int off = 0;
  for (const Tensor& p : parts) {
    const int w = p.dim(1);
    widths.push_back(w);
    for (int i = 0; i < n; ++i)
      std::copy(p.data() + static_cast<std::size_t>(i) * w,
                p.data() + static_cast<std::size_t>(i) * w + w,
                out.data() + static_cast<std::size_t>(i) * total + off);
    off += w;
  }
  if (grad_enabled() && any_tracked) {
    std::vector<std::shared_ptr<TensorImpl>> parents;
    for (const Tensor& p : parts) parents.push_back(p.handle());
    attach(out, std::move(parents), [n, total, widths](TensorImpl& o) {
      int start = 0;
      for (std::size_t pi = 0; pi < o.parents.size(); ++pi) {
        auto& p = o.parents[pi];
        const int w = widths[pi];
        if (p->tracked)
          for (int i = 0; i < n; ++i)
            for (int j = 0; j < w; ++j)
              p->grad[static_cast<std::size_t>(i) * w + j] +=
                  o.grad[static_cast<std::size_t>(i) * total + start + j];
        start += w;
      }
    });
  }
  return out;
}

Tensor slice_cols(const Tensor& x, int offset, int length) {
  if (x.ndim() != 2) throw std::invalid_argument("slice_cols: operand must be 2-d");
  const int n = x.dim(0), d = x.dim(1);
  if (offset < 0 || length < 0 || offset + length > d)
    throw std::invalid_argument("slice_cols: range out of bounds");
  Tensor out = Tensor::zeros({n, length});
  for (int i = 0; i < n; ++i)
    std::copy(x.data() + static_cast<std::size_t>(i) * d + offset,
              x.data() + static_cast<std::size_t>(i) * d + offset + length,
              out.data() + static_cast<std::size_t>(i) * length);
  if (grad_enabled() && tracked(x)) {
    attach(out, {x.handle()}, [n, d, offset, length](TensorImpl& o) {
      auto& p = o.parents[0];
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < length; ++j)
          p->grad[static_cast<std::size_t>(i) * d + offset + j] +=
              o.grad[static_cast<std::size_t>(i) * length + j];
    });
  }
  return out;
}

Tensor stack_rows(std::span<const Tensor> rows) {
  if (rows.empty()) throw std::invalid_argument("stack_rows: no operands");
  const int d = static_cast<int>(rows[0].numel());
  bool any_tracked = false;
  for (const Tensor& r : rows) {
    if (static_cast<int>(r.numel()) != d)
      throw std::invalid_argument("stack_rows: rows differ in length");
    any_tracked = any_tracked || tracked(r);
  }
  const int n = static_cast<int>(rows.size());
  Tensor out = Tensor::zeros({n, d});
  for (int i = 0; i < n; ++i)
    std::copy(rows[static_cast<std::size_t>(i)].data(),
              rows[static_cast<std::size_t>(i)].data() + d,
              out.data() + static_cast<std::size_t>(i) * d);
  if (grad_enabled() && any_tracked) {
    std::vector<std::shared_ptr<TensorImpl>> parents;
    for (const Tensor& r : rows) parents.push_back(r.handle());
    attach(out, std::move(parents), [d](TensorImpl& o) {
      for (std::size_t i = 0; i < o.parents.size(); ++i) {
        auto& p = o.parents[i];
        if (!p->tracked) continue;
        for (int j = 0; j < d; ++j) p->grad[static_cast<std::size_t>(j)] += o.grad[i * d + j];
      }
    });
  }
  return out;
}

Tensor slice_rows(const Tensor& x, int start, int count) {
  if (x.ndim() != 2) throw std::invalid_argument("slice_rows: operand must be 2-d");
  const int n = x.dim(0), d = x.dim(1);
  if (start < 0 || count < 0 || start + count > n)
    throw std::invalid_argument("slice_rows: range out of bounds");
  Tensor out = Tensor::zeros({count, d});
  std::copy(x.data() + static_cast<std::size_t>(start) * d,
            x.data() + static_cast<std::size_t>(start + count) * d, out.data());
  if (grad_enabled() && tracked(x)) {
    attach(out, {x.handle()}, [start, count, d](TensorImpl& o) {
      auto& p = o.parents[0];
      for (std::size_t i = 0; i < static_cast<std::size_t>(count) * d; ++i)
        p->grad[static_cast<std::size_t>(start) * d + i] += o.grad[i];
    });
  }
  return out;
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: no operands");
  const int d = parts[0].dim(-1);
  int total = 0;
  bool any_tracked = false;
  for (const Tensor& p : parts) {
    if (p.ndim() != 2 || p.dim(1) != d)
      throw std::invalid_argument("concat_rows: operands must be 2-d with equal columns");
    total += p.dim(0);
    any_tracked = any_tracked || tracked(p);
  }
  Tensor out = Tensor::zeros({total, d});
  std::size_t off = 0;
  std::vector<int> counts;
  for (const Tensor& p : parts) {
    std::copy(p.data(), p.data() + p.numel(), out.data() + off);
    off += p.numel();
    counts.push_back(p.dim(0));
  }
  if (grad_enabled() && any_tracked) {
    std::vector<std::shared_ptr<TensorImpl>> parents;
    for (const Tensor& p : parts) parents.push_back(p.handle());
    attach(out, std::move(parents), [d, counts](TensorImpl& o) {
      std::size_t start = 0;
      for (std::size_t pi = 0; pi < o.parents.size(); ++pi) {
        auto& p = o.parents[pi];
        const std::size_t len = static_cast<std::size_t>(counts[pi]) * d;
        if (p->tracked)
          for (std::size_t i = 0; i < len; ++i) p->grad[i] += o.grad[start + i];
        start += len;
      }
    });
  }
  return out;
}

Tensor reshape(const Tensor& x, std::vector<int> shape) {
  if (shape_numel(shape) != x.numel())
    throw std::invalid_argument("reshape: element count differs");
  Tensor out = Tensor::zeros(shape);
  std::copy(x.data(), x.data() + x.numel(), out.data());
  if (grad_enabled() && tracked(x)) {
    attach(out, {x.handle()}, [](TensorImpl& o) {
      auto& p = o.parents[0];
      for (std::size_t i = 0; i < o.grad.size(); ++i) p->grad[i] += o.grad[i];
    });
  }
  return out;
}

Tensor sum_all(const Tensor& x) {
  Tensor out = Tensor::zeros({1});
  double s = 0.0;
  for (std::size_t i = 0; i < x.numel(); ++i) s += x.data()[i];
  out.data()[0] = s;
  if (grad_enabled() && tracked(x)) {
    attach(out, {x.handle()}, [](TensorImpl& o) {
      auto& p = o.parents[0];
      for (std::size_t i = 0; i < p->grad.size(); ++i) p->grad[i] += o.grad[0];
    });
  }
  return out;
}

Tensor mean_all(const Tensor& x) {
  if (x.numel() == 0) throw std::invalid_argument("mean_all: empty operand");
  return scale(sum_all(x), 1.0 / static_cast<double>(x.numel()));
}

// ---- fused ops ----------------------------------------------------------------

Tensor bce_with_logits_mean(const Tensor& logits, const std::vector<double>& labels) {
  const std::size_t n = logits.numel();
  if (labels.size() != n)
    throw std::invalid_argument("bce_with_logits_mean: label count differs");
  if (n == 0) throw std::invalid_argument("bce_with_logits_mean: empty operand");
  Tensor out = Tensor::zeros({1});
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double z = logits.data()[i];
    const double y = labels[i];
    s += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::fabs(z)));
  }
  out.data()[0] = s / static_cast<double>(n);
  if (grad_enabled() && tracked(logits)) {
    attach(out, {logits.handle()}, [labels, n](TensorImpl& o) {
      auto& p = o.parents[0];
      const double g = o.grad[0] / static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) {
        const double z = p->data[i];
        const double sig = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z))
                                    : std::exp(z) / (1.0 + std::exp(z));
        p->grad[i] += g * (sig - labels[i]);
      }
    });
  }
  return out;
}

namespace {
double wrap_angle_diff(double a) {
  a = std::fmod(a, 2.0 * kPi);
  if (a > kPi) a -= 2.0 * kPi;
  if (a <= -kPi) a += 2.0 * kPi;
  return a;
}
}  // namespace

Tensor masked_l1_wrap(const Tensor& pred, const std::vector<double>& target,
                      const std::vector<std::uint8_t>& mask, bool* all_masked_out) {
  if (pred.ndim() != 3 || pred.dim(2) != 3)
    throw std::invalid_argument("masked_l1_wrap: pred must be [n, T, 3]");
  const int n = pred.dim(0), T = pred.dim(1);
  if (target.size() != pred.numel())
    throw std::invalid_argument("masked_l1_wrap: target size differs");
  if (mask.size() != static_cast<std::size_t>(n) * T)
    throw std::invalid_argument("masked_l1_wrap: mask size differs");

  int count = 0;
  for (auto m : mask) count += m ? 1 : 0;
  if (all_masked_out) *all_masked_out = (count == 0);
  Tensor out = Tensor::zeros({1});
  if (count == 0) return out;  // defined as 0 when nothing is masked in

  const double denom = static_cast<double>(count) * 3.0;
  double s = 0.0;
  for (int i = 0; i < n; ++i)
    for (int t = 0; t < T; ++t) {
      if (!mask[static_cast<std::size_t>(i) * T + t]) continue;
      const std::size_t base = (static_cast<std::size_t>(i) * T + t) * 3;
      s += std::fabs(pred.data()[base + 0] - target[base + 0]);
      s += std::fabs(pred.data()[base + 1] - target[base + 1]);
      s += std::fabs(wrap_angle_diff(pred.data()[base + 2] - target[base + 2]));
    }
  out.data()[0] = s / denom;
  if (grad_enabled() && tracked(pred)) {
    attach(out, {pred.handle()}, [n, T, target, mask, denom](TensorImpl& o) {
      auto& p = o.parents[0];
      const double g = o.grad[0] / denom;
      for (int i = 0; i < n; ++i)
        for (int t = 0; t < T; ++t) {
          if (!mask[static_cast<std::size_t>(i) * T + t]) continue;
          const std::size_t base = (static_cast<std::size_t>(i) * T + t) * 3;
          for (int c = 0; c < 3; ++c) {
            double diff = p->data[base + c] - target[base + c];
            if (c == 2) diff = wrap_angle_diff(diff);
            p->grad[base + c] += g * (diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0));
          }
        }
    });
  }
  return out;
}

Tensor smooth_l1_rows(const Tensor& pred, const std::vector<double>& target,
                      const std::vector<double>& row_weights) {
  if (pred.ndim() != 2) throw std::invalid_argument("smooth_l1_rows: pred must be 2-d");
  const int n = pred.dim(0), d = pred.dim(1);
  if (target.size() != pred.numel())
    throw std::invalid_argument("smooth_l1_rows: target size differs");
  if (row_weights.size() != static_cast<std::size_t>(n))
    throw std::invalid_argument("smooth_l1_rows: weight count differs");

  double wsum = 0.0;
  for (double w : row_weights) wsum += w;
  Tensor out = Tensor::zeros({1});
  if (wsum <= 0.0) return out;

  const double denom = wsum * d;
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    const double w = row_weights[static_cast<std::size_t>(i)];
    if (w == 0.0) continue;
    for (int j = 0; j < d; ++j) {
      const double diff = pred.data()[static_cast<std::size_t>(i) * d + j] -
                          target[static_cast<std::size_t>(i) * d + j];
      const double a = std::fabs(diff);
      s += w * (a < 1.0 ? 0.5 * diff * diff : a - 0.5);
    }
  }
  out.data()[0] = s / denom;
  if (grad_enabled() && tracked(pred)) {
    attach(out, {pred.handle()}, [n, d, target, row_weights, denom](TensorImpl& o) {
      auto& p = o.parents[0];
      const double g = o.grad[0] / denom;
      for (int i = 0; i < n; ++i) {
        const double w = row_weights[static_cast<std::size_t>(i)];
        if (w == 0.0) continue;
        for (int j = 0; j < d; ++j) {
          const std::size_t idx = static_cast<std::size_t>(i) * d + j;
          const double diff = p->data[idx] - target[idx];
          const double dd = std::fabs(diff) < 1.0 ? diff : (diff > 0.0 ? 1.0 : -1.0);
          p->grad[idx] += g * w * dd;
        }
      }
    });
  }
  return out;
}

Tensor decode_future(const Tensor& deltas, const std::vector<std::array<double, 3>>& anchors,
                     int t_future) {
  if (deltas.ndim() != 2 || deltas.dim(1) != t_future * 3)
    throw std::invalid_argument("decode_future: deltas must be [B, T*3]");
  const int b = deltas.dim(0);
  if (anchors.size() != static_cast<std::size_t>(b))
    throw std::invalid_argument("decode_future: anchor count differs");

  Tensor out = Tensor::zeros({b, t_future, 3});
  std::vector<double> coss(static_cast<std::size_t>(b)), sins(static_cast<std::size_t>(b));
  for (int i = 0; i < b; ++i) {
    coss[static_cast<std::size_t>(i)] = std::cos(anchors[static_cast<std::size_t>(i)][2]);
    sins[static_cast<std::size_t>(i)] = std::sin(anchors[static_cast<std::size_t>(i)][2]);
  }
  for (int i = 0; i < b; ++i)
    for (int t = 0; t < t_future; ++t) {
      const std::size_t src = static_cast<std::size_t>(i) * t_future * 3 + t * 3;
      const double dx = deltas.data()[src], dy = deltas.data()[src + 1],
                   dh = deltas.data()[src + 2];
      const double c = coss[static_cast<std::size_t>(i)], s = sins[static_cast<std::size_t>(i)];
      out.data()[src + 0] = anchors[static_cast<std::size_t>(i)][0] + c * dx - s * dy;
      out.data()[src + 1] = anchors[static_cast<std::size_t>(i)][1] + s * dx + c * dy;
      out.data()[src + 2] = anchors[static_cast<std::size_t>(i)][2] + dh;
    }
  if (grad_enabled() && tracked(deltas)) {
    attach(out, {deltas.handle()}, [b, t_future, coss, sins](TensorImpl& o) {
      auto& p = o.parents[0];
      for (int i = 0; i < b; ++i) {
        const double c = coss[static_cast<std::size_t>(i)], s = sins[static_cast<std::size_t>(i)];
        for (int t = 0; t < t_future; ++t) {
          const std::size_t idx = static_cast<std::size_t>(i) * t_future * 3 + t * 3;
          const double gx = o.grad[idx], gy = o.grad[idx + 1], gh = o.grad[idx + 2];
          p->grad[idx + 0] += c * gx + s * gy;
          p->grad[idx + 1] += -s * gx + c * gy;
          p->grad[idx + 2] += gh;
        }
      }
    });
  }
  return out;
}

}  // namespace mht
