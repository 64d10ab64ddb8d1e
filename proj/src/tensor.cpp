#include "gfv/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <numeric>

namespace gfv {

namespace {

std::atomic<uint64_t> g_serial{1};

int64_t product(const std::vector<int>& dims) {
  int64_t p = 1;
  for (int d : dims) p *= d;
  return p;
}

void check_dims(const std::vector<int>& dims, const char* who) {
  if (dims.empty() || dims.size() > 2)
    throw ShapeError(std::string(who) + ": rank must be 1 or 2, got " +
                     std::to_string(dims.size()));
  for (int d : dims)
    if (d <= 0)
      throw ShapeError(std::string(who) + ": non-positive dim " + std::to_string(d));
}

std::string dims_str(const std::vector<int>& dims) {
  std::string s = "[";
  for (size_t i = 0; i < dims.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(dims[i]);
  }
  return s + "]";
}

void require_same_dims(const Tensor& a, const Tensor& b, const char* who) {
  if (a.dims() != b.dims())
    throw ShapeError(std::string(who) + ": dims " + dims_str(a.dims()) + " vs " +
                     dims_str(b.dims()));
}

void require_matrix(const Tensor& t, const char* who) {
  if (t.rank() != 2)
    throw ShapeError(std::string(who) + ": expected matrix, got rank " +
                     std::to_string(t.rank()));
}

thread_local Tape* g_active_tape = nullptr;

}  // namespace

// --- Tensor ---------------------------------------------------------------

std::shared_ptr<Tensor::Node> Tensor::make_node(std::vector<int> dims,
                                                bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->dims = std::move(dims);
  n->value.assign(static_cast<size_t>(product(n->dims)), 0.0);
  n->requires_grad = requires_grad;
  n->serial = g_serial.fetch_add(1, std::memory_order_relaxed);
  return n;
}

Tensor Tensor::zeros(std::vector<int> dims, bool requires_grad) {
  check_dims(dims, "zeros");
  return Tensor(make_node(std::move(dims), requires_grad));
}

Tensor Tensor::full(std::vector<int> dims, double value) {
  check_dims(dims, "full");
  auto n = make_node(std::move(dims), false);
  std::fill(n->value.begin(), n->value.end(), value);
  return Tensor(std::move(n));
}

Tensor Tensor::from_data(std::vector<int> dims, std::vector<double> data,
                         bool requires_grad) {
  check_dims(dims, "from_data");
  if (static_cast<int64_t>(data.size()) != product(dims))
    throw ShapeError("from_data: " + std::to_string(data.size()) +
                     " values for dims " + dims_str(dims));
  auto n = make_node(std::move(dims), requires_grad);
  n->value = std::move(data);
  return Tensor(std::move(n));
}

Tensor Tensor::scalar(double value) { return full({1}, value); }

const Tensor::Node& Tensor::node() const {
  if (!node_) throw ContractError("tensor: use of default-constructed handle");
  return *node_;
}

Tensor::Node& Tensor::node() {
  if (!node_) throw ContractError("tensor: use of default-constructed handle");
  return *node_;
}

const std::vector<int>& Tensor::dims() const { return node().dims; }

int64_t Tensor::size() const { return static_cast<int64_t>(node().value.size()); }

int Tensor::rows() const {
  if (rank() != 2) throw ContractError("rows: tensor is not a matrix");
  return dims()[0];
}

int Tensor::cols() const {
  if (rank() != 2) throw ContractError("cols: tensor is not a matrix");
  return dims()[1];
}

double* Tensor::data() { return node().value.data(); }
const double* Tensor::data() const { return node().value.data(); }

double Tensor::item() const {
  if (size() != 1) throw ContractError("item: tensor has " + std::to_string(size()) + " elements");
  return node().value[0];
}

double Tensor::at(int r, int c) const {
  require_matrix(*this, "at");
  if (r < 0 || r >= dims()[0] || c < 0 || c >= dims()[1])
    throw IndexError("at: (" + std::to_string(r) + "," + std::to_string(c) +
                     ") outside " + dims_str(dims()));
  return node().value[static_cast<size_t>(r) * dims()[1] + c];
}

bool Tensor::requires_grad() const { return node().requires_grad; }
bool Tensor::has_grad() const { return node().grad_alloc; }

const std::vector<double>& Tensor::grad() const {
  if (!node().grad_alloc) throw ContractError("grad: no gradient present");
  return node().grad;
}

void Tensor::ensure_grad() {
  Node& n = node();
  if (!n.grad_alloc) {
    n.grad.assign(n.value.size(), 0.0);
    n.grad_alloc = true;
  }
}

std::vector<double>& Tensor::grad_mut() {
  ensure_grad();
  return node().grad;
}

void Tensor::zero_grad() {
  Node& n = node();
  if (n.grad_alloc) std::fill(n.grad.begin(), n.grad.end(), 0.0);
}

Tensor Tensor::detached_copy() const {
  auto n = make_node(dims(), false);
  n->value = node().value;
  return Tensor(std::move(n));
}

uint64_t Tensor::id() const { return node().serial; }

// --- Tape -----------------------------------------------------------------

Tape::Tape() {
  prev_ = g_active_tape;
  g_active_tape = this;
}

Tape::~Tape() { g_active_tape = prev_; }

Tape* Tape::active() { return g_active_tape; }

bool Tape::connected(const Tensor& t) const {
  return t.requires_grad() || produced_.count(t.id()) != 0;
}

void Tape::record(OpRecord rec, std::function<void()> backward_fn) {
  produced_.insert(rec.out);
  records_.push_back(std::move(rec));
  backward_.push_back(std::move(backward_fn));
}

void Tape::run_backward(const Tensor& loss) {
  if (!loss.is_scalar())
    throw ContractError("backward: loss must be scalar, has " +
                        std::to_string(loss.size()) + " elements");
  if (produced_.count(loss.id()) == 0)
    throw ContractError("backward: loss was not produced on the active tape");
  Tensor seed = loss;  // same storage; the handle is value-semantic
  seed.grad_mut()[0] = 1.0;
  for (size_t i = backward_.size(); i-- > 0;) backward_[i]();
  clear();
}

void Tape::clear() {
  backward_.clear();
  records_.clear();
  produced_.clear();
}

void backward(const Tensor& loss) {
  Tape* t = Tape::active();
  if (!t) throw ContractError("backward: no active tape");
  t->run_backward(loss);
}

// --- kernels --------------------------------------------------------------

namespace kernel {

namespace {

// One register block: IB rows by JT columns, accumulating over all of k.
// Every output element keeps its own accumulator and sees k in ascending
// order through an explicit fma, so the result per element is independent of
// IB, of JT, and of how many rows or columns the surrounding call covers.
// The explicit fma matters: letting the compiler contract the multiply-add
// can round the vectorized tiles and the scalar tail differently, which
// would break bitwise agreement between calls that tile the same element
// into different column widths.
template <int IB, int JT, bool Accumulate>
inline void mm_block(const double* __restrict a, const double* __restrict b,
                     double* __restrict c, int k, int n, int j0) {
  double acc[IB][JT];
  for (int r = 0; r < IB; ++r)
    for (int t = 0; t < JT; ++t) acc[r][t] = 0.0;
  for (int kk = 0; kk < k; ++kk) {
    const double* brow = b + static_cast<size_t>(kk) * n + j0;
    for (int r = 0; r < IB; ++r) {
      const double av = a[static_cast<size_t>(r) * k + kk];
      for (int t = 0; t < JT; ++t) acc[r][t] = std::fma(av, brow[t], acc[r][t]);
    }
  }
  for (int r = 0; r < IB; ++r) {
    double* crow = c + static_cast<size_t>(r) * n + j0;
    for (int t = 0; t < JT; ++t)
      if constexpr (Accumulate)
        crow[t] += acc[r][t];
      else
        crow[t] = acc[r][t];
  }
}

template <int IB, bool Accumulate>
inline void mm_rows(const double* __restrict a, const double* __restrict b,
                    double* __restrict c, int k, int n) {
  int j0 = 0;
  for (; j0 + 32 <= n; j0 += 32) mm_block<IB, 32, Accumulate>(a, b, c, k, n, j0);
  for (; j0 + 8 <= n; j0 += 8) mm_block<IB, 8, Accumulate>(a, b, c, k, n, j0);
  for (; j0 < n; ++j0) mm_block<IB, 1, Accumulate>(a, b, c, k, n, j0);
}

template <bool Accumulate>
inline void mm_dispatch(const double* __restrict a, const double* __restrict b,
                        double* __restrict c, int m, int k, int n) {
  int i = 0;
  for (; i + 6 <= m; i += 6)
    mm_rows<6, Accumulate>(a + static_cast<size_t>(i) * k, b,
                           c + static_cast<size_t>(i) * n, k, n);
  for (; i + 2 <= m; i += 2)
    mm_rows<2, Accumulate>(a + static_cast<size_t>(i) * k, b,
                           c + static_cast<size_t>(i) * n, k, n);
  if (i < m)
    mm_rows<1, Accumulate>(a + static_cast<size_t>(i) * k, b,
                           c + static_cast<size_t>(i) * n, k, n);
}

}  // namespace

void matmul_nn(const double* __restrict a, const double* __restrict b,
               double* __restrict c, int m, int k, int n) {
  mm_dispatch<false>(a, b, c, m, k, n);
}

void matmul_nn_acc(const double* __restrict a, const double* __restrict b,
                   double* __restrict c, int m, int k, int n) {
  mm_dispatch<true>(a, b, c, m, k, n);
}

void transpose_copy(const double* __restrict src, double* __restrict dst, int rows,
                    int cols) {
  constexpr int BT = 32;
  for (int i0 = 0; i0 < rows; i0 += BT) {
    const int imax = std::min(i0 + BT, rows);
    for (int j0 = 0; j0 < cols; j0 += BT) {
      const int jmax = std::min(j0 + BT, cols);
      for (int i = i0; i < imax; ++i)
        for (int j = j0; j < jmax; ++j)
          dst[static_cast<size_t>(j) * rows + i] = src[static_cast<size_t>(i) * cols + j];
    }
  }
}

}  // namespace kernel

// --- ops ------------------------------------------------------------------

namespace {

// Records an op when a tape is active and any input is connected. `needs`
// mirrors `ins`; the closure only touches inputs flagged there.
void maybe_record(const char* name, const Tensor& out, std::vector<Tensor> ins,
                  std::function<void(const std::vector<bool>&)> make_backward_run,
                  std::vector<bool>* needs_out = nullptr) {
  Tape* tape = Tape::active();
  if (!tape) return;
  std::vector<bool> needs(ins.size(), false);
  bool any = false;
  for (size_t i = 0; i < ins.size(); ++i) {
    needs[i] = tape->connected(ins[i]);
    any = any || needs[i];
  }
  if (!any) return;
  if (needs_out) *needs_out = needs;
  Tape::OpRecord rec;
  rec.name = name;
  rec.out = out.id();
  for (const Tensor& t : ins) rec.ins.push_back(t.id());
  tape->record(std::move(rec),
               [fn = std::move(make_backward_run), needs]() { fn(needs); });
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const int m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k)
    throw ShapeError("matmul: inner dims " + std::to_string(k) + " vs " +
                     std::to_string(b.rows()));
  Tensor out = Tensor::zeros({m, n});
  kernel::matmul_nn(a.data(), b.data(), out.data(), m, k, n);
  maybe_record("matmul", out, {a, b}, [a, b, out, m, k, n](const std::vector<bool>& needs) {
    if (!out.has_grad()) return;
    const double* g = out.grad().data();
    if (needs[0]) {  // dA += G * B^T
      Tensor a_mut = a;
      a_mut.ensure_grad();
      std::vector<double> bt(static_cast<size_t>(k) * n);
      kernel::transpose_copy(b.data(), bt.data(), k, n);
      kernel::matmul_nn_acc(g, bt.data(), a_mut.grad_mut().data(), m, n, k);
    }
    if (needs[1]) {  // dB += A^T * G
      Tensor b_mut = b;
      b_mut.ensure_grad();
      std::vector<double> at(static_cast<size_t>(m) * k);
      kernel::transpose_copy(a.data(), at.data(), m, k);
      kernel::matmul_nn_acc(at.data(), g, b_mut.grad_mut().data(), k, m, n);
    }
  });
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_dims(a, b, "add");
  Tensor out = Tensor::zeros(a.dims());
  const int64_t sz = a.size();
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  for (int64_t i = 0; i < sz; ++i) po[i] = pa[i] + pb[i];
  maybe_record("add", out, {a, b}, [a, b, out, sz](const std::vector<bool>& needs) {
    if (!out.has_grad()) return;
    const double* g = out.grad().data();
    for (int side = 0; side < 2; ++side) {
      if (!needs[side]) continue;
      Tensor t = side == 0 ? a : b;
      t.ensure_grad();
      double* gd = t.grad_mut().data();
      for (int64_t i = 0; i < sz; ++i) gd[i] += g[i];
    }
  });
  return out;
}

Tensor add_row_bias(const Tensor& x, const Tensor& bias) {
  require_matrix(x, "add_row_bias");
  if (bias.rank() != 1 || bias.dims()[0] != x.cols())
    throw ShapeError("add_row_bias: bias " + dims_str(bias.dims()) + " for x " +
                     dims_str(x.dims()));
  const int n = x.rows(), d = x.cols();
  Tensor out = Tensor::zeros({n, d});
  const double* px = x.data();
  const double* pb = bias.data();
  double* po = out.data();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) po[static_cast<size_t>(i) * d + j] = px[static_cast<size_t>(i) * d + j] + pb[j];
  maybe_record("add_row_bias", out, {x, bias},
               [x, bias, out, n, d](const std::vector<bool>& needs) {
                 if (!out.has_grad()) return;
                 const double* g = out.grad().data();
                 if (needs[0]) {
                   Tensor xm = x;
                   xm.ensure_grad();
                   double* gd = xm.grad_mut().data();
                   for (int64_t i = 0; i < static_cast<int64_t>(n) * d; ++i) gd[i] += g[i];
                 }
                 if (needs[1]) {
                   Tensor bm = bias;
                   bm.ensure_grad();
                   double* gd = bm.grad_mut().data();
                   for (int i = 0; i < n; ++i)
                     for (int j = 0; j < d; ++j) gd[j] += g[static_cast<size_t>(i) * d + j];
                 }
               });
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_dims(a, b, "mul");
  Tensor out = Tensor::zeros(a.dims());
  const int64_t sz = a.size();
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  for (int64_t i = 0; i < sz; ++i) po[i] = pa[i] * pb[i];
  maybe_record("mul", out, {a, b}, [a, b, out, sz](const std::vector<bool>& needs) {
    if (!out.has_grad()) return;
    const double* g = out.grad().data();
    if (needs[0]) {
      Tensor am = a;
      am.ensure_grad();
      double* gd = am.grad_mut().data();
      const double* pb = b.data();
      for (int64_t i = 0; i < sz; ++i) gd[i] += g[i] * pb[i];
    }
    if (needs[1]) {
      Tensor bm = b;
      bm.ensure_grad();
      double* gd = bm.grad_mut().data();
      const double* pa = a.data();
      for (int64_t i = 0; i < sz; ++i) gd[i] += g[i] * pa[i];
    }
  });
  return out;
}

Tensor scale(const Tensor& x, double factor) {
  Tensor out = Tensor::zeros(x.dims());
  const int64_t sz = x.size();
  const double* px = x.data();
  double* po = out.data();
  for (int64_t i = 0; i < sz; ++i) po[i] = px[i] * factor;
  maybe_record("scale", out, {x}, [x, out, factor, sz](const std::vector<bool>& needs) {
    if (!out.has_grad() || !needs[0]) return;
    Tensor xm = x;
    xm.ensure_grad();
    double* gd = xm.grad_mut().data();
    const double* g = out.grad().data();
    for (int64_t i = 0; i < sz; ++i) gd[i] += g[i] * factor;
  });
  return out;
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  const double* px = x.data();
  const int64_t sz = x.size();
  for (int64_t i = 0; i < sz; ++i) s += px[i];
  Tensor out = Tensor::scalar(s);
  maybe_record("sum", out, {x}, [x, out, sz](const std::vector<bool>& needs) {
    if (!out.has_grad() || !needs[0]) return;
    const double g = out.grad()[0];
    Tensor xm = x;
    xm.ensure_grad();
    double* gd = xm.grad_mut().data();
    for (int64_t i = 0; i < sz; ++i) gd[i] += g;
  });
  return out;
}

Tensor softmax_rows(const Tensor& x) {
  require_matrix(x, "softmax_rows");
  const int n = x.rows(), d = x.cols();
  Tensor out = Tensor::zeros({n, d});
  const double* px = x.data();
  double* po = out.data();
  for (int i = 0; i < n; ++i) {
    const double* row = px + static_cast<size_t>(i) * d;
    double* orow = po + static_cast<size_t>(i) * d;
    double mx = row[0];
    for (int j = 1; j < d; ++j) mx = std::max(mx, row[j]);
    double s = 0.0;
    for (int j = 0; j < d; ++j) {
      const double t = row[j] - mx;
      // Below -746 exp underflows to exactly +0.0, so the short-circuit
      // returns the same bits while sparing the libm call. Rows carrying an
      // additive causal mask are mostly such entries.
      orow[j] = t < -746.0 ? 0.0 : std::exp(t);
      s += orow[j];
    }
    const double inv = 1.0 / s;
    for (int j = 0; j < d; ++j) orow[j] *= inv;
  }
  maybe_record("softmax_rows", out, {x}, [x, out, n, d](const std::vector<bool>& needs) {
    if (!out.has_grad() || !needs[0]) return;
    Tensor xm = x;
    xm.ensure_grad();
    double* gd = xm.grad_mut().data();
    const double* g = out.grad().data();
    const double* y = out.data();
    for (int i = 0; i < n; ++i) {
      const size_t off = static_cast<size_t>(i) * d;
      double dot = 0.0;
      for (int j = 0; j < d; ++j) dot += g[off + j] * y[off + j];
      for (int j = 0; j < d; ++j) gd[off + j] += y[off + j] * (g[off + j] - dot);
    }
  });
  return out;
}

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& targets) {
  require_matrix(logits, "cross_entropy");
  const int n = logits.rows(), k = logits.cols();
  if (static_cast<int>(targets.size()) != n)
    throw ShapeError("cross_entropy: " + std::to_string(targets.size()) +
                     " targets for " + std::to_string(n) + " rows");
  for (int t : targets)
    if (t < 0 || t >= k)
      throw IndexError("cross_entropy: target " + std::to_string(t) +
                       " outside [0," + std::to_string(k) + ")");
  // Mean over rows of logsumexp(row) - row[target]; probabilities are kept
  // for the backward pass.
  auto probs = std::make_shared<std::vector<double>>(static_cast<size_t>(n) * k);
  const double* px = logits.data();
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const double* row = px + static_cast<size_t>(i) * k;
    double* prow = probs->data() + static_cast<size_t>(i) * k;
    double mx = row[0];
    for (int j = 1; j < k; ++j) mx = std::max(mx, row[j]);
    double s = 0.0;
    for (int j = 0; j < k; ++j) {
      prow[j] = std::exp(row[j] - mx);
      s += prow[j];
    }
    const double inv = 1.0 / s;
    for (int j = 0; j < k; ++j) prow[j] *= inv;
    total += mx + std::log(s) - row[targets[i]];
  }
  Tensor out = Tensor::scalar(total / n);
  maybe_record("cross_entropy", out, {logits},
               [logits, out, probs, targets, n, k](const std::vector<bool>& needs) {
                 if (!out.has_grad() || !needs[0]) return;
                 const double g = out.grad()[0] / n;
                 Tensor lm = logits;
                 lm.ensure_grad();
                 double* gd = lm.grad_mut().data();
                 const double* p = probs->data();
                 for (int i = 0; i < n; ++i) {
                   const size_t off = static_cast<size_t>(i) * k;
                   for (int j = 0; j < k; ++j) gd[off + j] += g * p[off + j];
                   gd[off + targets[i]] -= g;
                 }
               });
  return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  require_matrix(x, "layer_norm");
  const int n = x.rows(), d = x.cols();
  if (gain.rank() != 1 || gain.dims()[0] != d || bias.rank() != 1 || bias.dims()[0] != d)
    throw ShapeError("layer_norm: gain " + dims_str(gain.dims()) + " bias " +
                     dims_str(bias.dims()) + " for x " + dims_str(x.dims()));
  Tensor out = Tensor::zeros({n, d});
  auto mu = std::make_shared<std::vector<double>>(n);
  auto inv_sd = std::make_shared<std::vector<double>>(n);
  const double* px = x.data();
  const double* pg = gain.data();
  const double* pb = bias.data();
  double* po = out.data();
  for (int i = 0; i < n; ++i) {
    const double* row = px + static_cast<size_t>(i) * d;
    double m = 0.0;
    for (int j = 0; j < d; ++j) m += row[j];
    m /= d;
    double v = 0.0;
    for (int j = 0; j < d; ++j) {
      const double c = row[j] - m;
      v += c * c;
    }
    v /= d;
    const double isd = 1.0 / std::sqrt(v + eps);
    (*mu)[i] = m;
    (*inv_sd)[i] = isd;
    double* orow = po + static_cast<size_t>(i) * d;
    for (int j = 0; j < d; ++j) orow[j] = pg[j] * (row[j] - m) * isd + pb[j];
  }
  maybe_record(
      "layer_norm", out, {x, gain, bias},
      [x, gain, bias, out, mu, inv_sd, n, d](const std::vector<bool>& needs) {
        if (!out.has_grad()) return;
        const double* g = out.grad().data();
        const double* px = x.data();
        const double* pg = gain.data();
        Tensor xm = x, gm = gain, bm = bias;
        double* gx = nullptr;
        double* gg = nullptr;
        double* gb = nullptr;
        if (needs[0]) {
          xm.ensure_grad();
          gx = xm.grad_mut().data();
        }
        if (needs[1]) {
          gm.ensure_grad();
          gg = gm.grad_mut().data();
        }
        if (needs[2]) {
          bm.ensure_grad();
          gb = bm.grad_mut().data();
        }
        for (int i = 0; i < n; ++i) {
          const size_t off = static_cast<size_t>(i) * d;
          const double m = (*mu)[i];
          const double isd = (*inv_sd)[i];
          double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
          for (int j = 0; j < d; ++j) {
            const double xhat = (px[off + j] - m) * isd;
            const double dxhat = g[off + j] * pg[j];
            sum_dxhat += dxhat;
            sum_dxhat_xhat += dxhat * xhat;
            if (gg) gg[j] += g[off + j] * xhat;
            if (gb) gb[j] += g[off + j];
          }
          if (gx) {
            for (int j = 0; j < d; ++j) {
              const double xhat = (px[off + j] - m) * isd;
              const double dxhat = g[off + j] * pg[j];
              gx[off + j] += isd * (dxhat - (sum_dxhat + xhat * sum_dxhat_xhat) / d);
            }
          }
        }
      });
  return out;
}

Tensor gelu(const Tensor& x) {
  Tensor out = Tensor::zeros(x.dims());
  const int64_t sz = x.size();
  const double* px = x.data();
  double* po = out.data();
  constexpr double kInvSqrt2 = 0.7071067811865475244;
  // The erf is by far the expensive part; when a tape is recording, keep its
  // value so the backward pass does not have to evaluate it again.
  auto cdf = std::make_shared<std::vector<double>>();
  if (Tape::active()) cdf->resize(static_cast<size_t>(sz));
  double* pc = cdf->empty() ? nullptr : cdf->data();
  for (int64_t i = 0; i < sz; ++i) {
    const double c = 0.5 * (1.0 + std::erf(px[i] * kInvSqrt2));
    if (pc) pc[i] = c;
    po[i] = px[i] * c;
  }
  maybe_record("gelu", out, {x}, [x, out, cdf, sz](const std::vector<bool>& needs) {
    if (!out.has_grad() || !needs[0]) return;
    Tensor xm = x;
    xm.ensure_grad();
    double* gd = xm.grad_mut().data();
    const double* g = out.grad().data();
    const double* px = x.data();
    const double* pc = cdf->data();
    constexpr double kInvSqrt2Pi = 0.3989422804014326779;
    for (int64_t i = 0; i < sz; ++i) {
      const double v = px[i];
      const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
      gd[i] += g[i] * (pc[i] + v * pdf);
    }
  });
  return out;
}

Tensor embedding_lookup(const Tensor& table, const std::vector<int>& ids) {
  require_matrix(table, "embedding_lookup");
  const int v = table.rows(), d = table.cols();
  const int n = static_cast<int>(ids.size());
  if (n == 0) throw ShapeError("embedding_lookup: empty id list");
  for (int id : ids)
    if (id < 0 || id >= v)
      throw IndexError("embedding_lookup: id " + std::to_string(id) +
                       " outside [0," + std::to_string(v) + ")");
  Tensor out = Tensor::zeros({n, d});
  const double* pt = table.data();
  double* po = out.data();
  for (int i = 0; i < n; ++i)
    std::memcpy(po + static_cast<size_t>(i) * d, pt + static_cast<size_t>(ids[i]) * d,
                sizeof(double) * d);
  maybe_record("embedding_lookup", out, {table},
               [table, out, ids, n, d](const std::vector<bool>& needs) {
                 if (!out.has_grad() || !needs[0]) return;
                 Tensor tm = table;
                 tm.ensure_grad();
                 double* gd = tm.grad_mut().data();
                 const double* g = out.grad().data();
                 for (int i = 0; i < n; ++i) {
                   double* dst = gd + static_cast<size_t>(ids[i]) * d;
                   const double* src = g + static_cast<size_t>(i) * d;
                   for (int j = 0; j < d; ++j) dst[j] += src[j];
                 }
               });
  return out;
}

Tensor transpose(const Tensor& x) {
  require_matrix(x, "transpose");
  const int r = x.rows(), c = x.cols();
  Tensor out = Tensor::zeros({c, r});
  kernel::transpose_copy(x.data(), out.data(), r, c);
  maybe_record("transpose", out, {x}, [x, out, r, c](const std::vector<bool>& needs) {
    if (!out.has_grad() || !needs[0]) return;
    Tensor xm = x;
    xm.ensure_grad();
    double* gd = xm.grad_mut().data();
    const double* g = out.grad().data();
    for (int i = 0; i < c; ++i)
      for (int j = 0; j < r; ++j)
        gd[static_cast<size_t>(j) * c + i] += g[static_cast<size_t>(i) * r + j];
  });
  return out;
}

Tensor reshape(const Tensor& x, std::vector<int> dims) {
  check_dims(dims, "reshape");
  if (product(dims) != x.size())
    throw ShapeError("reshape: " + dims_str(x.dims()) + " to " + dims_str(dims));
  Tensor out = Tensor::from_data(dims, std::vector<double>(x.data(), x.data() + x.size()));
  const int64_t sz = x.size();
  maybe_record("reshape", out, {x}, [x, out, sz](const std::vector<bool>& needs) {
    if (!out.has_grad() || !needs[0]) return;
    Tensor xm = x;
    xm.ensure_grad();
    double* gd = xm.grad_mut().data();
    const double* g = out.grad().data();
    for (int64_t i = 0; i < sz; ++i) gd[i] += g[i];
  });
  return out;
}

Tensor slice_rows(const Tensor& x, int begin, int end) {
  require_matrix(x, "slice_rows");
  if (begin < 0 || end > x.rows() || begin >= end)
    throw IndexError("slice_rows: [" + std::to_string(begin) + "," +
                     std::to_string(end) + ") of " + std::to_string(x.rows()) + " rows");
  const int d = x.cols(), n = end - begin;
  Tensor out = Tensor::zeros({n, d});
  std::memcpy(out.data(), x.data() + static_cast<size_t>(begin) * d,
              sizeof(double) * static_cast<size_t>(n) * d);
  maybe_record("slice_rows", out, {x},
               [x, out, begin, n, d](const std::vector<bool>& needs) {
                 if (!out.has_grad() || !needs[0]) return;
                 Tensor xm = x;
                 xm.ensure_grad();
                 double* gd = xm.grad_mut().data() + static_cast<size_t>(begin) * d;
                 const double* g = out.grad().data();
                 for (int64_t i = 0; i < static_cast<int64_t>(n) * d; ++i) gd[i] += g[i];
               });
  return out;
}

Tensor slice_cols(const Tensor& x, int begin, int end) {
  require_matrix(x, "slice_cols");
  if (begin < 0 || end > x.cols() || begin >= end)
    throw IndexError("slice_cols: [" + std::to_string(begin) + "," +
                     std::to_string(end) + ") of " + std::to_string(x.cols()) + " cols");
  const int n = x.rows(), dx = x.cols(), d = end - begin;
  Tensor out = Tensor::zeros({n, d});
  const double* px = x.data();
  double* po = out.data();
  for (int i = 0; i < n; ++i)
    std::memcpy(po + static_cast<size_t>(i) * d, px + static_cast<size_t>(i) * dx + begin,
                sizeof(double) * d);
  maybe_record("slice_cols", out, {x},
               [x, out, begin, n, dx, d](const std::vector<bool>& needs) {
                 if (!out.has_grad() || !needs[0]) return;
                 Tensor xm = x;
                 xm.ensure_grad();
                 double* gd = xm.grad_mut().data();
                 const double* g = out.grad().data();
                 for (int i = 0; i < n; ++i)
                   for (int j = 0; j < d; ++j)
                     gd[static_cast<size_t>(i) * dx + begin + j] += g[static_cast<size_t>(i) * d + j];
               });
  return out;
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const int d = parts[0].rank() == 2 ? parts[0].cols() : -1;
  if (d < 0) throw ShapeError("concat_rows: inputs must be matrices");
  int total = 0;
  for (const Tensor& p : parts) {
    require_matrix(p, "concat_rows");
    if (p.cols() != d)
      throw ShapeError("concat_rows: col mismatch " + std::to_string(p.cols()) +
                       " vs " + std::to_string(d));
    total += p.rows();
  }
  Tensor out = Tensor::zeros({total, d});
  double* po = out.data();
  int row = 0;
  for (const Tensor& p : parts) {
    std::memcpy(po + static_cast<size_t>(row) * d, p.data(),
                sizeof(double) * static_cast<size_t>(p.rows()) * d);
    row += p.rows();
  }
  maybe_record("concat_rows", out, parts, [parts, out, d](const std::vector<bool>& needs) {
    if (!out.has_grad()) return;
    const double* g = out.grad().data();
    int row = 0;
    for (size_t pi = 0; pi < parts.size(); ++pi) {
      const int pr = parts[pi].rows();
      if (needs[pi]) {
        Tensor pm = parts[pi];
        pm.ensure_grad();
        double* gd = pm.grad_mut().data();
        const double* src = g + static_cast<size_t>(row) * d;
        for (int64_t i = 0; i < static_cast<int64_t>(pr) * d; ++i) gd[i] += src[i];
      }
      row += pr;
    }
  });
  return out;
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  require_matrix(parts[0], "concat_cols");
  const int n = parts[0].rows();
  int total = 0;
  for (const Tensor& p : parts) {
    require_matrix(p, "concat_cols");
    if (p.rows() != n)
      throw ShapeError("concat_cols: row mismatch " + std::to_string(p.rows()) +
                       " vs " + std::to_string(n));
    total += p.cols();
  }
  Tensor out = Tensor::zeros({n, total});
  double* po = out.data();
  int col = 0;
  for (const Tensor& p : parts) {
    const int pc = p.cols();
    const double* pp = p.data();
    for (int i = 0; i < n; ++i)
      std::memcpy(po + static_cast<size_t>(i) * total + col,
                  pp + static_cast<size_t>(i) * pc, sizeof(double) * pc);
    col += pc;
  }
  maybe_record("concat_cols", out, parts,
               [parts, out, n, total](const std::vector<bool>& needs) {
                 if (!out.has_grad()) return;
                 const double* g = out.grad().data();
                 int col = 0;
                 for (size_t pi = 0; pi < parts.size(); ++pi) {
                   const int pc = parts[pi].cols();
                   if (needs[pi]) {
                     Tensor pm = parts[pi];
                     pm.ensure_grad();
                     double* gd = pm.grad_mut().data();
                     for (int i = 0; i < n; ++i)
                       for (int j = 0; j < pc; ++j)
                         gd[static_cast<size_t>(i) * pc + j] +=
                             g[static_cast<size_t>(i) * total + col + j];
                   }
                   col += pc;
                 }
               });
  return out;
}

}  // namespace gfv
