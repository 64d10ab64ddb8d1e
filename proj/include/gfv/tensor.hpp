#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "gfv/error.hpp"

namespace gfv {

// Dense 64-bit real tensor, rank 1 or 2, row-major. Value-semantic handle
// over shared storage: copies alias the same payload, so parameters can be
// held by the model, the optimizer and the tape at once. All arithmetic
// lives in the free functions below; shapes never broadcast except for
// add_row_bias.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<int> dims, bool requires_grad = false);
  static Tensor full(std::vector<int> dims, double value);
  static Tensor from_data(std::vector<int> dims, std::vector<double> data,
                          bool requires_grad = false);
  static Tensor scalar(double value);

  bool defined() const { return node_ != nullptr; }
  const std::vector<int>& dims() const;
  int64_t size() const;
  int rank() const { return static_cast<int>(dims().size()); }
  bool is_matrix() const { return rank() == 2; }
  bool is_scalar() const { return size() == 1; }
  int rows() const;  // rank-2 only
  int cols() const;  // rank-2 only

  double* data();
  const double* data() const;
  std::span<const double> values() const { return {data(), static_cast<size_t>(size())}; }
  double item() const;  // scalar value; ContractError otherwise
  double at(int r, int c) const;

  bool requires_grad() const;
  bool has_grad() const;
  const std::vector<double>& grad() const;  // ContractError when absent
  void ensure_grad();                       // allocate a zero grad buffer if missing
  std::vector<double>& grad_mut();
  void zero_grad();

  // Fresh storage with the same values; drops grad and tape identity.
  Tensor detached_copy() const;

  // Stable identity of the underlying node (used by the tape and by
  // structural tests of recording order).
  uint64_t id() const;

 private:
  struct Node {
    std::vector<int> dims;
    std::vector<double> value;
    std::vector<double> grad;
    bool requires_grad = false;
    bool grad_alloc = false;
    uint64_t serial = 0;
  };
  std::shared_ptr<Node> node_;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static std::shared_ptr<Node> make_node(std::vector<int> dims, bool requires_grad);
  const Node& node() const;
  Node& node();
};

// Records every differentiable operation executed while it is the active
// tape. Construction pushes the tape onto a thread-local stack; destruction
// pops it. Recording order is execution order, which is topological by
// construction (an op's inputs necessarily exist before its output).
class Tape {
 public:
  struct OpRecord {
    const char* name;
    uint64_t out;
    std::vector<uint64_t> ins;
  };

  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* active();

  // True when the tensor participates in gradient flow on this tape.
  bool connected(const Tensor& t) const;

  void record(OpRecord rec, std::function<void()> backward_fn);

  size_t op_count() const { return records_.size(); }
  const std::vector<OpRecord>& records() const { return records_; }

  // Reverse sweep from `loss` (which must be a scalar produced on this
  // tape), accumulating into the grads of every connected tensor. The tape
  // is cleared afterwards; each recorded op is visited exactly once.
  void run_backward(const Tensor& loss);

  void clear();

 private:
  std::vector<std::function<void()>> backward_;
  std::vector<OpRecord> records_;
  std::unordered_set<uint64_t> produced_;
  Tape* prev_ = nullptr;
};

// Convenience wrapper over Tape::active()->run_backward(loss).
void backward(const Tensor& loss);

// --- differentiable operations -------------------------------------------
// Each op computes eagerly and, when a tape is active and an input is
// connected, records its backward rule.

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor add_row_bias(const Tensor& x, const Tensor& bias);  // [n,d] + [d]
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor sum(const Tensor& x);  // scalar
Tensor softmax_rows(const Tensor& x);
Tensor cross_entropy(const Tensor& logits, const std::vector<int>& targets);
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps = 1e-5);
Tensor gelu(const Tensor& x);
Tensor embedding_lookup(const Tensor& table, const std::vector<int>& ids);
Tensor transpose(const Tensor& x);
Tensor reshape(const Tensor& x, std::vector<int> dims);
Tensor slice_rows(const Tensor& x, int begin, int end);
Tensor slice_cols(const Tensor& x, int begin, int end);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor concat_cols(const std::vector<Tensor>& parts);

namespace kernel {
// C = A[m,k] * B[k,n] (row-major). Rows of C are computed independently and
// every element accumulates over k in strictly ascending order, so a 1-row
// call reproduces row i of a larger call bit for bit. Incremental decoding
// relies on that property; do not reblock across rows or across k.
void matmul_nn(const double* a, const double* b, double* c, int m, int k, int n);
// Same contract, accumulating into C instead of overwriting.
void matmul_nn_acc(const double* a, const double* b, double* c, int m, int k, int n);
void transpose_copy(const double* src, double* dst, int rows, int cols);
}  // namespace kernel

}  // namespace gfv
