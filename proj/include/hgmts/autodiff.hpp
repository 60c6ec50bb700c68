#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <unordered_map>
#include <vector>

#include "hgmts/tensor.hpp"

namespace hgmts {

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives
/// and has not been cleared.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  std::size_t id() const noexcept { return id_; }
  Tape* tape() const noexcept { return tape_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Define-by-run reverse-mode tape. Nodes are appended in evaluation order,
/// so reverse insertion order is a valid topological order for backward().
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::span<const double> out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Input that never receives a gradient.
  Var constant(Tensor value);
  /// Trainable leaf; gradients accumulate into `tensor.grad()` on backward().
  /// Registering the same tensor twice returns the same node.
  Var leaf(Tensor& tensor);
  /// Leaf owned by the tape whose gradient is read back with grad_of().
  Var variable(Tensor value);

  Var record(Tensor value, std::initializer_list<Var> parents, BackwardFn backward);

  const Tensor& value(std::size_t id) const;
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  /// Gradient buffer of a node, allocated on first access.
  std::span<double> grad(std::size_t id);
  /// Gradient of a node after backward(); empty if none reached it.
  std::span<const double> grad_of(Var v) const;

  void backward(Var loss);
  void clear();
  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor* external = nullptr;
    std::vector<double> grad;
    BackwardFn backward;
    bool requires_grad = false;
  };

  std::vector<Node> nodes_;
  std::unordered_map<const Tensor*, std::size_t> leaf_ids_;
};

enum class PaddingMode { edge, zero };

// Differentiable operations. All operands must live on the same tape.
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
/// x[M x N] + bias broadcast over rows; bias has N elements.
Var add_bias(Var x, Var bias);
Var scale(Var x, double factor);
Var add_scalar(Var x, double offset);
Var relu(Var x);
Var sigmoid(Var x);
Var tanh(Var x);
Var exp(Var x);
Var log(Var x);
Var softmax_rows(Var x);
Var concat_cols(Var a, Var b);
Var slice_rows(Var x, std::size_t begin, std::size_t count);
Var slice_cols(Var x, std::size_t begin, std::size_t count);
Var sum(Var x);
Var mean(Var x);
/// Row sums of x[M x N] as [M x 1].
Var row_sum(Var x);
/// x[M x N] with row i multiplied by s[i]; s has M elements.
Var scale_rows(Var x, Var s);
/// Rows x[index[e]] stacked into [E x N].
Var gather_rows(Var x, std::span<const std::size_t> index);
/// out[index[e]] += x[e]; output has `rows` rows.
Var scatter_add_rows(Var x, std::span<const std::size_t> index, std::size_t rows);
/// Softmax of a column vector within contiguous segments [offsets[s], offsets[s+1]).
Var segment_softmax(Var x, std::span<const std::size_t> offsets);
/// Per-row moving average with (kernel-1)/2 padding on each side; length preserved.
Var avgpool1d(Var x, std::size_t kernel, PaddingMode mode);

/// Plain counterpart of avgpool1d, used by the decomposition oracle paths.
Tensor avgpool1d(const Tensor& x, std::size_t kernel, PaddingMode mode);

}  // namespace hgmts
