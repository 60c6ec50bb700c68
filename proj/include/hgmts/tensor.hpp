#pragma once

#include <cstddef>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hgmts {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape) noexcept;
std::string shape_string(const Shape& shape);

/// Dense row-major array of doubles with an optional gradient buffer.
///
/// Tensors are plain values: copying one copies its data. The gradient
/// buffer is allocated on demand and always matches the value shape.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double value);
  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor identity(std::size_t n);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return values_.size(); }
  std::size_t dim(std::size_t axis) const;

  // Matrix view helpers. Rank-1 tensors are treated as a single row.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  double* data() noexcept { return values_.data(); }
  const double* data() const noexcept { return values_.data(); }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }

  /// Value of a single-element tensor.
  double item() const;

  bool has_grad() const noexcept { return has_grad_; }
  void ensure_grad();
  void zero_grad();
  void drop_grad() noexcept;
  std::span<double> grad() noexcept { return grad_; }
  std::span<const double> grad() const noexcept { return grad_; }

  std::optional<std::size_t> tape_id() const noexcept { return tape_id_; }
  void set_tape_id(std::optional<std::size_t> id) noexcept { tape_id_ = id; }

  Tensor reshaped(Shape shape) const;
  Tensor row_slice(std::size_t begin, std::size_t count) const;

  bool all_finite() const noexcept;

 private:
  Shape shape_;
  std::vector<double> values_;
  std::vector<double> grad_;
  bool has_grad_ = false;
  std::optional<std::size_t> tape_id_;
};

// Non-differentiable kernels shared by the tape operations and the oracles.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor softmax_rows(const Tensor& x);

/// out[m x n] += a[m x k] * b[k x n]
void gemm_accumulate(std::span<const double> a, std::span<const double> b, std::span<double> out,
                     std::size_t m, std::size_t k, std::size_t n);
/// out[m x k] += g[m x n] * b[k x n]^T
void gemm_accumulate_bt(std::span<const double> g, std::span<const double> b, std::span<double> out,
                        std::size_t m, std::size_t n, std::size_t k);
/// out[k x n] += a[m x k]^T * g[m x n]
void gemm_accumulate_at(std::span<const double> a, std::span<const double> g, std::span<double> out,
                        std::size_t m, std::size_t k, std::size_t n);

double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace hgmts
