#include "hgmts/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include <Eigen/Core>

#include "hgmts/error.hpp"

namespace hgmts {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

}  // namespace

std::size_t shape_size(const Shape& shape) noexcept {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  values_.assign(shape_size(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (shape_size(shape_) != values_.size()) {
    throw DimensionError("tensor shape " + shape_string(shape_) + " does not match " +
                         std::to_string(values_.size()) + " values");
  }
}

Tensor Tensor::scalar(double value) { return Tensor(Shape{}, std::vector<double>{value}); }

Tensor Tensor::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor(Shape{n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, double fill) {
  return Tensor(Shape{rows, cols}, fill);
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> values;
  values.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("ragged rows in Tensor::from_rows");
    values.insert(values.end(), row.begin(), row.end());
  }
  return Tensor(Shape{r, c}, std::move(values));
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t = matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
  return t;
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for " + shape_string(shape_));
  }
  return shape_[axis];
}

std::size_t Tensor::rows() const {
  switch (shape_.size()) {
    case 0:
    case 1:
      return 1;
    case 2:
      return shape_[0];
    default:
      throw DimensionError("matrix view of rank-" + std::to_string(shape_.size()) + " tensor");
  }
}

std::size_t Tensor::cols() const {
  switch (shape_.size()) {
    case 0:
      return 1;
    case 1:
      return shape_[0];
    case 2:
      return shape_[1];
    default:
      throw DimensionError("matrix view of rank-" + std::to_string(shape_.size()) + " tensor");
  }
}

double Tensor::item() const {
  if (values_.size() != 1) throw DimensionError("item() on tensor of shape " + shape_string(shape_));
  return values_[0];
}

void Tensor::ensure_grad() {
  if (!has_grad_) {
    grad_.assign(values_.size(), 0.0);
    has_grad_ = true;
  }
}

void Tensor::zero_grad() {
  if (has_grad_) std::fill(grad_.begin(), grad_.end(), 0.0);
}

void Tensor::drop_grad() noexcept {
  grad_.clear();
  has_grad_ = false;
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_size(shape) != values_.size()) {
    throw DimensionError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  }
  return Tensor(std::move(shape), values_);
}

Tensor Tensor::row_slice(std::size_t begin, std::size_t count) const {
  const std::size_t c = cols();
  if (begin + count > rows()) {
    throw DimensionError("row slice [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                         ") out of range for " + shape_string(shape_));
  }
  auto first = values_.begin() + static_cast<std::ptrdiff_t>(begin * c);
  return Tensor(Shape{count, c}, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(count * c)));
}

bool Tensor::all_finite() const noexcept {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

void gemm_accumulate(std::span<const double> a, std::span<const double> b, std::span<double> out,
                     std::size_t m, std::size_t k, std::size_t n) {
  const auto mi = static_cast<Eigen::Index>(m);
  const auto ki = static_cast<Eigen::Index>(k);
  const auto ni = static_cast<Eigen::Index>(n);
  MutMap(out.data(), mi, ni).noalias() += ConstMap(a.data(), mi, ki) * ConstMap(b.data(), ki, ni);
}

void gemm_accumulate_bt(std::span<const double> g, std::span<const double> b, std::span<double> out,
                        std::size_t m, std::size_t n, std::size_t k) {
  const auto mi = static_cast<Eigen::Index>(m);
  const auto ki = static_cast<Eigen::Index>(k);
  const auto ni = static_cast<Eigen::Index>(n);
  MutMap(out.data(), mi, ki).noalias() += ConstMap(g.data(), mi, ni) * ConstMap(b.data(), ki, ni).transpose();
}

void gemm_accumulate_at(std::span<const double> a, std::span<const double> g, std::span<double> out,
                        std::size_t m, std::size_t k, std::size_t n) {
  const auto mi = static_cast<Eigen::Index>(m);
  const auto ki = static_cast<Eigen::Index>(k);
  const auto ni = static_cast<Eigen::Index>(n);
  MutMap(out.data(), ki, ni).noalias() += ConstMap(a.data(), mi, ki).transpose() * ConstMap(g.data(), mi, ni);
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows()) {
    throw DimensionError("matmul shape mismatch: " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
  }
  Tensor out = Tensor::matrix(a.rows(), b.cols());
  gemm_accumulate(a.values(), b.values(), out.values(), a.rows(), a.cols(), b.cols());
  return out;
}

Tensor transpose(const Tensor& a) {
  const std::size_t r = a.rows();
  const std::size_t c = a.cols();
  Tensor out = Tensor::matrix(c, r);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out(j, i) = a(i, j);
  return out;
}

Tensor softmax_rows(const Tensor& x) {
  if (!x.all_finite()) throw NumericError("softmax_rows: non-finite input");
  Tensor out(x.shape());
  const std::size_t r = x.rows();
  const std::size_t c = x.cols();
  for (std::size_t i = 0; i < r; ++i) {
    const double* in = x.data() + i * c;
    double* o = out.data() + i * c;
    const double top = *std::max_element(in, in + c);
    double total = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      o[j] = std::exp(in[j] - top);
      total += o[j];
    }
    for (std::size_t j = 0; j < c; ++j) o[j] /= total;
  }
  return out;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.size() != b.size()) {
    throw DimensionError("max_abs_diff: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

}  // namespace hgmts
