#include "hgmts/metrics.hpp"

#include <cmath>

#include "hgmts/error.hpp"

namespace hgmts {

namespace {

void check_shapes(const Tensor& y, const Tensor& p, const char* what) {
  if (y.shape() != p.shape()) {
    throw DimensionError(std::string(what) + ": shape mismatch " + shape_string(y.shape()) + " vs " +
                         shape_string(p.shape()));
  }
  if (y.size() == 0) throw DimensionError(std::string(what) + ": empty input");
}

}  // namespace

double mse(const Tensor& y, const Tensor& prediction) {
  check_shapes(y, prediction, "mse");
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double d = y[i] - prediction[i];
    s += d * d;
  }
  return s / static_cast<double>(y.size());
}

double mae(const Tensor& y, const Tensor& prediction) {
  check_shapes(y, prediction, "mae");
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += std::abs(y[i] - prediction[i]);
  return s / static_cast<double>(y.size());
}

Tensor persistence_forecast(const Tensor& x, std::size_t horizon) {
  if (x.cols() == 0) throw DimensionError("persistence_forecast: empty window");
  Tensor out = Tensor::matrix(x.rows(), horizon);
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t k = 0; k < horizon; ++k) out(r, k) = x(r, x.cols() - 1);
  return out;
}

}  // namespace hgmts
