#pragma once

#include "hgmts/tensor.hpp"

namespace hgmts {

/// Mean squared error over every entry; throws DimensionError on shape mismatch.
double mse(const Tensor& y, const Tensor& prediction);
/// Mean absolute error over every entry.
double mae(const Tensor& y, const Tensor& prediction);

/// Repeats the last column of x [M x L] for `horizon` steps.
Tensor persistence_forecast(const Tensor& x, std::size_t horizon);

}  // namespace hgmts
