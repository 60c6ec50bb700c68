#pragma once

#include <cstdint>

#include "hgmts/data.hpp"

namespace hgmts {

/// Coupled series with a known lagged influence matrix:
///
///   base_i(t) = trend(t) + amp * sin(2 pi t / period + phase_i) + d_i(t) + noise
///   x(t)      = base(t) + A x(t - lag)
///
/// where d_i is an AR(1) driver with unit stationary variance (scaled by
/// `follower_scale` on followers). The first `drivers` nodes are independent;
/// each remaining node follows one driver with weight `coupling`, so A is
/// sparse and nilpotent.
struct SyntheticSpec {
  std::size_t nodes = 8;
  std::size_t length = 2000;
  std::size_t lag = 24;
  std::size_t drivers = 4;
  double coupling = 1.0;
  double ar = 0.9;
  double follower_scale = 0.0;
  double seasonal_amplitude = 1.0;
  std::size_t period = 24;
  double trend_amplitude = 0.5;
  std::size_t trend_period = 500;
  double noise = 0.1;
  std::uint64_t seed = 7;

  void validate() const;
};

struct SyntheticData {
  Dataset dataset;
  Tensor coupling;  ///< A [N x N], A(i, j) is the weight of x_j(t - lag) in x_i(t)
};

SyntheticData generate_synthetic(const SyntheticSpec& spec);

}  // namespace hgmts
