#include "hgmts/synthetic.hpp"

#include <cmath>
#include <numbers>

#include "hgmts/error.hpp"
#include "hgmts/parameters.hpp"

namespace hgmts {

void SyntheticSpec::validate() const {
  if (nodes == 0 || length == 0) throw ConfigError("synthetic: nodes and length must be positive");
  if (drivers == 0 || drivers > nodes) throw ConfigError("synthetic: drivers must be in [1, nodes]");
  if (lag == 0) throw ConfigError("synthetic: lag must be at least 1");
  if (period == 0 || trend_period == 0) throw ConfigError("synthetic: periods must be positive");
  if (!(std::abs(ar) < 1.0)) throw ConfigError("synthetic: |ar| must be below 1");
  if (follower_scale < 0) throw ConfigError("synthetic: follower_scale must be non-negative");
  if (noise < 0) throw ConfigError("synthetic: noise must be non-negative");
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const std::size_t n = spec.nodes, t_len = spec.length;
  Rng rng(spec.seed);

  SyntheticData out;
  out.coupling = Tensor::matrix(n, n);
  for (std::size_t i = spec.drivers; i < n; ++i) out.coupling(i, (i - spec.drivers) % spec.drivers) = spec.coupling;

  std::vector<double> phase(n);
  for (auto& p : phase) p = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double innovation = std::sqrt(1.0 - spec.ar * spec.ar);
  std::vector<double> driver(n);
  for (auto& d : driver) d = rng.normal();

  // Burn-in lets the lagged term settle so row 0 is already stationary.
  const std::size_t burn = spec.lag * 4;
  const std::size_t total = t_len + burn;
  Tensor x = Tensor::matrix(total, n);
  for (std::size_t t = 0; t < total; ++t) {
    const double time = static_cast<double>(t) - static_cast<double>(burn);
    const double trend = spec.trend_amplitude * std::sin(2.0 * std::numbers::pi * time / spec.trend_period);
    for (std::size_t i = 0; i < n; ++i) {
      driver[i] = spec.ar * driver[i] + innovation * rng.normal();
      const double own = i < spec.drivers ? driver[i] : spec.follower_scale * driver[i];
      double v = trend + own + spec.noise * rng.normal() +
                 spec.seasonal_amplitude * std::sin(2.0 * std::numbers::pi * time / spec.period + phase[i]);
      if (t >= spec.lag)
        for (std::size_t j = 0; j < n; ++j)
          if (out.coupling(i, j) != 0.0) v += out.coupling(i, j) * x(t - spec.lag, j);
      x(t, i) = v;
    }
  }

  Dataset& ds = out.dataset;
  ds.name = "synthetic";
  ds.frequency = "step";
  ds.values = Tensor::matrix(t_len, n);
  for (std::size_t t = 0; t < t_len; ++t) {
    ds.timestamps.push_back(std::to_string(t));
    for (std::size_t i = 0; i < n; ++i) ds.values(t, i) = x(t + burn, i);
  }
  for (std::size_t i = 0; i < n; ++i) ds.channels.push_back("s" + std::to_string(i));
  return out;
}

}  // namespace hgmts
