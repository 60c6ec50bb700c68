#include <doctest.h>

#include <cmath>
#include <numbers>

#include "hgmts/decomposition.hpp"
#include "hgmts/error.hpp"
#include "support.hpp"

using namespace hgmts;
using hgmts::testing::random_tensor;

TEST_CASE("trend plus seasonal reproduces the input") {
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t kernel = 2 * rng.below(8) + 1;
    const Tensor x = random_tensor({3, 20}, rng, 5.0);
    for (PaddingMode mode : {PaddingMode::edge, PaddingMode::zero}) {
      const DecomposedSeries d = decompose(x, kernel, mode);
      for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(d.trend[i] + d.seasonal[i] - x[i]) <= 1e-12);
    }
  }
}

TEST_CASE("decomposition is linear") {
  Rng rng(2);
  const Tensor x = random_tensor({2, 30}, rng), y = random_tensor({2, 30}, rng);
  const double a = 1.7, b = -0.4;
  Tensor combo = x;
  for (std::size_t i = 0; i < combo.size(); ++i) combo[i] = a * x[i] + b * y[i];
  for (PaddingMode mode : {PaddingMode::edge, PaddingMode::zero}) {
    const Tensor tc = decompose(combo, 7, mode).trend;
    const Tensor tx = decompose(x, 7, mode).trend, ty = decompose(y, 7, mode).trend;
    for (std::size_t i = 0; i < tc.size(); ++i) CHECK(std::abs(tc[i] - (a * tx[i] + b * ty[i])) <= 1e-10);
  }
}

TEST_CASE("degenerate cases") {
  const Tensor c = Tensor::matrix(2, 12, -3.25);
  const DecomposedSeries d = decompose(c, 5, PaddingMode::edge);
  CHECK(max_abs_diff(d.trend, c) == 0.0);
  for (double v : d.seasonal.values()) CHECK(v == 0.0);

  Rng rng(3);
  const Tensor x = random_tensor({4, 9}, rng);
  const DecomposedSeries one = decompose(x, 1, PaddingMode::zero);
  CHECK(max_abs_diff(one.trend, x) == 0.0);
  for (double v : one.seasonal.values()) CHECK(v == 0.0);
}

TEST_CASE("pure sine with kernel equal to its period has a flat interior trend") {
  const std::size_t period = 25, len = 100;
  Tensor x = Tensor::matrix(1, len);
  for (std::size_t t = 0; t < len; ++t) x(0, t) = std::sin(2.0 * std::numbers::pi * t / period);
  const DecomposedSeries d = decompose(x, period, PaddingMode::edge);
  for (std::size_t t = period / 2; t + period / 2 < len; ++t) {
    CHECK(std::abs(d.trend(0, t)) < 1e-12);
    CHECK(std::abs(d.seasonal(0, t) - x(0, t)) < 1e-12);
  }
}

TEST_CASE("gradient flows through both branches") {
  Rng rng(4);
  Tensor x = random_tensor({2, 10}, rng);
  Tensor wt = random_tensor({10, 3}, rng), ws = random_tensor({10, 3}, rng);
  for (PaddingMode mode : {PaddingMode::edge, PaddingMode::zero}) {
    const auto r = testing::check_gradients({{"x", &x}, {"wt", &wt}, {"ws", &ws}}, [&](Tape& tape) {
      DecomposedVars d = decompose(tape.leaf(x), 5, mode);
      return add(matmul(d.trend, tape.leaf(wt)), matmul(d.seasonal, tape.leaf(ws)));
    }, 17);
    CHECK_MESSAGE(r.max_rel_error < 1e-4, r.worst);
  }
}

TEST_CASE("padding mode parsing") {
  CHECK(parse_padding_mode("edge") == PaddingMode::edge);
  CHECK(parse_padding_mode("zero") == PaddingMode::zero);
  CHECK(to_string(PaddingMode::zero) == "zero");
  CHECK_THROWS_AS(parse_padding_mode("reflect"), ConfigError);
}
