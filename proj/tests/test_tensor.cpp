#include <doctest.h>

#include <cmath>

#include "hgmts/error.hpp"
#include "hgmts/parameters.hpp"
#include "hgmts/tensor.hpp"
#include "support.hpp"

using namespace hgmts;

TEST_CASE("matmul hand examples") {
  const Tensor a = Tensor::from_rows({{1, 2}});
  const Tensor b = Tensor::from_rows({{3}, {4}});
  const Tensor c = matmul(a, b);
  CHECK(c.shape() == Shape{1, 1});
  CHECK(c(0, 0) == 11.0);

  const Tensor m = Tensor::from_rows({{1, 2}, {3, 4}});
  CHECK(max_abs_diff(matmul(Tensor::identity(2), m), m) == 0.0);
}

TEST_CASE("matmul reports mismatched shapes") {
  const Tensor a = Tensor::matrix(2, 3);
  try {
    (void)matmul(a, a);
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    CHECK(std::string(e.what()).find("[2x3] x [2x3]") != std::string::npos);
  }
}

TEST_CASE("matmul matches a triple loop") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t m = 1 + rng.below(7), k = 1 + rng.below(7), n = 1 + rng.below(7);
    const Tensor a = testing::random_tensor({m, k}, rng), b = testing::random_tensor({k, n}, rng);
    const Tensor c = matmul(a, b);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0;
        for (std::size_t t = 0; t < k; ++t) s += a(i, t) * b(t, j);
        CHECK(c(i, j) == doctest::Approx(s).epsilon(1e-14));
      }
  }
}

TEST_CASE("transpose swaps indices") {
  const Tensor a = Tensor::from_rows({{1, 2, 3}, {4, 5, 6}});
  const Tensor t = transpose(a);
  CHECK(t.shape() == Shape{3, 2});
  CHECK(t(2, 1) == 6.0);
  CHECK(t(0, 1) == 4.0);
}

TEST_CASE("softmax rows") {
  const Tensor s = softmax_rows(Tensor::from_rows({{0.0, std::log(3.0)}}));
  CHECK(s(0, 0) == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(s(0, 1) == doctest::Approx(0.75).epsilon(1e-14));

  const Tensor u = softmax_rows(Tensor::from_rows({{2, 2, 2, 2}}));
  for (std::size_t j = 0; j < 4; ++j) CHECK(u(0, j) == doctest::Approx(0.25));

  Rng rng(11);
  Tensor x = testing::random_tensor({6, 9}, rng, 30.0);
  const Tensor sx = softmax_rows(x);
  for (std::size_t i = 0; i < 6; ++i) {
    double total = 0;
    for (std::size_t j = 0; j < 9; ++j) total += sx(i, j);
    CHECK(std::abs(total - 1.0) < 1e-12);
  }
  Tensor shifted = x;
  for (std::size_t j = 0; j < 9; ++j) shifted(2, j) += 123.0;
  CHECK(max_abs_diff(softmax_rows(shifted), sx) < 1e-12);

  const Tensor big = softmax_rows(Tensor::from_rows({{1000, 1001}}));
  CHECK(big.all_finite());
}

TEST_CASE("softmax rejects non-finite input") {
  CHECK_THROWS_AS(softmax_rows(Tensor::from_rows({{0.0, NAN}})), NumericError);
}

TEST_CASE("tensor construction checks sizes") {
  CHECK_THROWS_AS(Tensor(Shape{2, 2}, std::vector<double>{1, 2, 3}), DimensionError);
  const Tensor t(Shape{2, 3}, 1.5);
  CHECK(t.size() == 6);
  CHECK(shape_string(t.shape()) == "[2x3]");
  CHECK_THROWS(Tensor(Shape{2, 2, 2}, 0.0).rows());
}

TEST_CASE("rng is deterministic and in range") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng c(5);
  for (int i = 0; i < 1000; ++i) {
    const double u = c.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(c.below(7) < 7);
  }
  CHECK(mix_seed(1, 2) != mix_seed(2, 1));
}
