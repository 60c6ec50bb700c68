#pragma once

#include <string>
#include <string_view>

#include "hgmts/autodiff.hpp"

namespace hgmts {

/// Trend/seasonal split of an N x L window; trend + seasonal == input.
struct DecomposedSeries {
  Tensor trend;
  Tensor seasonal;
};

struct DecomposedVars {
  Var trend;
  Var seasonal;
};

/// Moving-average trend with length-preserving padding; seasonal is the residual.
DecomposedSeries decompose(const Tensor& x, std::size_t kernel, PaddingMode mode);
DecomposedVars decompose(Var x, std::size_t kernel, PaddingMode mode);

PaddingMode parse_padding_mode(std::string_view text);
std::string to_string(PaddingMode mode);

}  // namespace hgmts
