#include "hgmts/decomposition.hpp"

#include "hgmts/error.hpp"

namespace hgmts {

DecomposedSeries decompose(const Tensor& x, std::size_t kernel, PaddingMode mode) {
  DecomposedSeries out{avgpool1d(x, kernel, mode), Tensor(x.shape())};
  for (std::size_t i = 0; i < x.size(); ++i) out.seasonal[i] = x[i] - out.trend[i];
  return out;
}

DecomposedVars decompose(Var x, std::size_t kernel, PaddingMode mode) {
  Var trend = avgpool1d(x, kernel, mode);
  return {trend, sub(x, trend)};
}

PaddingMode parse_padding_mode(std::string_view text) {
  if (text == "edge") return PaddingMode::edge;
  if (text == "zero") return PaddingMode::zero;
  throw ConfigError("unknown padding mode '" + std::string(text) + "' (expected edge or zero)");
}

std::string to_string(PaddingMode mode) { return mode == PaddingMode::edge ? "edge" : "zero"; }

}  // namespace hgmts
