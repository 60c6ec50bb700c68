#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hgmts/autodiff.hpp"
#include "hgmts/parameters.hpp"

namespace hgmts::testing {

inline Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
  Tensor t(shape, 0.0);
  for (double& v : t.values()) v = rng.uniform(-scale, scale);
  return t;
}

struct GradCheck {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t checked = 0;
  std::string worst;
};

struct NamedTensor {
  std::string name;
  Tensor* tensor;
};

inline std::vector<NamedTensor> all_parameters(ParameterStore& store) {
  std::vector<NamedTensor> out;
  for (Parameter& p : store.all()) out.push_back({p.name, &p.tensor});
  return out;
}

/// Central finite differences of loss = sum(forward(tape) * R) against the
/// tape's gradients, for every entry of every tensor (or `per_tensor` random
/// entries of each when nonzero). `forward` must register the tensors as
/// leaves. Relative error is |a - n| / max(|a|, |n|, floor).
inline GradCheck check_gradients(const std::vector<NamedTensor>& tensors, const std::function<Var(Tape&)>& forward,
                                 std::uint64_t seed, std::size_t per_tensor = 0, double step = 1e-4,
                                 double floor = 1e-6) {
  Rng rng(seed);
  std::optional<Tensor> weights;
  auto loss_value = [&](bool with_backward) {
    Tape tape;
    Var out = forward(tape);
    if (!weights) weights = random_tensor(out.shape(), rng);
    Var loss = sum(mul(out, tape.constant(*weights)));
    if (with_backward) tape.backward(loss);
    return loss.value().item();
  };

  for (const auto& t : tensors) {
    t.tensor->ensure_grad();
    t.tensor->zero_grad();
  }
  loss_value(true);
  std::vector<std::vector<double>> analytic;
  for (const auto& t : tensors) analytic.emplace_back(t.tensor->grad().begin(), t.tensor->grad().end());

  GradCheck result;
  for (std::size_t ti = 0; ti < tensors.size(); ++ti) {
    Tensor& tensor = *tensors[ti].tensor;
    std::vector<std::size_t> entries(tensor.size());
    for (std::size_t i = 0; i < entries.size(); ++i) entries[i] = i;
    if (per_tensor && entries.size() > per_tensor) {
      for (std::size_t i = 0; i < per_tensor; ++i) std::swap(entries[i], entries[i + rng.below(entries.size() - i)]);
      entries.resize(per_tensor);
    }
    for (std::size_t e : entries) {
      const double saved = tensor[e];
      tensor[e] = saved + step;
      const double up = loss_value(false);
      tensor[e] = saved - step;
      const double down = loss_value(false);
      tensor[e] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic[ti][e];
      const double abs_err = std::abs(a - numeric);
      const double rel = abs_err / std::max({std::abs(a), std::abs(numeric), floor});
      result.max_abs_error = std::max(result.max_abs_error, abs_err);
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst = tensors[ti].name + "[" + std::to_string(e) + "] analytic " + std::to_string(a) + " numeric " +
                       std::to_string(numeric);
      }
      ++result.checked;
    }
  }
  for (const auto& t : tensors) t.tensor->zero_grad();
  return result;
}

}  // namespace hgmts::testing
