#pragma once

#include <cstdint>
#include <deque>
#include <string>
#include <vector>

#include "hgmts/tensor.hpp"

namespace hgmts {

struct Parameter {
  std::string name;
  Tensor tensor;
};

/// splitmix64 finalizer; used to derive independent seeds from a run seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

/// Uniform double in [0, 1) from the top 53 bits of a 64-bit draw.
/// Platform-independent, unlike std::uniform_real_distribution.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next_u64();
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  std::size_t below(std::size_t bound);

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Owns every trainable tensor of a model. Addresses are stable for the
/// lifetime of the store, so layers keep plain pointers into it.
class ParameterStore {
 public:
  explicit ParameterStore(std::uint64_t seed = 0) : seed_(seed) {}
  ParameterStore(const ParameterStore&) = delete;
  ParameterStore& operator=(const ParameterStore&) = delete;

  /// New parameter initialised uniformly in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
  /// The draw depends only on the store seed and the parameter name.
  Parameter& create(const std::string& name, Shape shape, std::size_t fan_in);

  Parameter* find(const std::string& name);
  const Parameter* find(const std::string& name) const;
  Parameter& at(const std::string& name);

  std::deque<Parameter>& all() noexcept { return params_; }
  const std::deque<Parameter>& all() const noexcept { return params_; }
  std::size_t size() const noexcept { return params_.size(); }
  std::size_t scalar_count() const noexcept;

  void zero_grad();
  std::vector<Tensor> snapshot() const;
  void restore(const std::vector<Tensor>& values);
  /// Copies values of every same-named, same-shaped parameter from `other`.
  std::size_t copy_matching(const ParameterStore& other);

  double l2_norm() const;

 private:
  std::uint64_t seed_;
  std::deque<Parameter> params_;
};

struct AdamState {
  std::uint64_t step = 0;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

/// Bias-corrected Adam update of every parameter in the store, then zeroes
/// the gradients. Throws ContractError if a parameter has no gradient buffer.
void adam_step(AdamState& state, ParameterStore& params);

}  // namespace hgmts
