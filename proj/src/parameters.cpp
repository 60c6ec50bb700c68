#include "hgmts/parameters.hpp"

#include <cmath>
#include <numbers>

#include "hgmts/error.hpp"

namespace hgmts {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t Rng::next_u64() {
  state_ += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

std::size_t Rng::below(std::size_t bound) {
  if (bound == 0) throw ContractError("Rng::below(0)");
  return static_cast<std::size_t>(next_u64() % bound);
}

namespace {

std::uint64_t hash_name(const std::string& name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : name) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

Parameter& ParameterStore::create(const std::string& name, Shape shape, std::size_t fan_in) {
  if (find(name)) throw ContractError("duplicate parameter name '" + name + "'");
  Tensor t(std::move(shape));
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(fan_in, 1)));
  Rng rng(mix_seed(seed_, hash_name(name)));
  for (double& v : t.values()) v = rng.uniform(-bound, bound);
  params_.push_back(Parameter{name, std::move(t)});
  return params_.back();
}

Parameter* ParameterStore::find(const std::string& name) {
  for (Parameter& p : params_)
    if (p.name == name) return &p;
  return nullptr;
}

const Parameter* ParameterStore::find(const std::string& name) const {
  for (const Parameter& p : params_)
    if (p.name == name) return &p;
  return nullptr;
}

Parameter& ParameterStore::at(const std::string& name) {
  Parameter* p = find(name);
  if (!p) throw ContractError("no parameter named '" + name + "'");
  return *p;
}

std::size_t ParameterStore::scalar_count() const noexcept {
  std::size_t total = 0;
  for (const Parameter& p : params_) total += p.tensor.size();
  return total;
}

void ParameterStore::zero_grad() {
  for (Parameter& p : params_) p.tensor.zero_grad();
}

std::vector<Tensor> ParameterStore::snapshot() const {
  std::vector<Tensor> out;
  out.reserve(params_.size());
  for (const Parameter& p : params_) {
    Tensor copy(p.tensor.shape(), std::vector<double>(p.tensor.values().begin(), p.tensor.values().end()));
    out.push_back(std::move(copy));
  }
  return out;
}

void ParameterStore::restore(const std::vector<Tensor>& values) {
  if (values.size() != params_.size()) throw ContractError("restore: parameter count mismatch");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i].shape() != params_[i].tensor.shape()) {
      throw DimensionError("restore: shape mismatch for '" + params_[i].name + "'");
    }
    std::copy(values[i].values().begin(), values[i].values().end(), params_[i].tensor.values().begin());
  }
}

std::size_t ParameterStore::copy_matching(const ParameterStore& other) {
  std::size_t copied = 0;
  for (Parameter& p : params_) {
    const Parameter* src = other.find(p.name);
    if (!src || src->tensor.shape() != p.tensor.shape()) continue;
    std::copy(src->tensor.values().begin(), src->tensor.values().end(), p.tensor.values().begin());
    ++copied;
  }
  return copied;
}

double ParameterStore::l2_norm() const {
  double total = 0.0;
  for (const Parameter& p : params_)
    for (double v : p.tensor.values()) total += v * v;
  return std::sqrt(total);
}

void adam_step(AdamState& state, ParameterStore& params) {
  auto& all = params.all();
  if (state.m.empty()) {
    state.m.resize(all.size());
    state.v.resize(all.size());
    for (std::size_t i = 0; i < all.size(); ++i) {
      state.m[i].assign(all[i].tensor.size(), 0.0);
      state.v[i].assign(all[i].tensor.size(), 0.0);
    }
  }
  if (state.m.size() != all.size()) throw ContractError("adam_step: state does not match parameter set");
  for (const Parameter& p : all) {
    if (!p.tensor.has_grad()) throw ContractError("adam_step: parameter '" + p.name + "' has no gradient");
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < all.size(); ++i) {
    auto values = all[i].tensor.values();
    auto grad = all[i].tensor.grad();
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < values.size(); ++j) {
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * grad[j];
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * grad[j] * grad[j];
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      values[j] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
    }
    all[i].tensor.zero_grad();
  }
}

}  // namespace hgmts
