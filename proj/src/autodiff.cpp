#include "hgmts/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "hgmts/error.hpp"

namespace hgmts {

const Tensor& Var::value() const {
  if (!tape_) throw ContractError("value() on an unbound Var");
  return tape_->value(id_);
}

Var Tape::constant(Tensor value) {
  Node node;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::leaf(Tensor& tensor) {
  if (auto it = leaf_ids_.find(&tensor); it != leaf_ids_.end()) return Var(this, it->second);
  tensor.ensure_grad();
  Node node;
  node.external = &tensor;
  node.requires_grad = true;
  nodes_.push_back(std::move(node));
  const std::size_t id = nodes_.size() - 1;
  leaf_ids_.emplace(&tensor, id);
  tensor.set_tape_id(id);
  return Var(this, id);
}

Var Tape::variable(Tensor value) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = true;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::initializer_list<Var> parents, BackwardFn backward) {
  Node node;
  node.value = std::move(value);
  for (const Var& p : parents) {
    if (p.tape() != this) throw ContractError("operands recorded on different tapes");
    node.requires_grad = node.requires_grad || nodes_[p.id()].requires_grad;
  }
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

const Tensor& Tape::value(std::size_t id) const {
  const Node& node = nodes_.at(id);
  return node.external ? *node.external : node.value;
}

std::span<double> Tape::grad(std::size_t id) {
  Node& node = nodes_[id];
  if (node.grad.empty()) node.grad.assign(value(id).size(), 0.0);
  return node.grad;
}

std::span<const double> Tape::grad_of(Var v) const { return nodes_.at(v.id()).grad; }

void Tape::backward(Var loss) {
  if (loss.tape() != this) throw ContractError("backward() on a Var from another tape");
  if (value(loss.id()).size() != 1) {
    throw ContractError("backward() requires a scalar loss, got shape " + shape_string(value(loss.id()).shape()));
  }
  for (Node& node : nodes_) node.grad.clear();
  if (!nodes_[loss.id()].requires_grad) return;
  grad(loss.id())[0] = 1.0;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (node.grad.empty() || !node.backward) continue;
    node.backward(*this, node.grad);
  }
  for (Node& node : nodes_) {
    if (!node.external || node.grad.empty()) continue;
    auto dst = node.external->grad();
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += node.grad[j];
  }
}

void Tape::clear() {
  for (Node& node : nodes_)
    if (node.external) node.external->set_tape_id(std::nullopt);
  nodes_.clear();
  leaf_ids_.clear();
}

namespace {

void require_same_shape(const char* op, Var a, Var b) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + " shape mismatch: " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

void require_matrix(const char* op, Var x) {
  if (x.value().rank() != 2) {
    throw DimensionError(std::string(op) + " expects a matrix, got " + shape_string(x.shape()));
  }
}

template <typename Fwd, typename Deriv>
Var unary(Var x, Fwd fwd, Deriv deriv) {
  const Tensor& in = x.value();
  Tensor out(in.shape());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = fwd(in[i]);
  const std::size_t xi = x.id();
  Tape& tape = *x.tape();
  const std::size_t self = tape.size();
  return tape.record(std::move(out), {x}, [xi, self, deriv](Tape& t, std::span<const double> g) {
    if (!t.requires_grad(xi)) return;
    const Tensor& input = t.value(xi);
    const Tensor& output = t.value(self);
    auto gx = t.grad(xi);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i] * deriv(input[i], output[i]);
  });
}

}  // namespace

Var matmul(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor out = hgmts::matmul(av, bv);
  const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
  const std::size_t ai = a.id(), bi = b.id();
  return a.tape()->record(std::move(out), {a, b}, [ai, bi, m, k, n](Tape& t, std::span<const double> g) {
    if (t.requires_grad(ai)) gemm_accumulate_bt(g, t.value(bi).values(), t.grad(ai), m, n, k);
    if (t.requires_grad(bi)) gemm_accumulate_at(t.value(ai).values(), g, t.grad(bi), m, k, n);
  });
}

Var add(Var a, Var b) {
  require_same_shape("add", a, b);
  Tensor out = a.value();
  out.drop_grad();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  const std::size_t ai = a.id(), bi = b.id();
  return a.tape()->record(std::move(out), {a, b}, [ai, bi](Tape& t, std::span<const double> g) {
    for (std::size_t id : {ai, bi}) {
      if (!t.requires_grad(id)) continue;
      auto gd = t.grad(id);
      for (std::size_t i = 0; i < gd.size(); ++i) gd[i] += g[i];
    }
  });
}

Var sub(Var a, Var b) {
  require_same_shape("sub", a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  const std::size_t ai = a.id(), bi = b.id();
  return a.tape()->record(std::move(out), {a, b}, [ai, bi](Tape& t, std::span<const double> g) {
    if (t.requires_grad(ai)) {
      auto ga = t.grad(ai);
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
    }
    if (t.requires_grad(bi)) {
      auto gb = t.grad(bi);
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= g[i];
    }
  });
}

Var mul(Var a, Var b) {
  require_same_shape("mul", a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  const std::size_t ai = a.id(), bi = b.id();
  return a.tape()->record(std::move(out), {a, b}, [ai, bi](Tape& t, std::span<const double> g) {
    if (t.requires_grad(ai)) {
      auto ga = t.grad(ai);
      const Tensor& bv = t.value(bi);
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (t.requires_grad(bi)) {
      auto gb = t.grad(bi);
      const Tensor& av = t.value(ai);
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

Var add_bias(Var x, Var bias) {
  require_matrix("add_bias", x);
  const Tensor& xv = x.value();
  const Tensor& bv = bias.value();
  const std::size_t r = xv.rows(), c = xv.cols();
  if (bv.size() != c) {
    throw DimensionError("add_bias shape mismatch: " + shape_string(xv.shape()) + " + " + shape_string(bv.shape()));
  }
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = xv[i * c + j] + bv[j];
  const std::size_t xi = x.id(), bi = bias.id();
  return x.tape()->record(std::move(out), {x, bias}, [xi, bi, r, c](Tape& t, std::span<const double> g) {
    if (t.requires_grad(xi)) {
      auto gx = t.grad(xi);
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i];
    }
    if (t.requires_grad(bi)) {
      auto gb = t.grad(bi);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) gb[j] += g[i * c + j];
    }
  });
}

Var scale(Var x, double factor) {
  return unary(
      x, [factor](double v) { return v * factor; }, [factor](double, double) { return factor; });
}

Var add_scalar(Var x, double offset) {
  return unary(
      x, [offset](double v) { return v + offset; }, [](double, double) { return 1.0; });
}

Var relu(Var x) {
  return unary(
      x, [](double v) { return v > 0.0 ? v : 0.0; }, [](double in, double) { return in > 0.0 ? 1.0 : 0.0; });
}

Var sigmoid(Var x) {
  return unary(
      x,
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double out) { return out * (1.0 - out); });
}

Var tanh(Var x) {
  return unary(
      x, [](double v) { return std::tanh(v); }, [](double, double out) { return 1.0 - out * out; });
}

Var exp(Var x) {
  return unary(
      x, [](double v) { return std::exp(v); }, [](double, double out) { return out; });
}

Var log(Var x) {
  return unary(
      x, [](double v) { return std::log(v); }, [](double in, double) { return 1.0 / in; });
}

Var softmax_rows(Var x) {
  Tensor out = hgmts::softmax_rows(x.value());
  const std::size_t r = out.rows(), c = out.cols();
  const std::size_t xi = x.id();
  Tape& tape = *x.tape();
  const std::size_t self = tape.size();
  return tape.record(std::move(out), {x}, [xi, self, r, c](Tape& t, std::span<const double> g) {
    if (!t.requires_grad(xi)) return;
    const Tensor& y = t.value(self);
    auto gx = t.grad(xi);
    for (std::size_t i = 0; i < r; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < c; ++j) dot += g[i * c + j] * y[i * c + j];
      for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += y[i * c + j] * (g[i * c + j] - dot);
    }
  });
}

Var concat_cols(Var a, Var b) {
  require_matrix("concat_cols", a);
  require_matrix("concat_cols", b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rows() != bv.rows()) {
    throw DimensionError("concat_cols row mismatch: " + shape_string(av.shape()) + " | " + shape_string(bv.shape()));
  }
  const std::size_t r = av.rows(), ca = av.cols(), cb = bv.cols(), c = ca + cb;
  Tensor out = Tensor::matrix(r, c);
  for (std::size_t i = 0; i < r; ++i) {
    std::copy_n(av.data() + i * ca, ca, out.data() + i * c);
    std::copy_n(bv.data() + i * cb, cb, out.data() + i * c + ca);
  }
  const std::size_t ai = a.id(), bi = b.id();
  return a.tape()->record(std::move(out), {a, b}, [ai, bi, r, ca, cb, c](Tape& t, std::span<const double> g) {
    if (t.requires_grad(ai)) {
      auto ga = t.grad(ai);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < ca; ++j) ga[i * ca + j] += g[i * c + j];
    }
    if (t.requires_grad(bi)) {
      auto gb = t.grad(bi);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < cb; ++j) gb[i * cb + j] += g[i * c + ca + j];
    }
  });
}

Var slice_rows(Var x, std::size_t begin, std::size_t count) {
  require_matrix("slice_rows", x);
  Tensor out = x.value().row_slice(begin, count);
  const std::size_t c = out.cols();
  const std::size_t xi = x.id();
  return x.tape()->record(std::move(out), {x}, [xi, begin, count, c](Tape& t, std::span<const double> g) {
    if (!t.requires_grad(xi)) return;
    auto gx = t.grad(xi);
    for (std::size_t i = 0; i < count * c; ++i) gx[begin * c + i] += g[i];
  });
}

Var slice_cols(Var x, std::size_t begin, std::size_t count) {
  require_matrix("slice_cols", x);
  const Tensor& xv = x.value();
  const std::size_t r = xv.rows(), c = xv.cols();
  if (begin + count > c) {
    throw DimensionError("column slice out of range for " + shape_string(xv.shape()));
  }
  Tensor out = Tensor::matrix(r, count);
  for (std::size_t i = 0; i < r; ++i) std::copy_n(xv.data() + i * c + begin, count, out.data() + i * count);
  const std::size_t xi = x.id();
  return x.tape()->record(std::move(out), {x}, [xi, begin, count, r, c](Tape& t, std::span<const double> g) {
    if (!t.requires_grad(xi)) return;
    auto gx = t.grad(xi);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < count; ++j) gx[i * c + begin + j] += g[i * count + j];
  });
}

Var sum(Var x) {
  const Tensor& xv = x.value();
  double total = 0.0;
  for (double v : xv.values()) total += v;
  const std::size_t xi = x.id();
  return x.tape()->record(Tensor::scalar(total), {x}, [xi](Tape& t, std::span<const double> g) {
    if (!t.requires_grad(xi)) return;
    for (double& v : t.grad(xi)) v += g[0];
  });
}

Var mean(Var x) {
  const std::size_t n = x.value().size();
  if (n == 0) throw ContractError("mean of an empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(n));
}

Var row_sum(Var x) {
  require_matrix("row_sum", x);
  const Tensor& xv = x.value();
  const std::size_t r = xv.rows(), c = xv.cols();
  Tensor out = Tensor::matrix(r, 1);
  for (std::size_t i = 0; i < r; ++i) {
    double total = 0.0;
    for (std::size_t j = 0; j < c; ++j) total += xv[i * c + j];
    out[i] = total;
  }
  const std::size_t xi = x.id();
  return x.tape()->record(std::move(out), {x}, [xi, r, c](Tape& t, std::span<const double> g) {
    if (!t.requires_grad(xi)) return;
    auto gx = t.grad(xi);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += g[i];
  });
}

Var scale_rows(Var x, Var s) {
  require_matrix("scale_rows", x);
  const Tensor& xv = x.value();
  const Tensor& sv = s.value();
  const std::size_t r = xv.rows(), c = xv.cols();
  if (sv.size() != r) {
    throw DimensionError("scale_rows shape mismatch: " + shape_string(xv.shape()) + " by " + shape_string(sv.shape()));
  }
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = xv[i * c + j] * sv[i];
  const std::size_t xi = x.id(), si = s.id();
  return x.tape()->record(std::move(out), {x, s}, [xi, si, r, c](Tape& t, std::span<const double> g) {
    if (t.requires_grad(xi)) {
      const Tensor& sv = t.value(si);
      auto gx = t.grad(xi);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += g[i * c + j] * sv[i];
    }
    if (t.requires_grad(si)) {
      const Tensor& xv = t.value(xi);
      auto gs = t.grad(si);
      for (std::size_t i = 0; i < r; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < c; ++j) acc += g[i * c + j] * xv[i * c + j];
        gs[i] += acc;
      }
    }
  });
}

Var gather_rows(Var x, std::span<const std::size_t> index) {
  require_matrix("gather_rows", x);
  const Tensor& xv = x.value();
  const std::size_t r = xv.rows(), c = xv.cols();
  Tensor out = Tensor::matrix(index.size(), c);
  for (std::size_t e = 0; e < index.size(); ++e) {
    if (index[e] >= r) throw DimensionError("gather_rows index out of range");
    std::copy_n(xv.data() + index[e] * c, c, out.data() + e * c);
  }
  const std::size_t xi = x.id();
  std::vector<std::size_t> idx(index.begin(), index.end());
  return x.tape()->record(std::move(out), {x}, [xi, c, idx = std::move(idx)](Tape& t, std::span<const double> g) {
    if (!t.requires_grad(xi)) return;
    auto gx = t.grad(xi);
    for (std::size_t e = 0; e < idx.size(); ++e)
      for (std::size_t j = 0; j < c; ++j) gx[idx[e] * c + j] += g[e * c + j];
  });
}

Var scatter_add_rows(Var x, std::span<const std::size_t> index, std::size_t rows) {
  require_matrix("scatter_add_rows", x);
  const Tensor& xv = x.value();
  const std::size_t c = xv.cols();
  if (index.size() != xv.rows()) throw DimensionError("scatter_add_rows index count does not match rows");
  Tensor out = Tensor::matrix(rows, c);
  for (std::size_t e = 0; e < index.size(); ++e) {
    if (index[e] >= rows) throw DimensionError("scatter_add_rows index out of range");
    for (std::size_t j = 0; j < c; ++j) out[index[e] * c + j] += xv[e * c + j];
  }
  const std::size_t xi = x.id();
  std::vector<std::size_t> idx(index.begin(), index.end());
  return x.tape()->record(std::move(out), {x}, [xi, c, idx = std::move(idx)](Tape& t, std::span<const double> g) {
    if (!t.requires_grad(xi)) return;
    auto gx = t.grad(xi);
    for (std::size_t e = 0; e < idx.size(); ++e)
      for (std::size_t j = 0; j < c; ++j) gx[e * c + j] += g[idx[e] * c + j];
  });
}

Var segment_softmax(Var x, std::span<const std::size_t> offsets) {
  const Tensor& xv = x.value();
  if (!xv.all_finite()) throw NumericError("segment_softmax: non-finite input");
  if (offsets.empty() || offsets.front() != 0 || offsets.back() != xv.size()) {
    throw ContractError("segment_softmax offsets must span [0, size]");
  }
  Tensor out(xv.shape());
  for (std::size_t s = 0; s + 1 < offsets.size(); ++s) {
    const std::size_t lo = offsets[s], hi = offsets[s + 1];
    if (lo == hi) continue;
    double top = xv[lo];
    for (std::size_t e = lo; e < hi; ++e) top = std::max(top, xv[e]);
    double total = 0.0;
    for (std::size_t e = lo; e < hi; ++e) {
      out[e] = std::exp(xv[e] - top);
      total += out[e];
    }
    for (std::size_t e = lo; e < hi; ++e) out[e] /= total;
  }
  const std::size_t xi = x.id();
  Tape& tape = *x.tape();
  const std::size_t self = tape.size();
  std::vector<std::size_t> seg(offsets.begin(), offsets.end());
  return tape.record(std::move(out), {x}, [xi, self, seg = std::move(seg)](Tape& t, std::span<const double> g) {
    if (!t.requires_grad(xi)) return;
    const Tensor& y = t.value(self);
    auto gx = t.grad(xi);
    for (std::size_t s = 0; s + 1 < seg.size(); ++s) {
      double dot = 0.0;
      for (std::size_t e = seg[s]; e < seg[s + 1]; ++e) dot += g[e] * y[e];
      for (std::size_t e = seg[s]; e < seg[s + 1]; ++e) gx[e] += y[e] * (g[e] - dot);
    }
  });
}

namespace {

void check_kernel(std::size_t kernel) {
  if (kernel == 0 || kernel % 2 == 0) {
    throw ContractError("avgpool1d kernel must be odd and >= 1, got " + std::to_string(kernel));
  }
}

// Source index of padded position p (in [-half, L + half)), or -1 for a zero pad.
std::ptrdiff_t pad_source(std::ptrdiff_t p, std::ptrdiff_t len, PaddingMode mode) {
  if (p >= 0 && p < len) return p;
  if (mode == PaddingMode::zero) return -1;
  return p < 0 ? 0 : len - 1;
}

}  // namespace

Tensor avgpool1d(const Tensor& x, std::size_t kernel, PaddingMode mode) {
  check_kernel(kernel);
  const std::size_t r = x.rows(), c = x.cols();
  const auto len = static_cast<std::ptrdiff_t>(c);
  const auto half = static_cast<std::ptrdiff_t>(kernel / 2);
  const auto k = static_cast<double>(kernel);
  Tensor out(x.shape());
  for (std::size_t i = 0; i < r; ++i) {
    const double* in = x.data() + i * c;
    double* o = out.data() + i * c;
    for (std::ptrdiff_t t = 0; t < len; ++t) {
      // Summed as offsets from the centre so a flat window reproduces itself exactly.
      double acc = 0.0;
      for (std::ptrdiff_t p = t - half; p <= t + half; ++p) {
        const std::ptrdiff_t src = pad_source(p, len, mode);
        acc += (src >= 0 ? in[src] : 0.0) - in[t];
      }
      o[t] = in[t] + acc / k;
    }
  }
  return out;
}

Var avgpool1d(Var x, std::size_t kernel, PaddingMode mode) {
  Tensor out = avgpool1d(x.value(), kernel, mode);
  const std::size_t r = out.rows(), c = out.cols();
  const std::size_t xi = x.id();
  return x.tape()->record(std::move(out), {x}, [xi, kernel, mode, r, c](Tape& t, std::span<const double> g) {
    if (!t.requires_grad(xi)) return;
    auto gx = t.grad(xi);
    const auto len = static_cast<std::ptrdiff_t>(c);
    const auto half = static_cast<std::ptrdiff_t>(kernel / 2);
    const double inv = 1.0 / static_cast<double>(kernel);
    for (std::size_t i = 0; i < r; ++i) {
      for (std::ptrdiff_t tt = 0; tt < len; ++tt) {
        const double gi = g[i * c + static_cast<std::size_t>(tt)] * inv;
        for (std::ptrdiff_t p = tt - half; p <= tt + half; ++p) {
          const std::ptrdiff_t src = pad_source(p, len, mode);
          if (src >= 0) gx[i * c + static_cast<std::size_t>(src)] += gi;
        }
      }
    }
  });
}

}  // namespace hgmts
