#include "hgmts/lgsl.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hgmts/error.hpp"

namespace hgmts {

std::size_t selection_count(double sampling_factor, std::size_t nodes) {
  if (nodes == 0) throw ContractError("selection_count: graph has no nodes");
  if (!(sampling_factor > 0.0)) throw ConfigError("sampling factor c must be positive");
  const double raw = std::floor(sampling_factor * std::log(static_cast<double>(nodes)));
  if (raw < 1.0) return 1;
  if (raw >= static_cast<double>(nodes)) return nodes;
  return static_cast<std::size_t>(raw);
}

std::size_t count_for_gamma(double gamma, std::size_t nodes) {
  if (nodes == 0) throw ContractError("count_for_gamma: graph has no nodes");
  if (!(gamma > 0.0)) throw ConfigError("sparsity ratio gamma must be positive");
  const double raw = std::round(gamma * static_cast<double>(nodes));
  return static_cast<std::size_t>(std::clamp(raw, 1.0, static_cast<double>(nodes)));
}

double factor_for_gamma(double gamma, std::size_t nodes) {
  const std::size_t n = count_for_gamma(gamma, nodes);
  if (nodes == 1) return 1.0;
  // Midpoint of [n, n+1) so the floor lands on n despite rounding.
  return (static_cast<double>(n) + 0.5) / std::log(static_cast<double>(nodes));
}

QueryKey project_qk(const Tensor& h, const Tensor& wq, const Tensor& wk) {
  return {matmul(h, wq), matmul(h, wk)};
}

namespace {

double dot_row(const Tensor& a, std::size_t i, const Tensor& b, std::size_t j) {
  const std::size_t d = a.cols();
  const double* x = a.data() + i * d;
  const double* y = b.data() + j * d;
  double acc = 0.0;
  for (std::size_t c = 0; c < d; ++c) acc += x[c] * y[c];
  return acc;
}

// Indices of the n largest values; ties resolved towards the lower index.
std::vector<std::size_t> top_n(std::span<const double> values, std::size_t n) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  n = std::min(n, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n), order.end(),
                    [&](std::size_t a, std::size_t b) { return values[a] > values[b] || (values[a] == values[b] && a < b); });
  order.resize(n);
  std::sort(order.begin(), order.end());
  return order;
}

}  // namespace

Tensor query_importance(const Tensor& q, const Tensor& k_sampled) {
  const std::size_t n = k_sampled.rows();
  if (n == 0 || k_sampled.rank() != 2) throw ContractError("query_importance: empty key sample");
  if (q.cols() != k_sampled.cols()) {
    throw DimensionError("query_importance shape mismatch: " + shape_string(q.shape()) + " vs " +
                         shape_string(k_sampled.shape()));
  }
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  const double log_n = std::log(static_cast<double>(n));
  Tensor scores = Tensor::vector(std::vector<double>(q.rows(), 0.0));
  std::vector<double> logits(n);
  for (std::size_t i = 0; i < q.rows(); ++i) {
    for (std::size_t j = 0; j < n; ++j) logits[j] = dot_row(q, i, k_sampled, j) * inv_sqrt_d;
    const double top = *std::max_element(logits.begin(), logits.end());
    double total = 0.0;
    double mean = 0.0;
    for (double l : logits) {
      total += std::exp(l - top);
      mean += l - top;
    }
    mean /= static_cast<double>(n);
    // sum_j (1/n) ln((1/n) / p_j) with ln p_j = l_j - logsumexp(l)
    scores[i] = std::max(0.0, std::log(total) - mean - log_n);
  }
  return scores;
}

std::vector<std::size_t> select_queries(std::span<const double> scores, std::size_t n) {
  return top_n(scores, n);
}

std::vector<std::vector<std::size_t>> select_keys(const Tensor& q_selected, const Tensor& k, std::size_t n) {
  if (n == 0) throw ContractError("select_keys: n must be at least 1");
  if (q_selected.cols() != k.cols()) {
    throw DimensionError("select_keys shape mismatch: " + shape_string(q_selected.shape()) + " vs " +
                         shape_string(k.shape()));
  }
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(k.cols()));
  std::vector<std::vector<std::size_t>> out;
  out.reserve(q_selected.rows());
  std::vector<double> logits(k.rows());
  for (std::size_t i = 0; i < q_selected.rows(); ++i) {
    for (std::size_t j = 0; j < k.rows(); ++j) logits[j] = dot_row(q_selected, i, k, j) * inv_sqrt_d;
    out.push_back(top_n(logits, n));
  }
  return out;
}

std::vector<std::size_t> sample_keys(std::size_t nodes, std::size_t n, Rng& rng) {
  if (n > nodes) throw ContractError("sample_keys: cannot draw more keys than nodes");
  std::vector<std::size_t> pool(nodes);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t i = 0; i < n; ++i) std::swap(pool[i], pool[i + rng.below(nodes - i)]);
  pool.resize(n);
  return pool;
}

GraphStructure infer_structure(const Tensor& q, const Tensor& k, std::size_t n, Rng& rng) {
  const std::size_t nodes = q.rows();
  if (nodes == 0) throw ContractError("infer_structure: graph has no nodes");
  if (n == 0 || n > nodes) throw ContractError("infer_structure: n must lie in [1, N]");

  GraphStructure g;
  g.nodes = nodes;
  const std::vector<std::size_t> sampled = sample_keys(nodes, n, rng);
  Tensor k_sampled = Tensor::matrix(n, k.cols());
  for (std::size_t j = 0; j < n; ++j)
    std::copy_n(k.data() + sampled[j] * k.cols(), k.cols(), k_sampled.data() + j * k.cols());

  const Tensor scores = query_importance(q, k_sampled);
  g.dot_product_count += nodes * n;
  g.selected_queries = select_queries(scores.values(), n);

  Tensor q_selected = Tensor::matrix(n, q.cols());
  for (std::size_t i = 0; i < n; ++i)
    std::copy_n(q.data() + g.selected_queries[i] * q.cols(), q.cols(), q_selected.data() + i * q.cols());
  g.keys_per_query = select_keys(q_selected, k, n);
  g.dot_product_count += n * nodes;
  return g;
}

SparseAdjacency build_sparse_adjacency(const Tensor& h, const Tensor& wq, const Tensor& wk, const LgslConfig& cfg) {
  const std::size_t nodes = h.rows();
  if (nodes == 0) throw ContractError("build_sparse_adjacency: graph has no nodes");
  const QueryKey qk = project_qk(h, wq, wk);
  const std::size_t n = selection_count(cfg.sampling_factor, nodes);
  Rng rng(cfg.seed);
  const GraphStructure g = infer_structure(qk.q, qk.k, n, rng);

  SparseAdjacency adj;
  adj.matrix = Tensor::matrix(nodes, nodes);
  adj.selected_queries = g.selected_queries;
  adj.dot_product_count = g.dot_product_count;
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(qk.q.cols()));
  std::vector<double> logits;
  for (std::size_t s = 0; s < g.selected_queries.size(); ++s) {
    const std::size_t i = g.selected_queries[s];
    const auto& keys = g.keys_per_query[s];
    adj.selected_keys_per_query[i] = keys;
    logits.resize(keys.size());
    for (std::size_t e = 0; e < keys.size(); ++e) logits[e] = dot_row(qk.q, i, qk.k, keys[e]) * inv_sqrt_d;
    const double top = *std::max_element(logits.begin(), logits.end());
    double total = 0.0;
    for (double& l : logits) {
      l = std::exp(l - top);
      total += l;
    }
    for (std::size_t e = 0; e < keys.size(); ++e) adj.matrix(i, keys[e]) = logits[e] / total;
  }
  return adj;
}

Tensor dense_adjacency(const Tensor& h, const Tensor& wq, const Tensor& wk) {
  const QueryKey qk = project_qk(h, wq, wk);
  Tensor logits = matmul(qk.q, transpose(qk.k));
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(qk.q.cols()));
  for (double& v : logits.values()) v *= inv_sqrt_d;
  return softmax_rows(logits);
}

Tensor LatentGraph::dense(std::size_t b) const {
  Tensor out = Tensor::matrix(nodes, nodes);
  const Tensor& w = weights.value();
  for (std::size_t e = 0; e < target.size(); ++e) {
    if (target[e] / nodes != b) continue;
    out(target[e] % nodes, source[e] % nodes) = w[e];
  }
  return out;
}

LatentGraph learn_graph(Var h, Var wq, Var wk, const GraphRequest& request) {
  const std::size_t nodes = request.nodes;
  if (nodes == 0 || h.rows() % nodes != 0) {
    throw DimensionError("learn_graph: " + std::to_string(h.rows()) + " embedding rows are not a multiple of N=" +
                         std::to_string(nodes));
  }
  LatentGraph graph;
  graph.nodes = nodes;
  graph.batch = h.rows() / nodes;
  if (request.frozen && request.frozen->size() != graph.batch) {
    throw ContractError("learn_graph: frozen structure count does not match batch");
  }

  Var q = matmul(h, wq);
  Var k = matmul(h, wk);
  graph.offsets.push_back(0);
  for (std::size_t b = 0; b < graph.batch; ++b) {
    GraphStructure structure;
    if (request.frozen) {
      structure = (*request.frozen)[b];
      graph.dot_product_count += structure.dot_product_count;
    } else {
      const Tensor qb = q.value().row_slice(b * nodes, nodes);
      const Tensor kb = k.value().row_slice(b * nodes, nodes);
      Rng rng(mix_seed(request.seed, request.sample_offset + b));
      structure = infer_structure(qb, kb, request.selected, rng);
      graph.dot_product_count += structure.dot_product_count;
    }
    for (std::size_t s = 0; s < structure.selected_queries.size(); ++s) {
      for (std::size_t j : structure.keys_per_query[s]) {
        graph.target.push_back(b * nodes + structure.selected_queries[s]);
        graph.source.push_back(b * nodes + j);
      }
      graph.offsets.push_back(graph.target.size());
    }
    graph.structures.push_back(std::move(structure));
  }

  if (graph.target.empty()) {
    graph.weights = h.tape()->constant(Tensor::matrix(0, 1));
    return graph;
  }
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  Var logits = scale(row_sum(mul(gather_rows(q, graph.target), gather_rows(k, graph.source))), inv_sqrt_d);
  graph.weights = segment_softmax(logits, graph.offsets);
  return graph;
}

LatentGraph empty_graph(Tape& tape, std::size_t nodes, std::size_t batch) {
  LatentGraph graph;
  graph.nodes = nodes;
  graph.batch = batch;
  graph.offsets.push_back(0);
  graph.weights = tape.constant(Tensor::matrix(0, 1));
  return graph;
}

}  // namespace hgmts
