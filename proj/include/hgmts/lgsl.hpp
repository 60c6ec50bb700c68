#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "hgmts/autodiff.hpp"
#include "hgmts/parameters.hpp"

namespace hgmts {

// Latent graph structure learning: a sparse attention adjacency built from
// node embeddings using O(N log N) query/key dot products.

struct LgslConfig {
  double sampling_factor = 2.0;  ///< c in n = floor(c * ln N)
  std::uint64_t seed = 0;        ///< key-sampling seed
};

/// n = floor(c * ln N) clamped to [1, N].
std::size_t selection_count(double sampling_factor, std::size_t nodes);
/// round(gamma * N) clamped to [1, N].
std::size_t count_for_gamma(double gamma, std::size_t nodes);
/// A sampling factor c with selection_count(c, N) == count_for_gamma(gamma, N).
double factor_for_gamma(double gamma, std::size_t nodes);

struct QueryKey {
  Tensor q;
  Tensor k;
};

QueryKey project_qk(const Tensor& h, const Tensor& wq, const Tensor& wk);

/// KL(U || p(.|q_i)) for every query, where p is the softmax of q_i k_j / sqrt(D)
/// over the sampled keys and U is uniform over them.
Tensor query_importance(const Tensor& q, const Tensor& k_sampled);

/// Indices of the n largest scores, ties to the lowest index; returned ascending.
std::vector<std::size_t> select_queries(std::span<const double> scores, std::size_t n);

/// For each row of q_selected, the n keys with the largest scaled dot product,
/// ties to the lowest index; each set returned ascending.
std::vector<std::vector<std::size_t>> select_keys(const Tensor& q_selected, const Tensor& k, std::size_t n);

/// n distinct key indices drawn uniformly from [0, nodes).
std::vector<std::size_t> sample_keys(std::size_t nodes, std::size_t n, Rng& rng);

/// Discrete outcome of the selection steps for one graph.
struct GraphStructure {
  std::size_t nodes = 0;
  std::vector<std::size_t> selected_queries;
  std::vector<std::vector<std::size_t>> keys_per_query;  ///< parallel to selected_queries
  std::size_t dot_product_count = 0;
};

/// Importance scoring over sampled keys, top-n queries, then top-n keys per query.
GraphStructure infer_structure(const Tensor& q, const Tensor& k, std::size_t n, Rng& rng);

struct SparseAdjacency {
  Tensor matrix;  ///< N x N, zero outside selected (query, key) pairs
  std::vector<std::size_t> selected_queries;
  std::map<std::size_t, std::vector<std::size_t>> selected_keys_per_query;
  std::size_t dot_product_count = 0;
};

SparseAdjacency build_sparse_adjacency(const Tensor& h, const Tensor& wq, const Tensor& wk, const LgslConfig& cfg);

/// Full quadratic attention adjacency softmax(Q K^T / sqrt(D)).
Tensor dense_adjacency(const Tensor& h, const Tensor& wq, const Tensor& wk);

// Batched, differentiable form used inside the model. Node embeddings of B
// windows are stacked as [B*N x D]; edge endpoints are global row indices.

struct LatentGraph {
  std::size_t nodes = 0;
  std::size_t batch = 0;
  std::vector<std::size_t> target;   ///< aggregating node i (the selected query)
  std::vector<std::size_t> source;   ///< neighbour j (a selected key of i)
  std::vector<std::size_t> offsets;  ///< edge segment per selected query row
  Var weights;                       ///< [E x 1] attention weights a_ij
  std::vector<GraphStructure> structures;
  std::size_t dot_product_count = 0;

  std::size_t edge_count() const noexcept { return target.size(); }
  /// Dense N x N adjacency of window b, for inspection.
  Tensor dense(std::size_t b) const;
};

struct GraphRequest {
  std::size_t nodes = 0;
  std::size_t selected = 1;       ///< n
  std::uint64_t seed = 0;         ///< per-forward sampling seed
  std::size_t sample_offset = 0;  ///< window b draws from mix_seed(seed, sample_offset + b)
  /// Reuse these structures instead of selecting; used to hold the discrete
  /// choices fixed (finite-difference checks, replay).
  const std::vector<GraphStructure>* frozen = nullptr;
};

LatentGraph learn_graph(Var h, Var wq, Var wk, const GraphRequest& request);

/// A graph with no edges for B windows of N nodes.
LatentGraph empty_graph(Tape& tape, std::size_t nodes, std::size_t batch);

}  // namespace hgmts
