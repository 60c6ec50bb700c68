#pragma once

#include <functional>
#include <optional>
#include <string>

#include "hgmts/autodiff.hpp"
#include "hgmts/lgsl.hpp"
#include "hgmts/parameters.hpp"

namespace hgmts {

/// y = x W + b with W [in x out].
class Linear {
 public:
  Linear() = default;
  Linear(ParameterStore& store, const std::string& prefix, std::size_t in, std::size_t out);

  Var operator()(Tape& tape, Var x) const;
  Parameter& weight() const { return *weight_; }
  Parameter& bias() const { return *bias_; }

 private:
  Parameter* weight_ = nullptr;
  Parameter* bias_ = nullptr;
};

/// Two-layer perceptron with a ReLU between the layers and a linear output.
class Mlp {
 public:
  Mlp() = default;
  Mlp(ParameterStore& store, const std::string& prefix, std::size_t in, std::size_t hidden, std::size_t out);

  Var operator()(Tape& tape, Var x) const;
  const Linear& first() const { return fc1_; }
  const Linear& last() const { return fc2_; }

 private:
  Linear fc1_;
  Linear fc2_;
};

/// Gated recurrent unit over row vectors:
///   z = sigmoid(x Wz + h Uz + bz)
///   r = sigmoid(x Wr + h Ur + br)
///   c = tanh(x Wh + (r * h) Uh + bh)
///   h' = z * h + (1 - z) * c
/// with x the aggregated message and h the node state.
class Gru {
 public:
  Gru() = default;
  Gru(ParameterStore& store, const std::string& prefix, std::size_t input, std::size_t hidden);

  Var operator()(Tape& tape, Var h, Var x) const;

  struct Weights {
    Parameter *wz, *uz, *bz, *wr, *ur, *br, *wh, *uh, *bh;
  };
  const Weights& weights() const { return w_; }

 private:
  Weights w_{};
};

struct GatedUpdate {
  Var state;         ///< blended next state
  Var first;         ///< GRU 1 proposal
  Var second;        ///< GRU 2 proposal (equals `first` in single-GRU mode)
  std::optional<Var> beta;  ///< [M x 1] gate, absent in single-GRU mode
};

/// Two GRUs blended by a learned scalar gate: h' = beta * h1 + (1 - beta) * h2,
/// where beta = sigmoid(xi(concat(h, agg))). In single-GRU mode beta is fixed to 1.
class GatedUpdateUnit {
 public:
  GatedUpdateUnit() = default;
  GatedUpdateUnit(ParameterStore& store, const std::string& prefix, std::size_t hidden, bool single_gru);

  GatedUpdate operator()(Tape& tape, Var h, Var agg) const;
  bool single_gru() const { return !gru2_.has_value(); }
  const Gru& gru1() const { return gru1_; }
  const Gru* gru2() const { return gru2_ ? &*gru2_ : nullptr; }
  const Mlp* gate() const { return gate_ ? &*gate_ : nullptr; }

 private:
  Gru gru1_;
  std::optional<Gru> gru2_;
  std::optional<Mlp> gate_;
};

struct MpnnConfig {
  std::size_t input_length = 96;  ///< L
  std::size_t hidden = 64;        ///< D, also the hidden width of f and g
  std::size_t rounds = 3;         ///< R
  bool single_gru = false;
  bool owns_graph = true;         ///< allocate query/key projections
  bool message_passing = true;    ///< false: encoder only (no g, no update unit)
};

/// One pathway's graph network: node encoder f, optional query/key
/// projections, message function g and the gated update.
class MessagePassingNetwork {
 public:
  using GraphRefresh = std::function<LatentGraph(Var h, std::size_t round)>;

  MessagePassingNetwork() = default;
  MessagePassingNetwork(ParameterStore& store, const std::string& prefix, const MpnnConfig& cfg);

  /// h0 = f(x) row-wise; x is [M x L].
  Var encode_nodes(Tape& tape, Var x) const;
  /// Requires owns_graph.
  LatentGraph infer_graph(Tape& tape, Var h, const GraphRequest& request) const;
  /// m_ij = g(h_i - h_j) for every edge, as [E x D].
  Var compute_messages(Tape& tape, Var h, const LatentGraph& graph) const;
  /// agg_i = sum_j a_ij m_ij; rows without edges are zero.
  Var aggregate(Tape& tape, Var messages, const LatentGraph& graph) const;
  GatedUpdate gated_update(Tape& tape, Var h, Var agg) const;

  /// `rounds` iterations of messages -> aggregate -> gated update over `graph`.
  /// When `refresh` is set, the graph is recomputed from h at each round > 0.
  Var propagate(Tape& tape, Var h0, LatentGraph graph, std::size_t rounds, const GraphRefresh* refresh = nullptr) const;

  /// Encode x, infer the graph once from h0, then propagate. rounds == 0
  /// returns the encoding. The inferred graph is written to `graph_out` if given.
  Var run_message_passing(Tape& tape, Var x, const GraphRequest& request, std::size_t rounds,
                          LatentGraph* graph_out = nullptr) const;

  const MpnnConfig& config() const { return cfg_; }
  const Mlp& encoder() const { return encoder_; }
  const Mlp& message_fn() const { return message_.value(); }
  const GatedUpdateUnit& update_unit() const { return unit_.value(); }
  Parameter* query_weight() const { return wq_; }
  Parameter* key_weight() const { return wk_; }

 private:
  MpnnConfig cfg_;
  Mlp encoder_;
  std::optional<Mlp> message_;
  std::optional<GatedUpdateUnit> unit_;
  Parameter* wq_ = nullptr;
  Parameter* wk_ = nullptr;
};

}  // namespace hgmts
