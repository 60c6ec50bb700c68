#include "hgmts/mpnn.hpp"

#include "hgmts/error.hpp"

namespace hgmts {

Linear::Linear(ParameterStore& store, const std::string& prefix, std::size_t in, std::size_t out)
    : weight_(&store.create(prefix + ".W", Shape{in, out}, in)),
      bias_(&store.create(prefix + ".b", Shape{out}, in)) {}

Var Linear::operator()(Tape& tape, Var x) const {
  return add_bias(matmul(x, tape.leaf(weight_->tensor)), tape.leaf(bias_->tensor));
}

Mlp::Mlp(ParameterStore& store, const std::string& prefix, std::size_t in, std::size_t hidden, std::size_t out)
    : fc1_(store, prefix + ".fc1", in, hidden), fc2_(store, prefix + ".fc2", hidden, out) {}

Var Mlp::operator()(Tape& tape, Var x) const { return fc2_(tape, relu(fc1_(tape, x))); }

Gru::Gru(ParameterStore& store, const std::string& prefix, std::size_t input, std::size_t hidden) {
  auto make = [&](const char* name, std::size_t rows, std::size_t fan_in) {
    return &store.create(prefix + "." + name, Shape{rows, hidden}, fan_in);
  };
  auto bias = [&](const char* name) { return &store.create(prefix + "." + name, Shape{hidden}, hidden); };
  w_.wz = make("Wz", input, input);
  w_.uz = make("Uz", hidden, hidden);
  w_.bz = bias("bz");
  w_.wr = make("Wr", input, input);
  w_.ur = make("Ur", hidden, hidden);
  w_.br = bias("br");
  w_.wh = make("Wh", input, input);
  w_.uh = make("Uh", hidden, hidden);
  w_.bh = bias("bh");
}

Var Gru::operator()(Tape& tape, Var h, Var x) const {
  auto p = [&](Parameter* param) { return tape.leaf(param->tensor); };
  Var z = sigmoid(add_bias(add(matmul(x, p(w_.wz)), matmul(h, p(w_.uz))), p(w_.bz)));
  Var r = sigmoid(add_bias(add(matmul(x, p(w_.wr)), matmul(h, p(w_.ur))), p(w_.br)));
  Var c = tanh(add_bias(add(matmul(x, p(w_.wh)), matmul(mul(r, h), p(w_.uh))), p(w_.bh)));
  // z*h + (1-z)*c == c + z*(h - c)
  return add(c, mul(z, sub(h, c)));
}

GatedUpdateUnit::GatedUpdateUnit(ParameterStore& store, const std::string& prefix, std::size_t hidden,
                                 bool single_gru)
    : gru1_(store, prefix + ".gru1", hidden, hidden) {
  if (!single_gru) {
    gru2_.emplace(store, prefix + ".gru2", hidden, hidden);
    gate_.emplace(store, prefix + ".gate", 2 * hidden, hidden, 1);
  }
}

GatedUpdate GatedUpdateUnit::operator()(Tape& tape, Var h, Var agg) const {
  Var h1 = gru1_(tape, h, agg);
  if (!gru2_) return {h1, h1, h1, std::nullopt};
  Var h2 = (*gru2_)(tape, h, agg);
  Var beta = sigmoid((*gate_)(tape, concat_cols(h, agg)));
  // beta*h1 + (1-beta)*h2 written as h2 + beta*(h1 - h2)
  Var blended = add(h2, scale_rows(sub(h1, h2), beta));
  return {blended, h1, h2, beta};
}

MessagePassingNetwork::MessagePassingNetwork(ParameterStore& store, const std::string& prefix, const MpnnConfig& cfg)
    : cfg_(cfg),
      encoder_(store, prefix + ".f", cfg.input_length, cfg.hidden, cfg.hidden) {
  if (cfg.message_passing) {
    message_.emplace(store, prefix + ".g", cfg.hidden, cfg.hidden, cfg.hidden);
    unit_.emplace(store, prefix, cfg.hidden, cfg.single_gru);
  }
  if (cfg.owns_graph) {
    wq_ = &store.create(prefix + ".lgsl.Wq", Shape{cfg.hidden, cfg.hidden}, cfg.hidden);
    wk_ = &store.create(prefix + ".lgsl.Wk", Shape{cfg.hidden, cfg.hidden}, cfg.hidden);
  }
}

Var MessagePassingNetwork::encode_nodes(Tape& tape, Var x) const {
  if (x.cols() != cfg_.input_length) {
    throw DimensionError("encode_nodes: window length " + std::to_string(x.cols()) + " does not match L=" +
                         std::to_string(cfg_.input_length));
  }
  return encoder_(tape, x);
}

LatentGraph MessagePassingNetwork::infer_graph(Tape& tape, Var h, const GraphRequest& request) const {
  if (!wq_) throw ContractError("infer_graph on a pathway without query/key projections");
  return learn_graph(h, tape.leaf(wq_->tensor), tape.leaf(wk_->tensor), request);
}

Var MessagePassingNetwork::compute_messages(Tape& tape, Var h, const LatentGraph& graph) const {
  Var diff = sub(gather_rows(h, graph.target), gather_rows(h, graph.source));
  return message_fn()(tape, diff);
}

Var MessagePassingNetwork::aggregate(Tape& tape, Var messages, const LatentGraph& graph) const {
  const std::size_t rows = graph.nodes * graph.batch;
  if (graph.edge_count() == 0) return tape.constant(Tensor::matrix(rows, messages.cols()));
  return scatter_add_rows(scale_rows(messages, graph.weights), graph.target, rows);
}

GatedUpdate MessagePassingNetwork::gated_update(Tape& tape, Var h, Var agg) const {
  return update_unit()(tape, h, agg);
}

Var MessagePassingNetwork::propagate(Tape& tape, Var h0, LatentGraph graph, std::size_t rounds,
                                     const GraphRefresh* refresh) const {
  Var h = h0;
  for (std::size_t r = 0; r < rounds; ++r) {
    if (refresh && r > 0) graph = (*refresh)(h, r);
    Var agg;
    if (graph.edge_count() == 0) {
      agg = tape.constant(Tensor::matrix(h.rows(), cfg_.hidden));
    } else {
      agg = aggregate(tape, compute_messages(tape, h, graph), graph);
    }
    h = gated_update(tape, h, agg).state;
  }
  return h;
}

Var MessagePassingNetwork::run_message_passing(Tape& tape, Var x, const GraphRequest& request, std::size_t rounds,
                                               LatentGraph* graph_out) const {
  Var h0 = encode_nodes(tape, x);
  if (rounds == 0) return h0;
  LatentGraph graph = infer_graph(tape, h0, request);
  Var h = propagate(tape, h0, graph, rounds);
  if (graph_out) *graph_out = std::move(graph);
  return h;
}

}  // namespace hgmts
