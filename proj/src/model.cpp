#include "hgmts/model.hpp"

#include <sstream>

#include "hgmts/checkpoint.hpp"
#include "hgmts/error.hpp"

namespace hgmts {

VariantFlags variant_flags(Variant v) {
  VariantFlags f;
  switch (v) {
    case Variant::full:
      break;
    case Variant::shared_pathway_graph:
      f.share_graph_across_pathways = true;
      break;
    case Variant::shared_block_graph:
      f.share_graph_across_blocks = true;
      break;
    case Variant::no_graph:
      f.disable_graph = true;
      break;
    case Variant::single_pathway:
      f.single_pathway = true;
      break;
    case Variant::single_gru:
      f.single_gru = true;
      break;
  }
  return f;
}

Variant parse_variant(std::string_view text) {
  std::string_view digits = text;
  if (digits.starts_with("HGMTS") || digits.starts_with("hgmts")) digits.remove_prefix(5);
  if (digits.size() == 1 && digits[0] >= '1' && digits[0] <= '6') return static_cast<Variant>(digits[0] - '0');
  throw ConfigError("unknown model variant '" + std::string(text) + "' (expected HGMTS1..HGMTS6)");
}

std::string variant_name(Variant v) { return "HGMTS" + std::to_string(static_cast<int>(v)); }

std::size_t ModelConfig::selected_count() const {
  return gamma ? count_for_gamma(*gamma, nodes) : selection_count(sampling_factor, nodes);
}

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* what) {
    if (v == 0) throw ConfigError(std::string(what) + " must be at least 1");
  };
  positive(nodes, "nodes");
  positive(input_length, "input_length");
  positive(horizon, "horizon");
  positive(hidden, "hidden");
  positive(stacks, "stacks");
  positive(blocks_per_stack, "blocks");
  if (kernel == 0 || kernel % 2 == 0) throw ConfigError("kernel must be odd, got " + std::to_string(kernel));
  if (gamma && !(*gamma > 0.0)) throw ConfigError("gamma must be positive");
  if (!gamma && !(sampling_factor > 0.0)) throw ConfigError("sampling factor c must be positive");
}

std::string ModelConfig::canonical_text() const {
  std::ostringstream out;
  out.precision(17);
  out << "nodes=" << nodes << '\n'
      << "input_length=" << input_length << '\n'
      << "horizon=" << horizon << '\n'
      << "hidden=" << hidden << '\n'
      << "kernel=" << kernel << '\n'
      << "padding_mode=" << to_string(padding) << '\n';
  if (gamma) {
    out << "gamma=" << *gamma << '\n';
  } else {
    out << "c=" << sampling_factor << '\n';
  }
  out << "rounds=" << rounds << '\n'
      << "stacks=" << stacks << '\n'
      << "blocks=" << blocks_per_stack << '\n'
      << "variant=" << variant_name(variant) << '\n'
      << "recompute_graph_each_round=" << (recompute_graph_each_round ? 1 : 0) << '\n'
      << "model_seed=" << seed << '\n';
  return out.str();
}

Pathway::Pathway(ParameterStore& store, const std::string& prefix, std::string name, const ModelConfig& cfg,
                 bool owns_graph, bool use_graph)
    : name_(std::move(name)), owns_graph_(owns_graph), use_graph_(use_graph) {
  const VariantFlags flags = variant_flags(cfg.variant);
  MpnnConfig mc;
  mc.input_length = cfg.input_length;
  mc.hidden = cfg.hidden;
  mc.rounds = cfg.rounds;
  mc.single_gru = flags.single_gru;
  mc.owns_graph = owns_graph;
  mc.message_passing = use_graph;
  const std::string base = prefix + "." + name_;
  net_ = MessagePassingNetwork(store, base + ".gnn", mc);
  phi_ = Mlp(store, base + ".phi", cfg.hidden, cfg.hidden, cfg.input_length);
  psi_ = Mlp(store, base + ".psi", cfg.hidden, cfg.hidden, cfg.horizon);
}

Block::Block(ParameterStore& store, const std::string& prefix, const ModelConfig& cfg, bool first_block) {
  const VariantFlags flags = variant_flags(cfg.variant);
  const bool use_graph = !flags.disable_graph;
  if (flags.single_pathway) {
    pathways_.emplace_back(store, prefix, "raw", cfg, use_graph, use_graph);
    return;
  }
  for (const char* name : {"seas", "trend"}) {
    bool owns = use_graph;
    if (flags.share_graph_across_pathways) owns = use_graph && std::string(name) == "seas";
    if (flags.share_graph_across_blocks) owns = use_graph && first_block;
    pathways_.emplace_back(store, prefix, name, cfg, owns, use_graph);
  }
}

Model::Model(const ModelConfig& cfg) : cfg_(cfg), params_(cfg.seed) {
  cfg_.validate();
  stacks_.resize(cfg_.stacks);
  for (std::size_t s = 0; s < cfg_.stacks; ++s) {
    stacks_[s].reserve(cfg_.blocks_per_stack);
    for (std::size_t b = 0; b < cfg_.blocks_per_stack; ++b) {
      const std::string prefix = "stack" + std::to_string(s) + ".block" + std::to_string(b);
      stacks_[s].emplace_back(params_, prefix, cfg_, s == 0 && b == 0);
    }
  }
}

const Block& Model::block(std::size_t stack, std::size_t index) const { return stacks_.at(stack).at(index); }

std::size_t Model::graph_computations_per_window() const {
  std::size_t total = 0;
  const std::size_t per_pass = cfg_.recompute_graph_each_round ? std::max<std::size_t>(cfg_.rounds, 1) : 1;
  for (const auto& stack : stacks_)
    for (const Block& block : stack)
      for (const Pathway& p : block.pathways())
        if (p.owns_graph()) total += per_pass;
  return total;
}

namespace {

std::string slot_name(std::size_t stack, std::size_t block, const std::string& pathway, std::size_t round) {
  return "stack" + std::to_string(stack) + ".block" + std::to_string(block) + "." + pathway + ".round" +
         std::to_string(round);
}

}  // namespace

BlockOutput Model::forward_block(Tape& tape, std::size_t stack, std::size_t index, Var x, ForwardState& state) const {
  const Block& blk = block(stack, index);
  const VariantFlags flags = variant_flags(cfg_.variant);
  const std::size_t rounds = cfg_.rounds;

  std::vector<Var> inputs;
  if (flags.single_pathway) {
    inputs.push_back(x);
  } else {
    DecomposedVars parts = decompose(x, cfg_.kernel, cfg_.padding);
    inputs.push_back(parts.seasonal);
    inputs.push_back(parts.trend);
  }

  auto infer = [&](const Pathway& p, Var h, std::size_t round) {
    const std::string slot = slot_name(stack, index, p.name(), round);
    GraphRequest request;
    request.nodes = cfg_.nodes;
    request.selected = cfg_.selected_count();
    request.seed = mix_seed(state.options().sampling_seed, fnv1a64(slot));
    request.sample_offset = state.options().sample_offset;
    StructureCache* cache = state.options().cache;
    if (cache && cache->replay) request.frozen = &cache->structures.at(slot);
    LatentGraph graph = p.network().infer_graph(tape, h, request);
    if (cache && !cache->replay) cache->structures[slot] = graph.structures;
    ++state.graph_computations;
    state.dot_products += graph.dot_product_count;
    state.graphs.push_back({slot, graph});
    return graph;
  };

  BlockOutput out;
  out.input = x;
  for (std::size_t i = 0; i < blk.pathways().size(); ++i) {
    const Pathway& p = blk.pathways()[i];
    PathwayOutput po;
    po.name = p.name();
    po.input = inputs[i];
    Var h = p.network().encode_nodes(tape, inputs[i]);
    if (p.uses_graph() && rounds > 0) {
      LatentGraph graph;
      if (p.owns_graph()) {
        graph = infer(p, h, 0);
        if (flags.share_graph_across_pathways) state.shared["block"] = graph;
        if (flags.share_graph_across_blocks) state.shared[p.name()] = graph;
      } else {
        const std::string key = flags.share_graph_across_pathways ? "block" : p.name();
        auto it = state.shared.find(key);
        if (it == state.shared.end()) throw ContractError("shared graph '" + key + "' not computed yet");
        graph = it->second;
      }
      if (cfg_.recompute_graph_each_round && p.owns_graph()) {
        MessagePassingNetwork::GraphRefresh refresh = [&](Var hr, std::size_t r) { return infer(p, hr, r); };
        h = p.network().propagate(tape, h, std::move(graph), rounds, &refresh);
      } else {
        h = p.network().propagate(tape, h, std::move(graph), rounds);
      }
    }
    po.embedding = h;
    po.backcast = p.backcast_head()(tape, h);
    po.forecast = p.forecast_head()(tape, h);
    out.pathways.push_back(po);
  }

  out.backcast = out.pathways[0].backcast;
  out.forecast = out.pathways[0].forecast;
  for (std::size_t i = 1; i < out.pathways.size(); ++i) {
    out.backcast = add(out.backcast, out.pathways[i].backcast);
    out.forecast = add(out.forecast, out.pathways[i].forecast);
  }
  return out;
}

StackOutput Model::forward_stack(Tape& tape, std::size_t stack, Var x, ForwardState& state) const {
  StackOutput out;
  Var residual = x;
  for (std::size_t b = 0; b < stacks_.at(stack).size(); ++b) {
    BlockOutput bo = forward_block(tape, stack, b, residual, state);
    residual = sub(residual, bo.backcast);
    out.forecast = b == 0 ? bo.forecast : add(out.forecast, bo.forecast);
    out.blocks.push_back(std::move(bo));
  }
  out.residual = residual;
  return out;
}

ModelOutput Model::forward(Tape& tape, Var x, const ForwardOptions& options) const {
  if (x.value().rank() != 2 || x.cols() != cfg_.input_length || x.rows() % cfg_.nodes != 0) {
    throw DimensionError("model input " + shape_string(x.shape()) + " is not [B*" + std::to_string(cfg_.nodes) +
                         " x " + std::to_string(cfg_.input_length) + "]");
  }
  ForwardState state(options, x.rows() / cfg_.nodes);
  ModelOutput out;
  Var residual = x;
  for (std::size_t s = 0; s < stacks_.size(); ++s) {
    StackOutput so = forward_stack(tape, s, residual, state);
    residual = so.residual;
    out.forecast = s == 0 ? so.forecast : add(out.forecast, so.forecast);
    out.stacks.push_back(std::move(so));
  }
  out.residual = residual;
  out.graphs = std::move(state.graphs);
  out.graph_computations = state.graph_computations;
  out.dot_products = state.dot_products;
  return out;
}

Tensor stack_windows(const std::vector<Tensor>& windows) {
  if (windows.empty()) throw ContractError("stack_windows: no windows");
  const std::size_t n = windows[0].rows(), l = windows[0].cols();
  Tensor out = Tensor::matrix(windows.size() * n, l);
  for (std::size_t b = 0; b < windows.size(); ++b) {
    if (windows[b].rows() != n || windows[b].cols() != l) throw DimensionError("stack_windows: ragged windows");
    std::copy(windows[b].values().begin(), windows[b].values().end(), out.data() + b * n * l);
  }
  return out;
}

}  // namespace hgmts
