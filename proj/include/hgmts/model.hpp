#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hgmts/decomposition.hpp"
#include "hgmts/lgsl.hpp"
#include "hgmts/mpnn.hpp"
#include "hgmts/parameters.hpp"

namespace hgmts {

/// Ablation wirings. 1 is the full model.
enum class Variant {
  full = 1,                  ///< HGMTS1
  shared_pathway_graph = 2,  ///< HGMTS2: one graph per block, used by both pathways
  shared_block_graph = 3,    ///< HGMTS3: one graph per pathway, reused by every block
  no_graph = 4,              ///< HGMTS4: encoder feeds the heads directly
  single_pathway = 5,        ///< HGMTS5: no decomposition, one pathway on the raw input
  single_gru = 6,            ///< HGMTS6: one GRU, beta fixed to 1
};

struct VariantFlags {
  bool share_graph_across_pathways = false;
  bool share_graph_across_blocks = false;
  bool disable_graph = false;
  bool single_pathway = false;
  bool single_gru = false;
};

VariantFlags variant_flags(Variant v);
Variant parse_variant(std::string_view text);  ///< "1".."6" or "HGMTS1".."HGMTS6"
std::string variant_name(Variant v);           ///< "HGMTS1".."HGMTS6"

struct ModelConfig {
  std::size_t nodes = 7;          ///< N
  std::size_t input_length = 96;  ///< L
  std::size_t horizon = 96;       ///< K
  std::size_t hidden = 64;        ///< D
  std::size_t kernel = 25;
  PaddingMode padding = PaddingMode::edge;
  double sampling_factor = 2.0;   ///< c; ignored when gamma is set
  std::optional<double> gamma;
  std::size_t rounds = 3;
  std::size_t stacks = 3;
  std::size_t blocks_per_stack = 1;
  Variant variant = Variant::full;
  bool recompute_graph_each_round = false;
  std::uint64_t seed = 1;

  /// n selected queries (and keys per query).
  std::size_t selected_count() const;
  void validate() const;
  /// Stable key=value rendering; its hash identifies checkpoints.
  std::string canonical_text() const;
};

struct PathwayOutput {
  std::string name;
  Var input;
  Var embedding;  ///< h^(R) (or h^(0) without a graph)
  Var backcast;   ///< [M x L]
  Var forecast;   ///< [M x K]
};

struct BlockOutput {
  Var input;
  Var backcast;
  Var forecast;
  std::vector<PathwayOutput> pathways;
};

struct StackOutput {
  Var residual;
  Var forecast;
  std::vector<BlockOutput> blocks;
};

struct GraphRecord {
  std::string slot;  ///< e.g. "stack0.block0.seas.round0"
  LatentGraph graph;
};

/// Discrete graph selections of one forward pass, keyed by slot. When
/// replaying, learn_graph reuses them instead of selecting anew.
struct StructureCache {
  bool replay = false;
  std::map<std::string, std::vector<GraphStructure>> structures;
};

struct ForwardOptions {
  std::uint64_t sampling_seed = 0;
  std::size_t sample_offset = 0;
  StructureCache* cache = nullptr;
};

struct ModelOutput {
  Var forecast;  ///< [B*N x K] global forecast
  Var residual;  ///< input left after the last block
  std::vector<StackOutput> stacks;
  std::vector<GraphRecord> graphs;
  std::size_t graph_computations = 0;
  std::size_t dot_products = 0;
};

class Pathway {
 public:
  Pathway(ParameterStore& store, const std::string& prefix, std::string name, const ModelConfig& cfg,
          bool owns_graph, bool use_graph);

  const std::string& name() const { return name_; }
  const MessagePassingNetwork& network() const { return net_; }
  const Mlp& backcast_head() const { return phi_; }
  const Mlp& forecast_head() const { return psi_; }
  bool owns_graph() const { return owns_graph_; }
  bool uses_graph() const { return use_graph_; }

 private:
  std::string name_;
  MessagePassingNetwork net_;
  Mlp phi_;
  Mlp psi_;
  bool owns_graph_;
  bool use_graph_;
};

class Block {
 public:
  Block(ParameterStore& store, const std::string& prefix, const ModelConfig& cfg, bool first_block);

  const std::vector<Pathway>& pathways() const { return pathways_; }

 private:
  std::vector<Pathway> pathways_;
};

/// Stacks of blocks with residual backcast chaining; the global forecast is
/// the sum of every block's forecast.
class Model {
 public:
  explicit Model(const ModelConfig& cfg);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const ModelConfig& config() const { return cfg_; }
  ParameterStore& parameters() { return params_; }
  const ParameterStore& parameters() const { return params_; }
  const Block& block(std::size_t stack, std::size_t index) const;

  /// x is [B*N x L], B windows of N nodes stacked row-wise.
  ModelOutput forward(Tape& tape, Var x, const ForwardOptions& options = {}) const;

  /// Graph inferences performed per window in one forward pass.
  std::size_t graph_computations_per_window() const;

  class ForwardState;
  BlockOutput forward_block(Tape& tape, std::size_t stack, std::size_t index, Var x, ForwardState& state) const;
  StackOutput forward_stack(Tape& tape, std::size_t stack, Var x, ForwardState& state) const;

 private:
  ModelConfig cfg_;
  ParameterStore params_;
  std::vector<std::vector<Block>> stacks_;
};

/// Mutable context threaded through one forward pass.
class Model::ForwardState {
 public:
  ForwardState(const ForwardOptions& options, std::size_t batch) : options_(options), batch_(batch) {}

  const ForwardOptions& options() const { return options_; }
  std::size_t batch() const { return batch_; }
  std::vector<GraphRecord> graphs;
  std::map<std::string, LatentGraph> shared;  ///< graphs reused across pathways or blocks
  std::size_t graph_computations = 0;
  std::size_t dot_products = 0;

 private:
  ForwardOptions options_;
  std::size_t batch_;
};

/// Stacks B window matrices [N x L] into one [B*N x L] tensor.
Tensor stack_windows(const std::vector<Tensor>& windows);

}  // namespace hgmts
