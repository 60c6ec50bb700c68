#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "hgmts/data.hpp"
#include "hgmts/model.hpp"
#include "hgmts/synthetic.hpp"
#include "hgmts/train.hpp"

namespace hgmts {

/// Everything one experiment needs, read from a flat `key = value` file.
/// Lines starting with '#' are comments. Unknown keys are errors.
struct RunConfig {
  std::string dataset = "synthetic";  ///< CSV path, or "synthetic"
  std::string dataset_name;           ///< report label; defaults to the file stem
  CsvSchema csv;
  SyntheticSpec synthetic;
  SplitSpec split;
  ModelConfig model;
  TrainConfig train;
  bool raw_metrics = false;  ///< evaluate in original units instead of z-scores
  std::vector<std::uint64_t> seeds{1};
  std::vector<std::size_t> horizons;  ///< empty: just model.horizon
  std::vector<double> gammas{0.2, 0.3, 0.4, 0.5, 0.6, 0.7};
  std::vector<Variant> variants{Variant::full,     Variant::shared_pathway_graph, Variant::shared_block_graph,
                                Variant::no_graph, Variant::single_pathway,       Variant::single_gru};

  bool is_synthetic() const { return dataset == "synthetic"; }
  std::string label() const;
  std::vector<std::size_t> horizon_list() const { return horizons.empty() ? std::vector{model.horizon} : horizons; }

  /// Applies one setting; throws ConfigError naming the key on failure.
  void set(std::string_view key, std::string_view value);
  void validate() const;
  /// Round-trips through parse_config.
  std::string canonical_text() const;
};

RunConfig parse_config(std::string_view text, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path);

std::vector<double> parse_double_list(std::string_view text);
std::vector<std::size_t> parse_size_list(std::string_view text);

}  // namespace hgmts
