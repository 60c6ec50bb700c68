#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hgmts/config.hpp"

namespace hgmts {

/// Loaded (or generated) series, chronological split and train-fitted z-scores.
struct PreparedData {
  Dataset raw;
  Dataset normalized;
  Splits splits;
  NormalizationStats stats;
  std::optional<Tensor> coupling;  ///< ground truth for the synthetic generator

  WindowSampler windows(const Segment& segment, std::size_t input_length, std::size_t horizon) const {
    return WindowSampler(normalized, segment, input_length, horizon);
  }
  const Segment& segment(std::string_view name) const;
};

PreparedData prepare_data(const RunConfig& cfg);

struct ReportRow {
  std::string dataset;
  std::string variant;
  std::optional<double> gamma;
  std::size_t horizon = 0;
  std::string seed;  ///< one seed, or "a+b+c" for a row averaged over those runs
  double mse = 0.0;
  double mae = 0.0;
  std::size_t epochs = 0;
  double wall_s = 0.0;
  std::size_t runs = 1;
};

/// Averaged rows plus the per-seed rows they were computed from.
struct EvalReport {
  std::vector<ReportRow> rows;
  std::vector<ReportRow> runs;

  void write_csv(const std::filesystem::path& path) const;
  void write_runs_csv(const std::filesystem::path& path) const;
  std::string table() const;
};

inline constexpr const char* kReportHeader = "dataset,variant,gamma,horizon,seed,mse,mae,epochs,wall_s";
std::string format_row(const ReportRow& row);
/// Arithmetic mean of mse, mae, epochs and wall time; keys taken from the first row.
ReportRow average_rows(const std::vector<ReportRow>& rows);

struct RunOutcome {
  ReportRow row;
  TrainResult training;
  EvalResult test;
  EvalResult persistence;
  std::unique_ptr<Model> model;
};

/// Trains cfg.model on the train split with cfg.train, then scores the test split.
RunOutcome run_experiment(const RunConfig& cfg, const PreparedData& data, std::ostream* log = nullptr);

/// One averaged row per (gamma, horizon), over cfg.seeds.
EvalReport sparsity_sweep(const RunConfig& cfg, const PreparedData& data, std::ostream* log = nullptr);
/// One averaged row per (variant, horizon), over cfg.seeds.
EvalReport ablation_run(const RunConfig& cfg, const PreparedData& data, std::ostream* log = nullptr);

/// window_start,node,step,true,pred for every window of the sampler.
void write_predictions_csv(const std::filesystem::path& path, const Model& model, const WindowSampler& sampler,
                           std::uint64_t sampling_seed, const NormalizationStats* raw_space = nullptr);
/// slot,query,key,weight for every edge the model infers on one window.
void write_adjacency_csv(const std::filesystem::path& path, const Model& model, const WindowSampler& sampler,
                         std::size_t window, std::uint64_t sampling_seed);

/// `flag` if non-empty, else $HGMTS_OUT_DIR, else the current directory. Created if missing.
std::filesystem::path output_dir(const std::string& flag = {});

}  // namespace hgmts
