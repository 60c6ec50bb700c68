#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "hgmts/data.hpp"
#include "hgmts/model.hpp"

namespace hgmts {

struct TrainConfig {
  double lr0 = 1e-4;
  std::size_t halve_every = 2;
  std::size_t patience = 10;
  std::size_t batch = 32;
  std::size_t max_epochs = 10;
  std::uint64_t seed = 1;
  /// Weight of an auxiliary mean-squared final-residual term; 0 trains on the forecast alone.
  double backcast_weight = 0.0;

  void validate() const;
};

/// lr0 * 0.5^floor(epoch / halve_every).
double lr_schedule(const TrainConfig& cfg, std::size_t epoch);
double lr_schedule(std::size_t epoch);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_mse = 0.0;
  double lr = 0.0;
  bool improved = false;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_val_mse = 0.0;
  std::size_t epochs_run = 0;
  double wall_seconds = 0.0;
};

struct EvalResult {
  double mse = 0.0;
  double mae = 0.0;
  std::size_t windows = 0;
};

/// Options for evaluating a model over every window of a sampler.
struct EvalOptions {
  std::uint64_t sampling_seed = 0;
  std::size_t batch = 32;
  /// When set, predictions and targets are mapped back to raw units first.
  const NormalizationStats* raw_space = nullptr;
};

/// Forecasts for windows [first, first + count) of `sampler`, stacked [count*N x K].
Tensor predict(const Model& model, const WindowSampler& sampler, std::size_t first, std::size_t count,
               std::uint64_t sampling_seed);

EvalResult evaluate(const Model& model, const WindowSampler& sampler, const EvalOptions& options);
/// Persistence baseline on the same windows.
EvalResult evaluate_persistence(const WindowSampler& sampler, const NormalizationStats* raw_space = nullptr);

/// Mini-batch Adam with the step schedule, validation MSE after every epoch and
/// early stopping. On return the model holds the best-validation parameters.
/// Throws NumericError on a non-finite loss.
TrainResult train(Model& model, const WindowSampler& train_windows, const WindowSampler& val_windows,
                  const TrainConfig& cfg, std::ostream* log = nullptr);

/// epoch,train_loss,val_mse,lr,improved at full precision; no timing columns.
void write_history_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& history);

/// Seed used for graph key sampling during evaluation of a run with `seed`.
std::uint64_t eval_sampling_seed(std::uint64_t seed);

}  // namespace hgmts
