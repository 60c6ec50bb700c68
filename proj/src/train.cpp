#include "hgmts/train.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include "hgmts/checkpoint.hpp"
#include "hgmts/error.hpp"
#include "hgmts/metrics.hpp"

namespace hgmts {

void TrainConfig::validate() const {
  if (!(lr0 >= 0.0)) throw ConfigError("lr must be non-negative");
  if (halve_every == 0) throw ConfigError("halve_every must be at least 1");
  if (patience == 0) throw ConfigError("patience must be at least 1");
  if (batch == 0) throw ConfigError("batch must be at least 1");
  if (max_epochs == 0) throw ConfigError("max_epochs must be at least 1");
  if (!(backcast_weight >= 0.0)) throw ConfigError("backcast_weight must be non-negative");
}

double lr_schedule(const TrainConfig& cfg, std::size_t epoch) {
  return cfg.lr0 * std::ldexp(1.0, -static_cast<int>(epoch / cfg.halve_every));
}

double lr_schedule(std::size_t epoch) { return lr_schedule(TrainConfig{}, epoch); }

std::uint64_t eval_sampling_seed(std::uint64_t seed) { return mix_seed(seed, fnv1a64("eval")); }

Tensor predict(const Model& model, const WindowSampler& sampler, std::size_t first, std::size_t count,
               std::uint64_t sampling_seed) {
  std::vector<std::size_t> idx(count);
  std::iota(idx.begin(), idx.end(), first);
  Tensor x, y;
  sampler.batch(idx, x, y);
  Tape tape;
  ForwardOptions opts;
  opts.sampling_seed = sampling_seed;
  opts.sample_offset = first;
  ModelOutput out = model.forward(tape, tape.constant(std::move(x)), opts);
  Tensor pred = out.forecast.value();
  pred.drop_grad();
  return pred;
}

namespace {

struct ErrorSums {
  double sq = 0.0;
  double abs = 0.0;
  std::size_t entries = 0;

  void add(const Tensor& y, const Tensor& p) {
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double d = y[i] - p[i];
      sq += d * d;
      abs += std::abs(d);
    }
    entries += y.size();
  }
  EvalResult result(std::size_t windows) const {
    if (entries == 0) throw ContractError("evaluation over zero windows");
    return {sq / static_cast<double>(entries), abs / static_cast<double>(entries), windows};
  }
};

}  // namespace

EvalResult evaluate(const Model& model, const WindowSampler& sampler, const EvalOptions& options) {
  ErrorSums sums;
  const std::size_t total = sampler.count();
  for (std::size_t first = 0; first < total; first += options.batch) {
    const std::size_t count = std::min(options.batch, total - first);
    Tensor pred = predict(model, sampler, first, count, options.sampling_seed);
    std::vector<std::size_t> idx(count);
    std::iota(idx.begin(), idx.end(), first);
    Tensor x, y;
    sampler.batch(idx, x, y);
    if (options.raw_space) {
      pred = denormalize(pred, *options.raw_space);
      y = denormalize(y, *options.raw_space);
    }
    sums.add(y, pred);
  }
  return sums.result(total);
}

EvalResult evaluate_persistence(const WindowSampler& sampler, const NormalizationStats* raw_space) {
  ErrorSums sums;
  for (std::size_t i = 0; i < sampler.count(); ++i) {
    Window w = sampler.at(i);
    Tensor pred = persistence_forecast(w.x, sampler.horizon());
    if (raw_space) {
      pred = denormalize(pred, *raw_space);
      w.y = denormalize(w.y, *raw_space);
    }
    sums.add(w.y, pred);
  }
  return sums.result(sampler.count());
}

TrainResult train(Model& model, const WindowSampler& train_windows, const WindowSampler& val_windows,
                  const TrainConfig& cfg, std::ostream* log) {
  cfg.validate();
  if (train_windows.count() == 0) throw ContractError("training split has no windows");
  if (val_windows.count() == 0) throw ContractError("validation split has no windows");
  const auto t0 = std::chrono::steady_clock::now();

  ParameterStore& params = model.parameters();
  // Parameters a wiring never touches (e.g. rounds = 0) still need a buffer for Adam.
  for (Parameter& p : params.all()) p.tensor.ensure_grad();
  params.zero_grad();
  AdamState adam;
  TrainResult result;
  result.best_val_mse = std::numeric_limits<double>::infinity();
  std::vector<Tensor> best = params.snapshot();
  std::size_t since_best = 0;

  std::vector<std::size_t> order(train_windows.count());
  std::iota(order.begin(), order.end(), 0);
  EvalOptions val_opts;
  val_opts.sampling_seed = eval_sampling_seed(cfg.seed);
  val_opts.batch = cfg.batch;

  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    adam.lr = lr_schedule(cfg, epoch);
    Rng shuffle(mix_seed(cfg.seed, 0x5eed0000u + epoch));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);

    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t first = 0; first < order.size(); first += cfg.batch) {
      const std::size_t count = std::min(cfg.batch, order.size() - first);
      Tensor x, y;
      train_windows.batch(std::span<const std::size_t>(order).subspan(first, count), x, y);
      Tape tape;
      ForwardOptions opts;
      opts.sampling_seed = mix_seed(cfg.seed, (static_cast<std::uint64_t>(epoch) << 32) | batches);
      ModelOutput out = model.forward(tape, tape.constant(std::move(x)), opts);
      Var err = sub(out.forecast, tape.constant(std::move(y)));
      Var loss = mean(mul(err, err));
      if (cfg.backcast_weight > 0.0) loss = add(loss, scale(mean(mul(out.residual, out.residual)), cfg.backcast_weight));
      const double value = loss.value().item();
      if (!std::isfinite(value)) {
        std::ostringstream msg;
        msg << "non-finite training loss at epoch " << epoch << ", batch " << batches << " (parameter norm "
            << params.l2_norm() << ")";
        throw NumericError(msg.str());
      }
      tape.backward(loss);
      adam_step(adam, params);
      loss_sum += value;
      ++batches;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(batches);
    rec.val_mse = evaluate(model, val_windows, val_opts).mse;
    rec.lr = adam.lr;
    if (!std::isfinite(rec.val_mse)) {
      std::ostringstream msg;
      msg << "non-finite validation MSE at epoch " << epoch << " (parameter norm " << params.l2_norm() << ")";
      throw NumericError(msg.str());
    }
    if (rec.val_mse < result.best_val_mse) {
      rec.improved = true;
      result.best_val_mse = rec.val_mse;
      result.best_epoch = epoch;
      best = params.snapshot();
      since_best = 0;
    } else {
      ++since_best;
    }
    result.history.push_back(rec);
    if (log) {
      *log << "epoch " << epoch << "  train_loss " << std::setprecision(6) << rec.train_loss << "  val_mse "
           << rec.val_mse << "  lr " << rec.lr << (rec.improved ? "  *" : "") << '\n';
    }
    if (since_best >= cfg.patience) break;
  }

  params.restore(best);
  params.zero_grad();
  result.epochs_run = result.history.size();
  result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

void write_history_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& history) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write history file: " + path.string());
  out << std::setprecision(17);
  out << "epoch,train_loss,val_mse,lr,improved\n";
  for (const auto& r : history)
    out << r.epoch << ',' << r.train_loss << ',' << r.val_mse << ',' << r.lr << ',' << (r.improved ? 1 : 0) << '\n';
}

}  // namespace hgmts
