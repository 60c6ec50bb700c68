#include "hgmts/experiments.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "hgmts/error.hpp"

namespace hgmts {

const Segment& PreparedData::segment(std::string_view name) const {
  if (name == "train") return splits.train;
  if (name == "val") return splits.val;
  if (name == "test") return splits.test;
  throw ConfigError("unknown split '" + std::string(name) + "' (expected train, val or test)");
}

PreparedData prepare_data(const RunConfig& cfg) {
  PreparedData data;
  if (cfg.is_synthetic()) {
    SyntheticData synth = generate_synthetic(cfg.synthetic);
    data.raw = std::move(synth.dataset);
    data.coupling = std::move(synth.coupling);
  } else {
    data.raw = load_csv(cfg.dataset, cfg.csv);
  }
  data.raw.name = cfg.label();
  data.splits = split(data.raw, cfg.split);
  data.stats = fit_normalization(data.raw, data.splits.train);
  data.normalized = normalize(data.raw, data.stats);
  return data;
}

std::string format_row(const ReportRow& row) {
  std::ostringstream out;
  out << std::setprecision(10);
  out << row.dataset << ',' << row.variant << ',';
  if (row.gamma) out << *row.gamma;
  out << ',' << row.horizon << ',' << row.seed << ',' << row.mse << ',' << row.mae << ',' << row.epochs << ','
      << std::setprecision(4) << row.wall_s;
  return out.str();
}

ReportRow average_rows(const std::vector<ReportRow>& rows) {
  if (rows.empty()) throw ContractError("average_rows: no rows");
  ReportRow avg = rows.front();
  avg.mse = avg.mae = avg.wall_s = 0.0;
  double epochs = 0.0;
  avg.seed.clear();
  for (const auto& r : rows) {
    avg.mse += r.mse;
    avg.mae += r.mae;
    avg.wall_s += r.wall_s;
    epochs += static_cast<double>(r.epochs);
    avg.seed += (avg.seed.empty() ? "" : "+") + r.seed;
  }
  const double n = static_cast<double>(rows.size());
  avg.mse /= n;
  avg.mae /= n;
  avg.wall_s /= n;
  avg.epochs = static_cast<std::size_t>(std::llround(epochs / n));
  avg.runs = rows.size();
  return avg;
}

namespace {

void write_rows(const std::filesystem::path& path, const std::vector<ReportRow>& rows) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write report: " + path.string());
  out << kReportHeader << '\n';
  for (const auto& r : rows) out << format_row(r) << '\n';
}

}  // namespace

void EvalReport::write_csv(const std::filesystem::path& path) const { write_rows(path, rows); }
void EvalReport::write_runs_csv(const std::filesystem::path& path) const { write_rows(path, runs); }

std::string EvalReport::table() const {
  std::ostringstream out;
  out << std::left << std::setw(14) << "dataset" << std::setw(9) << "variant" << std::setw(7) << "gamma"
      << std::setw(9) << "horizon" << std::setw(6) << "runs" << std::setw(12) << "mse" << std::setw(12) << "mae"
      << "epochs\n";
  out << std::fixed;
  for (const auto& r : rows) {
    std::ostringstream gamma;
    if (r.gamma) gamma << std::setprecision(2) << std::fixed << *r.gamma;
    else gamma << "-";
    out << std::setw(14) << r.dataset << std::setw(9) << r.variant << std::setw(7) << gamma.str() << std::setw(9)
        << r.horizon << std::setw(6) << r.runs << std::setw(12) << std::setprecision(5) << r.mse << std::setw(12)
        << r.mae << r.epochs << '\n';
  }
  return out.str();
}

RunOutcome run_experiment(const RunConfig& cfg_in, const PreparedData& data, std::ostream* log) {
  RunConfig cfg = cfg_in;
  cfg.model.nodes = data.normalized.nodes();
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();

  const std::size_t l = cfg.model.input_length, k = cfg.model.horizon;
  WindowSampler train_w = data.windows(data.splits.train, l, k);
  WindowSampler val_w = data.windows(data.splits.val, l, k);
  WindowSampler test_w = data.windows(data.splits.test, l, k);
  if (test_w.count() == 0) throw ConfigError("test split too short for L=" + std::to_string(l) + ", K=" + std::to_string(k));

  RunOutcome out;
  out.model = std::make_unique<Model>(cfg.model);
  if (log) {
    *log << data.raw.name << ' ' << variant_name(cfg.model.variant) << " K=" << k << " seed=" << cfg.train.seed
         << " n=" << cfg.model.selected_count() << " params=" << out.model->parameters().scalar_count() << '\n';
  }
  out.training = train(*out.model, train_w, val_w, cfg.train, log);

  EvalOptions opts;
  opts.sampling_seed = eval_sampling_seed(cfg.train.seed);
  opts.batch = cfg.train.batch;
  opts.raw_space = cfg.raw_metrics ? &data.stats : nullptr;
  out.test = evaluate(*out.model, test_w, opts);
  out.persistence = evaluate_persistence(test_w, opts.raw_space);

  out.row.dataset = data.raw.name;
  out.row.variant = variant_name(cfg.model.variant);
  out.row.gamma = cfg.model.gamma;
  out.row.horizon = k;
  out.row.seed = std::to_string(cfg.train.seed);
  out.row.mse = out.test.mse;
  out.row.mae = out.test.mae;
  out.row.epochs = out.training.epochs_run;
  out.row.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (log) *log << "  test mse " << out.test.mse << "  mae " << out.test.mae << "  (persistence mse "
                << out.persistence.mse << ")\n";
  return out;
}

namespace {

template <class Configure>
EvalReport grid(const RunConfig& cfg, const PreparedData& data, std::size_t cells, Configure configure,
                std::ostream* log) {
  EvalReport report;
  for (std::size_t cell = 0; cell < cells; ++cell) {
    for (std::size_t horizon : cfg.horizon_list()) {
      std::vector<ReportRow> rows;
      for (std::uint64_t seed : cfg.seeds) {
        RunConfig run = cfg;
        configure(run, cell);
        run.model.horizon = horizon;
        run.model.seed = seed;
        run.train.seed = seed;
        rows.push_back(run_experiment(run, data, log).row);
      }
      report.runs.insert(report.runs.end(), rows.begin(), rows.end());
      report.rows.push_back(average_rows(rows));
    }
  }
  return report;
}

}  // namespace

EvalReport sparsity_sweep(const RunConfig& cfg, const PreparedData& data, std::ostream* log) {
  if (cfg.gammas.empty()) throw ConfigError("sparsity sweep needs at least one gamma");
  return grid(cfg, data, cfg.gammas.size(), [&](RunConfig& run, std::size_t i) { run.model.gamma = cfg.gammas[i]; },
              log);
}

EvalReport ablation_run(const RunConfig& cfg, const PreparedData& data, std::ostream* log) {
  if (cfg.variants.empty()) throw ConfigError("ablation needs at least one variant");
  return grid(cfg, data, cfg.variants.size(),
              [&](RunConfig& run, std::size_t i) { run.model.variant = cfg.variants[i]; }, log);
}

void write_predictions_csv(const std::filesystem::path& path, const Model& model, const WindowSampler& sampler,
                           std::uint64_t sampling_seed, const NormalizationStats* raw_space) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write predictions: " + path.string());
  out << std::setprecision(10) << "window_start,node,step,true,pred\n";
  const std::size_t n = sampler.nodes(), batch = 32;
  for (std::size_t first = 0; first < sampler.count(); first += batch) {
    const std::size_t count = std::min(batch, sampler.count() - first);
    Tensor pred = predict(model, sampler, first, count, sampling_seed);
    if (raw_space) pred = denormalize(pred, *raw_space);
    for (std::size_t b = 0; b < count; ++b) {
      Window w = sampler.at(first + b);
      if (raw_space) w.y = denormalize(w.y, *raw_space);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t s = 0; s < sampler.horizon(); ++s)
          out << w.start << ',' << i << ',' << s << ',' << w.y(i, s) << ',' << pred(b * n + i, s) << '\n';
    }
  }
}

void write_adjacency_csv(const std::filesystem::path& path, const Model& model, const WindowSampler& sampler,
                         std::size_t window, std::uint64_t sampling_seed) {
  Window w = sampler.at(window);
  Tape tape;
  ForwardOptions opts;
  opts.sampling_seed = sampling_seed;
  opts.sample_offset = window;
  ModelOutput result = model.forward(tape, tape.constant(w.x), opts);
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write adjacency: " + path.string());
  out << std::setprecision(10) << "slot,query,key,weight\n";
  for (const GraphRecord& rec : result.graphs) {
    const Tensor& weights = rec.graph.weights.value();
    for (std::size_t e = 0; e < rec.graph.edge_count(); ++e)
      out << rec.slot << ',' << rec.graph.target[e] << ',' << rec.graph.source[e] << ',' << weights[e] << '\n';
  }
}

std::filesystem::path output_dir(const std::string& flag) {
  std::filesystem::path dir = ".";
  if (!flag.empty()) {
    dir = flag;
  } else if (const char* env = std::getenv("HGMTS_OUT_DIR"); env && *env) {
    dir = env;
  }
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace hgmts
