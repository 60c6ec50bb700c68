#include "hgmts/cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <ostream>

#include "hgmts/checkpoint.hpp"
#include "hgmts/error.hpp"
#include "hgmts/experiments.hpp"

namespace hgmts {

namespace {

/// Flags shared by every subcommand that builds a RunConfig.
struct ConfigFlags {
  std::string config;
  std::vector<std::string> sets;
  std::string out_dir;
  std::vector<std::pair<std::string, std::string>> shortcuts;  ///< (key, value) from named flags

  void add_to(CLI::App& app) {
    app.add_option("--config", config, "flat key=value config file")->check(CLI::ExistingFile);
    app.add_option("--set", sets, "override a config key (key=value), repeatable");
    app.add_option("--out-dir", out_dir, "output directory (default $HGMTS_OUT_DIR or .)");
    static const std::pair<const char*, const char*> named[] = {
        {"--dataset", "dataset"}, {"--horizon", "horizon"}, {"--lookback", "input_length"}, {"--hidden", "hidden"},
        {"--variant", "variant"}, {"--gamma", "gamma"},     {"--c", "c"},                   {"--seed", "seed"},
        {"--epochs", "max_epochs"}, {"--seeds", "seeds"},   {"--horizons", "horizons"},
    };
    for (const auto& [flag, key] : named) {
      std::string k = key;
      app.add_option_function<std::string>(
          flag, [this, k](const std::string& v) { shortcuts.emplace_back(k, v); }, "sets config key '" + k + "'");
    }
  }

  RunConfig build() const {
    RunConfig cfg = config.empty() ? RunConfig{} : load_config(config);
    for (const auto& [k, v] : shortcuts) cfg.set(k, v);
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
      cfg.set(s.substr(0, eq), s.substr(eq + 1));
    }
    cfg.validate();
    return cfg;
  }
};

struct LoadedModel {
  RunConfig cfg;
  PreparedData data;
  std::unique_ptr<Model> model;
};

LoadedModel load_model(const std::string& checkpoint) {
  Checkpoint ckpt = read_checkpoint(checkpoint);
  LoadedModel lm;
  lm.cfg = parse_config(ckpt.config_text);
  lm.data = prepare_data(lm.cfg);
  lm.cfg.model.nodes = lm.data.normalized.nodes();
  lm.model = std::make_unique<Model>(lm.cfg.model);
  load_parameters(ckpt, lm.model->parameters(), ckpt.config_text);
  return lm;
}

std::string with_suffix(const std::string& base, const std::string& suffix) {
  std::filesystem::path p(base);
  return (p.parent_path() / (p.stem().string() + suffix + p.extension().string())).string();
}

void report_outputs(std::ostream& out, const EvalReport& report, const std::filesystem::path& path) {
  report.write_csv(path);
  const std::string runs_path = with_suffix(path.string(), "_runs");
  report.write_runs_csv(runs_path);
  out << report.table() << "report: " << path.string() << "\nper-seed rows: " << runs_path << '\n';
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hierarchical graph message-passing forecaster"};
  app.name("hgmts");
  app.require_subcommand(1);

  ConfigFlags train_flags, sweep_flags, ablate_flags, synth_flags;
  std::string checkpoint_path, history_path, predictions_path;
  auto* train_cmd = app.add_subcommand("train", "train one model and score the test split");
  train_flags.add_to(*train_cmd);
  train_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint file (default <out-dir>/model.ckpt)");
  train_cmd->add_option("--history", history_path, "history CSV (default <out-dir>/history.csv)");
  train_cmd->add_option("--predictions", predictions_path, "also write test predictions to this CSV");

  std::string eval_ckpt, eval_split = "test", eval_out, eval_predictions, eval_dir;
  auto* eval_cmd = app.add_subcommand("eval", "score a checkpoint on one split");
  eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint written by train")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--split", eval_split, "train, val or test")->check(CLI::IsMember({"train", "val", "test"}));
  eval_cmd->add_option("--out", eval_out, "report CSV (default <out-dir>/eval.csv)");
  eval_cmd->add_option("--predictions", eval_predictions, "per-window predicted-vs-true CSV");
  eval_cmd->add_option("--out-dir", eval_dir, "output directory");

  std::string sweep_gammas, sweep_report;
  auto* sweep_cmd = app.add_subcommand("sweep-gamma", "train and score one model per sparsity ratio gamma");
  sweep_flags.add_to(*sweep_cmd);
  sweep_cmd->add_option("--gammas", sweep_gammas, "comma-separated gamma list (default 0.2,...,0.7)");
  sweep_cmd->add_option("--report", sweep_report, "report CSV (default <out-dir>/sweep_gamma.csv)");

  std::string ablate_variants, ablate_report;
  auto* ablate_cmd = app.add_subcommand("ablate", "train and score each model variant");
  ablate_flags.add_to(*ablate_cmd);
  ablate_cmd->add_option("--variants", ablate_variants, "comma-separated variants, e.g. 1,4 (default 1..6)");
  ablate_cmd->add_option("--report", ablate_report, "report CSV (default <out-dir>/ablation.csv)");

  std::string synth_out;
  auto* synth_cmd = app.add_subcommand("synth-gen", "write the coupled synthetic dataset as CSV");
  synth_flags.add_to(*synth_cmd);
  synth_cmd->add_option("--out", synth_out, "dataset CSV (the coupling matrix goes next to it)")->required();

  std::string graph_ckpt, graph_split = "test", graph_out, graph_dir;
  std::size_t graph_window = 0;
  auto* graph_cmd = app.add_subcommand("inspect-graph", "dump the inferred adjacency for one window");
  graph_cmd->add_option("--checkpoint", graph_ckpt, "checkpoint written by train")->required()->check(CLI::ExistingFile);
  graph_cmd->add_option("--split", graph_split, "train, val or test")->check(CLI::IsMember({"train", "val", "test"}));
  graph_cmd->add_option("--window", graph_window, "window index within the split");
  graph_cmd->add_option("--out", graph_out, "edge CSV (default <out-dir>/adjacency.csv)");
  graph_cmd->add_option("--out-dir", graph_dir, "output directory");

  std::vector<std::string> argv_store{"hgmts"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return e.get_exit_code() == 0 ? 2 : e.get_exit_code();
  }

  auto usage_for = [&]() -> std::string {
    for (auto* sub : app.get_subcommands()) return sub->help();
    return app.help();
  };

  try {
    if (train_cmd->parsed()) {
      RunConfig cfg = train_flags.build();
      const auto dir = output_dir(train_flags.out_dir);
      PreparedData data = prepare_data(cfg);
      {
        std::ofstream manifest(dir / "manifest.txt");
        manifest << dataset_manifest(data.raw, data.splits);
      }
      RunOutcome run = run_experiment(cfg, data, &out);
      cfg.model.nodes = data.normalized.nodes();
      const std::string ckpt = checkpoint_path.empty() ? (dir / "model.ckpt").string() : checkpoint_path;
      save_checkpoint(ckpt, run.model->parameters(), cfg.canonical_text());
      const std::string hist = history_path.empty() ? (dir / "history.csv").string() : history_path;
      write_history_csv(hist, run.training.history);
      EvalReport report;
      report.rows.push_back(run.row);
      report.write_csv(dir / "train_report.csv");
      if (!predictions_path.empty()) {
        write_predictions_csv(predictions_path, *run.model,
                              data.windows(data.splits.test, cfg.model.input_length, cfg.model.horizon),
                              eval_sampling_seed(cfg.train.seed), cfg.raw_metrics ? &data.stats : nullptr);
      }
      out << kReportHeader << '\n' << format_row(run.row) << '\n'
          << "checkpoint: " << ckpt << "\nhistory: " << hist << '\n';
    } else if (eval_cmd->parsed()) {
      LoadedModel lm = load_model(eval_ckpt);
      const auto dir = output_dir(eval_dir);
      const auto& cfg = lm.cfg;
      WindowSampler windows =
          lm.data.windows(lm.data.segment(eval_split), cfg.model.input_length, cfg.model.horizon);
      if (windows.count() == 0) throw ConfigError("split '" + eval_split + "' has no windows");
      EvalOptions opts;
      opts.sampling_seed = eval_sampling_seed(cfg.train.seed);
      opts.batch = cfg.train.batch;
      opts.raw_space = cfg.raw_metrics ? &lm.data.stats : nullptr;
      EvalResult r = evaluate(*lm.model, windows, opts);
      ReportRow row;
      row.dataset = lm.data.raw.name;
      row.variant = variant_name(cfg.model.variant);
      row.gamma = cfg.model.gamma;
      row.horizon = cfg.model.horizon;
      row.seed = std::to_string(cfg.train.seed);
      row.mse = r.mse;
      row.mae = r.mae;
      EvalReport report;
      report.rows.push_back(row);
      const std::string path = eval_out.empty() ? (dir / "eval.csv").string() : eval_out;
      report.write_csv(path);
      if (!eval_predictions.empty())
        write_predictions_csv(eval_predictions, *lm.model, windows, opts.sampling_seed, opts.raw_space);
      out << kReportHeader << '\n' << format_row(row) << '\n';
    } else if (sweep_cmd->parsed()) {
      RunConfig cfg = sweep_flags.build();
      if (!sweep_gammas.empty()) cfg.set("gammas", sweep_gammas);
      cfg.validate();
      const auto dir = output_dir(sweep_flags.out_dir);
      PreparedData data = prepare_data(cfg);
      EvalReport report = sparsity_sweep(cfg, data, &out);
      report_outputs(out, report, sweep_report.empty() ? dir / "sweep_gamma.csv" : std::filesystem::path(sweep_report));
    } else if (ablate_cmd->parsed()) {
      RunConfig cfg = ablate_flags.build();
      if (!ablate_variants.empty()) cfg.set("variants", ablate_variants);
      const auto dir = output_dir(ablate_flags.out_dir);
      PreparedData data = prepare_data(cfg);
      EvalReport report = ablation_run(cfg, data, &out);
      report_outputs(out, report, ablate_report.empty() ? dir / "ablation.csv" : std::filesystem::path(ablate_report));
    } else if (synth_cmd->parsed()) {
      RunConfig cfg = synth_flags.build();
      SyntheticData synth = generate_synthetic(cfg.synthetic);
      std::filesystem::path path(synth_out);
      if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
      write_csv(path, synth.dataset);
      const std::string coupling_path = with_suffix(synth_out, "_coupling");
      std::ofstream cout_(coupling_path);
      cout_ << "target,source,weight\n";
      for (std::size_t i = 0; i < synth.coupling.rows(); ++i)
        for (std::size_t j = 0; j < synth.coupling.cols(); ++j)
          if (synth.coupling(i, j) != 0.0) cout_ << i << ',' << j << ',' << synth.coupling(i, j) << '\n';
      out << "wrote " << synth.dataset.length() << " rows x " << synth.dataset.nodes() << " series to " << synth_out
          << "\ncoupling: " << coupling_path << '\n';
    } else if (graph_cmd->parsed()) {
      LoadedModel lm = load_model(graph_ckpt);
      const auto dir = output_dir(graph_dir);
      WindowSampler windows =
          lm.data.windows(lm.data.segment(graph_split), lm.cfg.model.input_length, lm.cfg.model.horizon);
      if (graph_window >= windows.count()) {
        throw ConfigError("window " + std::to_string(graph_window) + " out of range (split has " +
                          std::to_string(windows.count()) + ")");
      }
      const std::string path = graph_out.empty() ? (dir / "adjacency.csv").string() : graph_out;
      write_adjacency_csv(path, *lm.model, windows, graph_window, eval_sampling_seed(lm.cfg.train.seed));
      out << "adjacency: " << path << '\n';
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n\n" << usage_for();
    return 1;
  }
  return 0;
}

}  // namespace hgmts
