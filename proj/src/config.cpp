#include "hgmts/config.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "hgmts/error.hpp"

namespace hgmts {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

template <class T>
T parse_value(std::string_view key, std::string_view text) {
  text = trim(text);
  T v{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw ConfigError("bad value '" + std::string(text) + "' for key '" + std::string(key) + "'");
  }
  return v;
}

bool parse_bool(std::string_view key, std::string_view text) {
  text = trim(text);
  if (text == "1" || text == "true" || text == "yes" || text == "on") return true;
  if (text == "0" || text == "false" || text == "no" || text == "off") return false;
  throw ConfigError("bad boolean '" + std::string(text) + "' for key '" + std::string(key) + "'");
}

std::vector<std::string_view> split_list(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t next = text.find(',', pos);
    const auto item = trim(text.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos));
    if (!item.empty()) out.push_back(item);
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

template <class T>
std::string join(const std::vector<T>& items) {
  std::ostringstream out;
  out.precision(17);
  for (std::size_t i = 0; i < items.size(); ++i) out << (i ? "," : "") << items[i];
  return out.str();
}

}  // namespace

std::vector<double> parse_double_list(std::string_view text) {
  std::vector<double> out;
  for (auto item : split_list(text)) out.push_back(parse_value<double>("list", item));
  if (out.empty()) throw ConfigError("empty list '" + std::string(text) + "'");
  return out;
}

std::vector<std::size_t> parse_size_list(std::string_view text) {
  std::vector<std::size_t> out;
  for (auto item : split_list(text)) out.push_back(parse_value<std::size_t>("list", item));
  if (out.empty()) throw ConfigError("empty list '" + std::string(text) + "'");
  return out;
}

std::string RunConfig::label() const {
  if (!dataset_name.empty()) return dataset_name;
  if (is_synthetic()) return "synthetic";
  return std::filesystem::path(dataset).stem().string();
}

void RunConfig::set(std::string_view key, std::string_view value) {
  key = trim(key);
  value = trim(value);
  auto size = [&] { return parse_value<std::size_t>(key, value); };
  auto real = [&] { return parse_value<double>(key, value); };
  auto u64 = [&] { return parse_value<std::uint64_t>(key, value); };

  if (key == "dataset") {
    dataset = std::string(value);
  } else if (key == "dataset_name") {
    dataset_name = std::string(value);
  } else if (key == "frequency") {
    csv.frequency = std::string(value);
  } else if (key == "missing") {
    if (value == "reject") csv.missing = MissingPolicy::reject;
    else if (value == "forward_fill") csv.missing = MissingPolicy::forward_fill;
    else throw ConfigError("missing must be reject or forward_fill, got '" + std::string(value) + "'");
  } else if (key == "delimiter") {
    if (value.size() != 1) throw ConfigError("delimiter must be a single character");
    csv.delimiter = value[0];
  } else if (key == "split") {
    split = SplitSpec::parse(value);
  } else if (key == "synth_nodes") {
    synthetic.nodes = size();
  } else if (key == "synth_length") {
    synthetic.length = size();
  } else if (key == "synth_lag") {
    synthetic.lag = size();
  } else if (key == "synth_drivers") {
    synthetic.drivers = size();
  } else if (key == "synth_coupling") {
    synthetic.coupling = real();
  } else if (key == "synth_ar") {
    synthetic.ar = real();
  } else if (key == "synth_follower_scale") {
    synthetic.follower_scale = real();
  } else if (key == "synth_seasonal_amplitude") {
    synthetic.seasonal_amplitude = real();
  } else if (key == "synth_period") {
    synthetic.period = size();
  } else if (key == "synth_trend_amplitude") {
    synthetic.trend_amplitude = real();
  } else if (key == "synth_trend_period") {
    synthetic.trend_period = size();
  } else if (key == "synth_noise") {
    synthetic.noise = real();
  } else if (key == "synth_seed") {
    synthetic.seed = u64();
  } else if (key == "nodes") {
    model.nodes = size();
  } else if (key == "L" || key == "input_length") {
    model.input_length = size();
  } else if (key == "K" || key == "horizon") {
    model.horizon = size();
  } else if (key == "D" || key == "hidden") {
    model.hidden = size();
  } else if (key == "kernel") {
    model.kernel = size();
  } else if (key == "padding_mode") {
    model.padding = parse_padding_mode(value);
  } else if (key == "gamma") {
    if (value.empty() || value == "none") model.gamma.reset();
    else model.gamma = real();
  } else if (key == "c") {
    model.sampling_factor = real();
    model.gamma.reset();
  } else if (key == "rounds") {
    model.rounds = size();
  } else if (key == "stacks") {
    model.stacks = size();
  } else if (key == "blocks") {
    model.blocks_per_stack = size();
  } else if (key == "variant") {
    model.variant = parse_variant(value);
  } else if (key == "recompute_graph_each_round") {
    model.recompute_graph_each_round = parse_bool(key, value);
  } else if (key == "model_seed") {
    model.seed = u64();
  } else if (key == "seed") {
    model.seed = u64();
    train.seed = model.seed;
  } else if (key == "train_seed") {
    train.seed = u64();
  } else if (key == "lr") {
    train.lr0 = real();
  } else if (key == "halve_every") {
    train.halve_every = size();
  } else if (key == "patience") {
    train.patience = size();
  } else if (key == "batch") {
    train.batch = size();
  } else if (key == "max_epochs") {
    train.max_epochs = size();
  } else if (key == "backcast_weight") {
    train.backcast_weight = real();
  } else if (key == "metrics_space") {
    if (value == "normalized") raw_metrics = false;
    else if (value == "raw") raw_metrics = true;
    else throw ConfigError("metrics_space must be normalized or raw, got '" + std::string(value) + "'");
  } else if (key == "seeds") {
    seeds.clear();
    for (auto s : parse_size_list(value)) seeds.push_back(s);
  } else if (key == "horizons") {
    horizons = parse_size_list(value);
  } else if (key == "gammas") {
    gammas = parse_double_list(value);
  } else if (key == "variants") {
    variants.clear();
    for (auto item : split_list(value)) variants.push_back(parse_variant(item));
    if (variants.empty()) throw ConfigError("empty variant list");
  } else {
    throw ConfigError("unknown config key '" + std::string(key) + "'");
  }
}

void RunConfig::validate() const {
  if (dataset.empty()) throw ConfigError("dataset is not set");
  if (is_synthetic()) synthetic.validate();
  split.validate();
  model.validate();
  train.validate();
  if (seeds.empty()) throw ConfigError("seed list is empty");
  for (double g : gammas)
    if (!(g > 0.0)) throw ConfigError("gammas must be positive");
  for (std::size_t k : horizons)
    if (k == 0) throw ConfigError("horizons must be positive");
}

std::string RunConfig::canonical_text() const {
  std::ostringstream out;
  out.precision(17);
  out << "dataset=" << dataset << '\n';
  if (!dataset_name.empty()) out << "dataset_name=" << dataset_name << '\n';
  if (!csv.frequency.empty()) out << "frequency=" << csv.frequency << '\n';
  out << "missing=" << (csv.missing == MissingPolicy::reject ? "reject" : "forward_fill") << '\n'
      << "delimiter=" << csv.delimiter << '\n'
      << "split=" << split.train << ':' << split.val << ':' << split.test << '\n';
  if (is_synthetic()) {
    out << "synth_nodes=" << synthetic.nodes << '\n'
        << "synth_length=" << synthetic.length << '\n'
        << "synth_lag=" << synthetic.lag << '\n'
        << "synth_drivers=" << synthetic.drivers << '\n'
        << "synth_coupling=" << synthetic.coupling << '\n'
        << "synth_ar=" << synthetic.ar << '\n'
        << "synth_follower_scale=" << synthetic.follower_scale << '\n'
        << "synth_seasonal_amplitude=" << synthetic.seasonal_amplitude << '\n'
        << "synth_period=" << synthetic.period << '\n'
        << "synth_trend_amplitude=" << synthetic.trend_amplitude << '\n'
        << "synth_trend_period=" << synthetic.trend_period << '\n'
        << "synth_noise=" << synthetic.noise << '\n'
        << "synth_seed=" << synthetic.seed << '\n';
  }
  out << model.canonical_text();
  out << "train_seed=" << train.seed << '\n'
      << "lr=" << train.lr0 << '\n'
      << "halve_every=" << train.halve_every << '\n'
      << "patience=" << train.patience << '\n'
      << "batch=" << train.batch << '\n'
      << "max_epochs=" << train.max_epochs << '\n'
      << "backcast_weight=" << train.backcast_weight << '\n'
      << "metrics_space=" << (raw_metrics ? "raw" : "normalized") << '\n';
  return out.str();
}

RunConfig parse_config(std::string_view text, RunConfig base) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = trim(text.substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value, got '" +
                        std::string(line) + "'");
    }
    try {
      base.set(line.substr(0, eq), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return base;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  RunConfig cfg = parse_config(buffer.str());
  // Relative dataset paths are resolved against the config file's directory.
  if (!cfg.is_synthetic() && std::filesystem::path(cfg.dataset).is_relative()) {
    const auto candidate = path.parent_path() / cfg.dataset;
    if (std::filesystem::exists(candidate)) cfg.dataset = candidate.string();
  }
  return cfg;
}

}  // namespace hgmts
