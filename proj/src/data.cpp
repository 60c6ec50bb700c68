#include "hgmts/data.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "hgmts/error.hpp"

namespace hgmts {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '"')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '"')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_line(std::string_view line, char delim) {
  std::vector<std::string_view> cells;
  std::size_t pos = 0;
  while (true) {
    const std::size_t next = line.find(delim, pos);
    cells.push_back(trim(line.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos)));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return cells;
}

std::optional<double> parse_number(std::string_view s) {
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

bool is_missing(std::string_view s) { return s.empty() || s == "NA" || s == "NaN" || s == "nan" || s == "null"; }

}  // namespace

Dataset parse_csv(std::istream& in, const CsvSchema& schema, std::string name) {
  Dataset ds;
  ds.name = std::move(name);
  ds.frequency = schema.frequency;

  std::string line;
  if (!std::getline(in, line)) throw ParseError(ds.name + ": empty file");
  const auto header = split_line(line, schema.delimiter);
  if (header.size() < 2) throw ParseError(ds.name + ": need a timestamp column and at least one channel");
  for (std::size_t c = 1; c < header.size(); ++c) ds.channels.emplace_back(header[c]);
  const std::size_t n = ds.channels.size();

  std::vector<double> values;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const auto cells = split_line(line, schema.delimiter);
    if (cells.size() != n + 1) {
      throw ParseError(ds.name + ": row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                       " columns, expected " + std::to_string(n + 1));
    }
    ds.timestamps.emplace_back(cells[0]);
    for (std::size_t c = 0; c < n; ++c) {
      const std::string_view cell = cells[c + 1];
      if (is_missing(cell)) {
        if (schema.missing == MissingPolicy::forward_fill && row > 1) {
          values.push_back(values[values.size() - n]);
          continue;
        }
        throw ParseError(ds.name + ": row " + std::to_string(row) + ", column \"" + ds.channels[c] +
                         "\": missing value");
      }
      const auto v = parse_number(cell);
      if (!v || !std::isfinite(*v)) {
        throw ParseError(ds.name + ": row " + std::to_string(row) + ", column \"" + ds.channels[c] +
                         "\": cannot parse '" + std::string(cell) + "' as a number");
      }
      values.push_back(*v);
    }
  }
  if (row == 0) throw ParseError(ds.name + ": no data rows");

  bool numeric_time = true;
  std::vector<double> times;
  for (const auto& ts : ds.timestamps) {
    const auto v = parse_number(ts);
    if (!v) {
      numeric_time = false;
      break;
    }
    times.push_back(*v);
  }
  for (std::size_t r = 1; r < ds.timestamps.size(); ++r) {
    const bool increasing =
        numeric_time ? times[r] > times[r - 1] : ds.timestamps[r] > ds.timestamps[r - 1];
    if (!increasing) {
      throw ParseError(ds.name + ": timestamps not strictly increasing at row " + std::to_string(r + 1) + " ('" +
                       ds.timestamps[r - 1] + "' then '" + ds.timestamps[r] + "')");
    }
  }
  ds.values = Tensor(Shape{row, n}, std::move(values));
  return ds;
}

Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open dataset file: " + path.string());
  return parse_csv(in, schema, path.stem().string());
}

void write_csv(const std::filesystem::path& path, const Dataset& ds) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open for writing: " + path.string());
  out.precision(17);
  out << "timestamp";
  for (const auto& c : ds.channels) out << ',' << c;
  out << '\n';
  for (std::size_t t = 0; t < ds.length(); ++t) {
    out << (t < ds.timestamps.size() ? ds.timestamps[t] : std::to_string(t));
    for (std::size_t c = 0; c < ds.nodes(); ++c) out << ',' << ds.values(t, c);
    out << '\n';
  }
}

SplitSpec SplitSpec::parse(std::string_view text) {
  const auto parts = split_line(text, ':');
  if (parts.size() != 3) throw ConfigError("split must look like 70:10:20, got '" + std::string(text) + "'");
  double v[3];
  for (int i = 0; i < 3; ++i) {
    const auto p = parse_number(parts[static_cast<std::size_t>(i)]);
    if (!p || *p < 0) throw ConfigError("bad split component in '" + std::string(text) + "'");
    v[i] = *p;
  }
  const double total = v[0] + v[1] + v[2];
  if (!(total > 0)) throw ConfigError("split components must not all be zero");
  SplitSpec spec{v[0] / total, v[1] / total, v[2] / total};
  if (std::abs(total - 1.0) < 1e-9) spec = SplitSpec{v[0], v[1], v[2]};
  if (std::abs(total - 100.0) < 1e-9) spec = SplitSpec{v[0] / 100.0, v[1] / 100.0, v[2] / 100.0};
  spec.validate();
  return spec;
}

void SplitSpec::validate() const {
  if (train <= 0 || val < 0 || test < 0) throw ConfigError("split fractions must be non-negative with train > 0");
  if (std::abs(train + val + test - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");
}

Splits split(const Dataset& ds, const SplitSpec& spec) {
  spec.validate();
  const std::size_t t = ds.length();
  const double total = static_cast<double>(t);
  // Small epsilon so that 0.7*100 lands on 70 rather than 69.999...
  auto boundary = [&](double frac) {
    return std::min(t, static_cast<std::size_t>(std::floor(frac * total + 1e-9)));
  };
  const std::size_t b1 = boundary(spec.train);
  const std::size_t b2 = std::max(b1, boundary(spec.train + spec.val));
  return Splits{{0, b1}, {b1, b2}, {b2, t}};
}

NormalizationStats fit_normalization(const Dataset& ds, const Segment& segment) {
  if (segment.size() == 0) throw ContractError("fit_normalization: empty segment");
  const std::size_t n = ds.nodes();
  NormalizationStats stats;
  stats.mean.assign(n, 0.0);
  stats.std.assign(n, 0.0);
  const double count = static_cast<double>(segment.size());
  for (std::size_t c = 0; c < n; ++c) {
    double sum = 0.0;
    for (std::size_t t = segment.begin; t < segment.end; ++t) sum += ds.values(t, c);
    const double mean = sum / count;
    double sq = 0.0;
    for (std::size_t t = segment.begin; t < segment.end; ++t) {
      const double d = ds.values(t, c) - mean;
      sq += d * d;
    }
    double sd = std::sqrt(sq / count);
    if (!(sd > 1e-12)) {
      sd = 1.0;
      stats.constant_channels.push_back(c);
      std::cerr << "warning: channel " << (c < ds.channels.size() ? ds.channels[c] : std::to_string(c))
                << " is constant on the training split; std set to 1\n";
    }
    stats.mean[c] = mean;
    stats.std[c] = sd;
  }
  return stats;
}

Dataset normalize(const Dataset& ds, const NormalizationStats& stats) {
  if (stats.mean.size() != ds.nodes()) throw DimensionError("normalize: stats do not match channel count");
  Dataset out = ds;
  for (std::size_t t = 0; t < ds.length(); ++t)
    for (std::size_t c = 0; c < ds.nodes(); ++c) out.values(t, c) = (ds.values(t, c) - stats.mean[c]) / stats.std[c];
  return out;
}

Tensor denormalize(const Tensor& prediction, const NormalizationStats& stats) {
  if (prediction.rows() % stats.mean.size() != 0) {
    throw DimensionError("denormalize: prediction rows do not match channel count");
  }
  Tensor out = prediction;
  out.drop_grad();
  const std::size_t n = stats.mean.size();
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t k = 0; k < out.cols(); ++k) out(r, k) = prediction(r, k) * stats.std[r % n] + stats.mean[r % n];
  return out;
}

WindowSampler::WindowSampler(const Dataset& ds, Segment segment, std::size_t input_length, std::size_t horizon)
    : ds_(&ds), segment_(segment), lookback_(input_length), horizon_(horizon) {
  if (input_length == 0 || horizon == 0) throw ContractError("window lengths L and K must be at least 1");
  if (segment.end > ds.length() || segment.begin > segment.end) throw ContractError("segment outside dataset");
  const std::size_t span = segment.size();
  count_ = span >= lookback_ + horizon_ ? span - lookback_ - horizon_ + 1 : 0;
}

Window WindowSampler::at(std::size_t i) const {
  if (i >= count_) throw ContractError("window index out of range");
  const std::size_t n = ds_->nodes();
  Window w;
  w.start = segment_.begin + i;
  w.x = Tensor::matrix(n, lookback_);
  w.y = Tensor::matrix(n, horizon_);
  for (std::size_t c = 0; c < n; ++c) {
    for (std::size_t t = 0; t < lookback_; ++t) w.x(c, t) = ds_->values(w.start + t, c);
    for (std::size_t t = 0; t < horizon_; ++t) w.y(c, t) = ds_->values(w.start + lookback_ + t, c);
  }
  return w;
}

void WindowSampler::batch(std::span<const std::size_t> idx, Tensor& x, Tensor& y) const {
  const std::size_t n = ds_->nodes();
  x = Tensor::matrix(idx.size() * n, lookback_);
  y = Tensor::matrix(idx.size() * n, horizon_);
  for (std::size_t b = 0; b < idx.size(); ++b) {
    if (idx[b] >= count_) throw ContractError("window index out of range");
    const std::size_t start = segment_.begin + idx[b];
    for (std::size_t c = 0; c < n; ++c) {
      for (std::size_t t = 0; t < lookback_; ++t) x(b * n + c, t) = ds_->values(start + t, c);
      for (std::size_t t = 0; t < horizon_; ++t) y(b * n + c, t) = ds_->values(start + lookback_ + t, c);
    }
  }
}

std::string dataset_manifest(const Dataset& ds, const Splits& splits) {
  std::ostringstream out;
  out << "name: " << ds.name << '\n'
      << "nodes: " << ds.nodes() << '\n'
      << "length: " << ds.length() << '\n'
      << "frequency: " << (ds.frequency.empty() ? "unknown" : ds.frequency) << '\n'
      << "train: [" << splits.train.begin << ", " << splits.train.end << ")\n"
      << "val: [" << splits.val.begin << ", " << splits.val.end << ")\n"
      << "test: [" << splits.test.begin << ", " << splits.test.end << ")\n";
  return out.str();
}

}  // namespace hgmts
