#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hgmts/tensor.hpp"

namespace hgmts {

/// T x N multivariate series, one column per node (M = 1 feature per node).
struct Dataset {
  std::string name;
  Tensor values;  ///< [T x N]
  std::vector<std::string> timestamps;
  std::vector<std::string> channels;
  std::string frequency;

  std::size_t length() const { return values.rows(); }
  std::size_t nodes() const { return values.cols(); }
};

enum class MissingPolicy { reject, forward_fill };

struct CsvSchema {
  char delimiter = ',';
  MissingPolicy missing = MissingPolicy::reject;
  std::string frequency;
};

/// Header row, then `timestamp,channel...` rows. Timestamps must be strictly
/// increasing (numerically if all parse as numbers, lexicographically otherwise).
Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema = {});
Dataset parse_csv(std::istream& in, const CsvSchema& schema, std::string name);
void write_csv(const std::filesystem::path& path, const Dataset& ds);

struct SplitSpec {
  double train = 0.7;
  double val = 0.1;
  double test = 0.2;

  /// "70:10:20" or "0.7:0.1:0.2".
  static SplitSpec parse(std::string_view text);
  void validate() const;
};

/// Half-open row range [begin, end) of a dataset.
struct Segment {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
};

struct Splits {
  Segment train;
  Segment val;
  Segment test;
};

/// Chronological split at floor(train*T) and floor((train+val)*T).
Splits split(const Dataset& ds, const SplitSpec& spec);

struct NormalizationStats {
  std::vector<double> mean;
  std::vector<double> std;
  std::vector<std::size_t> constant_channels;  ///< channels whose std was guarded to 1
};

/// Per-channel mean and population std over the rows of `segment` only.
NormalizationStats fit_normalization(const Dataset& ds, const Segment& segment);
Dataset normalize(const Dataset& ds, const NormalizationStats& stats);
/// Inverse of normalize for an [N x K] prediction (row i is channel i).
Tensor denormalize(const Tensor& prediction, const NormalizationStats& stats);

struct Window {
  std::size_t start = 0;  ///< dataset row of the first input step
  Tensor x;               ///< [N x L]
  Tensor y;               ///< [N x K], rows start..start+L-1 are x, y follows
};

/// Stride-1 (x, y) pairs that stay inside one segment.
class WindowSampler {
 public:
  WindowSampler(const Dataset& ds, Segment segment, std::size_t input_length, std::size_t horizon);

  std::size_t count() const noexcept { return count_; }
  std::size_t input_length() const noexcept { return lookback_; }
  std::size_t horizon() const noexcept { return horizon_; }
  std::size_t nodes() const noexcept { return ds_->nodes(); }
  Window at(std::size_t i) const;
  /// Windows idx[0..] stacked as [B*N x L] inputs and [B*N x K] targets.
  void batch(std::span<const std::size_t> idx, Tensor& x, Tensor& y) const;

 private:
  const Dataset* ds_;
  Segment segment_;
  std::size_t lookback_;
  std::size_t horizon_;
  std::size_t count_ = 0;
};

/// Small text report: name, N, T, frequency and split boundaries.
std::string dataset_manifest(const Dataset& ds, const Splits& splits);

}  // namespace hgmts
