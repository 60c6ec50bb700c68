#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hgmts/data.hpp"
#include "hgmts/error.hpp"
#include "hgmts/synthetic.hpp"
#include "support.hpp"

using namespace hgmts;

namespace {

Dataset parse(const std::string& text, CsvSchema schema = {}) {
  std::istringstream in(text);
  return parse_csv(in, schema, "test");
}

Dataset ramp(std::size_t t_len, std::size_t n) {
  Dataset ds;
  ds.values = Tensor::matrix(t_len, n);
  for (std::size_t t = 0; t < t_len; ++t)
    for (std::size_t c = 0; c < n; ++c) ds.values(t, c) = static_cast<double>(t * 10 + c);
  return ds;
}

}  // namespace

TEST_CASE("csv parsing") {
  const Dataset ds = parse("date,temp,load\n2020-01-01,1.5,2\n2020-01-02,-3,4e1\n2020-01-03,0,7\n");
  CHECK(ds.values.shape() == Shape{3, 2});
  CHECK(ds.channels == std::vector<std::string>{"temp", "load"});
  CHECK(ds.values(1, 1) == 40.0);
  CHECK(ds.timestamps[2] == "2020-01-03");
}

TEST_CASE("csv errors carry row and column") {
  try {
    parse("date,temp\n1,1.0\n2,abc\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("row 2") != std::string::npos);
    CHECK(msg.find("column \"temp\"") != std::string::npos);
  }
  CHECK_THROWS_AS(parse("t,a\n1,2\n3\n"), ParseError);
  CHECK_THROWS_AS(parse(""), ParseError);
  CHECK_THROWS_AS(parse("t,a\n"), ParseError);
  CHECK_THROWS_AS(parse("t,a\n2,1\n1,1\n"), ParseError);
  CHECK_THROWS_AS(parse("t,a\n2020-01-02,1\n2020-01-01,1\n"), ParseError);
  CHECK_THROWS_AS(parse("t,a\n1,1\n1,1\n"), ParseError);
  // Numeric timestamps compare numerically, not as text.
  CHECK(parse("t,a\n9,1\n10,2\n").length() == 2);
}

TEST_CASE("missing values are rejected or forward filled") {
  const std::string text = "t,a,b\n1,1,2\n2,,3\n3,4,NaN\n";
  CHECK_THROWS_AS(parse(text), ParseError);
  CsvSchema ff;
  ff.missing = MissingPolicy::forward_fill;
  const Dataset ds = parse(text, ff);
  CHECK(ds.values(1, 0) == 1.0);
  CHECK(ds.values(2, 1) == 3.0);
  CHECK_THROWS_AS(parse("t,a\n1,\n2,1\n", ff), ParseError);
}

TEST_CASE("csv file round trip") {
  const auto path = std::filesystem::temp_directory_path() / "hgmts_data_test.csv";
  Dataset ds = ramp(5, 3);
  ds.channels = {"a", "b", "c"};
  for (int t = 0; t < 5; ++t) ds.timestamps.push_back(std::to_string(t));
  write_csv(path, ds);
  const Dataset back = load_csv(path);
  CHECK(back.name == "hgmts_data_test");
  CHECK(max_abs_diff(back.values, ds.values) == 0.0);
  CHECK_THROWS_AS(load_csv(path.string() + ".missing"), ParseError);
}

TEST_CASE("chronological splits") {
  Dataset ds = ramp(100, 1);
  Splits s = split(ds, SplitSpec::parse("70:10:20"));
  CHECK(s.train.size() == 70);
  CHECK(s.val.size() == 10);
  CHECK(s.test.size() == 20);
  s = split(ds, SplitSpec::parse("60:20:20"));
  CHECK(s.train.size() == 60);
  CHECK(s.val.size() == 20);
  CHECK(s.test.size() == 20);
  s = split(ramp(10, 1), SplitSpec{});
  CHECK(s.train.size() == 7);
  CHECK(s.val.size() == 1);
  CHECK(s.test.size() == 2);
  for (std::size_t t : {7u, 13u, 99u, 1001u}) {
    const Splits p = split(ramp(t, 1), SplitSpec::parse("0.6:0.25:0.15"));
    CHECK(p.train.begin == 0);
    CHECK(p.train.end == p.val.begin);
    CHECK(p.val.end == p.test.begin);
    CHECK(p.test.end == t);
  }
  CHECK_THROWS_AS(SplitSpec::parse("70:10"), ConfigError);
  CHECK_THROWS_AS((SplitSpec{0.5, 0.1, 0.1}.validate()), ConfigError);
}

TEST_CASE("normalisation uses the training split only") {
  Dataset ds = generate_synthetic(SyntheticSpec{}).dataset;
  const Splits s = split(ds, SplitSpec{});
  const NormalizationStats stats = fit_normalization(ds, s.train);
  const Dataset z = normalize(ds, stats);
  for (std::size_t c = 0; c < ds.nodes(); ++c) {
    double mean = 0, sq = 0;
    for (std::size_t t = s.train.begin; t < s.train.end; ++t) mean += z.values(t, c);
    mean /= static_cast<double>(s.train.size());
    for (std::size_t t = s.train.begin; t < s.train.end; ++t) sq += std::pow(z.values(t, c) - mean, 2);
    CHECK(std::abs(mean) < 1e-8);
    CHECK(std::abs(std::sqrt(sq / static_cast<double>(s.train.size())) - 1.0) < 1e-8);
  }
  // Changing validation or test rows must not move the statistics.
  Dataset altered = ds;
  for (std::size_t t = s.val.begin; t < ds.length(); ++t) altered.values(t, 0) += 1000.0;
  const NormalizationStats again = fit_normalization(altered, s.train);
  CHECK(again.mean == stats.mean);
  CHECK(again.std == stats.std);

  Tensor pred = Tensor::matrix(2 * ds.nodes(), 5);
  hgmts::Rng rng(1);
  for (double& v : pred.values()) v = rng.uniform(-3, 3);
  Tensor raw = denormalize(pred, stats);
  // Inverse: z-scoring the de-normalised rows returns the prediction.
  for (std::size_t r = 0; r < pred.rows(); ++r)
    for (std::size_t k = 0; k < 5; ++k) {
      const std::size_t c = r % ds.nodes();
      CHECK(std::abs((raw(r, k) - stats.mean[c]) / stats.std[c] - pred(r, k)) < 1e-10);
    }
  const Dataset back = [&] {
    Dataset d = z;
    for (std::size_t t = 0; t < d.length(); ++t)
      for (std::size_t c = 0; c < d.nodes(); ++c) d.values(t, c) = d.values(t, c) * stats.std[c] + stats.mean[c];
    return d;
  }();
  CHECK(max_abs_diff(back.values, ds.values) < 1e-10);
}

TEST_CASE("constant channels are guarded") {
  Dataset ds = ramp(20, 2);
  for (std::size_t t = 0; t < 20; ++t) ds.values(t, 1) = 4.0;
  const NormalizationStats stats = fit_normalization(ds, {0, 14});
  CHECK(stats.std[1] == 1.0);
  CHECK(stats.constant_channels == std::vector<std::size_t>{1});
  const Dataset z = normalize(ds, stats);
  for (std::size_t t = 0; t < 20; ++t) CHECK(z.values(t, 1) == 0.0);
}

TEST_CASE("window counts and alignment") {
  Dataset ds = ramp(30, 2);
  CHECK(WindowSampler(ds, {0, 10}, 3, 2).count() == 6);
  CHECK(WindowSampler(ds, {5, 10}, 3, 2).count() == 1);
  CHECK(WindowSampler(ds, {5, 9}, 3, 2).count() == 0);
  CHECK_THROWS_AS(WindowSampler(ds, {0, 10}, 0, 2), ContractError);

  const WindowSampler w(ds, {12, 30}, 4, 3);
  for (std::size_t i = 0; i < w.count(); ++i) {
    const Window win = w.at(i);
    CHECK(win.start == 12 + i);
    CHECK(win.start + 4 + 3 <= 30);
    for (std::size_t c = 0; c < 2; ++c) {
      // The ramp encodes the row index, so y[0] must be the row after x's last.
      CHECK(win.y(c, 0) - win.x(c, 3) == 10.0);
      CHECK(win.x(c, 0) == ds.values(win.start, c));
    }
  }
  CHECK_THROWS_AS(w.at(w.count()), ContractError);

  Tensor x, y;
  const std::vector<std::size_t> idx{3, 0};
  w.batch(idx, x, y);
  CHECK(x.shape() == Shape{4, 4});
  CHECK(y.shape() == Shape{4, 3});
  CHECK(x(0, 0) == w.at(3).x(0, 0));
  CHECK(y(3, 2) == w.at(0).y(1, 2));
}

TEST_CASE("splits are disjoint and windows stay inside them") {
  Dataset ds = ramp(200, 1);
  const Splits s = split(ds, SplitSpec{});
  for (const Segment& seg : {s.train, s.val, s.test}) {
    const WindowSampler w(ds, seg, 5, 4);
    for (std::size_t i = 0; i < w.count(); ++i) {
      const Window win = w.at(i);
      CHECK(win.start >= seg.begin);
      CHECK(win.start + 9 <= seg.end);
    }
  }
  const std::string manifest = dataset_manifest(ds, s);
  CHECK(manifest.find("train: [0, 140)") != std::string::npos);
  CHECK(manifest.find("test: [160, 200)") != std::string::npos);
}

TEST_CASE("synthetic generator") {
  SyntheticSpec spec;
  const SyntheticData a = generate_synthetic(spec), b = generate_synthetic(spec);
  CHECK(a.dataset.values.shape() == Shape{2000, 8});
  CHECK(max_abs_diff(a.dataset.values, b.dataset.values) == 0.0);
  CHECK(a.dataset.values.all_finite());
  std::size_t edges = 0;
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = 0; j < 8; ++j)
      if (a.coupling(i, j) != 0.0) {
        ++edges;
        CHECK(i >= spec.drivers);
        CHECK(j < spec.drivers);
      }
  CHECK(edges == 8 - spec.drivers);
  spec.seed = 8;
  CHECK(max_abs_diff(generate_synthetic(spec).dataset.values, a.dataset.values) > 0.0);

  // A follower's lagged correlation with its driver should dominate the others.
  const Tensor& x = a.dataset.values;
  auto corr = [&](std::size_t i, std::size_t j) {
    double si = 0, sj = 0, sij = 0, sii = 0, sjj = 0;
    std::size_t n = 0;
    for (std::size_t t = spec.lag; t < x.rows(); ++t, ++n) {
      si += x(t, i);
      sj += x(t - spec.lag, j);
    }
    si /= static_cast<double>(n);
    sj /= static_cast<double>(n);
    for (std::size_t t = spec.lag; t < x.rows(); ++t) {
      const double di = x(t, i) - si, dj = x(t - spec.lag, j) - sj;
      sij += di * dj;
      sii += di * di;
      sjj += dj * dj;
    }
    return sij / std::sqrt(sii * sjj);
  };
  const std::size_t follower = spec.drivers;
  const double own = corr(follower, 0);
  for (std::size_t j = 1; j < spec.drivers; ++j) CHECK(own > std::abs(corr(follower, j)) + 0.2);

  SyntheticSpec bad;
  bad.drivers = 0;
  CHECK_THROWS_AS(generate_synthetic(bad), ConfigError);
  bad = SyntheticSpec{};
  bad.ar = 1.0;
  CHECK_THROWS_AS(generate_synthetic(bad), ConfigError);
}
