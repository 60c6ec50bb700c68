#include <doctest.h>

#include <cmath>

#include "hgmts/error.hpp"
#include "hgmts/model.hpp"
#include "support.hpp"

using namespace hgmts;
using hgmts::testing::random_tensor;

namespace {

ModelConfig tiny(Variant v = Variant::full, std::size_t stacks = 1, std::size_t blocks = 1) {
  ModelConfig cfg;
  cfg.nodes = 3;
  cfg.input_length = 8;
  cfg.horizon = 4;
  cfg.hidden = 4;
  cfg.kernel = 3;
  cfg.rounds = 3;
  cfg.stacks = stacks;
  cfg.blocks_per_stack = blocks;
  cfg.variant = v;
  cfg.seed = 5;
  return cfg;
}

void zero_forecast_heads(Model& model) {
  for (Parameter& p : model.parameters().all())
    if (p.name.find(".psi.fc2.") != std::string::npos) p.tensor = Tensor(p.tensor.shape(), 0.0);
}

Tensor forecast_of(const Model& model, const Tensor& x, ForwardOptions opts = {}) {
  Tape tape;
  return model.forward(tape, tape.constant(x), opts).forecast.value();
}

}  // namespace

TEST_CASE("variant names") {
  CHECK(parse_variant("HGMTS4") == Variant::no_graph);
  CHECK(parse_variant("3") == Variant::shared_block_graph);
  CHECK(variant_name(Variant::single_gru) == "HGMTS6");
  CHECK_THROWS_AS(parse_variant("HGMTS7"), ConfigError);
  CHECK_THROWS_AS(parse_variant("full"), ConfigError);
}

TEST_CASE("config validation") {
  ModelConfig cfg = tiny();
  cfg.kernel = 4;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = tiny();
  cfg.hidden = 0;
  CHECK_THROWS_AS(Model{cfg}, ConfigError);
  cfg = tiny();
  cfg.gamma = 0.5;
  CHECK(cfg.selected_count() == 2);
  CHECK(cfg.canonical_text().find("gamma=0.5") != std::string::npos);
}

TEST_CASE("output shapes at full scale") {
  ModelConfig cfg;
  cfg.nodes = 7;
  cfg.input_length = 96;
  cfg.horizon = 192;
  cfg.stacks = 1;
  Model model(cfg);
  Rng rng(1);
  Tape tape;
  ModelOutput out = model.forward(tape, tape.constant(random_tensor({7, 96}, rng)));
  CHECK(out.forecast.shape() == Shape{7, 192});
  const BlockOutput& b = out.stacks[0].blocks[0];
  CHECK(b.backcast.shape() == Shape{7, 96});
  CHECK(b.pathways.size() == 2);
  CHECK_THROWS_AS(model.forward(tape, tape.constant(Tensor::matrix(7, 95))), DimensionError);
  CHECK_THROWS_AS(model.forward(tape, tape.constant(Tensor::matrix(6, 96))), DimensionError);
}

TEST_CASE("zeroed forecast heads give a zero forecast") {
  for (int v = 1; v <= 6; ++v) {
    Model model(tiny(static_cast<Variant>(v), 2, 2));
    zero_forecast_heads(model);
    Rng rng(2);
    const Tensor f = forecast_of(model, random_tensor({6, 8}, rng));
    for (double x : f.values()) CHECK(x == 0.0);
  }
}

TEST_CASE("residual telescoping") {
  Rng rng(3);
  for (std::size_t stacks = 1; stacks <= 3; ++stacks) {
    for (int v : {1, 3, 5}) {
      Model model(tiny(static_cast<Variant>(v), stacks, 2));
      const Tensor x = random_tensor({9, 8}, rng, 2.0);
      Tape tape;
      ModelOutput out = model.forward(tape, tape.constant(x));
      Tensor total = out.residual.value();
      for (const auto& s : out.stacks)
        for (const auto& b : s.blocks)
          for (std::size_t i = 0; i < total.size(); ++i) total[i] += b.backcast.value()[i];
      CHECK(max_abs_diff(total, x) <= 1e-10);
    }
  }
}

TEST_CASE("block chaining and forecast sums") {
  Model model(tiny(Variant::full, 2, 2));
  Rng rng(4);
  const Tensor x = random_tensor({3, 8}, rng);
  Tape tape;
  ModelOutput out = model.forward(tape, tape.constant(x));
  const auto& s0 = out.stacks[0];
  Tensor expect_in = x;
  for (std::size_t i = 0; i < x.size(); ++i) expect_in[i] -= s0.blocks[0].backcast.value()[i];
  CHECK(max_abs_diff(s0.blocks[1].input.value(), expect_in) == 0.0);

  Tensor sum = Tensor::matrix(3, 4);
  for (const auto& s : out.stacks)
    for (const auto& b : s.blocks) {
      Tensor path_sum = Tensor::matrix(3, 4);
      for (const auto& p : b.pathways)
        for (std::size_t i = 0; i < sum.size(); ++i) path_sum[i] += p.forecast.value()[i];
      CHECK(max_abs_diff(path_sum, b.forecast.value()) == 0.0);
      for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += b.forecast.value()[i];
    }
  CHECK(max_abs_diff(sum, out.forecast.value()) < 1e-14);
}

TEST_CASE("three stacks by sequential composition") {
  const ModelConfig cfg = tiny(Variant::full, 3, 1);
  Model model(cfg);
  Rng rng(5);
  const Tensor x = random_tensor({3, 8}, rng);
  ForwardOptions opts;
  opts.sampling_seed = 9;
  const Tensor full = forecast_of(model, x, opts);

  Tape tape;
  Model::ForwardState state(opts, 1);
  Var residual = tape.constant(x);
  Tensor total = Tensor::matrix(3, 4);
  for (std::size_t s = 0; s < 3; ++s) {
    BlockOutput b = model.forward_block(tape, s, 0, residual, state);
    Tensor next = residual.value();
    for (std::size_t i = 0; i < next.size(); ++i) next[i] -= b.backcast.value()[i];
    residual = tape.constant(next);
    for (std::size_t i = 0; i < total.size(); ++i) total[i] += b.forecast.value()[i];
  }
  CHECK(max_abs_diff(total, full) < 1e-13);

  Model single(tiny(Variant::full, 1, 2));
  Tape t2;
  Model::ForwardState st(opts, 1);
  StackOutput so = single.forward_stack(t2, 0, t2.constant(x), st);
  CHECK(max_abs_diff(so.forecast.value(), forecast_of(single, x, opts)) == 0.0);
}

TEST_CASE("single pathway variant is its pathway's heads") {
  Model model(tiny(Variant::single_pathway));
  CHECK(model.block(0, 0).pathways().size() == 1);
  CHECK(model.block(0, 0).pathways()[0].name() == "raw");
  CHECK(model.parameters().find("stack0.block0.seas.phi.fc1.W") == nullptr);
  Rng rng(6);
  Tape tape;
  ModelOutput out = model.forward(tape, tape.constant(random_tensor({3, 8}, rng)));
  const auto& p = out.stacks[0].blocks[0].pathways[0];
  CHECK(max_abs_diff(p.forecast.value(), out.forecast.value()) == 0.0);
  CHECK(max_abs_diff(p.input.value(), out.stacks[0].blocks[0].input.value()) == 0.0);
}

TEST_CASE("no-graph variant has no cross-node path") {
  Model model(tiny(Variant::no_graph, 2, 2));
  CHECK(model.parameters().find("stack0.block0.seas.gnn.lgsl.Wq") == nullptr);
  CHECK(model.parameters().find("stack0.block0.seas.gnn.g.fc1.W") == nullptr);
  CHECK(model.graph_computations_per_window() == 0);
  Rng rng(7);
  Tensor x = random_tensor({3, 8}, rng);
  for (std::size_t t = 0; t < 8; ++t) x(2, t) = x(0, t);
  const Tensor f = forecast_of(model, x);
  for (std::size_t k = 0; k < 4; ++k) CHECK(f(0, k) == f(2, k));

  Tensor moved = x;
  for (std::size_t t = 0; t < 8; ++t) moved(1, t) += rng.uniform(-1, 1);
  const Tensor g = forecast_of(model, moved);
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(g(0, k) == f(0, k));
    CHECK(g(2, k) == f(2, k));
  }
}

TEST_CASE("full model forecast of node i reacts to its neighbour j") {
  ModelConfig cfg = tiny();
  cfg.gamma = 1.0;
  Model model(cfg);
  Rng rng(8);
  Tensor x = random_tensor({3, 8}, rng);
  StructureCache cache;
  ForwardOptions opts;
  opts.cache = &cache;
  const Tensor f = forecast_of(model, x, opts);
  cache.replay = true;
  for (std::size_t t = 0; t < 8; ++t) x(1, t) += 0.5;
  const Tensor g = forecast_of(model, x, opts);
  double change = 0;
  for (std::size_t k = 0; k < 4; ++k) change += std::abs(g(0, k) - f(0, k));
  CHECK(change > 1e-8);
}

TEST_CASE("single GRU variant equals the full model when the GRUs agree") {
  Model full(tiny(Variant::full, 2, 1));
  Model single(tiny(Variant::single_gru, 2, 1));
  CHECK(single.parameters().scalar_count() < full.parameters().scalar_count());
  for (Parameter& p : full.parameters().all()) {
    const auto pos = p.name.find(".gru2.");
    if (pos == std::string::npos) continue;
    std::string src = p.name;
    src.replace(pos, 6, ".gru1.");
    p.tensor = full.parameters().at(src).tensor;
  }
  CHECK(single.parameters().copy_matching(full.parameters()) == single.parameters().size());
  Rng rng(9);
  const Tensor x = random_tensor({6, 8}, rng);
  ForwardOptions opts;
  opts.sampling_seed = 4;
  CHECK(max_abs_diff(forecast_of(full, x, opts), forecast_of(single, x, opts)) == 0.0);
}

TEST_CASE("shared-graph variants infer fewer graphs") {
  const std::size_t full = Model(tiny(Variant::full, 3, 2)).graph_computations_per_window();
  CHECK(full == 12);
  CHECK(Model(tiny(Variant::shared_pathway_graph, 3, 2)).graph_computations_per_window() == 6);
  CHECK(Model(tiny(Variant::shared_block_graph, 3, 2)).graph_computations_per_window() == 2);

  Rng rng(10);
  const Tensor x = random_tensor({6, 8}, rng);
  for (int v : {1, 2, 3}) {
    Model m(tiny(static_cast<Variant>(v), 3, 2));
    Tape tape;
    ModelOutput out = m.forward(tape, tape.constant(x));
    CHECK(out.graph_computations == m.graph_computations_per_window());
    CHECK(out.graphs.size() == out.graph_computations);
  }

  ModelConfig rc = tiny(Variant::full, 1, 1);
  rc.recompute_graph_each_round = true;
  Model recompute(rc);
  CHECK(recompute.graph_computations_per_window() == 6);
  Tape tape;
  CHECK(recompute.forward(tape, tape.constant(x)).graph_computations == 6);
}

TEST_CASE("shared pathway graph is the seasonal pathway's graph") {
  Model model(tiny(Variant::shared_pathway_graph));
  CHECK(model.parameters().find("stack0.block0.seas.gnn.lgsl.Wq") != nullptr);
  CHECK(model.parameters().find("stack0.block0.trend.gnn.lgsl.Wq") == nullptr);
  Model blocks(tiny(Variant::shared_block_graph, 2, 2));
  CHECK(blocks.parameters().find("stack0.block0.trend.gnn.lgsl.Wk") != nullptr);
  CHECK(blocks.parameters().find("stack0.block1.trend.gnn.lgsl.Wk") == nullptr);
  CHECK(blocks.parameters().find("stack1.block0.seas.gnn.lgsl.Wk") == nullptr);
}

TEST_CASE("identical seeds give identical models and outputs") {
  Model a(tiny(Variant::full, 2, 2)), b(tiny(Variant::full, 2, 2));
  for (std::size_t i = 0; i < a.parameters().size(); ++i)
    CHECK(max_abs_diff(a.parameters().all()[i].tensor, b.parameters().all()[i].tensor) == 0.0);
  Rng rng(11);
  const Tensor x = random_tensor({12, 8}, rng);
  ForwardOptions opts;
  opts.sampling_seed = 31;
  const Tensor fa = forecast_of(a, x, opts), fb = forecast_of(b, x, opts);
  CHECK(std::equal(fa.values().begin(), fa.values().end(), fb.values().begin()));
}

TEST_CASE("replayed structures reproduce the forward pass") {
  Model model(tiny(Variant::full, 2, 1));
  Rng rng(12);
  const Tensor x = random_tensor({6, 8}, rng);
  StructureCache cache;
  ForwardOptions opts;
  opts.cache = &cache;
  opts.sampling_seed = 3;
  const Tensor first = forecast_of(model, x, opts);
  cache.replay = true;
  opts.sampling_seed = 1234;
  CHECK(max_abs_diff(forecast_of(model, x, opts), first) == 0.0);
}

TEST_CASE("end-to-end gradients on the tiny config") {
  Model model(tiny(Variant::full, 1, 1));
  Rng rng(13);
  Tensor x = random_tensor({3, 8}, rng);
  StructureCache cache;
  {
    ForwardOptions opts;
    opts.cache = &cache;
    forecast_of(model, x, opts);
  }
  cache.replay = true;
  auto tensors = testing::all_parameters(model.parameters());
  tensors.push_back({"x", &x});
  const auto r = testing::check_gradients(tensors, [&](Tape& tape) {
    ForwardOptions opts;
    opts.cache = &cache;
    return model.forward(tape, tape.leaf(x), opts).forecast;
  }, 77);
  CHECK_MESSAGE(r.max_rel_error < 1e-4, r.worst);
}

TEST_CASE("stack_windows stacks rows") {
  Rng rng(14);
  const Tensor a = random_tensor({3, 4}, rng), b = random_tensor({3, 4}, rng);
  const Tensor s = stack_windows({a, b});
  CHECK(s.shape() == Shape{6, 4});
  CHECK(s(4, 2) == b(1, 2));
  CHECK_THROWS_AS(stack_windows({a, Tensor::matrix(2, 4)}), DimensionError);
}
