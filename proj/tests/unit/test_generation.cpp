#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "helpers.hpp"
#include "matformer/generation.hpp"

using namespace matformer;
using namespace testutil;

namespace {

std::vector<double> brute_softmax(const std::vector<float>& logits, const std::vector<bool>& legal, double temp) {
  std::vector<double> p(logits.size(), 0.0);
  double z = 0;
  for (size_t i = 0; i < logits.size(); ++i) {
    if (legal[i]) z += std::exp(logits[i] / temp);
  }
  for (size_t i = 0; i < logits.size(); ++i) {
    if (legal[i]) p[i] = std::exp(logits[i] / temp) / z;
  }
  return p;
}

}  // namespace

TEST_CASE("masked distributions zero illegal entries and renormalize") {
  std::mt19937_64 rng(3);
  std::normal_distribution<float> n(0, 2);
  std::bernoulli_distribution coin(0.6);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<float> logits(9);
    std::vector<bool> legal(9);
    for (int i = 0; i < 9; ++i) {
      logits[i] = n(rng);
      legal[i] = coin(rng);
    }
    legal[trial % 9] = true;
    const double temp = 0.25 + (trial % 5) * 0.5;
    const auto p = masked_distribution(logits, legal, temp);
    const auto q = brute_softmax(logits, legal, temp);
    double sum = 0;
    for (int i = 0; i < 9; ++i) {
      if (!legal[i]) CHECK(p[i] == 0.0);
      CHECK(p[i] == doctest::Approx(q[i]).epsilon(1e-9));
      sum += p[i];
    }
    CHECK(sum == doctest::Approx(1.0));
    const int best = masked_argmax(logits, legal);
    CHECK(legal[best]);
    for (int i = 0; i < 9; ++i) {
      if (legal[i]) CHECK(logits[i] <= logits[best]);
    }
  }
  const std::vector<float> l{1, 2};
  CHECK_THROWS_AS(masked_distribution(l, {false, false}, 1.0), std::logic_error);
  CHECK_THROWS_AS(masked_argmax(l, {false, false}), std::logic_error);
  CHECK(masked_argmax(std::vector<float>{3, 3, 1}, {true, true, true}) == 0);
}

TEST_CASE("sample_index follows the distribution") {
  const std::vector<double> p{0.1, 0.0, 0.6, 0.3};
  std::mt19937_64 rng(9);
  std::vector<int> hits(4);
  const int draws = 20000;
  for (int i = 0; i < draws; ++i) ++hits[sample_index(p, rng)];
  CHECK(hits[1] == 0);
  for (int i = 0; i < 4; ++i) CHECK(std::abs(hits[i] / double(draws) - p[i]) < 0.02);
}

TEST_CASE("graphs sampled from untrained and sharpened models are always valid") {
  for (double scale : {0.02, 0.5}) {
    const auto bundle = random_bundle(7, scale);
    std::mt19937_64 rng(11);
    auto cfg = SamplerConfig::uniform(1.0);
    cfg.limits = {60, 200, 120, 200};
    for (int i = 0; i < 60; ++i) {
      const auto out = generate_graph(*bundle, cfg, rng);
      CHECK(validate(out.graph).empty());
      CHECK(out.graph.node_count() <= 60);
      CHECK(static_cast<int>(out.graph.edges().size()) <= 120);
      CHECK(out.graph.node_count() == out.nodes.node_count());
    }
  }
}

TEST_CASE("greedy decoding is deterministic") {
  const auto bundle = random_bundle(8, 0.3);
  auto cfg = SamplerConfig::uniform(0.0, true);
  cfg.limits = {40, 120, 80, 150};
  std::mt19937_64 a(1), b(2);
  const auto ga = generate_graph(*bundle, cfg, a);
  const auto gb = generate_graph(*bundle, cfg, b);
  CHECK(structurally_equal(ga.graph, gb.graph));
}

TEST_CASE("completion keeps the pinned subgraph unchanged") {
  const auto bundle = random_bundle(9, 0.4);
  auto cfg = SamplerConfig::uniform(1.0, false, 4);
  cfg.limits = {80, 300, 160, 300};
  const auto graphs = random_graphs(10, 8, 30, 17);
  std::mt19937_64 pick(5);
  for (const auto& g : graphs) {
    std::vector<NodeId> pinned;
    for (NodeId id = 0; id < g.node_count(); ++id) {
      if (pick() % 2) pinned.push_back(id);
    }
    std::shuffle(pinned.begin(), pinned.end(), pick);
    const auto outs = autocomplete(*bundle, g, pinned, 3, cfg);
    REQUIRE(outs.size() == 3);
    std::vector<NodeId> sorted = pinned;
    std::sort(sorted.begin(), sorted.end());
    const auto expected = induced_subgraph(g, sorted);
    for (const auto& out : outs) {
      CHECK(validate(out.graph).empty());
      std::vector<NodeId> head(sorted.size());
      for (size_t i = 0; i < head.size(); ++i) head[i] = static_cast<NodeId>(i);
      CHECK(structurally_equal(induced_subgraph(out.graph, head), expected));
      for (NodeId id = 0; id < out.graph.node_count(); ++id) {
        CHECK(out.pinned[id] == (id < static_cast<NodeId>(sorted.size())));
      }
    }
    const auto again = autocomplete(*bundle, g, pinned, 3, cfg);
    for (int i = 0; i < 3; ++i) CHECK(structurally_equal(again[i].graph, outs[i].graph));
  }
}

TEST_CASE("completion rejects bad requests") {
  const auto bundle = random_bundle(10);
  const auto g = chain3();
  const auto cfg = SamplerConfig::uniform(1.0);
  const std::vector<NodeId> missing{0, 5};
  CHECK_THROWS_AS(autocomplete(*bundle, g, missing, 1, cfg), std::invalid_argument);
  const std::vector<NodeId> ok{0};
  CHECK_THROWS_AS(autocomplete(*bundle, g, ok, -1, cfg), std::invalid_argument);
  CHECK(autocomplete(*bundle, g, ok, 0, cfg).empty());
  auto tight = cfg;
  tight.limits.max_nodes = 1;
  const std::vector<NodeId> all{0, 1, 2};
  CHECK_THROWS_AS(autocomplete(*bundle, g, all, 1, tight), SequenceError);
}

TEST_CASE("prefix depth bounds contain the depth of every full graph") {
  for (const auto& g : random_graphs(40, 5, 40, 17)) {
    for (DepthMode mode : {DepthMode::to_output, DepthMode::to_generator}) {
      const auto full = node_depths(g, mode);
      for (int k = 0; k <= g.node_count(); k += std::max(1, g.node_count() / 6)) {
        std::vector<NodeId> ids(k);
        std::iota(ids.begin(), ids.end(), 0);
        const auto bounds = prefix_depth_bounds(induced_subgraph(g, ids), mode);
        REQUIRE(bounds.size() == static_cast<size_t>(k));
        for (int j = 0; j < k; ++j) {
          const int d = std::min(full[j], kMaxDepthToken);
          CHECK(bounds[j].lo <= d);
          CHECK(d <= bounds[j].hi);
          const auto& s = g.schema(j);
          if (mode == DepthMode::to_output ? s.is_output_marker : s.is_generator) CHECK(bounds[j].hi == 0);
        }
      }
    }
  }
}
