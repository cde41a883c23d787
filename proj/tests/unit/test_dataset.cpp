#include <doctest.h>

#include <algorithm>
#include <set>

#include "helpers.hpp"

using namespace matformer;
using namespace testutil;

TEST_CASE("synthesized graphs have the requested size and are reproducible") {
  for (int n : {3, 4, 17, 60, 120}) {
    const auto g = synthesize_graph(lib(), n, 8);
    CHECK(g.node_count() == n);
    CHECK(validate(g).empty());
    CHECK(structurally_equal(g, synthesize_graph(lib(), n, 8)));
  }
  CHECK_THROWS_AS(synthesize_graph(lib(), 2, 1), std::invalid_argument);
  const auto gs = random_graphs(40, 10, 20, 3);
  for (const auto& g : gs) {
    CHECK(g.node_count() >= 10);
    CHECK(g.node_count() <= 20);
  }
}

TEST_CASE("perturbed values stay within twenty percent and the schema bounds") {
  std::mt19937_64 rng(1);
  const double lo = -1.5, hi = 2.0;
  std::uniform_real_distribution<double> u(lo, hi);
  for (int i = 0; i < 10000; ++i) {
    const double v = u(rng);
    const double p = perturb_value(v, lo, hi, rng);
    const double a = std::min(0.8 * v, 1.2 * v), b = std::max(0.8 * v, 1.2 * v);
    CHECK(p >= std::max(a, lo) - 1e-12);
    CHECK(p <= std::min(b, hi) + 1e-12);
  }
}

TEST_CASE("augmentation keeps structure and discrete values") {
  const auto g = random_graphs(1, 40, 40, 12).front();
  const auto copies = augment(g, 5, 3);
  REQUIRE(copies.size() == 5);
  bool changed = false;
  for (const auto& c : copies) {
    CHECK(validate(c).empty());
    CHECK(c.edges() == g.edges());
    for (NodeId id = 0; id < g.node_count(); ++id) {
      CHECK(g.node(id).type == c.node(id).type);
      const auto& schema = g.schema(id);
      const auto before = g.full_params(id);
      const auto after = c.full_params(id);
      for (size_t k = 0; k < schema.params.size(); ++k) {
        const auto& ps = schema.params[k];
        REQUIRE(before[k].size() == after[k].size());
        for (size_t e = 0; e < before[k].size(); ++e) {
          const double v = before[k][e], w = after[k][e];
          if (ps.is_discrete) {
            CHECK(v == w);
          } else {
            CHECK(w >= std::max(std::min(0.8 * v, 1.2 * v), ps.min_value) - 1e-12);
            CHECK(w <= std::min(std::max(0.8 * v, 1.2 * v), ps.max_value) + 1e-12);
            changed = changed || v != w;
          }
        }
      }
    }
  }
  CHECK(changed);
  CHECK(structurally_equal(augment(g, 5, 3)[2], copies[2]));
}

TEST_CASE("the filter counts every reason") {
  const auto g = random_graphs(1, 30, 30, 2).front();
  FilterThresholds t;
  FilterReport r;
  CHECK(passes_filter(g, t, &r));
  t.max_nodes = 10;
  t.max_edges = 5;
  CHECK_FALSE(passes_filter(g, t, &r));
  CHECK(r.too_many_nodes == 1);
  CHECK(r.too_many_edges == 1);
  const auto kept = filter_corpus({g, chain3()}, t, &r);
  CHECK(kept.size() == 1);
}

TEST_CASE("validation splits hold out whole base graphs") {
  const auto bases = random_graphs(8, 5, 15, 6);
  const auto c = split_corpus(bases, 3, 2, 4);
  CHECK(c.train.size() == 6 * 3);
  CHECK(c.validation.size() == 2 * 3);
  const std::set<int> train(c.train_base.begin(), c.train_base.end());
  const std::set<int> val(c.validation_base.begin(), c.validation_base.end());
  CHECK(train.size() == 6);
  CHECK(val.size() == 2);
  for (int v : val) CHECK(train.count(v) == 0);
  CHECK_THROWS_AS(split_corpus(bases, 3, 8, 4), std::invalid_argument);
}
