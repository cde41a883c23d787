#include <doctest.h>

#include <random>

#include "helpers.hpp"

using namespace matformer;
using namespace testutil;

TEST_CASE("uniform binning example") {
  Quantizer q;
  const QuantKey key{0, 0, 0};
  q.set_bounds(key, 0.0, 1.0);
  CHECK(q.quantize(0.5, key) == 16);
  CHECK(q.dequantize(16, key) == doctest::Approx(0.515625));
  CHECK(q.quantize(0.0, key) == 0);
  CHECK(q.quantize(1.0, key) == 31);
  CHECK(q.quantize(-3.0, key) == 0);
  CHECK(q.quantize(7.0, key) == 31);
}

TEST_CASE("quantize inverts dequantize and the error stays within half a bin") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-5, 5);
  Quantizer q;
  for (int trial = 0; trial < 50; ++trial) {
    double lo = u(rng), hi = u(rng);
    if (lo > hi) std::swap(lo, hi);
    const QuantKey key{trial, 0, 0};
    q.set_bounds(key, lo, hi);
    for (int l = 0; l < q.levels(); ++l) CHECK(q.quantize(q.dequantize(l, key), key) == l);
    std::uniform_real_distribution<double> in(lo, hi);
    for (int i = 0; i < 100; ++i) {
      const double v = in(rng);
      CHECK(std::abs(q.dequantize(q.quantize(v, key), key) - v) <= 0.5 * q.bin_width(key) + 1e-12);
    }
  }
}

TEST_CASE("unknown keys and bad bounds are rejected") {
  Quantizer q;
  CHECK_THROWS_AS(q.quantize(0.1, QuantKey{3, 1, 0}), std::out_of_range);
  CHECK_THROWS_AS(q.set_bounds(QuantKey{0, 0, 0}, 1.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(Quantizer(1), std::invalid_argument);
}

TEST_CASE("degenerate bounds are widened and still round trip") {
  Quantizer q;
  const QuantKey key{1, 0, 0};
  q.set_bounds(key, 0.25, 0.25);
  CHECK(q.bounds(key).widened);
  CHECK(q.dequantize(q.quantize(0.25, key), key) == doctest::Approx(0.25));
}

TEST_CASE("fit narrows to observed explicit values and covers every continuous component") {
  const auto graphs = random_graphs(30, 10, 60, 6);
  const auto q = Quantizer::fit(*lib(), graphs);
  for (const auto& g : graphs) {
    for (const auto& n : g.nodes()) {
      const auto& schema = g.schema(n.id);
      for (const auto& p : n.params) {
        const auto& ps = schema.params[p.param_index];
        if (ps.is_discrete) continue;
        for (size_t c = 0; c < p.values.size(); ++c) {
          const auto& b = q.bounds(QuantKey{n.type.id, p.param_index, static_cast<int>(c % ps.vector_dim)});
          CHECK(p.values[c] >= b.min);
          CHECK(p.values[c] <= b.max);
        }
      }
    }
  }
  for (const auto& schema : lib()->schemas()) {
    for (size_t k = 0; k < schema.params.size(); ++k) {
      if (schema.params[k].is_discrete) continue;
      for (int c = 0; c < schema.params[k].vector_dim; ++c) {
        CHECK(q.contains(QuantKey{schema.type.id, static_cast<int>(k), c}));
      }
    }
  }
}

TEST_CASE("json round trip preserves bounds and hash") {
  const auto q = Quantizer::fit(*lib(), random_graphs(10, 10, 30, 2));
  const auto r = Quantizer::from_json(q.to_json());
  CHECK(r.hash() == q.hash());
  CHECK(r.levels() == q.levels());
  CHECK(r.all().size() == q.all().size());
  for (const auto& [k, b] : q.all()) {
    CHECK(r.bounds(k).min == b.min);
    CHECK(r.bounds(k).max == b.max);
  }
}
