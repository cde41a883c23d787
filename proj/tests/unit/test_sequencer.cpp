#include <doctest.h>

#include <algorithm>
#include <set>

#include "helpers.hpp"
#include "matformer/sequencer.hpp"

using namespace matformer;
using namespace testutil;

namespace {

const NodeOrdering kOrderings[] = {NodeOrdering::back_to_front, NodeOrdering::back_to_front_reversed,
                                   NodeOrdering::front_to_back, NodeOrdering::random_topological};

bool is_permutation_of_ids(const std::vector<NodeId>& order, int n) {
  std::vector<NodeId> sorted = order;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < n; ++i) {
    if (i >= static_cast<int>(sorted.size()) || sorted[i] != i) return false;
  }
  return static_cast<int>(sorted.size()) == n;
}

bool respects_edges(const MaterialGraph& g, const std::vector<NodeId>& order) {
  std::vector<int> pos(g.node_count());
  for (size_t i = 0; i < order.size(); ++i) pos[order[i]] = static_cast<int>(i);
  for (const auto& e : g.edges()) {
    if (pos[e.from.node] >= pos[e.to.node]) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("ordering names") {
  for (auto o : kOrderings) CHECK(parse_ordering(to_string(o)) == o);
  CHECK_THROWS_AS(parse_ordering("x"), std::invalid_argument);
  CHECK(is_randomized(NodeOrdering::random_topological));
  CHECK(is_randomized(NodeOrdering::front_to_back));
  CHECK_FALSE(is_randomized(NodeOrdering::back_to_front_reversed));
}

TEST_CASE("every ordering is a permutation; rr reverses r; t respects every edge") {
  const auto graphs = random_graphs(60, 5, 120, 12);
  for (const auto& g : graphs) {
    for (auto o : kOrderings) CHECK(is_permutation_of_ids(order_nodes(g, o, 3), g.node_count()));
    auto r = order_nodes(g, NodeOrdering::back_to_front);
    std::reverse(r.begin(), r.end());
    CHECK(order_nodes(g, NodeOrdering::back_to_front_reversed) == r);
    for (std::uint64_t seed = 0; seed < 10; ++seed) CHECK(respects_edges(g, order_nodes(g, NodeOrdering::random_topological, seed)));
  }
}

TEST_CASE("random topological orders vary with the seed") {
  const auto g = random_graphs(1, 40, 40, 3).front();
  std::set<std::vector<NodeId>> seen;
  for (std::uint64_t seed = 0; seed < 10; ++seed) seen.insert(order_nodes(g, NodeOrdering::random_topological, seed));
  CHECK(seen.size() > 1);
  CHECK(order_nodes(g, NodeOrdering::random_topological, 5) == order_nodes(g, NodeOrdering::random_topological, 5));
}

TEST_CASE("back-to-front starts at the output markers") {
  const auto g = chain3();
  CHECK(order_nodes(g, NodeOrdering::back_to_front) == std::vector<NodeId>{2, 1, 0});
  CHECK(order_nodes(g, NodeOrdering::back_to_front_reversed) == std::vector<NodeId>{0, 1, 2});
  CHECK(order_nodes(g, NodeOrdering::front_to_back) == std::vector<NodeId>{0, 1, 2});
}

TEST_CASE("node sequences carry delimiters, depths and positions") {
  const auto g = chain3();
  const auto s = encode_nodes(g, NodeOrdering::back_to_front_reversed);
  CHECK(s.tokens == std::vector<int>{kAlpha, type_of("uniform_gray").id, type_of("invert").id,
                                     type_of("output_albedo").id, kOmega});
  CHECK(s.positions == std::vector<int>{1, 2, 3, 4, 5});
  CHECK(s.depths.front() == 0);
  CHECK(s.depths.back() == 0);
  CHECK(s.node_count() == 3);
  CHECK(decode_nodes(s).size() == 3);

  SequenceLimits tight;
  tight.max_nodes = 2;
  try {
    encode_nodes(g, NodeOrdering::back_to_front_reversed, 0, tight);
    FAIL("expected overflow");
  } catch (const SequenceError& e) {
    CHECK(e.kind() == SequenceError::Kind::overflow);
  }
}

TEST_CASE("parameter sequences skip defaults and flatten vectors and arrays") {
  MaterialGraph g(lib());
  const auto& color = lib()->schema(type_of("uniform_color"));
  const auto& gmap = lib()->schema(type_of("gradient_map"));
  const NodeId plain = add(g, "uniform_color");
  const NodeId c = add(g, "uniform_color", {{color.param_index("color"), {0.1, 0.2, 0.3}}});
  const NodeId m = add(g, "gradient_map", {{gmap.param_index("colors"), {0, 0, 0, 0.5, 0.5, 0.5, 1, 1, 1}}});
  const auto q = Quantizer::fit(*lib(), std::vector<MaterialGraph>{g});

  const auto p0 = encode_params(g, plain, q);
  CHECK(p0.values == std::vector<int>{kAlpha, kOmega});

  const auto p1 = encode_params(g, c, q);
  CHECK(p1.length() == 5);
  CHECK(p1.vector_elems == std::vector<int>{0, 1, 2, 3, 0});
  CHECK(p1.array_elems == std::vector<int>{0, 1, 1, 1, 0});
  CHECK(p1.ordinals == std::vector<int>{0, 1, 1, 1, 0});

  const auto p2 = encode_params(g, m, q);
  CHECK(p2.length() == 11);
  CHECK(p2.array_elems == std::vector<int>{0, 1, 1, 1, 2, 2, 2, 3, 3, 3, 0});
  CHECK(p2.vector_elems == std::vector<int>{0, 1, 2, 3, 1, 2, 3, 1, 2, 3, 0});

  const auto back = decode_params(gmap, type_of("gradient_map"), p2, q);
  REQUIRE(back.size() == 1);
  CHECK(back[0].values.size() == 9);
}

TEST_CASE("parameter builder never revisits a parameter and keeps vectors whole") {
  const auto& schema = lib()->schema(type_of("gradient_ramp"));  // angle, repeat
  ParamSequenceBuilder b(schema);
  CHECK(b.can_stop());
  CHECK(b.legal_indices() == std::vector<bool>{true, true});
  b.push(3, 1);
  CHECK(b.legal_indices() == std::vector<bool>{false, false});
  CHECK(b.value_legal(7, 1, 32));
  CHECK_FALSE(b.value_legal(8, 1, 32));  // repeat has 8 values

  const auto& color = lib()->schema(type_of("uniform_color"));
  ParamSequenceBuilder v(color);
  v.push(1, 0);
  CHECK_FALSE(v.can_stop());
  CHECK(v.legal_indices() == std::vector<bool>{true});
  v.push(1, 0);
  v.push(1, 0);
  CHECK(v.can_stop());
  CHECK(v.legal_indices() == std::vector<bool>{false});

  const auto& gmap = lib()->schema(type_of("gradient_map"));
  ParamSequenceBuilder a(gmap);
  for (int i = 0; i < 3; ++i) a.push(0, 0);
  CHECK(a.can_stop());
  CHECK(a.legal_indices() == std::vector<bool>{true});  // arrays may grow by whole entries
}

TEST_CASE("slot sequences list inputs before outputs per node") {
  const auto g = chain3();
  const auto nodes = encode_nodes(g, NodeOrdering::back_to_front_reversed);
  const auto s = build_slot_sequence(*lib(), nodes);
  // uniform_gray: out; invert: in, out; output_albedo: in
  CHECK(s.length() == 4);
  CHECK(s.directions == std::vector<SlotDirection>{SlotDirection::output, SlotDirection::input, SlotDirection::output,
                                                   SlotDirection::input});
  CHECK(s.node_indices == std::vector<int>{1, 2, 2, 3});
  CHECK(s.positions == std::vector<int>{1, 2, 3, 4});
  CHECK(s.find(1, SlotDirection::output, 0) == 2);
  CHECK(s.find(1, SlotDirection::output, 1) == -1);

  const auto e = encode_edges(g, nodes.order, s);
  CHECK(e.tokens == std::vector<int>{kAlpha, 0, 1, 2, 3, kOmega});
  CHECK(e.tuples == std::vector<int>{0, 1, 2, 1, 2, 0});
  CHECK(e.edge_count() == 2);
}

TEST_CASE("malformed edge sequences are rejected") {
  const auto g = chain3();
  const auto nodes = encode_nodes(g, NodeOrdering::back_to_front_reversed);
  const auto s = build_slot_sequence(*lib(), nodes);
  auto kind = [&](std::vector<int> tokens) {
    try {
      decode_edges(s, make_edge_sequence(tokens));
    } catch (const SequenceError& e) {
      return e.kind();
    }
    FAIL("expected SequenceError");
    return SequenceError::Kind::bad_token;
  };
  CHECK(kind({0}) == SequenceError::Kind::bad_length);
  CHECK(kind({1, 0}) == SequenceError::Kind::bad_direction);
  CHECK(kind({0, 9}) == SequenceError::Kind::bad_index);
}

TEST_CASE("codec round trip on random graphs under every ordering") {
  const auto graphs = random_graphs(100, 5, 120, 21);
  const auto q = Quantizer::fit(*lib(), graphs);
  for (const auto& g : graphs) {
    for (auto o : kOrderings) {
      const auto t = tokenize(g, o, 7, q);
      const auto back = detokenize(lib(), t, q);
      CHECK(validate(back).empty());
      CHECK(structurally_equal(back, relabel(g, t.nodes.order), half_bin(q)));
    }
  }
}

TEST_CASE("depth tokens are clamped") {
  MaterialGraph g(lib());
  NodeId prev = add(g, "uniform_gray");
  for (int i = 0; i < 40; ++i) {
    const NodeId n = add(g, "invert");
    link(g, prev, n);
    prev = n;
  }
  const auto s = encode_nodes(g, NodeOrdering::back_to_front_reversed);
  for (int d : s.depths) {
    CHECK(d >= 0);
    CHECK(d <= kMaxDepthToken);
  }
}
