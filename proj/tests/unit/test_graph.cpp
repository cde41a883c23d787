#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "helpers.hpp"

using namespace matformer;
using namespace testutil;

namespace {

GraphError::Kind error_kind(const std::function<void()>& f) {
  try {
    f();
  } catch (const GraphError& e) {
    return e.kind();
  }
  FAIL("expected a GraphError");
  return GraphError::Kind::dangling;
}

/// Brute force: u reaches v by walking every path.
bool walk(const MaterialGraph& g, NodeId u, NodeId v) {
  if (u == v) return true;
  for (const auto& e : g.edges()) {
    if (e.from.node == u && walk(g, e.to.node, v)) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("chain graph basics") {
  const auto g = chain3();
  CHECK(g.node_count() == 3);
  CHECK(g.edges().size() == 2);
  CHECK(validate(g).empty());
  CHECK(g.reaches(0, 2));
  CHECK_FALSE(g.reaches(2, 0));
  CHECK(topological_order(g) == std::vector<NodeId>{0, 1, 2});
  CHECK(node_depths(g, DepthMode::to_output) == std::vector<int>{2, 1, 0});
  CHECK(node_depths(g, DepthMode::to_generator) == std::vector<int>{0, 1, 2});
}

TEST_CASE("mutations that would break validity throw the matching error") {
  auto g = chain3();
  CHECK(error_kind([&] { link(g, 0, 1); }) == GraphError::Kind::occupied_slot);
  CHECK(error_kind([&] { g.add_edge(out_slot(0), out_slot(1)); }) == GraphError::Kind::direction);
  CHECK(error_kind([&] { g.add_edge(in_slot(0), in_slot(1)); }) == GraphError::Kind::direction);
  CHECK(error_kind([&] { link(g, 0, 7); }) == GraphError::Kind::dangling);
  CHECK(error_kind([&] { link(g, 0, 1, 3); }) == GraphError::Kind::dangling);
  CHECK(error_kind([&] { g.add_node(OperatorType{999}); }) == GraphError::Kind::unknown_type);

  MaterialGraph c(lib());
  const NodeId a = add(c, "blend");
  const NodeId b = add(c, "invert");
  link(c, a, b);
  CHECK(error_kind([&] { link(c, b, a); }) == GraphError::Kind::cycle);
  CHECK(error_kind([&] { link(c, a, a, 1); }) == GraphError::Kind::cycle);
  CHECK(validate(c).empty());
}

TEST_CASE("parameters are checked and stored sparsely") {
  MaterialGraph g(lib());
  const auto& blur = lib()->schema(type_of("blur"));
  const int k = blur.param_index("intensity");
  CHECK(error_kind([&] { add(g, "blur", {{k, {2.0}}}); }) == GraphError::Kind::bad_param);
  CHECK(error_kind([&] { add(g, "blur", {{k, {0.1, 0.2}}}); }) == GraphError::Kind::bad_param);
  CHECK(error_kind([&] { add(g, "blur", {{5, {0.1}}}); }) == GraphError::Kind::bad_param);
  CHECK(error_kind([&] { add(g, "checker", {{0, {2.5}}}); }) == GraphError::Kind::bad_param);

  const NodeId d = add(g, "blur", {{k, {0.2}}});  // the default
  CHECK(g.node(d).params.empty());
  const NodeId n = add(g, "blur", {{k, {0.7}}});
  REQUIRE(g.node(n).params.size() == 1);
  CHECK(g.full_params(n)[k] == std::vector<double>{0.7});
  CHECK(g.full_params(d)[k] == std::vector<double>{0.2});
}

TEST_CASE("unreachable nodes take the sentinel depth") {
  MaterialGraph g(lib());
  add(g, "uniform_gray");
  const NodeId b = add(g, "invert");
  const NodeId c = add(g, "output_albedo");
  link(g, b, c);
  const auto d = node_depths(g, DepthMode::to_output);
  CHECK(d[2] == 0);
  CHECK(d[1] == 1);
  CHECK(d[0] == 2);  // max observed + 1
}

TEST_CASE("synthetic corpus graphs are valid and topological order respects every edge") {
  for (const auto& g : random_graphs(30, 5, 120, 3)) {
    CHECK(validate(g).empty());
    const auto order = topological_order(g);
    std::vector<int> pos(g.node_count());
    for (size_t i = 0; i < order.size(); ++i) pos[order[i]] = static_cast<int>(i);
    for (const auto& e : g.edges()) CHECK(pos[e.from.node] < pos[e.to.node]);
  }
}

TEST_CASE("reaches agrees with brute-force path enumeration") {
  for (const auto& g : random_graphs(5, 5, 14, 8)) {
    for (NodeId u = 0; u < g.node_count(); ++u) {
      for (NodeId v = 0; v < g.node_count(); ++v) CHECK(g.reaches(u, v) == walk(g, u, v));
    }
  }
}

TEST_CASE("relabel and induced subgraph") {
  const auto g = random_graphs(1, 20, 20, 5).front();
  std::vector<NodeId> perm(g.node_count());
  std::iota(perm.begin(), perm.end(), 0);
  std::reverse(perm.begin(), perm.end());
  const auto r = relabel(g, perm);
  CHECK(validate(r).empty());
  CHECK_FALSE(structurally_equal(r, g));
  std::vector<NodeId> back(perm.size());
  for (size_t i = 0; i < perm.size(); ++i) back[perm[i]] = static_cast<NodeId>(i);
  CHECK(structurally_equal(relabel(r, back), g));

  const std::vector<NodeId> kept{0, 3, 4, 9, 15};
  const auto sub = induced_subgraph(g, kept);
  CHECK(sub.node_count() == 5);
  int internal = 0;
  for (const auto& e : g.edges()) {
    const bool a = std::count(kept.begin(), kept.end(), e.from.node) > 0;
    const bool b = std::count(kept.begin(), kept.end(), e.to.node) > 0;
    internal += a && b;
  }
  CHECK(static_cast<int>(sub.edges().size()) == internal);
  for (size_t i = 0; i < kept.size(); ++i) CHECK(sub.node(static_cast<NodeId>(i)).type == g.node(kept[i]).type);
}

TEST_CASE("structural equality tolerance") {
  MaterialGraph a(lib()), b(lib());
  const int k = lib()->schema(type_of("blur")).param_index("intensity");
  add(a, "blur", {{k, {0.50}}});
  add(b, "blur", {{k, {0.52}}});
  CHECK_FALSE(structurally_equal(a, b));
  CHECK(structurally_equal(a, b, 0.03));
  CHECK_FALSE(structurally_equal(a, b, 0.01));
}
