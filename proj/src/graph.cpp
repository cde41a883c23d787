#include "matformer/graph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <queue>
#include <sstream>

#include "matformer/hash.hpp"

namespace matformer {

int OperatorSchema::param_index(std::string_view param_name) const {
  for (size_t i = 0; i < params.size(); ++i) {
    if (params[i].name == param_name) return static_cast<int>(i);
  }
  return -1;
}

OperatorLibrary::OperatorLibrary(std::string version, std::vector<OperatorSchema> schemas)
    : version_(std::move(version)), schemas_(std::move(schemas)) {
  std::ostringstream digest;
  digest << version_ << '\n';
  for (size_t i = 0; i < schemas_.size(); ++i) {
    auto& s = schemas_[i];
    s.type = OperatorType{static_cast<int>(i)};
    if (s.is_generator != (s.num_input_slots == 0)) {
      throw std::invalid_argument("operator " + s.name + ": generator flag disagrees with input slot count");
    }
    if (!s.is_output_marker && s.num_output_slots < 1) {
      throw std::invalid_argument("operator " + s.name + ": needs at least one output slot");
    }
    if (!std::is_sorted(s.params.begin(), s.params.end(),
                        [](const ParamSchema& a, const ParamSchema& b) { return a.name < b.name; })) {
      throw std::invalid_argument("operator " + s.name + ": parameters must be sorted by name");
    }
    digest << s.name << ' ' << s.num_input_slots << ' ' << s.num_output_slots << ' ' << s.is_output_marker;
    for (const auto& p : s.params) {
      if (p.kind == ParamKind::scalar && p.vector_dim != 1) {
        throw std::invalid_argument("operator " + s.name + ": scalar parameter " + p.name + " with vector_dim != 1");
      }
      const auto n = p.default_value.size();
      const bool shape_ok = p.kind == ParamKind::array ? (n > 0 && n % p.vector_dim == 0)
                                                       : n == static_cast<size_t>(p.vector_dim);
      if (!shape_ok) throw std::invalid_argument("operator " + s.name + ": bad default shape for " + p.name);
      for (double v : p.default_value) {
        if (v < p.min_value || v > p.max_value) {
          throw std::invalid_argument("operator " + s.name + ": default of " + p.name + " out of range");
        }
      }
      digest << ' ' << p.name << ':' << static_cast<int>(p.kind) << ':' << p.vector_dim << ':' << p.is_discrete
             << ':' << p.min_value << ':' << p.max_value;
      for (double v : p.default_value) digest << ',' << v;
    }
    digest << '\n';
  }
  hash_ = fnv1a(digest.str());
}

const OperatorSchema& OperatorLibrary::schema(OperatorType type) const {
  if (!contains(type)) throw GraphError(GraphError::Kind::unknown_type, "unknown operator type " + std::to_string(type.id));
  return schemas_[type.id];
}

std::optional<OperatorType> OperatorLibrary::find(std::string_view name) const {
  for (const auto& s : schemas_) {
    if (s.name == name) return s.type;
  }
  return std::nullopt;
}

int OperatorLibrary::max_params() const {
  int m = 0;
  for (const auto& s : schemas_) m = std::max(m, static_cast<int>(s.params.size()));
  return m;
}

int OperatorLibrary::max_slots_per_node() const {
  int m = 0;
  for (const auto& s : schemas_) m = std::max(m, s.num_slots());
  return m;
}

const ParamValue* Node::find_param(int param_index) const {
  for (const auto& p : params) {
    if (p.param_index == param_index) return &p;
  }
  return nullptr;
}

std::vector<ParamValue> normalize_params(const OperatorSchema& schema, std::vector<ParamValue> params) {
  std::sort(params.begin(), params.end(),
            [](const ParamValue& a, const ParamValue& b) { return a.param_index < b.param_index; });
  std::vector<ParamValue> out;
  for (size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    if (p.param_index < 0 || p.param_index >= static_cast<int>(schema.params.size())) {
      throw GraphError(GraphError::Kind::bad_param,
                       schema.name + ": parameter index " + std::to_string(p.param_index) + " out of range");
    }
    if (i > 0 && params[i - 1].param_index == p.param_index) {
      throw GraphError(GraphError::Kind::bad_param, schema.name + ": duplicate parameter index");
    }
    const auto& ps = schema.params[p.param_index];
    const size_t n = p.values.size();
    const bool shape_ok = ps.kind == ParamKind::array ? (n > 0 && n % ps.vector_dim == 0)
                                                      : n == static_cast<size_t>(ps.vector_dim);
    if (!shape_ok) {
      throw GraphError(GraphError::Kind::bad_param, schema.name + "." + ps.name + ": wrong number of components");
    }
    for (double v : p.values) {
      if (!std::isfinite(v) || v < ps.min_value || v > ps.max_value) {
        throw GraphError(GraphError::Kind::bad_param, schema.name + "." + ps.name + ": value out of range");
      }
      if (ps.is_discrete && v != std::round(v)) {
        throw GraphError(GraphError::Kind::bad_param, schema.name + "." + ps.name + ": discrete value not integral");
      }
    }
    if (p.values == ps.default_value) continue;
    out.push_back(std::move(p));
  }
  return out;
}

MaterialGraph::MaterialGraph(std::shared_ptr<const OperatorLibrary> library) : library_(std::move(library)) {
  if (!library_) throw std::invalid_argument("MaterialGraph needs an operator library");
}

NodeId MaterialGraph::add_node(OperatorType type, std::vector<ParamValue> params) {
  const auto& s = library_->schema(type);
  Node n;
  n.id = node_count();
  n.type = type;
  n.params = normalize_params(s, std::move(params));
  nodes_.push_back(std::move(n));
  incoming_.emplace_back(s.num_input_slots, -1);
  outgoing_.emplace_back();
  return nodes_.back().id;
}

const Node& MaterialGraph::node(NodeId id) const {
  if (id < 0 || id >= node_count()) {
    throw GraphError(GraphError::Kind::dangling, "no node with id " + std::to_string(id));
  }
  return nodes_[id];
}

const OperatorSchema& MaterialGraph::schema(NodeId id) const { return library_->schema(node(id).type); }

void MaterialGraph::check_slot(const SlotRef& ref) const {
  if (ref.node < 0 || ref.node >= node_count()) {
    throw GraphError(GraphError::Kind::dangling, "slot refers to missing node " + std::to_string(ref.node));
  }
  const auto& s = schema(ref.node);
  const int count = ref.direction == SlotDirection::input ? s.num_input_slots : s.num_output_slots;
  if (ref.slot < 0 || ref.slot >= count) {
    throw GraphError(GraphError::Kind::dangling,
                     "slot " + std::to_string(ref.slot) + " out of range on node " + std::to_string(ref.node));
  }
}

void MaterialGraph::add_edge(SlotRef from, SlotRef to) {
  if (from.direction != SlotDirection::output || to.direction != SlotDirection::input) {
    throw GraphError(GraphError::Kind::direction, "edges run from an output slot to an input slot");
  }
  check_slot(from);
  check_slot(to);
  if (incoming_[to.node][to.slot] >= 0) {
    throw GraphError(GraphError::Kind::occupied_slot, "input slot " + std::to_string(to.slot) + " of node " +
                                                          std::to_string(to.node) + " is already connected");
  }
  if (reaches(to.node, from.node)) {
    throw GraphError(GraphError::Kind::cycle, "edge " + std::to_string(from.node) + " -> " +
                                                  std::to_string(to.node) + " would create a cycle");
  }
  const int index = static_cast<int>(edges_.size());
  edges_.push_back({from, to});
  incoming_[to.node][to.slot] = index;
  outgoing_[from.node].push_back(index);
}

const Edge* MaterialGraph::incoming(NodeId node, int input_slot) const {
  const auto& slots = incoming_.at(node);
  if (input_slot < 0 || input_slot >= static_cast<int>(slots.size())) return nullptr;
  const int e = slots[input_slot];
  return e < 0 ? nullptr : &edges_[e];
}

bool MaterialGraph::reaches(NodeId from, NodeId to) const {
  if (from == to) return true;
  std::vector<char> seen(nodes_.size(), 0);
  std::vector<NodeId> stack{from};
  seen[from] = 1;
  while (!stack.empty()) {
    const NodeId n = stack.back();
    stack.pop_back();
    for (int e : outgoing_[n]) {
      const NodeId m = edges_[e].to.node;
      if (m == to) return true;
      if (!seen[m]) {
        seen[m] = 1;
        stack.push_back(m);
      }
    }
  }
  return false;
}

std::vector<std::vector<double>> MaterialGraph::full_params(NodeId id) const {
  const auto& n = node(id);
  const auto& s = library_->schema(n.type);
  std::vector<std::vector<double>> out;
  out.reserve(s.params.size());
  for (const auto& p : s.params) out.push_back(p.default_value);
  for (const auto& p : n.params) out[p.param_index] = p.values;
  return out;
}

std::vector<std::string> validate(const MaterialGraph& graph) {
  std::vector<std::string> problems;
  const auto& lib = graph.library();
  const int n = graph.node_count();
  for (int i = 0; i < n; ++i) {
    const auto& node = graph.nodes()[i];
    if (node.id != i) problems.push_back("node at position " + std::to_string(i) + " has id " + std::to_string(node.id));
    if (!lib.contains(node.type)) {
      problems.push_back("node " + std::to_string(i) + " has unknown type");
      continue;
    }
    const auto& s = lib.schema(node.type);
    int prev = -1;
    for (const auto& p : node.params) {
      if (p.param_index <= prev || p.param_index >= static_cast<int>(s.params.size())) {
        problems.push_back("node " + std::to_string(i) + " has bad parameter index " + std::to_string(p.param_index));
        continue;
      }
      prev = p.param_index;
      const auto& ps = s.params[p.param_index];
      for (double v : p.values) {
        if (!(v >= ps.min_value && v <= ps.max_value)) {
          problems.push_back("node " + std::to_string(i) + " parameter " + ps.name + " out of bounds");
        }
      }
    }
  }

  auto slot_ok = [&](const SlotRef& r, SlotDirection want) {
    if (r.direction != want) return false;
    if (r.node < 0 || r.node >= n || !lib.contains(graph.nodes()[r.node].type)) return false;
    const auto& s = lib.schema(graph.nodes()[r.node].type);
    const int count = want == SlotDirection::input ? s.num_input_slots : s.num_output_slots;
    return r.slot >= 0 && r.slot < count;
  };

  std::vector<std::vector<NodeId>> children(n);
  std::vector<std::pair<NodeId, int>> targets;
  for (const auto& e : graph.edges()) {
    if (!slot_ok(e.from, SlotDirection::output) || !slot_ok(e.to, SlotDirection::input)) {
      problems.push_back("edge " + std::to_string(e.from.node) + "->" + std::to_string(e.to.node) +
                         " has an invalid or misdirected endpoint");
      continue;
    }
    targets.emplace_back(e.to.node, e.to.slot);
    children[e.from.node].push_back(e.to.node);
  }
  std::sort(targets.begin(), targets.end());
  for (size_t i = 1; i < targets.size(); ++i) {
    if (targets[i] == targets[i - 1]) {
      problems.push_back("input slot " + std::to_string(targets[i].second) + " of node " +
                         std::to_string(targets[i].first) + " has more than one incoming edge");
    }
  }

  // 0 = unvisited, 1 = on stack, 2 = done
  std::vector<int> colour(n, 0);
  bool cyclic = false;
  for (int root = 0; root < n && !cyclic; ++root) {
    if (colour[root]) continue;
    std::vector<std::pair<NodeId, size_t>> stack{{root, 0}};
    colour[root] = 1;
    while (!stack.empty() && !cyclic) {
      auto& [u, next] = stack.back();
      if (next < children[u].size()) {
        const NodeId v = children[u][next++];
        if (colour[v] == 1) {
          cyclic = true;
        } else if (colour[v] == 0) {
          colour[v] = 1;
          stack.emplace_back(v, 0);
        }
      } else {
        colour[u] = 2;
        stack.pop_back();
      }
    }
  }
  if (cyclic) problems.push_back("graph contains a cycle");
  return problems;
}

std::vector<NodeId> topological_order(const MaterialGraph& graph) {
  const int n = graph.node_count();
  std::vector<int> indegree(n, 0);
  for (const auto& e : graph.edges()) ++indegree[e.to.node];
  std::priority_queue<NodeId, std::vector<NodeId>, std::greater<>> ready;
  for (int i = 0; i < n; ++i) {
    if (indegree[i] == 0) ready.push(i);
  }
  std::vector<NodeId> order;
  order.reserve(n);
  while (!ready.empty()) {
    const NodeId u = ready.top();
    ready.pop();
    order.push_back(u);
    for (int e : graph.outgoing(u)) {
      const NodeId v = graph.edges()[e].to.node;
      if (--indegree[v] == 0) ready.push(v);
    }
  }
  return order;
}

std::vector<int> node_depths(const MaterialGraph& graph, DepthMode mode) {
  const int n = graph.node_count();
  std::vector<std::vector<NodeId>> next(n);
  for (const auto& e : graph.edges()) {
    // BFS runs from the targets (output markers / generators) against the
    // direction in which depth is measured.
    if (mode == DepthMode::to_output) {
      next[e.to.node].push_back(e.from.node);
    } else {
      next[e.from.node].push_back(e.to.node);
    }
  }
  std::vector<int> depth(n, -1);
  std::deque<NodeId> queue;
  for (int i = 0; i < n; ++i) {
    const auto& s = graph.schema(i);
    const bool source = mode == DepthMode::to_output ? s.is_output_marker : s.is_generator;
    if (source) {
      depth[i] = 0;
      queue.push_back(i);
    }
  }
  int max_depth = -1;
  while (!queue.empty()) {
    const NodeId u = queue.front();
    queue.pop_front();
    max_depth = std::max(max_depth, depth[u]);
    for (NodeId v : next[u]) {
      if (depth[v] < 0) {
        depth[v] = depth[u] + 1;
        queue.push_back(v);
      }
    }
  }
  for (auto& d : depth) {
    if (d < 0) d = max_depth + 1;
  }
  return depth;
}

int node_depth(const MaterialGraph& graph, NodeId id, DepthMode mode) {
  graph.node(id);
  return node_depths(graph, mode)[id];
}

MaterialGraph relabel(const MaterialGraph& graph, std::span<const NodeId> order) {
  MaterialGraph out(graph.library_ptr());
  std::vector<NodeId> new_id(graph.node_count(), -1);
  for (size_t i = 0; i < order.size(); ++i) {
    const auto& node = graph.node(order[i]);
    if (new_id[order[i]] >= 0) throw std::invalid_argument("relabel: repeated node id");
    new_id[order[i]] = out.add_node(node.type, node.params);
  }
  std::vector<Edge> edges;
  for (const auto& e : graph.edges()) {
    if (new_id[e.from.node] < 0 || new_id[e.to.node] < 0) continue;
    Edge m = e;
    m.from.node = new_id[e.from.node];
    m.to.node = new_id[e.to.node];
    edges.push_back(m);
  }
  std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
    return std::tie(a.to.node, a.to.slot, a.from.node, a.from.slot) <
           std::tie(b.to.node, b.to.slot, b.from.node, b.from.slot);
  });
  for (const auto& e : edges) out.add_edge(e.from, e.to);
  return out;
}

MaterialGraph induced_subgraph(const MaterialGraph& graph, std::span<const NodeId> kept) {
  std::vector<NodeId> sorted(kept.begin(), kept.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  return relabel(graph, sorted);
}

std::vector<Edge> sorted_edges(const MaterialGraph& graph) {
  std::vector<Edge> edges = graph.edges();
  std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
    return std::tie(a.to.node, a.to.slot, a.from.node, a.from.slot) <
           std::tie(b.to.node, b.to.slot, b.from.node, b.from.slot);
  });
  return edges;
}

bool structurally_equal(const MaterialGraph& a, const MaterialGraph& b, double param_tolerance) {
  return structurally_equal(a, b, [param_tolerance](OperatorType, int, int) { return param_tolerance; });
}

bool structurally_equal(const MaterialGraph& a, const MaterialGraph& b,
                        const std::function<double(OperatorType, int, int)>& tolerance) {
  if (a.node_count() != b.node_count() || a.edges().size() != b.edges().size()) return false;
  for (int i = 0; i < a.node_count(); ++i) {
    if (a.nodes()[i].type != b.nodes()[i].type) return false;
    const auto pa = a.full_params(i);
    const auto pb = b.full_params(i);
    for (size_t k = 0; k < pa.size(); ++k) {
      if (pa[k].size() != pb[k].size()) return false;
      const auto& ps = a.schema(i).params[k];
      for (size_t c = 0; c < pa[k].size(); ++c) {
        const int component = static_cast<int>(c % ps.vector_dim);
        const double tol = tolerance(a.nodes()[i].type, static_cast<int>(k), component);
        if (std::abs(pa[k][c] - pb[k][c]) > tol) return false;
      }
    }
  }
  return sorted_edges(a) == sorted_edges(b);
}

}  // namespace matformer
