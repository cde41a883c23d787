#include "matformer/sequencer.hpp"

#include <algorithm>
#include <deque>
#include <random>

#include "matformer/hash.hpp"

namespace matformer {

std::string to_string(NodeOrdering ordering) {
  switch (ordering) {
    case NodeOrdering::back_to_front: return "r";
    case NodeOrdering::back_to_front_reversed: return "rr";
    case NodeOrdering::front_to_back: return "b";
    case NodeOrdering::random_topological: return "t";
  }
  return "?";
}

NodeOrdering parse_ordering(const std::string& name) {
  if (name == "r") return NodeOrdering::back_to_front;
  if (name == "rr") return NodeOrdering::back_to_front_reversed;
  if (name == "b") return NodeOrdering::front_to_back;
  if (name == "t") return NodeOrdering::random_topological;
  throw std::invalid_argument("unknown node ordering '" + name + "' (expected r, rr, b or t)");
}

DepthMode depth_mode(NodeOrdering ordering) {
  return ordering == NodeOrdering::back_to_front ? DepthMode::to_output : DepthMode::to_generator;
}

bool is_randomized(NodeOrdering ordering) {
  return ordering == NodeOrdering::front_to_back || ordering == NodeOrdering::random_topological;
}

namespace {

std::vector<NodeId> back_to_front(const MaterialGraph& graph) {
  const int n = graph.node_count();
  std::vector<char> visited(n, 0);
  std::vector<NodeId> order;
  order.reserve(n);
  std::deque<NodeId> queue;
  auto visit = [&](NodeId id) {
    visited[id] = 1;
    order.push_back(id);
    queue.push_back(id);
  };
  auto drain = [&] {
    while (!queue.empty()) {
      const NodeId u = queue.front();
      queue.pop_front();
      const int inputs = graph.schema(u).num_input_slots;
      for (int s = 0; s < inputs; ++s) {
        if (const Edge* e = graph.incoming(u, s); e && !visited[e->from.node]) visit(e->from.node);
      }
    }
  };
  for (int i = 0; i < n; ++i) {
    if (graph.schema(i).is_output_marker && !visited[i]) visit(i);
  }
  drain();
  // Nodes that feed no output marker: restart from the lowest-id node whose
  // children are all placed already.
  while (static_cast<int>(order.size()) < n) {
    NodeId start = -1;
    for (int i = 0; i < n && start < 0; ++i) {
      if (visited[i]) continue;
      bool sink = true;
      for (int e : graph.outgoing(i)) sink = sink && visited[graph.edges()[e].to.node];
      if (sink) start = i;
    }
    visit(start);
    drain();
  }
  return order;
}

std::vector<NodeId> front_to_back(const MaterialGraph& graph, std::uint64_t seed) {
  const int n = graph.node_count();
  std::mt19937_64 rng(mix_seed(seed, 0xb));
  std::vector<char> visited(n, 0);
  std::vector<NodeId> order;
  order.reserve(n);
  std::deque<NodeId> queue;
  std::vector<int> indegree(n, 0);
  for (const auto& e : graph.edges()) ++indegree[e.to.node];
  for (int i = 0; i < n; ++i) {
    if (indegree[i] == 0) {
      visited[i] = 1;
      order.push_back(i);
      queue.push_back(i);
    }
  }
  while (!queue.empty()) {
    const NodeId u = queue.front();
    queue.pop_front();
    const int outputs = graph.schema(u).num_output_slots;
    std::vector<std::vector<NodeId>> by_slot(outputs);
    for (int e : graph.outgoing(u)) {
      const auto& edge = graph.edges()[e];
      by_slot[edge.from.slot].push_back(edge.to.node);
    }
    for (auto& children : by_slot) {
      std::sort(children.begin(), children.end());
      children.erase(std::unique(children.begin(), children.end()), children.end());
      std::shuffle(children.begin(), children.end(), rng);
      for (NodeId c : children) {
        if (!visited[c]) {
          visited[c] = 1;
          order.push_back(c);
          queue.push_back(c);
        }
      }
    }
  }
  return order;
}

std::vector<NodeId> random_topological(const MaterialGraph& graph, std::uint64_t seed) {
  const int n = graph.node_count();
  std::mt19937_64 rng(mix_seed(seed, 0x7));
  std::vector<int> indegree(n, 0);
  for (const auto& e : graph.edges()) ++indegree[e.to.node];
  std::vector<NodeId> ready;
  for (int i = 0; i < n; ++i) {
    if (indegree[i] == 0) ready.push_back(i);
  }
  std::vector<NodeId> order;
  order.reserve(n);
  while (!ready.empty()) {
    std::uniform_int_distribution<size_t> pick(0, ready.size() - 1);
    const size_t k = pick(rng);
    const NodeId u = ready[k];
    ready[k] = ready.back();
    ready.pop_back();
    order.push_back(u);
    for (int e : graph.outgoing(u)) {
      const NodeId v = graph.edges()[e].to.node;
      if (--indegree[v] == 0) ready.push_back(v);
    }
    // Keep the candidate set in a canonical order so the draw depends only on the seed.
    std::sort(ready.begin(), ready.end());
  }
  return order;
}

int clamp_depth(int d) { return std::clamp(d, 0, kMaxDepthToken); }

}  // namespace

std::vector<NodeId> order_nodes(const MaterialGraph& graph, NodeOrdering ordering, std::uint64_t seed) {
  switch (ordering) {
    case NodeOrdering::back_to_front: return back_to_front(graph);
    case NodeOrdering::back_to_front_reversed: {
      auto order = back_to_front(graph);
      std::reverse(order.begin(), order.end());
      return order;
    }
    case NodeOrdering::front_to_back: return front_to_back(graph, seed);
    case NodeOrdering::random_topological: return random_topological(graph, seed);
  }
  return {};
}

NodeSequence encode_nodes(const MaterialGraph& graph, NodeOrdering ordering, std::uint64_t seed,
                          const SequenceLimits& limits) {
  const auto order = order_nodes(graph, ordering, seed);
  return encode_nodes(graph, order, depth_mode(ordering), limits);
}

NodeSequence encode_nodes(const MaterialGraph& graph, std::span<const NodeId> order, DepthMode mode,
                          const SequenceLimits& limits) {
  if (static_cast<int>(order.size()) > limits.max_nodes) {
    throw SequenceError(SequenceError::Kind::overflow, "graph has " + std::to_string(order.size()) +
                                                           " nodes; limit is " + std::to_string(limits.max_nodes));
  }
  const auto depth = node_depths(graph, mode);
  std::vector<int> types, depths;
  for (NodeId id : order) {
    types.push_back(graph.node(id).type.id);
    depths.push_back(depth[id]);
  }
  auto seq = make_node_sequence(types, depths);
  seq.order.assign(order.begin(), order.end());
  return seq;
}

NodeSequence make_node_sequence(std::span<const int> types, std::span<const int> depths) {
  NodeSequence seq;
  seq.tokens.push_back(kAlpha);
  seq.depths.push_back(0);
  for (size_t i = 0; i < types.size(); ++i) {
    seq.tokens.push_back(types[i]);
    seq.depths.push_back(clamp_depth(i < depths.size() ? depths[i] : 0));
    seq.order.push_back(static_cast<NodeId>(i));
  }
  seq.tokens.push_back(kOmega);
  seq.depths.push_back(0);
  for (int i = 0; i < seq.length(); ++i) seq.positions.push_back(i + 1);
  return seq;
}

std::vector<OperatorType> decode_nodes(const NodeSequence& seq) {
  if (seq.length() < 2 || seq.tokens.front() != kAlpha || seq.tokens.back() != kOmega) {
    throw SequenceError(SequenceError::Kind::bad_token, "node sequence must be delimited by alpha and omega");
  }
  std::vector<OperatorType> types;
  for (int i = 1; i + 1 < seq.length(); ++i) {
    if (seq.tokens[i] < 0) throw SequenceError(SequenceError::Kind::bad_token, "special token inside node sequence");
    types.push_back(OperatorType{seq.tokens[i]});
  }
  return types;
}

ParamSequenceBuilder::ParamSequenceBuilder(const OperatorSchema& schema) : schema_(schema) {
  seq_.values.push_back(kAlpha);
  seq_.indices.push_back(0);
  seq_.positions.push_back(1);
  seq_.vector_elems.push_back(0);
  seq_.array_elems.push_back(0);
  seq_.ordinals.push_back(0);
}

void ParamSequenceBuilder::push(int value_token, int param_index) {
  if (param_index < 0 || param_index >= static_cast<int>(schema_.params.size())) {
    throw SequenceError(SequenceError::Kind::bad_index, schema_.name + ": parameter index out of range");
  }
  if (param_index != current_) {
    current_ = param_index;
    count_ = 0;
    ++ordinal_;
  }
  const int dim = schema_.params[param_index].vector_dim;
  seq_.values.push_back(value_token);
  seq_.indices.push_back(param_index);
  seq_.positions.push_back(seq_.length());
  seq_.vector_elems.push_back(count_ % dim + 1);
  seq_.array_elems.push_back(count_ / dim + 1);
  seq_.ordinals.push_back(ordinal_);
  ++count_;
}

void ParamSequenceBuilder::finish() {
  seq_.values.push_back(kOmega);
  seq_.indices.push_back(0);
  seq_.positions.push_back(seq_.length());
  seq_.vector_elems.push_back(0);
  seq_.array_elems.push_back(0);
  seq_.ordinals.push_back(0);
}

bool ParamSequenceBuilder::can_stop() const {
  if (current_ < 0) return true;
  const auto& ps = schema_.params[current_];
  return ps.kind == ParamKind::array ? count_ % ps.vector_dim == 0 : count_ >= ps.vector_dim;
}

std::vector<bool> ParamSequenceBuilder::legal_indices() const {
  const int n = static_cast<int>(schema_.params.size());
  std::vector<bool> legal(n, false);
  if (current_ < 0) {
    std::fill(legal.begin(), legal.end(), true);
    return legal;
  }
  const auto& ps = schema_.params[current_];
  const bool complete = can_stop();
  if (!complete) {
    legal[current_] = true;
    return legal;
  }
  for (int k = current_ + 1; k < n; ++k) legal[k] = true;
  if (ps.kind == ParamKind::array) legal[current_] = true;
  return legal;
}

bool ParamSequenceBuilder::value_legal(int value_token, int param_index, int levels) const {
  if (value_token < 0) return false;
  const auto& ps = schema_.params.at(param_index);
  return ps.is_discrete ? value_token < ps.discrete_range() : value_token < levels;
}

ParamSequence encode_params(const MaterialGraph& graph, NodeId node, const Quantizer& quantizer,
                            const SequenceLimits& limits) {
  const auto& n = graph.node(node);
  const auto& schema = graph.schema(node);
  ParamSequenceBuilder builder(schema);
  int count = 0;
  for (const auto& p : n.params) {
    const auto& ps = schema.params[p.param_index];
    for (size_t c = 0; c < p.values.size(); ++c) {
      int token;
      if (ps.is_discrete) {
        token = static_cast<int>(std::lround(p.values[c] - ps.min_value));
      } else {
        token = quantizer.quantize(p.values[c], QuantKey{n.type.id, p.param_index, static_cast<int>(c % ps.vector_dim)});
      }
      builder.push(token, p.param_index);
      if (++count > limits.max_param_tokens) {
        throw SequenceError(SequenceError::Kind::overflow, "node " + std::to_string(node) + " has more than " +
                                                               std::to_string(limits.max_param_tokens) +
                                                               " parameter values");
      }
    }
  }
  builder.finish();
  return builder.sequence();
}

std::vector<ParamSequence> encode_params(const MaterialGraph& graph, std::span<const NodeId> order,
                                         const Quantizer& quantizer, const SequenceLimits& limits) {
  std::vector<ParamSequence> out;
  out.reserve(order.size());
  for (NodeId id : order) out.push_back(encode_params(graph, id, quantizer, limits));
  return out;
}

std::vector<ParamValue> decode_params(const OperatorSchema& schema, OperatorType type, const ParamSequence& seq,
                                      const Quantizer& quantizer) {
  std::vector<ParamValue> out;
  std::vector<char> seen(schema.params.size(), 0);
  const int end = seq.length() - (seq.length() > 1 && seq.values.back() == kOmega ? 1 : 0);
  int i = seq.length() > 0 && seq.values.front() == kAlpha ? 1 : 0;
  while (i < end) {
    const int k = seq.indices[i];
    if (k < 0 || k >= static_cast<int>(schema.params.size())) {
      throw SequenceError(SequenceError::Kind::bad_index,
                          schema.name + ": parameter index " + std::to_string(k) + " out of range");
    }
    if (seen[k]) throw SequenceError(SequenceError::Kind::bad_index, schema.name + ": parameter index repeated");
    seen[k] = 1;
    const auto& ps = schema.params[k];
    ParamValue pv{k, {}};
    for (; i < end && seq.indices[i] == k; ++i) {
      const int token = seq.values[i];
      const int component = static_cast<int>(pv.values.size() % ps.vector_dim);
      if (ps.is_discrete) {
        if (token < 0 || token >= ps.discrete_range()) {
          throw SequenceError(SequenceError::Kind::bad_token, schema.name + "." + ps.name + ": token out of range");
        }
        pv.values.push_back(ps.min_value + token);
      } else {
        if (token < 0 || token >= quantizer.levels()) {
          throw SequenceError(SequenceError::Kind::bad_token, schema.name + "." + ps.name + ": level out of range");
        }
        const double v = quantizer.dequantize(token, QuantKey{type.id, k, component});
        pv.values.push_back(std::clamp(v, ps.min_value, ps.max_value));
      }
    }
    if (ps.kind == ParamKind::array) {
      pv.values.resize(pv.values.size() / ps.vector_dim * ps.vector_dim);
      if (pv.values.empty()) continue;
    } else {
      const size_t have = pv.values.size();
      pv.values.resize(ps.vector_dim);
      for (size_t c = have; c < pv.values.size(); ++c) pv.values[c] = ps.default_value[c];
    }
    out.push_back(std::move(pv));
  }
  return normalize_params(schema, std::move(out));
}

int SlotSequence::find(int node_position, SlotDirection direction, int slot) const {
  // Slots of one node are contiguous; binary search on the owning node first.
  auto lo = std::lower_bound(node_positions.begin(), node_positions.end(), node_position);
  for (auto it = lo; it != node_positions.end() && *it == node_position; ++it) {
    const auto i = static_cast<size_t>(it - node_positions.begin());
    if (directions[i] == direction && slot_numbers[i] == slot) return static_cast<int>(i);
  }
  return -1;
}

SlotSequence build_slot_sequence(const OperatorLibrary& library, std::span<const int> types,
                                 std::span<const int> depths, const SequenceLimits& limits) {
  SlotSequence s;
  for (size_t j = 0; j < types.size(); ++j) {
    const auto& schema = library.schema(OperatorType{types[j]});
    auto push = [&](SlotDirection dir, int slot, int within) {
      s.node_positions.push_back(static_cast<int>(j));
      s.directions.push_back(dir);
      s.slot_numbers.push_back(slot);
      s.types.push_back(types[j]);
      s.node_indices.push_back(static_cast<int>(j) + 1);
      s.node_depths.push_back(clamp_depth(j < depths.size() ? depths[j] : 0));
      s.slot_indices.push_back(within);
      s.positions.push_back(s.length());
    };
    for (int k = 0; k < schema.num_input_slots; ++k) push(SlotDirection::input, k, k);
    for (int k = 0; k < schema.num_output_slots; ++k) push(SlotDirection::output, k, schema.num_input_slots + k);
  }
  if (s.length() > limits.max_slots) {
    throw SequenceError(SequenceError::Kind::overflow, "graph has " + std::to_string(s.length()) +
                                                           " slots; limit is " + std::to_string(limits.max_slots));
  }
  return s;
}

SlotSequence build_slot_sequence(const OperatorLibrary& library, const NodeSequence& nodes,
                                 const SequenceLimits& limits) {
  std::vector<int> types, depths;
  for (int i = 1; i + 1 < nodes.length(); ++i) {
    types.push_back(nodes.tokens[i]);
    depths.push_back(nodes.depths[i]);
  }
  return build_slot_sequence(library, types, depths, limits);
}

EdgeSequence make_edge_sequence(std::span<const int> slot_tokens) {
  EdgeSequence e;
  e.tokens.push_back(kAlpha);
  e.tuples.push_back(0);
  for (size_t i = 0; i < slot_tokens.size(); ++i) {
    e.tokens.push_back(slot_tokens[i]);
    e.tuples.push_back(i % 2 == 0 ? 1 : 2);
  }
  e.tokens.push_back(kOmega);
  e.tuples.push_back(0);
  for (int i = 0; i < e.length(); ++i) e.positions.push_back(i + 1);
  return e;
}

EdgeSequence encode_edges(const MaterialGraph& graph, std::span<const NodeId> order, const SlotSequence& slots,
                          const SequenceLimits& limits) {
  if (static_cast<int>(graph.edges().size()) > limits.max_edges) {
    throw SequenceError(SequenceError::Kind::overflow, "graph has " + std::to_string(graph.edges().size()) +
                                                           " edges; limit is " + std::to_string(limits.max_edges));
  }
  std::vector<int> position(graph.node_count(), -1);
  for (size_t i = 0; i < order.size(); ++i) position[order[i]] = static_cast<int>(i);
  std::vector<std::pair<int, int>> pairs;  // (to slot index, from slot index)
  for (const auto& e : graph.edges()) {
    const int from = slots.find(position[e.from.node], SlotDirection::output, e.from.slot);
    const int to = slots.find(position[e.to.node], SlotDirection::input, e.to.slot);
    if (from < 0 || to < 0) throw SequenceError(SequenceError::Kind::bad_index, "edge endpoint missing from slot sequence");
    pairs.emplace_back(to, from);
  }
  std::sort(pairs.begin(), pairs.end());
  std::vector<int> flat;
  flat.reserve(pairs.size() * 2);
  for (auto [to, from] : pairs) {
    flat.push_back(from);
    flat.push_back(to);
  }
  return make_edge_sequence(flat);
}

std::vector<Edge> decode_edges(const SlotSequence& slots, const EdgeSequence& edges) {
  if (edges.length() < 2 || edges.tokens.front() != kAlpha || edges.tokens.back() != kOmega) {
    throw SequenceError(SequenceError::Kind::bad_token, "edge sequence must be delimited by alpha and omega");
  }
  const int interior = edges.length() - 2;
  if (interior % 2 != 0) throw SequenceError(SequenceError::Kind::bad_length, "edge sequence has odd interior length");
  std::vector<Edge> out;
  for (int i = 1; i + 1 < edges.length(); i += 2) {
    const int a = edges.tokens[i], b = edges.tokens[i + 1];
    if (a < 0 || a >= slots.length() || b < 0 || b >= slots.length()) {
      throw SequenceError(SequenceError::Kind::bad_index, "edge token out of slot range");
    }
    if (slots.directions[a] != SlotDirection::output || slots.directions[b] != SlotDirection::input) {
      throw SequenceError(SequenceError::Kind::bad_direction, "edge must run from an output slot to an input slot");
    }
    out.push_back(Edge{out_slot(slots.node_positions[a], slots.slot_numbers[a]),
                       in_slot(slots.node_positions[b], slots.slot_numbers[b])});
  }
  return out;
}

TokenizedGraph tokenize(const MaterialGraph& graph, NodeOrdering ordering, std::uint64_t seed,
                        const Quantizer& quantizer, const SequenceLimits& limits) {
  TokenizedGraph t;
  t.nodes = encode_nodes(graph, ordering, seed, limits);
  t.params = encode_params(graph, t.nodes.order, quantizer, limits);
  t.slots = build_slot_sequence(graph.library(), t.nodes, limits);
  t.edges = encode_edges(graph, t.nodes.order, t.slots, limits);
  return t;
}

MaterialGraph detokenize(std::shared_ptr<const OperatorLibrary> library, const TokenizedGraph& tokens,
                         const Quantizer& quantizer) {
  MaterialGraph g(library);
  const auto types = decode_nodes(tokens.nodes);
  if (tokens.params.size() != types.size()) {
    throw SequenceError(SequenceError::Kind::bad_length, "one parameter sequence per node expected");
  }
  for (size_t i = 0; i < types.size(); ++i) {
    const auto& schema = library->schema(types[i]);
    g.add_node(types[i], decode_params(schema, types[i], tokens.params[i], quantizer));
  }
  for (const auto& e : decode_edges(tokens.slots, tokens.edges)) g.add_edge(e.from, e.to);
  return g;
}

}  // namespace matformer
