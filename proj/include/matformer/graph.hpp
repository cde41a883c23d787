#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace matformer {

using NodeId = int;

/// Index into an operator library.
struct OperatorType {
  int id = -1;
  auto operator<=>(const OperatorType&) const = default;
};

enum class ParamKind { scalar, vector, array };

struct ParamSchema {
  std::string name;
  ParamKind kind = ParamKind::scalar;
  int vector_dim = 1;
  bool is_discrete = false;
  double min_value = 0.0;
  double max_value = 1.0;
  // Flat components; arrays hold a positive multiple of vector_dim.
  std::vector<double> default_value;

  /// Number of distinct integer values of a discrete parameter.
  int discrete_range() const { return static_cast<int>(max_value - min_value) + 1; }
};

struct OperatorSchema {
  OperatorType type;
  std::string name;
  int num_input_slots = 0;
  int num_output_slots = 1;
  std::vector<ParamSchema> params;  // sorted by name
  bool is_generator = false;
  bool is_output_marker = false;
  std::vector<std::string> input_names;
  std::vector<std::string> output_names;
  // Material channel written by an output marker ("albedo", "normal", ...).
  std::string output_channel;

  int num_slots() const { return num_input_slots + num_output_slots; }
  int param_index(std::string_view param_name) const;
};

/// Immutable table of operator signatures, identified by a version string
/// and a content hash.
class OperatorLibrary {
 public:
  OperatorLibrary(std::string version, std::vector<OperatorSchema> schemas);

  const std::string& version() const { return version_; }
  std::uint64_t hash() const { return hash_; }
  int size() const { return static_cast<int>(schemas_.size()); }
  const OperatorSchema& schema(OperatorType type) const;
  const std::vector<OperatorSchema>& schemas() const { return schemas_; }
  std::optional<OperatorType> find(std::string_view name) const;
  bool contains(OperatorType type) const { return type.id >= 0 && type.id < size(); }

  int max_params() const;
  int max_slots_per_node() const;

 private:
  std::string version_;
  std::vector<OperatorSchema> schemas_;
  std::uint64_t hash_ = 0;
};

struct ParamValue {
  int param_index = 0;
  std::vector<double> values;
  bool operator==(const ParamValue&) const = default;
};

struct Node {
  NodeId id = 0;
  OperatorType type;
  // Sparse: only entries that differ from the schema default, sorted by index.
  std::vector<ParamValue> params;

  const ParamValue* find_param(int param_index) const;
};

enum class SlotDirection { input, output };

struct SlotRef {
  NodeId node = 0;
  SlotDirection direction = SlotDirection::output;
  int slot = 0;
  auto operator<=>(const SlotRef&) const = default;
};

inline SlotRef out_slot(NodeId node, int slot = 0) { return {node, SlotDirection::output, slot}; }
inline SlotRef in_slot(NodeId node, int slot = 0) { return {node, SlotDirection::input, slot}; }

struct Edge {
  SlotRef from;
  SlotRef to;
  auto operator<=>(const Edge&) const = default;
};

class GraphError : public std::runtime_error {
 public:
  enum class Kind {
    unknown_type,
    bad_param,
    occupied_slot,
    cycle,
    direction,
    dangling,
  };
  GraphError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Directed acyclic multigraph of operator nodes. Nodes receive sequential
/// ids; every mutation keeps the graph valid or throws GraphError.
class MaterialGraph {
 public:
  explicit MaterialGraph(std::shared_ptr<const OperatorLibrary> library);

  NodeId add_node(OperatorType type, std::vector<ParamValue> params = {});
  void add_edge(SlotRef from, SlotRef to);

  const OperatorLibrary& library() const { return *library_; }
  const std::shared_ptr<const OperatorLibrary>& library_ptr() const { return library_; }
  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<Edge>& edges() const { return edges_; }
  int node_count() const { return static_cast<int>(nodes_.size()); }
  const Node& node(NodeId id) const;
  const OperatorSchema& schema(NodeId id) const;

  /// Edge attached to an input slot, if any.
  const Edge* incoming(NodeId node, int input_slot) const;
  /// Indices into edges() of edges leaving `node`, in insertion order.
  const std::vector<int>& outgoing(NodeId node) const { return outgoing_.at(node); }
  /// True when a directed path from `from` to `to` exists (a node reaches itself).
  bool reaches(NodeId from, NodeId to) const;

  /// Full parameter assignment (defaults filled in) of one node.
  std::vector<std::vector<double>> full_params(NodeId id) const;

 private:
  void check_slot(const SlotRef& ref) const;

  std::shared_ptr<const OperatorLibrary> library_;
  std::vector<Node> nodes_;
  std::vector<Edge> edges_;
  std::vector<std::vector<int>> incoming_;  // per node, per input slot: edge index or -1
  std::vector<std::vector<int>> outgoing_;
};

/// Checks a parameter list against a schema and returns the normalized sparse
/// form (sorted, default-valued entries dropped). Throws GraphError::bad_param.
std::vector<ParamValue> normalize_params(const OperatorSchema& schema, std::vector<ParamValue> params);

/// Independent full-graph check: reference resolution, direction, slot
/// occupancy, acyclicity (DFS colouring) and parameter bounds. Returns a list of
/// human-readable problems; empty means valid.
std::vector<std::string> validate(const MaterialGraph& graph);

/// Kahn's algorithm, lowest node id first among ready nodes.
std::vector<NodeId> topological_order(const MaterialGraph& graph);

enum class DepthMode { to_output, to_generator };

/// Edge-hop distance to the closest output marker (following edges forward)
/// or closest generator (following edges backward). Nodes without such a path
/// get max observed depth + 1.
std::vector<int> node_depths(const MaterialGraph& graph, DepthMode mode);
int node_depth(const MaterialGraph& graph, NodeId id, DepthMode mode);

/// Copy of `graph` whose node i is `order[i]` of the original. `order` must be
/// a permutation (or subset, giving the induced subgraph) of node ids.
MaterialGraph relabel(const MaterialGraph& graph, std::span<const NodeId> order);

/// Induced subgraph on `kept` (kept in original id order), ids compacted.
MaterialGraph induced_subgraph(const MaterialGraph& graph, std::span<const NodeId> kept);

/// Node-for-node structural comparison: same types, same edges, parameter
/// components within `param_tolerance`.
bool structurally_equal(const MaterialGraph& a, const MaterialGraph& b, double param_tolerance = 0.0);

/// Same as above with a per-component tolerance (type, param index, component).
bool structurally_equal(const MaterialGraph& a, const MaterialGraph& b,
                        const std::function<double(OperatorType, int, int)>& tolerance);

/// Edges sorted by (to node, to slot, from node, from slot).
std::vector<Edge> sorted_edges(const MaterialGraph& graph);

}  // namespace matformer
