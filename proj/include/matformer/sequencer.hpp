#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "matformer/graph.hpp"
#include "matformer/quantizer.hpp"

namespace matformer {

/// Start/stop tokens. All value vocabularies are non-negative, so these never
/// collide with a real token.
inline constexpr int kAlpha = -1;
inline constexpr int kOmega = -2;

/// Depth tokens are clamped to [0, kMaxDepthToken].
inline constexpr int kMaxDepthToken = 31;

enum class NodeOrdering {
  back_to_front,           // r:  BFS from output markers against edge direction
  back_to_front_reversed,  // rr: reverse of r
  front_to_back,           // b:  BFS from roots along edges, same-slot children shuffled
  random_topological,      // t:  random valid topological order
};

std::string to_string(NodeOrdering ordering);
/// Accepts "r", "rr", "b", "t".
NodeOrdering parse_ordering(const std::string& name);
/// Depth used for S^nd with this ordering.
DepthMode depth_mode(NodeOrdering ordering);
/// True for orderings that draw on the seed.
bool is_randomized(NodeOrdering ordering);

struct SequenceLimits {
  int max_nodes = 400;
  int max_param_tokens = 512;
  int max_edges = 700;
  int max_slots = 800;
};

class SequenceError : public std::runtime_error {
 public:
  enum class Kind { overflow, bad_index, bad_length, bad_direction, bad_token };
  SequenceError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// S^n, S^nd and S^ni, plus the node order the tokens were taken from.
struct NodeSequence {
  std::vector<NodeId> order;
  std::vector<int> tokens;     // (alpha, type ids..., omega)
  std::vector<int> depths;     // (0, d_1, ..., 0)
  std::vector<int> positions;  // (1, 2, 3, ...)

  int length() const { return static_cast<int>(tokens.size()); }
  int node_count() const { return length() - 2; }
};

/// One node's flattened, non-default parameters and their side streams.
struct ParamSequence {
  std::vector<int> values;        // (alpha, v_1, ..., omega)
  std::vector<int> indices;       // (0, k_1, ..., 0)
  std::vector<int> positions;     // (1, 2, ...)
  std::vector<int> vector_elems;  // 1-based element inside a vector, 0 at alpha/omega
  std::vector<int> array_elems;   // 1-based array entry, 0 at alpha/omega
  std::vector<int> ordinals;      // 1-based ordinal of the parameter in this sequence

  int length() const { return static_cast<int>(values.size()); }
};

/// Incrementally builds a ParamSequence; derives the side streams from the
/// value/index tokens pushed so far.
class ParamSequenceBuilder {
 public:
  explicit ParamSequenceBuilder(const OperatorSchema& schema);

  void push(int value_token, int param_index);
  void finish();

  const ParamSequence& sequence() const { return seq_; }
  /// Parameter currently being emitted (-1 before the first value).
  int current_param() const { return current_; }
  /// Values emitted so far for current_param().
  int current_count() const { return count_; }
  /// True when stopping now leaves every emitted parameter complete.
  bool can_stop() const;
  /// Legal parameter indices for the next value token.
  std::vector<bool> legal_indices() const;
  /// Legal value tokens for the next value of `param_index` (discrete
  /// parameters restrict to their range).
  bool value_legal(int value_token, int param_index, int levels) const;

 private:
  const OperatorSchema& schema_;
  ParamSequence seq_;
  int current_ = -1;
  int count_ = 0;
  int ordinal_ = 0;
};

/// Slot descriptor streams: nodes in sequence order, per node all input slots
/// then all output slots.
struct SlotSequence {
  std::vector<int> node_positions;  // 0-based position of the owning node in the node sequence
  std::vector<SlotDirection> directions;
  std::vector<int> slot_numbers;  // slot index within its direction
  std::vector<int> types;         // S^st
  std::vector<int> node_indices;  // S^sni, 1-based node position
  std::vector<int> node_depths;   // S^snd
  std::vector<int> slot_indices;  // S^sk, index inside the node's slot list
  std::vector<int> positions;     // S^si, 1-based

  int length() const { return static_cast<int>(types.size()); }
  /// Index of a slot in this sequence, or -1.
  int find(int node_position, SlotDirection direction, int slot) const;
};

struct EdgeSequence {
  std::vector<int> tokens;     // (alpha, l_1, l_2, ..., omega); l are SlotSequence indices
  std::vector<int> positions;  // (1, 2, ...)
  std::vector<int> tuples;     // (0, 1, 2, 1, 2, ..., 0)

  int length() const { return static_cast<int>(tokens.size()); }
  int edge_count() const { return (length() - 2) / 2; }
};

struct TokenizedGraph {
  NodeSequence nodes;
  std::vector<ParamSequence> params;  // one per node, in sequence order
  SlotSequence slots;
  EdgeSequence edges;
};

/// Permutation of all node ids under one of the four orderings.
std::vector<NodeId> order_nodes(const MaterialGraph& graph, NodeOrdering ordering, std::uint64_t seed = 0);

NodeSequence encode_nodes(const MaterialGraph& graph, NodeOrdering ordering, std::uint64_t seed = 0,
                          const SequenceLimits& limits = {});
/// Node sequence for an explicit order, depths measured with `mode`.
NodeSequence encode_nodes(const MaterialGraph& graph, std::span<const NodeId> order, DepthMode mode,
                          const SequenceLimits& limits = {});
/// Node sequence from raw (type, depth) pairs, without a source graph.
NodeSequence make_node_sequence(std::span<const int> types, std::span<const int> depths);
std::vector<OperatorType> decode_nodes(const NodeSequence& seq);

ParamSequence encode_params(const MaterialGraph& graph, NodeId node, const Quantizer& quantizer,
                            const SequenceLimits& limits = {});
std::vector<ParamSequence> encode_params(const MaterialGraph& graph, std::span<const NodeId> order,
                                         const Quantizer& quantizer, const SequenceLimits& limits = {});
/// Rebuilds the sparse parameter list; arrays drop trailing values that do
/// not fill a whole vector.
std::vector<ParamValue> decode_params(const OperatorSchema& schema, OperatorType type, const ParamSequence& seq,
                                      const Quantizer& quantizer);

SlotSequence build_slot_sequence(const OperatorLibrary& library, std::span<const int> types,
                                 std::span<const int> depths, const SequenceLimits& limits = {});
/// Slot streams for a node sequence (types/depths taken between alpha and omega).
SlotSequence build_slot_sequence(const OperatorLibrary& library, const NodeSequence& nodes,
                                 const SequenceLimits& limits = {});
/// Edges sorted by destination slot index, then source slot index.
EdgeSequence encode_edges(const MaterialGraph& graph, std::span<const NodeId> order, const SlotSequence& slots,
                          const SequenceLimits& limits = {});
EdgeSequence make_edge_sequence(std::span<const int> slot_tokens);
/// Edges between node positions (SlotRef::node is a position in the node sequence).
std::vector<Edge> decode_edges(const SlotSequence& slots, const EdgeSequence& edges);

TokenizedGraph tokenize(const MaterialGraph& graph, NodeOrdering ordering, std::uint64_t seed,
                        const Quantizer& quantizer, const SequenceLimits& limits = {});
/// Inverse of tokenize: node i of the result is sequence position i.
MaterialGraph detokenize(std::shared_ptr<const OperatorLibrary> library, const TokenizedGraph& tokens,
                         const Quantizer& quantizer);

}  // namespace matformer
