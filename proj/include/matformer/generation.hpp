#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "matformer/models.hpp"
#include "matformer/training.hpp"

namespace matformer {

/// Sampling controls for one stage. Temperature 0 or greedy=true decodes by
/// argmax over the legal entries.
struct StageSampling {
  double temperature = 1.0;
  bool greedy = false;

  bool is_greedy() const { return greedy || temperature <= 0.0; }
};

struct SamplerConfig {
  StageSampling nodes, params, edges;
  std::uint64_t seed = 1;
  SequenceLimits limits;

  static SamplerConfig uniform(double temperature, bool greedy = false, std::uint64_t seed = 1) {
    SamplerConfig c;
    c.nodes = c.params = c.edges = StageSampling{temperature, greedy};
    c.seed = seed;
    return c;
  }
};

/// softmax(logits / temperature) with masked entries set to exactly 0 and the
/// rest renormalized. Throws std::logic_error when every entry is masked.
std::vector<double> masked_distribution(std::span<const float> logits, const std::vector<bool>& legal,
                                        double temperature);
/// Index drawn from a distribution (inverse CDF).
int sample_index(const std::vector<double>& probs, std::mt19937_64& rng);
/// Highest-logit legal entry (lowest index on ties).
int masked_argmax(std::span<const float> logits, const std::vector<bool>& legal);

/// Inclusive range of depth tokens a node may carry.
struct DepthBounds {
  int lo = 0;
  int hi = kMaxDepthToken;
};

/// Depth tokens each node of `prefix` can have in any graph that contains it:
/// anchors (generators, or output markers for to_output) are at 0; when the
/// prefix holds an anchor, other nodes are at least 1 and at most their depth
/// inside the prefix.
std::vector<DepthBounds> prefix_depth_bounds(const MaterialGraph& prefix, DepthMode mode);

/// Node stage: continues (alpha, prefix...) until omega or the node cap. When
/// `prefix_depths` is empty, depth tokens of the prefix are unknown and are
/// chosen within `prefix_bounds` (empty: unconstrained) by a beam search over
/// the model's likelihood.
NodeSequence sample_nodes(const ModelBundle& bundle, std::span<const int> prefix_types,
                          std::span<const int> prefix_depths, std::span<const DepthBounds> prefix_bounds,
                          const StageSampling& sampling, int max_nodes, std::mt19937_64& rng);

/// Parameter stage for node j of a node sequence. Index tokens are limited to
/// the operator's parameters and never revisit an earlier parameter; vectors
/// are always completed; discrete values stay in range.
ParamSequence sample_params(const ModelBundle& bundle, ParamStepper<float>& stepper, const OperatorSchema& schema,
                            int j, const StageSampling& sampling, int max_tokens, std::mt19937_64& rng);

/// Edge stage. Source tokens are output slots with at least one legal
/// destination (or omega); destination tokens are free input slots on nodes
/// that are neither the source node nor its ancestors. `pinned` edges
/// (source slot, destination slot) count toward acyclicity from the start,
/// reserve their destination slot, and are emitted before omega if the model
/// has not produced them. No other edge may join two of the first
/// `frozen_nodes` node positions.
EdgeSequence sample_edges(const ModelBundle& bundle, const SlotSequence& slots,
                          std::span<const std::pair<int, int>> pinned, const StageSampling& sampling, int max_edges,
                          std::mt19937_64& rng, int frozen_nodes = 0);

struct GeneratedGraph {
  MaterialGraph graph;
  NodeSequence nodes;
  std::vector<ParamSequence> params;
  EdgeSequence edges;
  std::vector<bool> pinned;  // per node of `graph`
};

/// nodes -> parameters per node -> edges, assembled and checked with the
/// independent validator (a failure there throws std::logic_error).
GeneratedGraph generate_graph(const ModelBundle& bundle, const SamplerConfig& config, std::mt19937_64& rng);

/// Completes the subgraph induced by `pinned` (ids of `partial`, any order).
/// Pinned nodes become the first nodes of the result in ascending id order,
/// with their types, parameters and mutual edges unchanged.
GeneratedGraph complete_graph(const ModelBundle& bundle, const MaterialGraph& partial, std::span<const NodeId> pinned,
                              const SamplerConfig& config, std::mt19937_64& rng);

/// `count` completions; completion i uses an RNG seeded from (config.seed, i).
std::vector<GeneratedGraph> autocomplete(const ModelBundle& bundle, const MaterialGraph& partial,
                                         std::span<const NodeId> pinned, int count, const SamplerConfig& config);

}  // namespace matformer
