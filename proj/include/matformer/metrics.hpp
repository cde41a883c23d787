#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "matformer/evaluator.hpp"
#include "matformer/graph.hpp"

namespace matformer {

/// Distances beyond this many edges (and unreachable targets) land in the
/// overflow bin.
inline constexpr int kDistanceCap = 32;

/// Raw per-graph / per-node samples of the graph statistics. Histograms are
/// built from these at comparison time so both corpora share one binning.
struct GraphCorpusStats {
  int num_types = 0;
  int graph_count = 0;
  std::vector<std::string> type_names;
  std::vector<int> node_count;    // per graph
  std::vector<int> components;    // per graph, weakly connected
  std::vector<int> longest_path;  // per graph, in edges
  std::vector<std::vector<int>> type_count;        // [type] per graph (zeros included)
  std::vector<std::vector<int>> output_distance;   // [type] per node; kDistanceCap when unreachable
  std::vector<std::vector<int>> connected_inputs;  // [type] per node
  // (a, b) -> per graph holding both types: shortest directed path of at
  // least one edge from an a-node to a b-node, capped.
  std::map<std::pair<int, int>, std::vector<int>> pair_distance;
};

GraphCorpusStats graph_statistics(std::span<const MaterialGraph> corpus);

/// Per-graph pieces, exposed for tests.
int component_count(const MaterialGraph& graph);
int longest_path(const MaterialGraph& graph);
/// Directed hop distance from each node to the nearest output marker, or -1.
std::vector<int> output_distances(const MaterialGraph& graph);

/// Unit bins 0..bins-1; values >= bins go to the last bin. Normalized to sum
/// 1 (all zeros for an empty sample).
std::vector<double> histogram(std::span<const int> values, int bins);

/// Sum over bins of |cumulative difference| times the bin width. Throws
/// std::invalid_argument when the bin counts differ.
double emd_1d(std::span<const double> a, std::span<const double> b, double bin_width = 1.0);

struct StatisticDistance {
  std::string name;
  double emd = 0;
};

/// Mean EMD over every statistic histogram. Each histogram spans [0, 1]
/// (bin width 1/bins) so statistics of different ranges weigh equally. A
/// histogram with samples on only one side compares against unit mass in
/// the overflow bin.
double graph_statistics_distance(const GraphCorpusStats& a, const GraphCorpusStats& b,
                                 std::vector<StatisticDistance>* details = nullptr);

/// Typed graph for edit distance: node labels and directed edges carrying
/// their slot numbers.
struct GedGraph {
  std::vector<int> labels;
  struct Arc {
    int from = 0, to = 0, from_slot = 0, to_slot = 0;
    auto operator<=>(const Arc&) const = default;
  };
  std::vector<Arc> arcs;

  static GedGraph from(const MaterialGraph& graph);
};

struct GedOptions {
  int exact_cutoff = 12;       // larger graphs use beam search
  long max_expansions = 200000;  // A* budget before falling back to beam search
  int beam_width = 64;
};

struct GedResult {
  int distance = 0;     // cost of the best edit path found
  int lower_bound = 0;  // admissible bound; equals distance when exact
  bool exact = true;
};

/// Minimum number of node and edge insertions/deletions; nodes may only be
/// kept (matched) with a node of the same label.
GedResult graph_edit_distance(const GedGraph& a, const GedGraph& b, const GedOptions& options = {});
GedResult graph_edit_distance(const MaterialGraph& a, const MaterialGraph& b, const GedOptions& options = {});

struct NearestNeighborResult {
  double value = 0;         // numerator / denominator
  double numerator = 0;     // mean over generated of distance to the nearest reference
  double denominator = 0;   // mean over references of distance to the nearest other reference
  int generated_eligible = 0;
  int reference_eligible = 0;
  int inexact_pairs = 0;    // edit distances that came from the beam fallback
};

/// Normalized nearest-neighbour edit distance over graphs with at least
/// `min_nodes` nodes. Throws std::invalid_argument when fewer than one
/// generated or two reference graphs are eligible, or the denominator is 0.
NearestNeighborResult nearest_neighbor_edit_distance(std::span<const MaterialGraph> generated,
                                                     std::span<const MaterialGraph> reference, int min_nodes = 50,
                                                     const GedOptions& options = {});

inline constexpr int kRenderFeatureDim = 21;

/// albedo RGB mean/variance, roughness/height/metallic mean/variance,
/// 8-bin albedo luminance histogram, mean albedo luminance gradient magnitude.
std::vector<double> render_features(const MaterialOutput& output);

/// Frechet distance between Gaussian fits of two feature populations (rows
/// are samples). Throws std::invalid_argument for fewer than 2 rows per side
/// or mismatched widths.
double frechet_distance(const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b);
double render_stat_distance(std::span<const MaterialOutput> generated, std::span<const MaterialOutput> reference);

struct MetricReport {
  double e_g = 0;
  std::vector<StatisticDistance> statistics;
  std::optional<NearestNeighborResult> d_nne;
  std::string d_nne_error;  // why D_nne is missing
  std::optional<double> render_stat;
  std::string render_stat_error;
  int generated_count = 0;
  int reference_count = 0;

  std::string to_json() const;
  std::string to_table() const;
};

struct MetricOptions {
  int render_resolution = 32;
  bool render = true;
  int min_nodes = 50;
  GedOptions ged;
};

MetricReport evaluate_metrics(std::span<const MaterialGraph> generated, std::span<const MaterialGraph> reference,
                              const MetricOptions& options = {});

}  // namespace matformer
