#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "matformer/graph.hpp"

namespace matformer {

struct CorpusSpec {
  int graph_count = 200;  // base graphs
  int min_nodes = 5;
  int max_nodes = 120;
  int augmentations = 100;  // perturbed copies per base graph
  int validation_bases = 5;
  double param_change_probability = 0.35;
  std::uint64_t seed = 1;
};

struct FilterThresholds {
  int max_nodes = 400;
  int max_edges = 700;
  int max_input_slots = 21;
  int max_output_slots = 14;
};

struct FilterReport {
  int kept = 0;
  int too_many_nodes = 0;
  int too_many_edges = 0;
  int too_many_input_slots = 0;
  int too_many_output_slots = 0;
};

/// One layered material recipe with exactly `node_count` nodes (>= 3): a body
/// of generator chains and filters merged together, then one filter + output
/// marker tail per chosen material channel. Node ids are shuffled.
MaterialGraph synthesize_graph(std::shared_ptr<const OperatorLibrary> library, int node_count, std::uint64_t seed,
                               double param_change_probability = 0.35);

/// `spec.graph_count` recipes with node counts uniform in
/// [spec.min_nodes, spec.max_nodes]; graph i depends only on (seed, i).
std::vector<MaterialGraph> synthesize_base_graphs(const CorpusSpec& spec,
                                                  std::shared_ptr<const OperatorLibrary> library);

/// Uniform draw in [0.8v, 1.2v] (endpoints sorted for negative v), clamped
/// to [lo, hi].
double perturb_value(double v, double lo, double hi, std::mt19937_64& rng);

/// Copy of `graph` with every explicitly set continuous component perturbed;
/// discrete parameters and structure are unchanged.
MaterialGraph augment_once(const MaterialGraph& graph, std::mt19937_64& rng);
std::vector<MaterialGraph> augment(const MaterialGraph& graph, int count, std::uint64_t seed);

bool passes_filter(const MaterialGraph& graph, const FilterThresholds& thresholds, FilterReport* report = nullptr);
std::vector<MaterialGraph> filter_corpus(std::vector<MaterialGraph> graphs, const FilterThresholds& thresholds,
                                         FilterReport* report = nullptr);

struct Corpus {
  std::vector<MaterialGraph> train;
  std::vector<MaterialGraph> validation;
  std::vector<int> train_base;  // base-graph index of each train sample
  std::vector<int> validation_base;
};

/// Augments every base graph; all copies of `validation_bases` seeded-random
/// bases form the validation split. Throws std::invalid_argument with fewer
/// than validation_bases + 1 bases.
Corpus split_corpus(const std::vector<MaterialGraph>& bases, int augmentations, int validation_bases,
                    std::uint64_t seed);

/// synthesize -> filter -> split.
Corpus forge_corpus(const CorpusSpec& spec, std::shared_ptr<const OperatorLibrary> library,
                    FilterReport* report = nullptr);

}  // namespace matformer
