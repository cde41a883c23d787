#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <unistd.h>

#include "matformer/dataset.hpp"
#include "matformer/graph.hpp"
#include "matformer/operators.hpp"
#include "matformer/quantizer.hpp"
#include "matformer/training.hpp"

namespace testutil {

using namespace matformer;

inline std::shared_ptr<const OperatorLibrary> lib() { return builtin_library(); }

inline OperatorType type_of(const std::string& name) { return *lib()->find(name); }

inline NodeId add(MaterialGraph& g, const std::string& name, std::vector<ParamValue> params = {}) {
  return g.add_node(type_of(name), std::move(params));
}

inline void link(MaterialGraph& g, NodeId from, NodeId to, int to_slot = 0, int from_slot = 0) {
  g.add_edge(out_slot(from, from_slot), in_slot(to, to_slot));
}

/// uniform_gray -> invert -> output_albedo
inline MaterialGraph chain3() {
  MaterialGraph g(lib());
  const NodeId a = add(g, "uniform_gray");
  const NodeId b = add(g, "invert");
  const NodeId c = add(g, "output_albedo");
  link(g, a, b);
  link(g, b, c);
  return g;
}

inline std::vector<MaterialGraph> random_graphs(int count, int lo, int hi, std::uint64_t seed) {
  CorpusSpec spec;
  spec.graph_count = count;
  spec.min_nodes = lo;
  spec.max_nodes = hi;
  spec.seed = seed;
  return synthesize_base_graphs(spec, lib());
}

/// Half a quantization bin per continuous component, exact for discrete ones.
inline auto half_bin(const Quantizer& q) {
  return [&q](OperatorType t, int k, int c) {
    const auto& ps = lib()->schema(t).params[k];
    if (ps.is_discrete) return 0.0;
    return 0.5 * q.bin_width(QuantKey{t.id, k, c}) + 1e-9;
  };
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("matformer_test_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

/// Untrained bundle with small random weights; `scale` > 0.02 makes the
/// stage distributions far from uniform.
inline std::shared_ptr<ModelBundle> random_bundle(std::uint64_t seed, double scale = 0.02) {
  auto b = std::make_shared<ModelBundle>();
  b->library = lib();
  b->config = ModelConfig::for_library(*lib());
  b->config.layers = 1;
  b->config.heads = 2;
  b->config.dim = 16;
  b->quantizer = Quantizer::fit(*lib(), random_graphs(20, 5, 40, seed));
  b->nodes = init_stage_params<float>(Stage::nodes, b->config, seed);
  b->params = init_stage_params<float>(Stage::params, b->config, seed + 1);
  b->edges = init_stage_params<float>(Stage::edges, b->config, seed + 2);
  std::mt19937_64 rng(seed);
  for (auto* p : {&b->nodes, &b->params, &b->edges}) {
    for (int i = 0; i < p->size(); ++i) {
      nn::Mat<float> noise(p->at(i).rows(), p->at(i).cols());
      nn::fill_normal(noise, scale, rng);
      p->at(i) += noise;
    }
  }
  return b;
}

}  // namespace testutil
