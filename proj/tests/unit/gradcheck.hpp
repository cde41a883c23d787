#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "matformer/models.hpp"
#include "matformer/operators.hpp"

namespace testutil {

using namespace matformer;

/// A small graph touching vector, array, discrete and multi-input operators.
inline MaterialGraph gradcheck_graph(std::shared_ptr<const OperatorLibrary> lib) {
  auto t = [&](const char* n) { return *lib->find(n); };
  MaterialGraph g(lib);
  const auto& noise = lib->schema(t("value_noise"));
  const NodeId a = g.add_node(t("value_noise"), {{noise.param_index("scale"), {7}}});
  const NodeId b = g.add_node(t("uniform_color"), {{0, {0.2, 0.3, 0.9}}});
  const NodeId c = g.add_node(t("blend"), {{1, {0.7}}});
  const NodeId d = g.add_node(t("gradient_map"), {{0, {0.1, 0.2, 0.3, 0.5, 0.5, 0.5, 0.9, 0.8, 0.7}}});
  const NodeId e = g.add_node(t("output_albedo"));
  g.add_edge(out_slot(a), in_slot(c, 0));
  g.add_edge(out_slot(b), in_slot(c, 1));
  g.add_edge(out_slot(c), in_slot(d));
  g.add_edge(out_slot(d), in_slot(e));
  return g;
}

struct TensorCheck {
  std::string name;
  double relative_error = 0;
  double gradient_norm = 0;
};

/// Central finite differences on every element of every tensor, compared as
/// ||numeric - analytic|| / max(||numeric||, ||analytic||) per tensor.
inline std::vector<TensorCheck> check_stage_gradients(Stage stage, const ModelConfig& cfg,
                                                      std::span<const TokenizedGraph* const> batch,
                                                      std::uint64_t seed, double h = 1e-5) {
  auto p = init_stage_params<double>(stage, cfg, seed);
  // Push weights away from their initial values so every path is exercised.
  std::mt19937_64 rng(seed + 1);
  for (int i = 0; i < p.size(); ++i) {
    nn::Mat<double> noise(p.at(i).rows(), p.at(i).cols());
    nn::fill_normal(noise, 0.3, rng);
    p.at(i) += noise;
  }
  auto grads = p.zeros_like();
  stage_loss<double>(stage, cfg, p, &grads, batch);
  std::vector<TensorCheck> out;
  for (int i = 0; i < p.size(); ++i) {
    double num2 = 0, an2 = 0, diff2 = 0;
    for (Eigen::Index k = 0; k < p.at(i).size(); ++k) {
      double& w = p.at(i).data()[k];
      const double orig = w;
      w = orig + h;
      const double up = stage_loss<double>(stage, cfg, p, nullptr, batch).mean();
      w = orig - h;
      const double down = stage_loss<double>(stage, cfg, p, nullptr, batch).mean();
      w = orig;
      const double numeric = (up - down) / (2 * h);
      const double analytic = grads.at(i).data()[k];
      num2 += numeric * numeric;
      an2 += analytic * analytic;
      diff2 += (numeric - analytic) * (numeric - analytic);
    }
    const double scale = std::max({std::sqrt(num2), std::sqrt(an2), 1e-12});
    out.push_back({p.names()[i], std::sqrt(diff2) / scale, std::sqrt(an2)});
  }
  return out;
}

}  // namespace testutil
