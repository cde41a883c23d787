#pragma once

#include <random>
#include <span>
#include <string>
#include <vector>

#include "matformer/nn/tape.hpp"

namespace matformer::nn {

struct TransformerConfig {
  int layers = 2;
  int heads = 4;
  int dim = 64;
  int ff_mult = 4;
  int cond_dim = 0;  // > 0 adds a condition path to every feed-forward block
  bool causal = true;

  void check() const;
};

/// Adds and initializes the trunk tensors of one transformer under `prefix`:
/// pre-norm attention and GELU feed-forward blocks, then a final layer norm.
template <class T>
void init_transformer(ParamSet<T>& params, const std::string& prefix, const TransformerConfig& cfg,
                      std::mt19937_64& rng);

/// Adds a [in, out] weight (normal 0.02) and a zero [1, out] bias.
template <class T>
void init_linear(ParamSet<T>& params, const std::string& name, int in, int out, std::mt19937_64& rng);

template <class T>
Var linear(Tape<T>& tape, const std::string& name, Var x) {
  return tape.linear(x, tape.param(name + ".w"), tape.param(name + ".b"));
}

/// Runs the trunk on summed input embeddings x ([N, dim]). `cond` holds one
/// condition row per input row and is required iff cfg.cond_dim > 0.
template <class T>
Var transformer_forward(Tape<T>& tape, const std::string& prefix, const TransformerConfig& cfg, Var x,
                        std::span<const Segment> segments, Var cond = {});

/// Incremental evaluation of a causal trunk with cached keys and values. Each
/// step produces the same output row as transformer_forward would for the
/// newest position.
template <class T>
class TransformerRunner {
 public:
  TransformerRunner(const ParamSet<T>& params, const std::string& prefix, const TransformerConfig& cfg);

  void reset() { length_ = 0; }
  int length() const { return length_; }
  /// Appends one position and returns its final hidden row.
  RowVec<T> step(const RowVec<T>& x, const RowVec<T>* cond = nullptr);

 private:
  struct Layer {
    const Mat<T>*ln1_g, *ln1_b, *qkv_w, *qkv_b, *out_w, *out_b, *ln2_g, *ln2_b, *fc_w, *fc_b, *proj_w, *proj_b;
    const Mat<T>*cln_g = nullptr, *cln_b = nullptr, *cfc_w = nullptr, *cfc_b = nullptr, *cproj_w = nullptr,
                 *cproj_b = nullptr;
    Mat<T> keys, values;
  };

  TransformerConfig cfg_;
  std::vector<Layer> layers_;
  const Mat<T>*lnf_g_, *lnf_b_;
  int length_ = 0;
};

/// Row-wise layer norm and GELU shared by the incremental path.
template <class T>
RowVec<T> layer_norm_row(const RowVec<T>& x, const Mat<T>& gain, const Mat<T>& bias);
template <class T>
T gelu_scalar(T v);

extern template class TransformerRunner<float>;
extern template class TransformerRunner<double>;

}  // namespace matformer::nn
