#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "matformer/graph.hpp"
#include "matformer/nn/transformer.hpp"
#include "matformer/sequencer.hpp"

namespace matformer {

enum class Stage { nodes, params, edges };

std::string to_string(Stage stage);
Stage parse_stage(const std::string& name);

/// Sizes shared by the three stage models. Vocabulary sizes follow from the
/// operator library, the quantizer level count and the sequence limits.
struct ModelConfig {
  int layers = 2;
  int heads = 4;
  int dim = 64;
  int ff_mult = 4;
  int num_types = 0;           // operator types in the library
  int value_levels = 32;       // quantization levels; also bounds discrete ranges
  int max_params = 0;          // most parameters on one operator
  int max_slots_per_node = 0;  // most slots (in + out) on one operator
  int max_vector_dim = 1;      // widest vector parameter
  SequenceLimits limits;

  static ModelConfig for_library(const OperatorLibrary& library, int value_levels = 32);
  /// Tiny trunk (1 layer, 2 heads, width 8) for gradient checks.
  ModelConfig micro() const;

  // Stream vocabularies.
  int type_alpha() const { return num_types; }
  int type_omega() const { return num_types + 1; }
  int value_alpha() const { return value_levels; }
  int value_omega() const { return value_levels + 1; }
  int depth_vocab() const { return kMaxDepthToken + 1; }

  nn::TransformerConfig trunk(bool causal, int cond_dim = 0) const;

  std::string to_json() const;
  static ModelConfig from_json(const std::string& text);
  bool operator==(const ModelConfig&) const;
};

/// Fresh weights for one stage: normal(0, 0.02) projections and embeddings,
/// unit layer-norm gains, zero biases.
template <class T>
nn::ParamSet<T> init_stage_params(Stage stage, const ModelConfig& config, std::uint64_t seed);

template <class T>
struct LossValue {
  T sum = 0;
  long count = 0;
  T mean() const { return count ? sum / static_cast<T>(count) : T(0); }
};

/// Teacher-forced categorical cross-entropy of one stage over a batch, averaged
/// over every predicted token of every output stream. With `grads`, the
/// gradient of the mean is accumulated into it.
template <class T>
LossValue<T> stage_loss(Stage stage, const ModelConfig& config, const nn::ParamSet<T>& params,
                        nn::ParamSet<T>* grads, std::span<const TokenizedGraph* const> batch);

/// Incremental node-stage model: feed (type, depth) tokens one at a time and
/// read the next-token logits.
template <class T>
class NodeStepper {
 public:
  NodeStepper(const ModelConfig& config, const nn::ParamSet<T>& params);
  /// `type` is kAlpha or an operator id; positions are 1-based.
  void push(int type, int depth);
  int length() const { return runner_.length(); }
  /// Over num_types + 1 entries; the last is omega.
  const nn::RowVec<T>& type_logits() const { return type_logits_; }
  const nn::RowVec<T>& depth_logits() const { return depth_logits_; }

 private:
  const ModelConfig& config_;
  const nn::ParamSet<T>& params_;
  nn::TransformerRunner<T> runner_;
  nn::RowVec<T> type_logits_, depth_logits_;
};

/// Incremental parameter-stage model for the nodes of one node sequence.
template <class T>
class ParamStepper {
 public:
  ParamStepper(const ModelConfig& config, const nn::ParamSet<T>& params, const NodeSequence& nodes);
  /// Starts the parameter sequence of node j (0-based sequence position).
  void begin_node(int j);
  /// Value token (kAlpha or a value), parameter index and the derived side streams.
  void push(int value, int param_index, int position, int vector_elem, int array_elem, int ordinal);
  /// Over value_levels + 1 entries; the last is omega.
  const nn::RowVec<T>& value_logits() const { return value_logits_; }
  const nn::RowVec<T>& index_logits() const { return index_logits_; }
  /// Encoder embedding of node j.
  nn::RowVec<T> node_embedding(int j) const { return cond_.row(j + 1); }

 private:
  const ModelConfig& config_;
  const nn::ParamSet<T>& params_;
  nn::Mat<T> cond_;
  nn::RowVec<T> current_cond_;
  nn::TransformerRunner<T> runner_;
  nn::RowVec<T> value_logits_, index_logits_;
};

/// Incremental edge-stage model over a fixed slot sequence.
template <class T>
class EdgeStepper {
 public:
  EdgeStepper(const ModelConfig& config, const nn::ParamSet<T>& params, const SlotSequence& slots);
  /// `token` is kAlpha, kOmega or a slot index; `tuple` is 0, 1 or 2.
  void push(int token, int position, int tuple);
  /// Pointer logits over slots 0..m-1 followed by omega.
  const nn::RowVec<T>& logits() const { return logits_; }
  int slot_count() const { return slot_count_; }
  /// Candidate matrix rows: slot embeddings, then omega, then alpha.
  const nn::Mat<T>& candidates() const { return candidates_; }

 private:
  const ModelConfig& config_;
  const nn::ParamSet<T>& params_;
  int slot_count_ = 0;
  nn::Mat<T> candidates_;
  nn::Mat<T> projected_;  // gen.in applied to every candidate row
  nn::TransformerRunner<T> runner_;
  nn::RowVec<T> logits_;
};

extern template class NodeStepper<float>;
extern template class NodeStepper<double>;
extern template class ParamStepper<float>;
extern template class ParamStepper<double>;
extern template class EdgeStepper<float>;
extern template class EdgeStepper<double>;

}  // namespace matformer
