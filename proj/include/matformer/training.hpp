#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "matformer/models.hpp"
#include "matformer/nn/adam.hpp"
#include "matformer/quantizer.hpp"

namespace matformer {

struct TrainConfig {
  Stage stage = Stage::nodes;
  NodeOrdering ordering = NodeOrdering::back_to_front_reversed;
  int batch_size = 64;
  double lr = 1e-4;
  double clip_norm = 1.0;
  int max_epochs = 50;
  long max_steps = 0;  // 0: no step cap
  int patience = 3;    // epochs without validation improvement
  std::uint64_t seed = 1;

  /// 64 graphs per batch for nodes and params, 16 for edges.
  static int default_batch_size(Stage stage) { return stage == Stage::edges ? 16 : 64; }
};

struct EpochLog {
  int epoch = 0;  // 0-based
  long step = 0;
  double train_loss = 0;  // mean over the epoch's batches
  double val_loss = 0;
};

/// Everything that identifies a trained stage model.
struct StageModel {
  Stage stage = Stage::nodes;
  NodeOrdering ordering = NodeOrdering::back_to_front_reversed;
  ModelConfig config;
  Quantizer quantizer;
  std::string library_version;
  std::uint64_t library_hash = 0;
  nn::ParamSet<float> params;
};

void save_stage_model(const StageModel& model, const std::filesystem::path& path);
StageModel load_stage_model(const std::filesystem::path& path);

/// Teacher-forced training of one stage with Adam, per-epoch validation and
/// early stopping. Data order and randomized node orders depend only on
/// (seed, epoch), so a resumed run continues bit-identically.
class Trainer {
 public:
  Trainer(TrainConfig config, ModelConfig model_config, Quantizer quantizer,
          std::shared_ptr<const OperatorLibrary> library, std::vector<MaterialGraph> train,
          std::vector<MaterialGraph> validation);

  /// One optimizer step on the next batch; returns its mean loss.
  double step();
  /// Mean teacher-forced loss (token-weighted) over a graph set.
  double evaluate(const std::vector<TokenizedGraph>& graphs) const;
  double train_loss() const { return evaluate(tokenize_all(train_, fixed_seed(0x7a))); }
  double validation_loss() const { return evaluate(validation_tokens_); }

  /// Runs until early stopping, max_epochs or max_steps. `on_epoch` sees each
  /// finished epoch.
  void run(const std::function<void(const EpochLog&)>& on_epoch = {});

  const nn::ParamSet<float>& params() const { return params_; }
  nn::ParamSet<float>& params() { return params_; }
  /// Weights with the lowest validation loss so far (current weights before
  /// the first evaluation).
  const nn::ParamSet<float>& best_params() const { return best_ ? *best_ : params_; }
  double best_validation_loss() const { return best_val_; }
  const std::vector<EpochLog>& log() const { return log_; }
  long steps() const { return adam_.steps(); }
  int epoch() const { return epoch_; }
  bool stopped_early() const { return stopped_; }
  const TrainConfig& config() const { return config_; }
  const ModelConfig& model_config() const { return model_config_; }
  nn::Adam<float>& optimizer() { return adam_; }

  StageModel model(bool best = true) const;

  /// Resume state: current weights, optimizer moments, position in the data
  /// stream and early-stopping bookkeeping. The best weights go to a sibling
  /// file with suffix ".best".
  void save_state(const std::filesystem::path& path) const;
  void load_state(const std::filesystem::path& path);

 private:
  std::uint64_t fixed_seed(std::uint64_t tag) const;
  std::vector<TokenizedGraph> tokenize_all(const std::vector<MaterialGraph>& graphs, std::uint64_t seed) const;
  void start_epoch();
  void finish_epoch();

  TrainConfig config_;
  ModelConfig model_config_;
  Quantizer quantizer_;
  std::shared_ptr<const OperatorLibrary> library_;
  std::vector<MaterialGraph> train_;
  std::vector<MaterialGraph> validation_;
  std::vector<TokenizedGraph> validation_tokens_;

  nn::ParamSet<float> params_;
  nn::ParamSet<float> grads_;
  nn::Adam<float> adam_;

  int epoch_ = 0;
  int batch_ = 0;  // next batch inside the epoch
  std::vector<int> order_;
  double epoch_loss_sum_ = 0;
  int epoch_batches_ = 0;

  std::optional<nn::ParamSet<float>> best_;
  double best_val_ = 1e300;
  int bad_epochs_ = 0;
  bool stopped_ = false;
  std::vector<EpochLog> log_;
};

/// Three compatible stage models plus the shared quantizer.
struct ModelBundle {
  std::shared_ptr<const OperatorLibrary> library;
  ModelConfig config;
  Quantizer quantizer;
  NodeOrdering ordering = NodeOrdering::back_to_front_reversed;
  nn::ParamSet<float> nodes, params, edges;
};

class BundleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Checks that the three models agree on library, quantizer and config and
/// match `library`; throws BundleError with a diagnostic otherwise.
ModelBundle make_bundle(std::shared_ptr<const OperatorLibrary> library, StageModel nodes, StageModel params,
                        StageModel edges);
/// Directory with nodes.ckpt, params.ckpt, edges.ckpt and bundle.json.
void save_bundle(const ModelBundle& bundle, const std::filesystem::path& dir);
ModelBundle load_bundle(const std::filesystem::path& dir, std::shared_ptr<const OperatorLibrary> library);

}  // namespace matformer
