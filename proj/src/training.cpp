#include "matformer/training.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <numeric>
#include <random>
#include <sstream>

#include "matformer/graph_io.hpp"
#include "matformer/hash.hpp"
#include "matformer/nn/checkpoint.hpp"

namespace matformer {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json stage_meta(Stage stage, NodeOrdering ordering, const std::string& lib_version, std::uint64_t lib_hash) {
  return {{"stage", to_string(stage)},
          {"ordering", to_string(ordering)},
          {"library_version", lib_version},
          {"library_hash", hex64(lib_hash)}};
}

std::uint64_t parse_hex(const std::string& s) { return std::stoull(s, nullptr, 16); }

std::string file_digest(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return hex64(fnv1a(ss.str()));
}

}  // namespace

void save_stage_model(const StageModel& model, const fs::path& path) {
  nn::Checkpoint ck;
  ck.config_json = model.config.to_json();
  ck.quantizer_json = model.quantizer.to_json();
  ck.meta_json = stage_meta(model.stage, model.ordering, model.library_version, model.library_hash).dump();
  ck.params = model.params;
  nn::save_checkpoint(ck, path);
}

StageModel load_stage_model(const fs::path& path) {
  auto ck = nn::load_checkpoint(path);
  StageModel m;
  m.config = ModelConfig::from_json(ck.config_json);
  m.quantizer = Quantizer::from_json(ck.quantizer_json);
  const auto meta = json::parse(ck.meta_json);
  m.stage = parse_stage(meta.at("stage"));
  m.ordering = parse_ordering(meta.at("ordering"));
  m.library_version = meta.at("library_version");
  m.library_hash = parse_hex(meta.at("library_hash"));
  // Shapes must match a fresh model of the recorded config.
  const auto reference = init_stage_params<float>(m.stage, m.config, 0);
  if (reference.size() != ck.params.size()) throw nn::CheckpointError(path.string() + ": tensor set does not match its config");
  for (int i = 0; i < reference.size(); ++i) {
    const auto& name = reference.names()[i];
    if (!ck.params.contains(name)) throw nn::CheckpointError(path.string() + ": missing tensor " + name);
    const auto& t = ck.params.at(name);
    if (t.rows() != reference.at(i).rows() || t.cols() != reference.at(i).cols()) {
      throw nn::CheckpointError(path.string() + ": tensor " + name + " has the wrong shape");
    }
  }
  // Keep the canonical tensor order.
  for (int i = 0; i < reference.size(); ++i) {
    m.params.add(reference.names()[i], 0, 0) = ck.params.at(reference.names()[i]);
  }
  return m;
}

Trainer::Trainer(TrainConfig config, ModelConfig model_config, Quantizer quantizer,
                 std::shared_ptr<const OperatorLibrary> library, std::vector<MaterialGraph> train,
                 std::vector<MaterialGraph> validation)
    : config_(config),
      model_config_(model_config),
      quantizer_(std::move(quantizer)),
      library_(std::move(library)),
      train_(std::move(train)),
      validation_(std::move(validation)),
      params_(init_stage_params<float>(config.stage, model_config, config.seed)),
      grads_(params_.zeros_like()),
      adam_(params_, nn::AdamConfig{config.lr, 0.9, 0.999, 1e-8, config.clip_norm}) {
  if (train_.empty()) throw std::invalid_argument("training set is empty");
  if (config_.batch_size < 1) throw std::invalid_argument("batch size must be positive");
  validation_tokens_ = tokenize_all(validation_, fixed_seed(0x5a1));
}

std::uint64_t Trainer::fixed_seed(std::uint64_t tag) const { return mix_seed(config_.seed, tag); }

std::vector<TokenizedGraph> Trainer::tokenize_all(const std::vector<MaterialGraph>& graphs, std::uint64_t seed) const {
  std::vector<TokenizedGraph> out;
  out.reserve(graphs.size());
  for (size_t i = 0; i < graphs.size(); ++i) {
    out.push_back(tokenize(graphs[i], config_.ordering, mix_seed(seed, i), quantizer_, model_config_.limits));
  }
  return out;
}

double Trainer::evaluate(const std::vector<TokenizedGraph>& graphs) const {
  double sum = 0;
  long count = 0;
  const size_t chunk = static_cast<size_t>(config_.batch_size);
  for (size_t i = 0; i < graphs.size(); i += chunk) {
    std::vector<const TokenizedGraph*> batch;
    for (size_t j = i; j < std::min(graphs.size(), i + chunk); ++j) batch.push_back(&graphs[j]);
    const auto l = stage_loss<float>(config_.stage, model_config_, params_, nullptr, batch);
    sum += l.sum;
    count += l.count;
  }
  return count ? sum / static_cast<double>(count) : 0.0;
}

void Trainer::start_epoch() {
  order_.resize(train_.size());
  std::iota(order_.begin(), order_.end(), 0);
  std::mt19937_64 rng(mix_seed(config_.seed, static_cast<std::uint64_t>(epoch_), 0xe0));
  std::shuffle(order_.begin(), order_.end(), rng);
  batch_ = 0;
  epoch_loss_sum_ = 0;
  epoch_batches_ = 0;
}

double Trainer::step() {
  if (order_.empty()) start_epoch();
  const size_t begin = static_cast<size_t>(batch_) * config_.batch_size;
  const size_t end = std::min(order_.size(), begin + config_.batch_size);
  std::vector<TokenizedGraph> tokens;
  tokens.reserve(end - begin);
  for (size_t i = begin; i < end; ++i) {
    const auto g = static_cast<std::uint64_t>(order_[i]);
    tokens.push_back(tokenize(train_[g], config_.ordering, mix_seed(config_.seed, epoch_, g), quantizer_,
                              model_config_.limits));
  }
  std::vector<const TokenizedGraph*> batch;
  for (const auto& t : tokens) batch.push_back(&t);
  grads_.set_zero();
  const auto loss = stage_loss<float>(config_.stage, model_config_, params_, &grads_, batch);
  const double mean = loss.mean();
  if (!std::isfinite(mean)) {
    throw std::runtime_error("non-finite training loss at epoch " + std::to_string(epoch_) + " batch " +
                             std::to_string(batch_));
  }
  adam_.step(params_, grads_);
  epoch_loss_sum_ += mean;
  ++epoch_batches_;
  ++batch_;
  if (end >= order_.size()) finish_epoch();
  return mean;
}

void Trainer::finish_epoch() {
  EpochLog entry;
  entry.epoch = epoch_;
  entry.step = adam_.steps();
  entry.train_loss = epoch_batches_ ? epoch_loss_sum_ / epoch_batches_ : 0.0;
  entry.val_loss = validation_tokens_.empty() ? entry.train_loss : validation_loss();
  log_.push_back(entry);
  if (entry.val_loss < best_val_) {
    best_val_ = entry.val_loss;
    best_ = params_;
    bad_epochs_ = 0;
  } else if (++bad_epochs_ >= config_.patience) {
    stopped_ = true;
  }
  ++epoch_;
  order_.clear();
}

void Trainer::run(const std::function<void(const EpochLog&)>& on_epoch) {
  while (!stopped_ && epoch_ < config_.max_epochs && (config_.max_steps <= 0 || adam_.steps() < config_.max_steps)) {
    const size_t logged = log_.size();
    step();
    if (on_epoch && log_.size() > logged) on_epoch(log_.back());
  }
}

StageModel Trainer::model(bool best) const {
  StageModel m;
  m.stage = config_.stage;
  m.ordering = config_.ordering;
  m.config = model_config_;
  m.quantizer = quantizer_;
  m.library_version = library_->version();
  m.library_hash = library_->hash();
  m.params = best ? best_params() : params_;
  return m;
}

void Trainer::save_state(const fs::path& path) const {
  nn::Checkpoint ck;
  ck.config_json = model_config_.to_json();
  ck.quantizer_json = quantizer_.to_json();
  json meta = stage_meta(config_.stage, config_.ordering, library_->version(), library_->hash());
  json log = json::array();
  for (const auto& e : log_) log.push_back({e.epoch, e.step, e.train_loss, e.val_loss});
  meta["train"] = {{"lr", config_.lr},
                   {"batch_size", config_.batch_size},
                   {"seed", config_.seed},
                   {"clip_norm", config_.clip_norm},
                   {"epoch", epoch_},
                   {"batch", batch_},
                   {"adam_steps", adam_.steps()},
                   {"epoch_loss_sum", epoch_loss_sum_},
                   {"epoch_batches", epoch_batches_},
                   {"best_val", best_val_},
                   {"bad_epochs", bad_epochs_},
                   {"stopped", stopped_},
                   {"has_best", best_.has_value()},
                   {"log", log}};
  ck.meta_json = meta.dump();
  ck.params = params_;
  ck.adam_m = adam_.first_moment();
  ck.adam_v = adam_.second_moment();
  nn::save_checkpoint(ck, path);
  if (best_) {
    StageModel m = model(true);
    auto best_path = path;
    best_path += ".best";
    save_stage_model(m, best_path);
  }
}

void Trainer::load_state(const fs::path& path) {
  auto ck = nn::load_checkpoint(path);
  const auto meta = json::parse(ck.meta_json);
  if (parse_stage(meta.at("stage")) != config_.stage) throw std::runtime_error("resume state is for another stage");
  if (parse_ordering(meta.at("ordering")) != config_.ordering) throw std::runtime_error("resume state uses another ordering");
  if (!(ModelConfig::from_json(ck.config_json) == model_config_)) throw std::runtime_error("resume state has another model config");
  if (Quantizer::from_json(ck.quantizer_json).hash() != quantizer_.hash()) {
    throw std::runtime_error("resume state was trained with another quantizer");
  }
  if (!ck.adam_m) throw std::runtime_error("resume state has no optimizer moments");
  const auto& t = meta.at("train");
  if (t.at("seed").get<std::uint64_t>() != config_.seed || t.at("batch_size").get<int>() != config_.batch_size) {
    throw std::runtime_error("resume state was written with a different seed or batch size");
  }
  for (int i = 0; i < params_.size(); ++i) {
    const auto& name = params_.names()[i];
    params_.at(i) = ck.params.at(name);
    adam_.first_moment().at(i) = ck.adam_m->at(name);
    adam_.second_moment().at(i) = ck.adam_v->at(name);
  }
  adam_.set_steps(t.at("adam_steps").get<long>());
  epoch_ = t.at("epoch");
  const int batch = t.at("batch");
  epoch_loss_sum_ = t.at("epoch_loss_sum");
  epoch_batches_ = t.at("epoch_batches");
  best_val_ = t.at("best_val");
  bad_epochs_ = t.at("bad_epochs");
  stopped_ = t.at("stopped");
  log_.clear();
  for (const auto& e : t.at("log")) log_.push_back({e[0].get<int>(), e[1].get<long>(), e[2].get<double>(), e[3].get<double>()});
  order_.clear();
  if (batch > 0) {
    const double sum = epoch_loss_sum_;
    const int batches = epoch_batches_;
    start_epoch();
    batch_ = batch;
    epoch_loss_sum_ = sum;
    epoch_batches_ = batches;
  }
  best_.reset();
  if (t.at("has_best").get<bool>()) {
    auto best_path = path;
    best_path += ".best";
    best_ = load_stage_model(best_path).params;
  }
}

ModelBundle make_bundle(std::shared_ptr<const OperatorLibrary> library, StageModel nodes, StageModel params,
                        StageModel edges) {
  const StageModel* all[] = {&nodes, &params, &edges};
  const Stage expected[] = {Stage::nodes, Stage::params, Stage::edges};
  for (int i = 0; i < 3; ++i) {
    const auto& m = *all[i];
    if (m.stage != expected[i]) {
      throw BundleError("expected a " + to_string(expected[i]) + " model, got " + to_string(m.stage));
    }
    if (m.library_version != library->version() || m.library_hash != library->hash()) {
      throw BundleError(to_string(m.stage) + " model was trained for operator library " + m.library_version + " (" +
                        hex64(m.library_hash) + "), this build has " + library->version() + " (" +
                        hex64(library->hash()) + ")");
    }
    if (m.quantizer.hash() != nodes.quantizer.hash()) {
      throw BundleError(to_string(m.stage) + " model uses a different quantizer (" + hex64(m.quantizer.hash()) +
                        " vs " + hex64(nodes.quantizer.hash()) + ")");
    }
    if (!(m.config == nodes.config)) throw BundleError(to_string(m.stage) + " model has a different model config");
    if (m.ordering != nodes.ordering) throw BundleError(to_string(m.stage) + " model was trained with another node ordering");
  }
  ModelBundle b;
  b.library = std::move(library);
  b.config = nodes.config;
  b.quantizer = nodes.quantizer;
  b.ordering = nodes.ordering;
  b.nodes = std::move(nodes.params);
  b.params = std::move(params.params);
  b.edges = std::move(edges.params);
  return b;
}

void save_bundle(const ModelBundle& bundle, const fs::path& dir) {
  fs::create_directories(dir);
  auto stage_model = [&](Stage s, const nn::ParamSet<float>& p) {
    StageModel m;
    m.stage = s;
    m.ordering = bundle.ordering;
    m.config = bundle.config;
    m.quantizer = bundle.quantizer;
    m.library_version = bundle.library->version();
    m.library_hash = bundle.library->hash();
    m.params = p;
    return m;
  };
  save_stage_model(stage_model(Stage::nodes, bundle.nodes), dir / "nodes.ckpt");
  save_stage_model(stage_model(Stage::params, bundle.params), dir / "params.ckpt");
  save_stage_model(stage_model(Stage::edges, bundle.edges), dir / "edges.ckpt");
  json manifest{{"format_version", 1},
                {"library_version", bundle.library->version()},
                {"library_hash", hex64(bundle.library->hash())},
                {"quantizer_hash", hex64(bundle.quantizer.hash())},
                {"ordering", to_string(bundle.ordering)},
                {"files",
                 {{"nodes", {{"file", "nodes.ckpt"}, {"digest", file_digest(dir / "nodes.ckpt")}}},
                  {"params", {{"file", "params.ckpt"}, {"digest", file_digest(dir / "params.ckpt")}}},
                  {"edges", {{"file", "edges.ckpt"}, {"digest", file_digest(dir / "edges.ckpt")}}}}}};
  std::ofstream f(dir / "bundle.json", std::ios::trunc);
  f << manifest.dump(2) << '\n';
}

ModelBundle load_bundle(const fs::path& dir, std::shared_ptr<const OperatorLibrary> library) {
  std::ifstream f(dir / "bundle.json");
  if (!f) throw BundleError("no bundle.json in " + dir.string());
  json manifest;
  try {
    manifest = json::parse(f);
  } catch (const json::exception& e) {
    throw BundleError("malformed bundle.json: " + std::string(e.what()));
  }
  if (manifest.at("library_hash").get<std::string>() != hex64(library->hash())) {
    throw BundleError("bundle was built for operator library hash " + manifest.at("library_hash").get<std::string>() +
                      ", this build has " + hex64(library->hash()));
  }
  auto load = [&](const char* stage) {
    const auto& entry = manifest.at("files").at(stage);
    const fs::path p = dir / entry.at("file").get<std::string>();
    if (file_digest(p) != entry.at("digest").get<std::string>()) {
      throw BundleError(p.string() + " does not match the digest recorded in bundle.json");
    }
    return load_stage_model(p);
  };
  auto b = make_bundle(library, load("nodes"), load("params"), load("edges"));
  if (hex64(b.quantizer.hash()) != manifest.at("quantizer_hash").get<std::string>()) {
    throw BundleError("quantizer hash differs from bundle.json");
  }
  return b;
}

}  // namespace matformer
