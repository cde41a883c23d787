#include "matformer/models.hpp"

#include <algorithm>
#include <json.hpp>
#include <stdexcept>

#include "matformer/hash.hpp"

namespace matformer {

using nn::Mat;
using nn::ParamSet;
using nn::RowVec;
using nn::Segment;
using nn::Tape;
using nn::Var;

std::string to_string(Stage stage) {
  switch (stage) {
    case Stage::nodes: return "nodes";
    case Stage::params: return "params";
    case Stage::edges: return "edges";
  }
  return "?";
}

Stage parse_stage(const std::string& name) {
  if (name == "nodes") return Stage::nodes;
  if (name == "params") return Stage::params;
  if (name == "edges") return Stage::edges;
  throw std::invalid_argument("unknown stage '" + name + "' (expected nodes, params or edges)");
}

ModelConfig ModelConfig::for_library(const OperatorLibrary& library, int value_levels) {
  ModelConfig c;
  c.num_types = library.size();
  c.value_levels = value_levels;
  c.max_params = std::max(1, library.max_params());
  c.max_slots_per_node = std::max(1, library.max_slots_per_node());
  for (const auto& s : library.schemas()) {
    for (const auto& p : s.params) {
      c.max_vector_dim = std::max(c.max_vector_dim, p.vector_dim);
      if (p.is_discrete && p.discrete_range() > value_levels) {
        throw std::invalid_argument(s.name + "." + p.name + " has more discrete values than value tokens");
      }
    }
  }
  return c;
}

ModelConfig ModelConfig::micro() const {
  ModelConfig c = *this;
  c.layers = 1;
  c.heads = 2;
  c.dim = 8;
  return c;
}

nn::TransformerConfig ModelConfig::trunk(bool causal, int cond_dim) const {
  nn::TransformerConfig t;
  t.layers = layers;
  t.heads = heads;
  t.dim = dim;
  t.ff_mult = ff_mult;
  t.cond_dim = cond_dim;
  t.causal = causal;
  return t;
}

std::string ModelConfig::to_json() const {
  nlohmann::json j{{"layers", layers},
                   {"heads", heads},
                   {"dim", dim},
                   {"ff_mult", ff_mult},
                   {"num_types", num_types},
                   {"value_levels", value_levels},
                   {"max_params", max_params},
                   {"max_slots_per_node", max_slots_per_node},
                   {"max_vector_dim", max_vector_dim},
                   {"max_nodes", limits.max_nodes},
                   {"max_param_tokens", limits.max_param_tokens},
                   {"max_edges", limits.max_edges},
                   {"max_slots", limits.max_slots}};
  return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  ModelConfig c;
  c.layers = j.at("layers");
  c.heads = j.at("heads");
  c.dim = j.at("dim");
  c.ff_mult = j.at("ff_mult");
  c.num_types = j.at("num_types");
  c.value_levels = j.at("value_levels");
  c.max_params = j.at("max_params");
  c.max_slots_per_node = j.at("max_slots_per_node");
  c.max_vector_dim = j.at("max_vector_dim");
  c.limits.max_nodes = j.at("max_nodes");
  c.limits.max_param_tokens = j.at("max_param_tokens");
  c.limits.max_edges = j.at("max_edges");
  c.limits.max_slots = j.at("max_slots");
  return c;
}

bool ModelConfig::operator==(const ModelConfig& o) const { return to_json() == o.to_json(); }

namespace {

// Embedding table sizes.
int node_pos_vocab(const ModelConfig& c) { return c.limits.max_nodes + 3; }
int param_pos_vocab(const ModelConfig& c) { return c.limits.max_param_tokens + 2; }
int slot_pos_vocab(const ModelConfig& c) { return c.limits.max_slots + 1; }
int edge_pos_vocab(const ModelConfig& c) { return 2 * c.limits.max_edges + 2; }

template <class T>
void add_embedding(ParamSet<T>& p, const std::string& name, int vocab, int dim, std::mt19937_64& rng) {
  nn::fill_normal(p.add(name, vocab, dim), 0.02, rng);
}

int node_type_token(const ModelConfig& c, int token) {
  if (token == kAlpha) return c.type_alpha();
  if (token == kOmega) return c.type_omega();
  return token;
}

int value_token(const ModelConfig& c, int token) {
  if (token == kAlpha) return c.value_alpha();
  if (token == kOmega) return c.value_omega();
  return token;
}

template <class T>
Var embed(Tape<T>& tape, const std::string& name, const std::vector<int>& idx) {
  return tape.embed(tape.param(name), idx);
}

/// Non-causal encoder over whole node sequences; returns one condition row per
/// token (rows of all graphs concatenated).
template <class T>
Var node_encoder(Tape<T>& tape, const ModelConfig& c, std::span<const NodeSequence* const> seqs,
                 std::vector<Segment>& segments) {
  std::vector<int> types, depths, positions;
  segments.clear();
  for (const auto* s : seqs) {
    segments.push_back({static_cast<int>(types.size()), s->length()});
    for (int i = 0; i < s->length(); ++i) {
      types.push_back(node_type_token(c, s->tokens[i]));
      depths.push_back(s->depths[i]);
      positions.push_back(s->positions[i]);
    }
  }
  Var x = tape.add(tape.add(embed(tape, "enc.emb.type", types), embed(tape, "enc.emb.depth", depths)),
                   embed(tape, "enc.emb.pos", positions));
  x = nn::transformer_forward(tape, "enc.", c.trunk(false), x, segments);
  return nn::linear(tape, "enc.out", x);
}

template <class T>
Var slot_encoder(Tape<T>& tape, const ModelConfig& c, std::span<const SlotSequence* const> seqs) {
  std::vector<int> types, nodes, depths, slots, positions;
  std::vector<Segment> segments;
  for (const auto* s : seqs) {
    if (s->length() == 0) continue;
    segments.push_back({static_cast<int>(types.size()), s->length()});
    types.insert(types.end(), s->types.begin(), s->types.end());
    nodes.insert(nodes.end(), s->node_indices.begin(), s->node_indices.end());
    depths.insert(depths.end(), s->node_depths.begin(), s->node_depths.end());
    slots.insert(slots.end(), s->slot_indices.begin(), s->slot_indices.end());
    positions.insert(positions.end(), s->positions.begin(), s->positions.end());
  }
  if (types.empty()) return {};
  Var x = tape.add(embed(tape, "enc.emb.type", types), embed(tape, "enc.emb.node", nodes));
  x = tape.add(x, embed(tape, "enc.emb.depth", depths));
  x = tape.add(x, embed(tape, "enc.emb.slot", slots));
  x = tape.add(x, embed(tape, "enc.emb.pos", positions));
  x = nn::transformer_forward(tape, "enc.", c.trunk(false), x, segments);
  return nn::linear(tape, "enc.out", x);
}

template <class T>
LossValue<T> node_loss(const ModelConfig& c, Tape<T>& tape, std::span<const TokenizedGraph* const> batch) {
  std::vector<int> types, depths, positions, target_type, target_depth;
  std::vector<Segment> segments;
  for (const auto* g : batch) {
    const auto& s = g->nodes;
    segments.push_back({static_cast<int>(types.size()), s.length() - 1});
    for (int i = 0; i + 1 < s.length(); ++i) {
      types.push_back(node_type_token(c, s.tokens[i]));
      depths.push_back(s.depths[i]);
      positions.push_back(s.positions[i]);
      const bool stop = s.tokens[i + 1] == kOmega;
      target_type.push_back(stop ? c.num_types : s.tokens[i + 1]);
      target_depth.push_back(stop ? -1 : s.depths[i + 1]);
    }
  }
  Var x = tape.add(tape.add(embed(tape, "emb.type", types), embed(tape, "emb.depth", depths)),
                   embed(tape, "emb.pos", positions));
  Var h = nn::transformer_forward(tape, "gen.", c.trunk(true), x, segments);
  Var l1 = tape.cross_entropy(nn::linear(tape, "head.type", h), target_type);
  Var l2 = tape.cross_entropy(nn::linear(tape, "head.depth", h), target_depth);
  LossValue<T> out;
  out.count = static_cast<long>(target_type.size()) +
              std::count_if(target_depth.begin(), target_depth.end(), [](int t) { return t >= 0; });
  Var total = tape.add(l1, l2);
  out.sum = tape.scalar(total);
  if (tape.recording()) tape.backward(tape.scale(total, T(1) / static_cast<T>(out.count)));
  return out;
}

template <class T>
LossValue<T> param_loss(const ModelConfig& c, Tape<T>& tape, std::span<const TokenizedGraph* const> batch) {
  std::vector<const NodeSequence*> seqs;
  for (const auto* g : batch) seqs.push_back(&g->nodes);
  std::vector<Segment> enc_segments;
  Var cond_all = node_encoder(tape, c, seqs, enc_segments);

  std::vector<int> values, indices, positions, vecs, arrs, ords, target_value, target_index, cond_rows;
  std::vector<Segment> segments;
  for (size_t b = 0; b < batch.size(); ++b) {
    const auto& g = *batch[b];
    for (size_t j = 0; j < g.params.size(); ++j) {
      const auto& s = g.params[j];
      segments.push_back({static_cast<int>(values.size()), s.length() - 1});
      for (int i = 0; i + 1 < s.length(); ++i) {
        values.push_back(value_token(c, s.values[i]));
        indices.push_back(s.indices[i]);
        positions.push_back(s.positions[i]);
        vecs.push_back(s.vector_elems[i]);
        arrs.push_back(s.array_elems[i]);
        ords.push_back(s.ordinals[i]);
        const bool stop = s.values[i + 1] == kOmega;
        target_value.push_back(stop ? c.value_levels : s.values[i + 1]);
        target_index.push_back(stop ? -1 : s.indices[i + 1]);
        cond_rows.push_back(enc_segments[b].start + static_cast<int>(j) + 1);
      }
    }
  }
  LossValue<T> out;
  if (values.empty()) return out;
  Var x = tape.add(embed(tape, "gen.emb.value", values), embed(tape, "gen.emb.index", indices));
  x = tape.add(x, embed(tape, "gen.emb.pos", positions));
  x = tape.add(x, embed(tape, "gen.emb.vec", vecs));
  x = tape.add(x, embed(tape, "gen.emb.arr", arrs));
  x = tape.add(x, embed(tape, "gen.emb.ord", ords));
  Var cond = tape.gather_rows(cond_all, cond_rows);
  Var h = nn::transformer_forward(tape, "gen.", c.trunk(true, c.dim), x, segments, cond);
  Var l1 = tape.cross_entropy(nn::linear(tape, "head.value", h), target_value);
  Var l2 = tape.cross_entropy(nn::linear(tape, "head.index", h), target_index);
  out.count = static_cast<long>(target_value.size()) +
              std::count_if(target_index.begin(), target_index.end(), [](int t) { return t >= 0; });
  Var total = tape.add(l1, l2);
  out.sum = tape.scalar(total);
  if (tape.recording()) tape.backward(tape.scale(total, T(1) / static_cast<T>(out.count)));
  return out;
}

template <class T>
LossValue<T> edge_loss(const ModelConfig& c, Tape<T>& tape, std::span<const TokenizedGraph* const> batch) {
  std::vector<const SlotSequence*> seqs;
  int total_slots = 0;
  std::vector<int> offsets;
  for (const auto* g : batch) {
    seqs.push_back(&g->slots);
    offsets.push_back(total_slots);
    total_slots += g->slots.length();
  }
  Var specials = tape.concat_rows(tape.param("edge.omega"), tape.param("edge.alpha"));
  Var enc = slot_encoder(tape, c, seqs);
  Var candidates = enc.valid() ? tape.concat_rows(enc, specials) : specials;
  const int omega_row = total_slots, alpha_row = total_slots + 1;

  std::vector<int> rows, positions, tuples;
  std::vector<Segment> segments;
  for (size_t b = 0; b < batch.size(); ++b) {
    const auto& e = batch[b]->edges;
    segments.push_back({static_cast<int>(rows.size()), e.length() - 1});
    for (int i = 0; i + 1 < e.length(); ++i) {
      const int t = e.tokens[i];
      rows.push_back(t == kAlpha ? alpha_row : t == kOmega ? omega_row : offsets[b] + t);
      positions.push_back(e.positions[i]);
      tuples.push_back(e.tuples[i]);
    }
  }
  Var x = nn::linear(tape, "gen.in", tape.gather_rows(candidates, rows));
  x = tape.add(x, embed(tape, "gen.emb.pos", positions));
  x = tape.add(x, embed(tape, "gen.emb.tuple", tuples));
  Var h = nn::transformer_forward(tape, "gen.", c.trunk(true), x, segments);
  Var query = nn::linear(tape, "head.query", h);

  LossValue<T> out;
  Var total;
  for (size_t b = 0; b < batch.size(); ++b) {
    const auto& e = batch[b]->edges;
    const int m = batch[b]->slots.length();
    std::vector<int> qrows, crows, targets;
    for (int i = 0; i < segments[b].length; ++i) {
      qrows.push_back(segments[b].start + i);
      const int t = e.tokens[i + 1];
      targets.push_back(t == kOmega ? m : t);
    }
    for (int k = 0; k < m; ++k) crows.push_back(offsets[b] + k);
    crows.push_back(omega_row);
    Var logits = tape.matmul_nt(tape.gather_rows(query, qrows), tape.gather_rows(candidates, crows));
    Var l = tape.cross_entropy(logits, targets);
    total = total.valid() ? tape.add(total, l) : l;
    out.count += static_cast<long>(targets.size());
  }
  out.sum = tape.scalar(total);
  if (tape.recording()) tape.backward(tape.scale(total, T(1) / static_cast<T>(out.count)));
  return out;
}

}  // namespace

template <class T>
ParamSet<T> init_stage_params(Stage stage, const ModelConfig& c, std::uint64_t seed) {
  std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(stage), 0x1417));
  ParamSet<T> p;
  const int d = c.dim;
  switch (stage) {
    case Stage::nodes:
      add_embedding(p, "emb.type", c.num_types + 2, d, rng);
      add_embedding(p, "emb.depth", c.depth_vocab(), d, rng);
      add_embedding(p, "emb.pos", node_pos_vocab(c), d, rng);
      nn::init_transformer(p, "gen.", c.trunk(true), rng);
      nn::init_linear(p, "head.type", d, c.num_types + 1, rng);
      nn::init_linear(p, "head.depth", d, c.depth_vocab(), rng);
      break;
    case Stage::params:
      add_embedding(p, "enc.emb.type", c.num_types + 2, d, rng);
      add_embedding(p, "enc.emb.depth", c.depth_vocab(), d, rng);
      add_embedding(p, "enc.emb.pos", node_pos_vocab(c), d, rng);
      nn::init_transformer(p, "enc.", c.trunk(false), rng);
      nn::init_linear(p, "enc.out", d, d, rng);
      add_embedding(p, "gen.emb.value", c.value_levels + 2, d, rng);
      add_embedding(p, "gen.emb.index", c.max_params, d, rng);
      add_embedding(p, "gen.emb.pos", param_pos_vocab(c), d, rng);
      add_embedding(p, "gen.emb.vec", c.max_vector_dim + 1, d, rng);
      add_embedding(p, "gen.emb.arr", c.limits.max_param_tokens + 1, d, rng);
      add_embedding(p, "gen.emb.ord", c.max_params + 1, d, rng);
      nn::init_transformer(p, "gen.", c.trunk(true, d), rng);
      nn::init_linear(p, "head.value", d, c.value_levels + 1, rng);
      nn::init_linear(p, "head.index", d, c.max_params, rng);
      break;
    case Stage::edges:
      add_embedding(p, "enc.emb.type", c.num_types, d, rng);
      add_embedding(p, "enc.emb.node", c.limits.max_nodes + 1, d, rng);
      add_embedding(p, "enc.emb.depth", c.depth_vocab(), d, rng);
      add_embedding(p, "enc.emb.slot", c.max_slots_per_node, d, rng);
      add_embedding(p, "enc.emb.pos", slot_pos_vocab(c), d, rng);
      nn::init_transformer(p, "enc.", c.trunk(false), rng);
      nn::init_linear(p, "enc.out", d, d, rng);
      add_embedding(p, "edge.omega", 1, d, rng);
      add_embedding(p, "edge.alpha", 1, d, rng);
      nn::init_linear(p, "gen.in", d, d, rng);
      add_embedding(p, "gen.emb.pos", edge_pos_vocab(c), d, rng);
      add_embedding(p, "gen.emb.tuple", 3, d, rng);
      nn::init_transformer(p, "gen.", c.trunk(true), rng);
      nn::init_linear(p, "head.query", d, d, rng);
      break;
  }
  return p;
}

template <class T>
LossValue<T> stage_loss(Stage stage, const ModelConfig& config, const ParamSet<T>& params, ParamSet<T>* grads,
                        std::span<const TokenizedGraph* const> batch) {
  if (batch.empty()) throw std::invalid_argument("stage_loss: empty batch");
  Tape<T> tape(params, grads);
  switch (stage) {
    case Stage::nodes: return node_loss(config, tape, batch);
    case Stage::params: return param_loss(config, tape, batch);
    case Stage::edges: return edge_loss(config, tape, batch);
  }
  return {};
}

namespace {

template <class T>
RowVec<T> head(const ParamSet<T>& p, const std::string& name, const RowVec<T>& h) {
  return h * p.at(name + ".w") + p.at(name + ".b");
}

}  // namespace

template <class T>
NodeStepper<T>::NodeStepper(const ModelConfig& config, const ParamSet<T>& params)
    : config_(config), params_(params), runner_(params, "gen.", config.trunk(true)) {}

template <class T>
void NodeStepper<T>::push(int type, int depth) {
  const int pos = runner_.length() + 1;
  if (pos >= node_pos_vocab(config_) - 1) throw SequenceError(SequenceError::Kind::overflow, "node sequence too long");
  if (type == kOmega || type < kAlpha || type >= config_.num_types) {
    throw SequenceError(SequenceError::Kind::bad_token, "bad node token");
  }
  const RowVec<T> x = params_.at("emb.type").row(node_type_token(config_, type)) +
                      params_.at("emb.depth").row(std::clamp(depth, 0, kMaxDepthToken)) +
                      params_.at("emb.pos").row(pos);
  const RowVec<T> h = runner_.step(x);
  type_logits_ = head(params_, "head.type", h);
  depth_logits_ = head(params_, "head.depth", h);
}

template <class T>
ParamStepper<T>::ParamStepper(const ModelConfig& config, const ParamSet<T>& params, const NodeSequence& nodes)
    : config_(config), params_(params), runner_(params, "gen.", config.trunk(true, config.dim)) {
  Tape<T> tape(params);
  std::vector<Segment> segments;
  const NodeSequence* seq = &nodes;
  cond_ = tape.value(node_encoder(tape, config, std::span<const NodeSequence* const>(&seq, 1), segments));
}

template <class T>
void ParamStepper<T>::begin_node(int j) {
  if (j < 0 || j + 1 >= cond_.rows() - 1) throw std::out_of_range("ParamStepper: node index out of range");
  current_cond_ = cond_.row(j + 1);
  runner_.reset();
}

template <class T>
void ParamStepper<T>::push(int value, int param_index, int position, int vector_elem, int array_elem, int ordinal) {
  if (position >= param_pos_vocab(config_)) throw SequenceError(SequenceError::Kind::overflow, "parameter sequence too long");
  const RowVec<T> x = params_.at("gen.emb.value").row(value_token(config_, value)) +
                      params_.at("gen.emb.index").row(param_index) + params_.at("gen.emb.pos").row(position) +
                      params_.at("gen.emb.vec").row(vector_elem) + params_.at("gen.emb.arr").row(array_elem) +
                      params_.at("gen.emb.ord").row(ordinal);
  const RowVec<T> h = runner_.step(x, &current_cond_);
  value_logits_ = head(params_, "head.value", h);
  index_logits_ = head(params_, "head.index", h);
}

template <class T>
EdgeStepper<T>::EdgeStepper(const ModelConfig& config, const ParamSet<T>& params, const SlotSequence& slots)
    : config_(config), params_(params), slot_count_(slots.length()), runner_(params, "gen.", config.trunk(true)) {
  const int d = config.dim;
  candidates_.resize(slot_count_ + 2, d);
  if (slot_count_ > 0) {
    Tape<T> tape(params);
    const SlotSequence* seq = &slots;
    candidates_.topRows(slot_count_) = tape.value(slot_encoder(tape, config, std::span<const SlotSequence* const>(&seq, 1)));
  }
  candidates_.row(slot_count_) = params.at("edge.omega");
  candidates_.row(slot_count_ + 1) = params.at("edge.alpha");
  projected_ = candidates_ * params.at("gen.in.w");
  projected_.rowwise() += params.at("gen.in.b").row(0);
}

template <class T>
void EdgeStepper<T>::push(int token, int position, int tuple) {
  if (position >= edge_pos_vocab(config_)) throw SequenceError(SequenceError::Kind::overflow, "edge sequence too long");
  int row;
  if (token == kAlpha) {
    row = slot_count_ + 1;
  } else if (token == kOmega) {
    row = slot_count_;
  } else if (token >= 0 && token < slot_count_) {
    row = token;
  } else {
    throw SequenceError(SequenceError::Kind::bad_index, "edge token outside slot sequence");
  }
  const RowVec<T> x = projected_.row(row) + params_.at("gen.emb.pos").row(position) + params_.at("gen.emb.tuple").row(tuple);
  const RowVec<T> h = runner_.step(x);
  const RowVec<T> q = head(params_, "head.query", h);
  logits_ = q * candidates_.topRows(slot_count_ + 1).transpose();
}

template ParamSet<float> init_stage_params(Stage, const ModelConfig&, std::uint64_t);
template ParamSet<double> init_stage_params(Stage, const ModelConfig&, std::uint64_t);
template LossValue<float> stage_loss(Stage, const ModelConfig&, const ParamSet<float>&, ParamSet<float>*,
                                     std::span<const TokenizedGraph* const>);
template LossValue<double> stage_loss(Stage, const ModelConfig&, const ParamSet<double>&, ParamSet<double>*,
                                      std::span<const TokenizedGraph* const>);
template class NodeStepper<float>;
template class NodeStepper<double>;
template class ParamStepper<float>;
template class ParamStepper<double>;
template class EdgeStepper<float>;
template class EdgeStepper<double>;

}  // namespace matformer
