#include "matformer/generation.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <stdexcept>
#include <tuple>

#include "matformer/hash.hpp"

namespace matformer {

std::vector<double> masked_distribution(std::span<const float> logits, const std::vector<bool>& legal,
                                        double temperature) {
  if (legal.size() != logits.size()) throw std::invalid_argument("mask and logits differ in length");
  const double t = temperature > 0 ? temperature : 1.0;
  double mx = -std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < logits.size(); ++i) {
    if (legal[i]) mx = std::max(mx, logits[i] / t);
  }
  if (!std::isfinite(mx)) throw std::logic_error("no legal entry to sample");
  std::vector<double> p(logits.size(), 0.0);
  double sum = 0;
  for (size_t i = 0; i < logits.size(); ++i) {
    if (!legal[i]) continue;
    p[i] = std::exp(logits[i] / t - mx);
    sum += p[i];
  }
  for (auto& v : p) v /= sum;
  return p;
}

int sample_index(const std::vector<double>& probs, std::mt19937_64& rng) {
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double acc = 0;
  int last = -1;
  for (size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0) continue;
    acc += probs[i];
    last = static_cast<int>(i);
    if (u < acc) return last;
  }
  if (last < 0) throw std::logic_error("sampling from an all-zero distribution");
  return last;
}

int masked_argmax(std::span<const float> logits, const std::vector<bool>& legal) {
  int best = -1;
  for (size_t i = 0; i < logits.size(); ++i) {
    if (legal[i] && (best < 0 || logits[i] > logits[best])) best = static_cast<int>(i);
  }
  if (best < 0) throw std::logic_error("no legal entry to decode");
  return best;
}

namespace {

int choose(std::span<const float> logits, const std::vector<bool>& legal, const StageSampling& s,
           std::mt19937_64& rng) {
  if (s.is_greedy()) return masked_argmax(logits, legal);
  return sample_index(masked_distribution(logits, legal, s.temperature), rng);
}

std::span<const float> as_span(const nn::RowVec<float>& v) {
  return {v.data(), static_cast<size_t>(v.size())};
}

/// Reachability over node positions as bitsets; anc[v] holds every node that
/// reaches v, including v.
class Reachability {
 public:
  explicit Reachability(int n) : words_((n + 63) / 64), anc_(n, std::vector<std::uint64_t>(words_, 0)), desc_(anc_) {
    for (int v = 0; v < n; ++v) {
      set(anc_[v], v);
      set(desc_[v], v);
    }
  }

  bool reaches(int from, int to) const { return test(anc_[to], from); }
  const std::vector<std::uint64_t>& ancestors(int v) const { return anc_[v]; }

  void connect(int u, int v) {
    if (reaches(u, v)) return;
    const auto anc_u = anc_[u];
    const auto desc_v = desc_[v];
    for (int d = 0; d < static_cast<int>(anc_.size()); ++d) {
      if (test(desc_v, d)) merge(anc_[d], anc_u);
      if (test(anc_u, d)) merge(desc_[d], desc_v);
    }
  }

  static bool test(const std::vector<std::uint64_t>& b, int i) { return (b[i >> 6] >> (i & 63)) & 1u; }
  static void set(std::vector<std::uint64_t>& b, int i) { b[i >> 6] |= std::uint64_t{1} << (i & 63); }

 private:
  static void merge(std::vector<std::uint64_t>& dst, const std::vector<std::uint64_t>& src) {
    for (size_t w = 0; w < dst.size(); ++w) dst[w] |= src[w];
  }

  int words_;
  std::vector<std::vector<std::uint64_t>> anc_, desc_;
};

class EdgeState {
 public:
  EdgeState(const SlotSequence& slots, std::span<const std::pair<int, int>> pinned, int frozen_nodes)
      : slots_(slots),
        frozen_(frozen_nodes),
        node_count_(slots.length() ? slots.node_positions.back() + 1 : 0),
        reach_(node_count_),
        occupied_(slots.length(), 0),
        reserved_by_(slots.length(), -1),
        free_inputs_(node_count_, 0),
        free_bits_((node_count_ + 63) / 64, 0) {
    for (int i = 0; i < slots.length(); ++i) {
      if (slots.directions[i] == SlotDirection::input) ++free_inputs_[slots.node_positions[i]];
    }
    for (const auto& [s, d] : pinned) {
      check_pin(s, d);
      reserved_by_[d] = s;
      --free_inputs_[slots.node_positions[d]];
      reach_.connect(slots.node_positions[s], slots.node_positions[d]);
      pending_.push_back({s, d});
    }
    for (int v = 0; v < node_count_; ++v) refresh(v);
  }

  int pending() const {
    return static_cast<int>(std::count_if(pending_.begin(), pending_.end(), [&](const auto& p) { return !occupied_[p.second]; }));
  }

  bool legal_source(int s) const {
    if (slots_.directions[s] != SlotDirection::output) return false;
    const int u = slots_.node_positions[s];
    const auto& anc = reach_.ancestors(u);
    // A frozen source may only feed nodes outside the frozen prefix.
    const int skip = u < frozen_ ? frozen_ : 0;
    for (size_t w = 0; w < free_bits_.size(); ++w) {
      std::uint64_t open = free_bits_[w] & ~anc[w];
      const int base = static_cast<int>(w) * 64;
      if (skip >= base + 64) continue;
      if (skip > base) open &= ~std::uint64_t{0} << (skip - base);
      if (open) return true;
    }
    for (const auto& [ps, pd] : pending_) {
      if (ps == s && !occupied_[pd]) return true;
    }
    return false;
  }

  bool legal_destination(int s, int d) const {
    if (slots_.directions[d] != SlotDirection::input || occupied_[d]) return false;
    if (reserved_by_[d] >= 0 && reserved_by_[d] != s) return false;
    if (reserved_by_[d] != s && slots_.node_positions[s] < frozen_ && slots_.node_positions[d] < frozen_) return false;
    return !reach_.reaches(slots_.node_positions[d], slots_.node_positions[s]);
  }

  void add(int s, int d) {
    if (!legal_destination(s, d)) throw std::logic_error("edge sampler produced an illegal edge");
    occupied_[d] = 1;
    if (reserved_by_[d] < 0) --free_inputs_[slots_.node_positions[d]];
    reach_.connect(slots_.node_positions[s], slots_.node_positions[d]);
    refresh(slots_.node_positions[d]);
  }

  /// Pinned edges not yet emitted, in the order given.
  std::vector<std::pair<int, int>> outstanding() const {
    std::vector<std::pair<int, int>> out;
    for (const auto& p : pending_) {
      if (!occupied_[p.second]) out.push_back(p);
    }
    return out;
  }

 private:
  void check_pin(int s, int d) const {
    if (s < 0 || d < 0 || s >= slots_.length() || d >= slots_.length() ||
        slots_.directions[s] != SlotDirection::output || slots_.directions[d] != SlotDirection::input) {
      throw std::invalid_argument("pinned edge does not run from an output slot to an input slot");
    }
    if (reserved_by_[d] >= 0) throw std::invalid_argument("two pinned edges share an input slot");
    if (reach_.reaches(slots_.node_positions[d], slots_.node_positions[s])) {
      throw std::invalid_argument("pinned edges form a cycle");
    }
  }

  void refresh(int v) {
    if (free_inputs_[v] > 0) {
      free_bits_[v >> 6] |= std::uint64_t{1} << (v & 63);
    } else {
      free_bits_[v >> 6] &= ~(std::uint64_t{1} << (v & 63));
    }
  }

  const SlotSequence& slots_;
  int frozen_;
  int node_count_;
  Reachability reach_;
  std::vector<char> occupied_;
  std::vector<int> reserved_by_;
  std::vector<int> free_inputs_;  // free and unreserved input slots per node
  std::vector<std::uint64_t> free_bits_;
  std::vector<std::pair<int, int>> pending_;
};

MaterialGraph assemble(std::shared_ptr<const OperatorLibrary> library, const std::vector<OperatorType>& types,
                       const std::vector<std::vector<ParamValue>>& params, const std::vector<Edge>& edges) {
  MaterialGraph g(std::move(library));
  for (size_t i = 0; i < types.size(); ++i) g.add_node(types[i], params[i]);
  for (const auto& e : edges) g.add_edge(e.from, e.to);
  const auto problems = validate(g);
  if (!problems.empty()) throw std::logic_error("generated graph failed validation: " + problems.front());
  return g;
}

// One hypothesis of the prefix-depth search.
struct DepthBeam {
  NodeStepper<float> stepper;
  std::vector<int> depths;
  double score = 0;
};

double log_prob(const nn::RowVec<float>& logits, int i) {
  const double mx = logits.maxCoeff();
  return logits(i) - mx - std::log((logits.array() - static_cast<float>(mx)).exp().sum());
}

std::pair<NodeStepper<float>, std::vector<int>> feed_prefix(const ModelBundle& bundle, const std::vector<int>& types,
                                                            const std::vector<int>& depths, int max_nodes) {
  NodeStepper<float> stepper(bundle.config, bundle.nodes);
  stepper.push(kAlpha, 0);
  for (size_t i = 0; i < types.size(); ++i) {
    if (static_cast<int>(i) + 1 < max_nodes) stepper.push(types[i], depths[i]);
  }
  return {std::move(stepper), depths};
}

// Node types that still fit under the slot cap; omega is always allowed.
std::vector<bool> legal_types(const ModelBundle& bundle, int slot_total) {
  const auto& cfg = bundle.config;
  std::vector<bool> legal(cfg.num_types + 1, true);
  for (int t = 0; t < cfg.num_types; ++t) {
    legal[t] = slot_total + bundle.library->schema(OperatorType{t}).num_slots() <= cfg.limits.max_slots;
  }
  return legal;
}

// Log-likelihood of extending the node sequence greedily until omega or the node cap.
double greedy_continuation_score(const ModelBundle& bundle, NodeStepper<float> stepper, const std::vector<int>& types,
                                 int max_nodes) {
  int slot_total = 0;
  for (int t : types) slot_total += bundle.library->schema(OperatorType{t}).num_slots();
  double score = 0;
  for (int n = static_cast<int>(types.size()); n < max_nodes; ++n) {
    const int t = masked_argmax(as_span(stepper.type_logits()), legal_types(bundle, slot_total));
    score += log_prob(stepper.type_logits(), t);
    if (t == bundle.config.num_types) break;
    const int d = masked_argmax(as_span(stepper.depth_logits()), std::vector<bool>(bundle.config.depth_vocab(), true));
    score += log_prob(stepper.depth_logits(), d);
    slot_total += bundle.library->schema(OperatorType{t}).num_slots();
    if (n + 1 < max_nodes) stepper.push(t, d);
  }
  return score;
}

constexpr int kDepthBeamWidth = 8;

// Prefix depth tokens are unknown for a partial graph: choose the assignment
// that maximizes the model's joint likelihood of the whole prefix.
std::pair<NodeStepper<float>, std::vector<int>> estimate_prefix_depths(const ModelBundle& bundle,
                                                                       const std::vector<int>& types,
                                                                       std::span<const DepthBounds> bounds,
                                                                       int max_nodes, const StageSampling& sampling,
                                                                       std::mt19937_64& rng) {
  const int vocab = bundle.config.depth_vocab();
  std::vector<DepthBeam> beams;
  beams.push_back({NodeStepper<float>(bundle.config, bundle.nodes), {}, 0.0});
  beams.front().stepper.push(kAlpha, 0);
  for (size_t i = 0; i < types.size(); ++i) {
    struct Option {
      double score;
      int beam, depth;
    };
    std::vector<Option> options;
    for (int b = 0; b < static_cast<int>(beams.size()); ++b) {
      const auto& st = beams[b].stepper;
      const double base = beams[b].score + log_prob(st.type_logits(), types[i]);
      const int lo = bounds.empty() ? 0 : std::max(bounds[i].lo, 0);
      const int hi = bounds.empty() ? vocab - 1 : std::min(bounds[i].hi, vocab - 1);
      for (int d = lo; d <= hi; ++d) options.push_back({base + log_prob(st.depth_logits(), d), b, d});
    }
    const size_t keep = std::min<size_t>(kDepthBeamWidth, options.size());
    std::partial_sort(options.begin(), options.begin() + keep, options.end(), [](const Option& x, const Option& y) {
      if (x.score != y.score) return x.score > y.score;
      return std::tie(x.beam, x.depth) < std::tie(y.beam, y.depth);
    });
    std::vector<DepthBeam> next;
    for (size_t o = 0; o < keep; ++o) {
      DepthBeam nb = beams[options[o].beam];
      nb.depths.push_back(options[o].depth);
      nb.score = options[o].score;
      if (static_cast<int>(i) + 1 < max_nodes) nb.stepper.push(types[i], options[o].depth);
      next.push_back(std::move(nb));
    }
    beams = std::move(next);
  }
  // The depth of the last prefix node is only constrained by what follows it,
  // so weigh the surviving hypotheses by the likelihood of their greedy continuation.
  // Greedy sampling takes the best one, otherwise one is drawn by weight.
  std::vector<float> scores;
  for (const auto& b : beams) {
    scores.push_back(static_cast<float>(b.score + greedy_continuation_score(bundle, b.stepper, types, max_nodes)));
  }
  const int pick = choose(scores, std::vector<bool>(scores.size(), true), sampling, rng);
  return {std::move(beams[pick].stepper), std::move(beams[pick].depths)};
}

}  // namespace

std::vector<DepthBounds> prefix_depth_bounds(const MaterialGraph& prefix, DepthMode mode) {
  const int n = prefix.node_count();
  std::vector<std::vector<NodeId>> next(n);
  for (const auto& e : prefix.edges()) {
    if (mode == DepthMode::to_output) {
      next[e.to.node].push_back(e.from.node);
    } else {
      next[e.from.node].push_back(e.to.node);
    }
  }
  std::vector<int> depth(n, -1);
  std::deque<NodeId> queue;
  for (NodeId i = 0; i < n; ++i) {
    const auto& s = prefix.schema(i);
    if (mode == DepthMode::to_output ? s.is_output_marker : s.is_generator) {
      depth[i] = 0;
      queue.push_back(i);
    }
  }
  // Without an anchor the full graph may have none either, and then every depth is 0.
  const bool anchored = !queue.empty();
  while (!queue.empty()) {
    const NodeId u = queue.front();
    queue.pop_front();
    for (NodeId v : next[u]) {
      if (depth[v] < 0) {
        depth[v] = depth[u] + 1;
        queue.push_back(v);
      }
    }
  }
  std::vector<DepthBounds> out(n);
  for (NodeId i = 0; i < n; ++i) {
    if (depth[i] == 0) {
      out[i] = {0, 0};
    } else if (anchored) {
      out[i] = {1, depth[i] > 0 ? std::min(depth[i], kMaxDepthToken) : kMaxDepthToken};
    }
  }
  return out;
}

NodeSequence sample_nodes(const ModelBundle& bundle, std::span<const int> prefix_types,
                          std::span<const int> prefix_depths, std::span<const DepthBounds> prefix_bounds,
                          const StageSampling& sampling, int max_nodes, std::mt19937_64& rng) {
  const auto& cfg = bundle.config;
  const auto& lib = *bundle.library;
  max_nodes = std::min(max_nodes, cfg.limits.max_nodes);
  if (static_cast<int>(prefix_types.size()) > max_nodes) {
    throw SequenceError(SequenceError::Kind::overflow, "prefix has more nodes than the node cap");
  }
  if (!prefix_depths.empty() && prefix_depths.size() != prefix_types.size()) {
    throw std::invalid_argument("prefix depths must match prefix types");
  }
  if (!prefix_bounds.empty() && prefix_bounds.size() != prefix_types.size()) {
    throw std::invalid_argument("prefix depth bounds must match prefix types");
  }
  for (const auto& b : prefix_bounds) {
    if (b.lo > b.hi || b.hi < 0 || b.lo > kMaxDepthToken) throw std::invalid_argument("empty prefix depth bounds");
  }
  for (int t : prefix_types) {
    if (t < 0 || t >= cfg.num_types) throw std::invalid_argument("prefix holds an unknown operator type");
  }
  std::vector<int> types(prefix_types.begin(), prefix_types.end());
  std::vector<int> depths(prefix_depths.begin(), prefix_depths.end());
  int slot_total = 0;
  for (int t : types) slot_total += lib.schema(OperatorType{t}).num_slots();
  const std::vector<bool> all_depths(cfg.depth_vocab(), true);
  const bool estimate = prefix_depths.empty() && !types.empty();
  auto [stepper, estimated] = estimate ? estimate_prefix_depths(bundle, types, prefix_bounds, max_nodes, sampling, rng)
                                       : feed_prefix(bundle, types, depths, max_nodes);
  depths = std::move(estimated);
  if (slot_total > cfg.limits.max_slots) throw SequenceError(SequenceError::Kind::overflow, "prefix exceeds the slot cap");
  while (static_cast<int>(types.size()) < max_nodes) {
    // Only the length caps restrict node types.
    const int t = choose(as_span(stepper.type_logits()), legal_types(bundle, slot_total), sampling, rng);
    if (t == cfg.num_types) break;
    const int d = choose(as_span(stepper.depth_logits()), all_depths, sampling, rng);
    types.push_back(t);
    depths.push_back(d);
    slot_total += lib.schema(OperatorType{t}).num_slots();
    if (static_cast<int>(types.size()) < max_nodes) stepper.push(t, d);
  }
  return make_node_sequence(types, depths);
}

ParamSequence sample_params(const ModelBundle& bundle, ParamStepper<float>& stepper, const OperatorSchema& schema,
                            int j, const StageSampling& sampling, int max_tokens, std::mt19937_64& rng) {
  const auto& cfg = bundle.config;
  max_tokens = std::min(max_tokens, cfg.limits.max_param_tokens);
  const int levels = cfg.value_levels;
  const int k_count = static_cast<int>(schema.params.size());
  ParamSequenceBuilder builder(schema);
  stepper.begin_node(j);
  stepper.push(kAlpha, 0, 1, 0, 0, 0);
  int emitted = 0;
  while (true) {
    const auto legal_k = builder.legal_indices();
    const int remaining = max_tokens - emitted;
    const bool mid_value = !builder.can_stop();
    std::vector<bool> k_ok(k_count, false);
    for (int k = 0; k < k_count; ++k) {
      const int need = (mid_value && k == builder.current_param()) ? 1 : schema.params[k].vector_dim;
      k_ok[k] = legal_k[k] && need <= remaining;
    }
    // Joint weights over (value, index) pairs plus omega, from tempered
    // per-head softmaxes; illegal pairs get zero.
    const auto pv = masked_distribution(as_span(stepper.value_logits()), std::vector<bool>(levels + 1, true),
                                        sampling.temperature);
    std::vector<bool> any_k(cfg.max_params, false);
    for (int k = 0; k < k_count; ++k) any_k[k] = true;
    std::vector<double> pk(cfg.max_params, 0.0);
    if (k_count > 0) pk = masked_distribution(as_span(stepper.index_logits()), any_k, sampling.temperature);
    std::vector<double> joint(static_cast<size_t>(levels) * std::max(k_count, 1) + 1, 0.0);
    for (int k = 0; k < k_count; ++k) {
      if (!k_ok[k]) continue;
      for (int v = 0; v < levels; ++v) {
        if (builder.value_legal(v, k, levels)) joint[static_cast<size_t>(k) * levels + v] = pv[v] * pk[k];
      }
    }
    const size_t omega = joint.size() - 1;
    if (builder.can_stop()) joint[omega] = pv[levels];
    double total = std::accumulate(joint.begin(), joint.end(), 0.0);
    if (total <= 0) {
      // Underflowed weights: fall back to the first legal continuation.
      if (builder.can_stop()) break;
      throw std::logic_error("parameter sampler has no legal continuation");
    }
    size_t pick;
    if (sampling.is_greedy()) {
      pick = static_cast<size_t>(std::max_element(joint.begin(), joint.end()) - joint.begin());
    } else {
      for (auto& w : joint) w /= total;
      pick = static_cast<size_t>(sample_index(joint, rng));
    }
    if (pick == omega) break;
    const int k = static_cast<int>(pick) / levels, v = static_cast<int>(pick) % levels;
    builder.push(v, k);
    ++emitted;
    const auto& s = builder.sequence();
    const int i = s.length() - 1;
    stepper.push(s.values[i], s.indices[i], s.positions[i], s.vector_elems[i], s.array_elems[i], s.ordinals[i]);
  }
  builder.finish();
  return builder.sequence();
}

EdgeSequence sample_edges(const ModelBundle& bundle, const SlotSequence& slots,
                          std::span<const std::pair<int, int>> pinned, const StageSampling& sampling, int max_edges,
                          std::mt19937_64& rng, int frozen_nodes) {
  const auto& cfg = bundle.config;
  max_edges = std::min(max_edges, cfg.limits.max_edges);
  if (static_cast<int>(pinned.size()) > max_edges) throw SequenceError(SequenceError::Kind::overflow, "too many pinned edges");
  const int m = slots.length();
  EdgeState state(slots, pinned, frozen_nodes);
  EdgeStepper<float> stepper(cfg, bundle.edges, slots);
  int position = 1;
  stepper.push(kAlpha, position++, 0);
  std::vector<int> tokens;
  int emitted = 0;
  while (true) {
    const bool at_cap = emitted + state.pending() >= max_edges;
    std::vector<bool> legal(m + 1, false);
    legal[m] = true;
    if (!at_cap) {
      for (int s = 0; s < m; ++s) legal[s] = state.legal_source(s);
    }
    const int src = choose(as_span(stepper.logits()), legal, sampling, rng);
    if (src == m) {
      for (const auto& [s, d] : state.outstanding()) {
        tokens.push_back(s);
        tokens.push_back(d);
        state.add(s, d);
      }
      break;
    }
    stepper.push(src, position++, 1);
    tokens.push_back(src);
    std::fill(legal.begin(), legal.end(), false);
    for (int d = 0; d < m; ++d) legal[d] = state.legal_destination(src, d);
    const int dst = choose(as_span(stepper.logits()), legal, sampling, rng);
    state.add(src, dst);
    tokens.push_back(dst);
    ++emitted;
    if (emitted + state.pending() < max_edges) stepper.push(dst, position++, 2);
  }
  return make_edge_sequence(tokens);
}

namespace {

GeneratedGraph finish_graph(const ModelBundle& bundle, const MaterialGraph* prefix, const SamplerConfig& config,
                            std::mt19937_64& rng) {
  const auto& lib = *bundle.library;
  const auto& limits = config.limits;
  std::vector<int> prefix_types;
  std::vector<DepthBounds> bounds;
  if (prefix) {
    for (const auto& n : prefix->nodes()) prefix_types.push_back(n.type.id);
    bounds = prefix_depth_bounds(*prefix, depth_mode(bundle.ordering));
  }
  GeneratedGraph out{MaterialGraph(bundle.library), {}, {}, {}, {}};
  out.nodes = sample_nodes(bundle, prefix_types, {}, bounds, config.nodes, limits.max_nodes, rng);
  const auto types = decode_nodes(out.nodes);
  const int k = static_cast<int>(prefix_types.size());

  ParamStepper<float> stepper(bundle.config, bundle.params, out.nodes);
  std::vector<std::vector<ParamValue>> values(types.size());
  for (int j = 0; j < static_cast<int>(types.size()); ++j) {
    const auto& schema = lib.schema(types[j]);
    if (j < k) {
      out.params.push_back(encode_params(*prefix, j, bundle.quantizer, limits));
      values[j] = prefix->node(j).params;
    } else {
      out.params.push_back(sample_params(bundle, stepper, schema, j, config.params, limits.max_param_tokens, rng));
      values[j] = decode_params(schema, types[j], out.params.back(), bundle.quantizer);
    }
  }

  const auto slots = build_slot_sequence(lib, out.nodes, limits);
  std::vector<std::pair<int, int>> pinned;
  if (prefix) {
    for (const auto& e : prefix->edges()) {
      pinned.push_back({slots.find(e.from.node, SlotDirection::output, e.from.slot),
                        slots.find(e.to.node, SlotDirection::input, e.to.slot)});
    }
    std::sort(pinned.begin(), pinned.end(), [](const auto& a, const auto& b) {
      return std::pair(a.second, a.first) < std::pair(b.second, b.first);
    });
  }
  out.edges = sample_edges(bundle, slots, pinned, config.edges, limits.max_edges, rng, k);
  out.graph = assemble(bundle.library, types, values, decode_edges(slots, out.edges));
  out.pinned.assign(types.size(), false);
  std::fill(out.pinned.begin(), out.pinned.begin() + k, true);
  return out;
}

}  // namespace

GeneratedGraph generate_graph(const ModelBundle& bundle, const SamplerConfig& config, std::mt19937_64& rng) {
  return finish_graph(bundle, nullptr, config, rng);
}

GeneratedGraph complete_graph(const ModelBundle& bundle, const MaterialGraph& partial, std::span<const NodeId> pinned,
                              const SamplerConfig& config, std::mt19937_64& rng) {
  if (partial.library().hash() != bundle.library->hash()) {
    throw std::invalid_argument("partial graph uses a different operator library");
  }
  std::vector<NodeId> kept(pinned.begin(), pinned.end());
  std::sort(kept.begin(), kept.end());
  kept.erase(std::unique(kept.begin(), kept.end()), kept.end());
  for (NodeId id : kept) {
    if (id < 0 || id >= partial.node_count()) throw std::invalid_argument("pinned node " + std::to_string(id) + " does not exist");
  }
  const auto prefix = induced_subgraph(partial, kept);
  return finish_graph(bundle, &prefix, config, rng);
}

std::vector<GeneratedGraph> autocomplete(const ModelBundle& bundle, const MaterialGraph& partial,
                                         std::span<const NodeId> pinned, int count, const SamplerConfig& config) {
  if (count < 0) throw std::invalid_argument("completion count must be non-negative");
  std::vector<GeneratedGraph> out;
  for (int i = 0; i < count; ++i) {
    std::mt19937_64 rng(mix_seed(config.seed, static_cast<std::uint64_t>(i), 0xac));
    out.push_back(complete_graph(bundle, partial, pinned, config, rng));
  }
  return out;
}

}  // namespace matformer
