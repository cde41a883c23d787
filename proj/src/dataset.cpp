#include "matformer/dataset.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "matformer/hash.hpp"

namespace matformer {

namespace {

const std::vector<std::string> kGenerators = {"uniform_color", "uniform_gray", "checker",   "brick",  "value_noise",
                                              "gradient_ramp", "polygon",      "cell_noise", "stripes"};
const std::vector<std::string> kFilters = {"invert",       "levels",    "blur",      "sharpen",        "transform_2d",
                                           "tile",         "to_grayscale", "to_color", "threshold",   "hsl",
                                           "edge_detect",  "histogram_scan", "gradient_map"};

class RecipeBuilder {
 public:
  RecipeBuilder(std::shared_ptr<const OperatorLibrary> library, std::uint64_t seed, double change_probability)
      : lib_(library), graph_(library), rng_(seed), change_probability_(change_probability) {}

  NodeId add(const std::string& name) {
    const auto type = lib_->find(name);
    if (!type) throw std::logic_error("recipe uses unknown operator " + name);
    return graph_.add_node(*type, random_params(lib_->schema(*type)));
  }

  void connect(SlotRef from, NodeId to, int slot) { graph_.add_edge(from, in_slot(to, slot)); }

  std::vector<SlotRef> outputs(NodeId id) const {
    std::vector<SlotRef> out;
    for (int s = 0; s < graph_.schema(id).num_output_slots; ++s) out.push_back(out_slot(id, s));
    return out;
  }

  std::mt19937_64& rng() { return rng_; }
  MaterialGraph& graph() { return graph_; }

  int uniform(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  bool chance(double p) { return std::bernoulli_distribution(p)(rng_); }
  template <class C>
  const auto& pick(const C& items) {
    return items[static_cast<size_t>(uniform(0, static_cast<int>(items.size()) - 1))];
  }

 private:
  std::vector<ParamValue> random_params(const OperatorSchema& schema) {
    std::vector<ParamValue> out;
    for (size_t k = 0; k < schema.params.size(); ++k) {
      const auto& ps = schema.params[k];
      if (!chance(change_probability_)) continue;
      ParamValue pv{static_cast<int>(k), {}};
      if (ps.is_discrete) {
        if (ps.discrete_range() < 2) continue;
        int v;
        do {
          v = uniform(static_cast<int>(ps.min_value), static_cast<int>(ps.max_value));
        } while (v == static_cast<int>(ps.default_value[0]));
        pv.values.assign(ps.vector_dim, v);
      } else {
        const int entries = ps.kind == ParamKind::array ? uniform(2, 4) : 1;
        std::uniform_real_distribution<double> dist(ps.min_value, ps.max_value);
        for (int i = 0; i < entries * ps.vector_dim; ++i) pv.values.push_back(dist(rng_));
      }
      out.push_back(std::move(pv));
    }
    return out;
  }

  std::shared_ptr<const OperatorLibrary> lib_;
  MaterialGraph graph_;
  std::mt19937_64 rng_;
  double change_probability_;
};

/// Takes a random element out of `open`, preferring the most recent one.
SlotRef take(std::vector<SlotRef>& open, RecipeBuilder& b) {
  size_t i = open.size() - 1;
  if (open.size() > 1 && b.chance(0.4)) i = static_cast<size_t>(b.uniform(0, static_cast<int>(open.size()) - 1));
  const SlotRef s = open[i];
  open.erase(open.begin() + static_cast<std::ptrdiff_t>(i));
  return s;
}

void build_body(RecipeBuilder& b, int budget, std::vector<SlotRef>& open) {
  for (int i = 0; i < budget; ++i) {
    const int remaining = budget - i;
    const bool must_merge = open.size() > 1 && static_cast<int>(open.size()) >= remaining + 1;
    NodeId id;
    if (open.empty() || (!must_merge && remaining > 2 && b.chance(0.22))) {
      id = b.add(b.pick(kGenerators));
    } else if (open.size() > 1 && (must_merge || b.chance(0.3))) {
      std::string op;
      if (open.size() >= 3 && b.chance(0.25)) {
        op = b.chance(0.5) ? "mask_blend" : "channel_merge";
      } else {
        op = b.chance(0.75) ? "blend" : "warp";
      }
      id = b.add(op);
      for (int s = 0; s < b.graph().schema(id).num_input_slots; ++s) b.connect(take(open, b), id, s);
    } else {
      id = b.add(b.chance(0.04) ? std::string("channel_split") : b.pick(kFilters));
      b.connect(take(open, b), id, 0);
    }
    for (const auto& s : b.outputs(id)) open.push_back(s);
  }
}

}  // namespace

MaterialGraph synthesize_graph(std::shared_ptr<const OperatorLibrary> library, int node_count, std::uint64_t seed,
                               double param_change_probability) {
  if (node_count < 3) throw std::invalid_argument("a recipe needs at least 3 nodes");
  RecipeBuilder b(library, seed, param_change_probability);

  const int max_channels = std::min(5, (node_count - 1) / 2);
  const int channel_count = b.uniform(std::max(1, max_channels - 2), max_channels);
  std::vector<std::string> extra = {"roughness", "height", "normal", "metallic"};
  std::shuffle(extra.begin(), extra.end(), b.rng());
  std::vector<std::string> channels = {"albedo"};
  channels.insert(channels.end(), extra.begin(), extra.begin() + (channel_count - 1));
  // Height is built before normal so the normal tail can reuse it.
  std::sort(channels.begin(), channels.end(), [](const std::string& a, const std::string& c) {
    auto rank = [](const std::string& s) { return s == "normal" ? 1 : 0; };
    return rank(a) < rank(c);
  });

  std::vector<SlotRef> open;
  build_body(b, node_count - 2 * channel_count, open);

  std::optional<SlotRef> height_out;
  for (size_t i = 0; i < channels.size(); ++i) {
    const auto& ch = channels[i];
    const SlotRef source = open[i % open.size()];
    NodeId tail;
    if (ch == "albedo") {
      tail = b.add("gradient_map");
    } else if (ch == "roughness") {
      tail = b.add("levels");
    } else if (ch == "height") {
      tail = b.add("height_from_grayscale");
    } else if (ch == "normal") {
      tail = b.add("normal_from_height");
    } else {
      tail = b.add("threshold");
    }
    b.connect(ch == "normal" && height_out ? *height_out : source, tail, 0);
    if (ch == "height") height_out = out_slot(tail);
    const NodeId marker = b.add("output_" + ch);
    b.connect(out_slot(tail), marker, 0);
  }

  std::vector<NodeId> perm(static_cast<size_t>(b.graph().node_count()));
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), b.rng());
  return relabel(b.graph(), perm);
}

std::vector<MaterialGraph> synthesize_base_graphs(const CorpusSpec& spec,
                                                  std::shared_ptr<const OperatorLibrary> library) {
  if (spec.graph_count < 0) throw std::invalid_argument("graph count must be non-negative");
  if (spec.min_nodes < 3 || spec.max_nodes < spec.min_nodes) throw std::invalid_argument("bad node-count range");
  std::vector<MaterialGraph> out;
  out.reserve(static_cast<size_t>(spec.graph_count));
  for (int i = 0; i < spec.graph_count; ++i) {
    std::mt19937_64 rng(mix_seed(spec.seed, static_cast<std::uint64_t>(i), 0x6261));
    const int n = std::uniform_int_distribution<int>(spec.min_nodes, spec.max_nodes)(rng);
    out.push_back(synthesize_graph(library, n, rng(), spec.param_change_probability));
  }
  return out;
}

double perturb_value(double v, double lo, double hi, std::mt19937_64& rng) {
  double a = 0.8 * v, b = 1.2 * v;
  if (a > b) std::swap(a, b);
  const double x = a == b ? v : std::uniform_real_distribution<double>(a, b)(rng);
  return std::clamp(x, lo, hi);
}

MaterialGraph augment_once(const MaterialGraph& graph, std::mt19937_64& rng) {
  MaterialGraph out(graph.library_ptr());
  for (const auto& node : graph.nodes()) {
    const auto& schema = graph.schema(node.id);
    auto params = node.params;
    for (auto& p : params) {
      const auto& ps = schema.params[p.param_index];
      if (ps.is_discrete) continue;
      for (auto& v : p.values) v = perturb_value(v, ps.min_value, ps.max_value, rng);
    }
    out.add_node(node.type, std::move(params));
  }
  for (const auto& e : graph.edges()) out.add_edge(e.from, e.to);
  return out;
}

std::vector<MaterialGraph> augment(const MaterialGraph& graph, int count, std::uint64_t seed) {
  if (count < 0) throw std::invalid_argument("augmentation count must be non-negative");
  std::mt19937_64 rng(mix_seed(seed, 0xa06));
  std::vector<MaterialGraph> out;
  out.reserve(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) out.push_back(augment_once(graph, rng));
  return out;
}

bool passes_filter(const MaterialGraph& graph, const FilterThresholds& t, FilterReport* report) {
  int max_in = 0, max_out = 0;
  for (const auto& n : graph.nodes()) {
    max_in = std::max(max_in, graph.schema(n.id).num_input_slots);
    max_out = std::max(max_out, graph.schema(n.id).num_output_slots);
  }
  const bool nodes_ok = graph.node_count() <= t.max_nodes;
  const bool edges_ok = static_cast<int>(graph.edges().size()) <= t.max_edges;
  const bool in_ok = max_in <= t.max_input_slots;
  const bool out_ok = max_out <= t.max_output_slots;
  if (report) {
    report->too_many_nodes += !nodes_ok;
    report->too_many_edges += !edges_ok;
    report->too_many_input_slots += !in_ok;
    report->too_many_output_slots += !out_ok;
  }
  const bool ok = nodes_ok && edges_ok && in_ok && out_ok;
  if (report && ok) ++report->kept;
  return ok;
}

std::vector<MaterialGraph> filter_corpus(std::vector<MaterialGraph> graphs, const FilterThresholds& thresholds,
                                         FilterReport* report) {
  std::vector<MaterialGraph> kept;
  for (auto& g : graphs) {
    if (passes_filter(g, thresholds, report)) kept.push_back(std::move(g));
  }
  return kept;
}

Corpus split_corpus(const std::vector<MaterialGraph>& bases, int augmentations, int validation_bases,
                    std::uint64_t seed) {
  if (validation_bases < 0 || static_cast<int>(bases.size()) < validation_bases + 1) {
    throw std::invalid_argument("need at least " + std::to_string(validation_bases + 1) + " base graphs, got " +
                                std::to_string(bases.size()));
  }
  if (augmentations < 1) throw std::invalid_argument("augmentations must be at least 1");
  std::vector<int> idx(bases.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(mix_seed(seed, 0x5b1));
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<char> is_val(bases.size(), 0);
  for (int i = 0; i < validation_bases; ++i) is_val[idx[i]] = 1;

  Corpus c;
  for (size_t b = 0; b < bases.size(); ++b) {
    auto copies = augment(bases[b], augmentations, mix_seed(seed, b, 0xa09));
    auto& dst = is_val[b] ? c.validation : c.train;
    auto& base = is_val[b] ? c.validation_base : c.train_base;
    for (auto& g : copies) {
      dst.push_back(std::move(g));
      base.push_back(static_cast<int>(b));
    }
  }
  return c;
}

Corpus forge_corpus(const CorpusSpec& spec, std::shared_ptr<const OperatorLibrary> library, FilterReport* report) {
  auto bases = filter_corpus(synthesize_base_graphs(spec, library), FilterThresholds{}, report);
  return split_corpus(bases, spec.augmentations, spec.validation_bases, spec.seed);
}

}  // namespace matformer
