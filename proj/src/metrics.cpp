#include "matformer/metrics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <deque>
#include <iomanip>
#include <json.hpp>
#include <numeric>
#include <queue>
#include <sstream>
#include <stdexcept>

namespace matformer {

using nlohmann::json;

int component_count(const MaterialGraph& graph) {
  std::vector<int> parent(graph.node_count());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  int count = graph.node_count();
  for (const auto& e : graph.edges()) {
    const int a = find(e.from.node), b = find(e.to.node);
    if (a != b) {
      parent[a] = b;
      --count;
    }
  }
  return count;
}

int longest_path(const MaterialGraph& graph) {
  std::vector<int> len(graph.node_count(), 0);
  int best = 0;
  for (NodeId v : topological_order(graph)) {
    for (int ei : graph.outgoing(v)) {
      const NodeId w = graph.edges()[ei].to.node;
      len[w] = std::max(len[w], len[v] + 1);
      best = std::max(best, len[w]);
    }
  }
  return best;
}

std::vector<int> output_distances(const MaterialGraph& graph) {
  const int n = graph.node_count();
  std::vector<std::vector<NodeId>> parents(n);
  for (const auto& e : graph.edges()) parents[e.to.node].push_back(e.from.node);
  std::vector<int> dist(n, -1);
  std::deque<NodeId> queue;
  for (NodeId v = 0; v < n; ++v) {
    if (graph.schema(v).is_output_marker) {
      dist[v] = 0;
      queue.push_back(v);
    }
  }
  while (!queue.empty()) {
    const NodeId v = queue.front();
    queue.pop_front();
    for (NodeId p : parents[v]) {
      if (dist[p] < 0) {
        dist[p] = dist[v] + 1;
        queue.push_back(p);
      }
    }
  }
  return dist;
}

namespace {

int cap(int d) { return d < 0 || d > kDistanceCap ? kDistanceCap : d; }

/// Forward hop distances from `source`, -1 where unreachable.
std::vector<int> forward_distances(const MaterialGraph& graph, NodeId source) {
  std::vector<int> dist(graph.node_count(), -1);
  std::deque<NodeId> queue{source};
  dist[source] = 0;
  while (!queue.empty()) {
    const NodeId v = queue.front();
    queue.pop_front();
    for (int ei : graph.outgoing(v)) {
      const NodeId w = graph.edges()[ei].to.node;
      if (dist[w] < 0) {
        dist[w] = dist[v] + 1;
        queue.push_back(w);
      }
    }
  }
  return dist;
}

}  // namespace

GraphCorpusStats graph_statistics(std::span<const MaterialGraph> corpus) {
  GraphCorpusStats s;
  if (corpus.empty()) return s;
  const auto& lib = corpus.front().library();
  s.num_types = lib.size();
  for (const auto& schema : lib.schemas()) s.type_names.push_back(schema.name);
  s.graph_count = static_cast<int>(corpus.size());
  s.type_count.assign(s.num_types, {});
  s.output_distance.assign(s.num_types, {});
  s.connected_inputs.assign(s.num_types, {});
  for (const auto& g : corpus) {
    if (g.library().hash() != lib.hash()) throw std::invalid_argument("corpus mixes operator libraries");
    const int n = g.node_count();
    s.node_count.push_back(n);
    s.components.push_back(component_count(g));
    s.longest_path.push_back(longest_path(g));

    std::vector<int> counts(s.num_types, 0);
    const auto out_dist = output_distances(g);
    for (NodeId v = 0; v < n; ++v) {
      const int t = g.node(v).type.id;
      ++counts[t];
      s.output_distance[t].push_back(cap(out_dist[v]));
      int connected = 0;
      for (int i = 0; i < g.schema(v).num_input_slots; ++i) connected += g.incoming(v, i) != nullptr;
      s.connected_inputs[t].push_back(connected);
    }
    for (int t = 0; t < s.num_types; ++t) s.type_count[t].push_back(counts[t]);

    std::vector<int> present;
    for (int t = 0; t < s.num_types; ++t) {
      if (counts[t] > 0) present.push_back(t);
    }
    // best[a][b]: shortest path of >= 1 edge from an a-node to a b-node.
    std::vector<std::vector<int>> best(s.num_types, std::vector<int>(s.num_types, -1));
    for (NodeId v = 0; v < n; ++v) {
      const auto dist = forward_distances(g, v);
      const int a = g.node(v).type.id;
      for (NodeId w = 0; w < n; ++w) {
        if (dist[w] <= 0) continue;
        int& b = best[a][g.node(w).type.id];
        if (b < 0 || dist[w] < b) b = dist[w];
      }
    }
    for (int a : present) {
      for (int b : present) s.pair_distance[{a, b}].push_back(cap(best[a][b]));
    }
  }
  return s;
}

std::vector<double> histogram(std::span<const int> values, int bins) {
  if (bins < 1) throw std::invalid_argument("histogram needs at least one bin");
  std::vector<double> h(bins, 0.0);
  for (int v : values) h[std::clamp(v, 0, bins - 1)] += 1.0;
  if (!values.empty()) {
    for (auto& x : h) x /= static_cast<double>(values.size());
  }
  return h;
}

double emd_1d(std::span<const double> a, std::span<const double> b, double bin_width) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("histograms have " + std::to_string(a.size()) + " and " + std::to_string(b.size()) +
                                " bins");
  }
  double cum = 0, total = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    cum += a[i] - b[i];
    total += std::abs(cum);
  }
  return total * bin_width;
}

namespace {

double compare(std::span<const int> a, std::span<const int> b, int bins) {
  auto ha = histogram(a, bins), hb = histogram(b, bins);
  if (a.empty() && b.empty()) return 0.0;
  if (a.empty()) ha.back() = 1.0;
  if (b.empty()) hb.back() = 1.0;
  return emd_1d(ha, hb, 1.0 / bins);
}

int unit_bins(std::span<const int> a, std::span<const int> b) {
  int mx = 0;
  for (int v : a) mx = std::max(mx, v);
  for (int v : b) mx = std::max(mx, v);
  return mx + 1;
}

}  // namespace

double graph_statistics_distance(const GraphCorpusStats& a, const GraphCorpusStats& b,
                                 std::vector<StatisticDistance>* details) {
  if (a.num_types != b.num_types) throw std::invalid_argument("statistics come from different libraries");
  std::vector<StatisticDistance> out;
  auto add_unit = [&](const std::string& name, const std::vector<int>& x, const std::vector<int>& y) {
    out.push_back({name, compare(x, y, unit_bins(x, y))});
  };
  auto add_capped = [&](const std::string& name, const std::vector<int>& x, const std::vector<int>& y) {
    out.push_back({name, compare(x, y, kDistanceCap + 1)});
  };
  add_unit("node_count", a.node_count, b.node_count);
  add_unit("components", a.components, b.components);
  add_unit("longest_path", a.longest_path, b.longest_path);
  const std::vector<int> none;
  for (int t = 0; t < a.num_types; ++t) {
    const auto& name = t < static_cast<int>(a.type_names.size()) ? a.type_names[t] : std::to_string(t);
    auto at = [&](const std::vector<std::vector<int>>& v) -> const std::vector<int>& {
      return t < static_cast<int>(v.size()) ? v[t] : none;
    };
    add_unit("type_count/" + name, at(a.type_count), at(b.type_count));
    add_capped("output_distance/" + name, at(a.output_distance), at(b.output_distance));
    const auto& ca = at(a.connected_inputs);
    const auto& cb = at(b.connected_inputs);
    if (!ca.empty() || !cb.empty()) add_unit("connected_inputs/" + name, ca, cb);
  }
  auto keys = a.pair_distance;
  for (const auto& [k, v] : b.pair_distance) keys.emplace(k, std::vector<int>{});
  for (const auto& [k, unused] : keys) {
    auto ia = a.pair_distance.find(k), ib = b.pair_distance.find(k);
    const auto& x = ia == a.pair_distance.end() ? none : ia->second;
    const auto& y = ib == b.pair_distance.end() ? none : ib->second;
    const auto& na = a.type_names;
    const auto label = k.first < static_cast<int>(na.size()) && k.second < static_cast<int>(na.size())
                           ? na[k.first] + "->" + na[k.second]
                           : std::to_string(k.first) + "->" + std::to_string(k.second);
    add_capped("pair_distance/" + label, x, y);
  }
  double sum = 0;
  for (const auto& d : out) sum += d.emd;
  const double mean = out.empty() ? 0.0 : sum / static_cast<double>(out.size());
  if (details) *details = std::move(out);
  return mean;
}

GedGraph GedGraph::from(const MaterialGraph& graph) {
  GedGraph g;
  for (const auto& n : graph.nodes()) g.labels.push_back(n.type.id);
  for (const auto& e : graph.edges()) g.arcs.push_back({e.from.node, e.to.node, e.from.slot, e.to.slot});
  std::sort(g.arcs.begin(), g.arcs.end());
  return g;
}

namespace {

/// Search over mappings of the first graph's nodes (in a fixed order) onto
/// same-label nodes of the second graph or deletion.
class GedSearch {
 public:
  struct State {
    std::vector<int> image;  // per processed node of a (in processing order): b node or -1
    std::vector<int> owner;  // per b node: a node mapped onto it or -1
    std::vector<int> left_a, left_b;  // per label: unprocessed a nodes / unused b nodes
    int open_a = 0;  // arcs of a with an unprocessed endpoint
    int open_b = 0;  // arcs of b with an unused endpoint
    int g = 0;
    int f = 0;
    int depth() const { return static_cast<int>(image.size()); }
  };

  GedSearch(const GedGraph& a, const GedGraph& b) : a_(a), b_(b) {
    int labels = 0;
    for (int l : a.labels) labels = std::max(labels, l + 1);
    for (int l : b.labels) labels = std::max(labels, l + 1);
    labels_ = labels;
    arcs_a_.resize(a.labels.size());
    arcs_b_.resize(b.labels.size());
    for (size_t i = 0; i < a.arcs.size(); ++i) {
      arcs_a_[a.arcs[i].from].push_back(static_cast<int>(i));
      if (a.arcs[i].to != a.arcs[i].from) arcs_a_[a.arcs[i].to].push_back(static_cast<int>(i));
    }
    for (size_t i = 0; i < b.arcs.size(); ++i) {
      arcs_b_[b.arcs[i].from].push_back(static_cast<int>(i));
      if (b.arcs[i].to != b.arcs[i].from) arcs_b_[b.arcs[i].to].push_back(static_cast<int>(i));
    }
    order_.resize(a.labels.size());
    std::iota(order_.begin(), order_.end(), 0);
    std::stable_sort(order_.begin(), order_.end(),
                     [&](int x, int y) { return arcs_a_[x].size() > arcs_a_[y].size(); });
    position_.assign(a.labels.size(), 0);
    for (size_t i = 0; i < order_.size(); ++i) position_[order_[i]] = static_cast<int>(i);
  }

  State root() const {
    State s;
    s.owner.assign(b_.labels.size(), -1);
    s.left_a.assign(labels_, 0);
    s.left_b.assign(labels_, 0);
    for (int l : a_.labels) ++s.left_a[l];
    for (int l : b_.labels) ++s.left_b[l];
    s.open_a = static_cast<int>(a_.arcs.size());
    s.open_b = static_cast<int>(b_.arcs.size());
    s.f = heuristic(s);
    return s;
  }

  bool complete(const State& s) const { return s.depth() == static_cast<int>(a_.labels.size()); }

  void expand(const State& s, std::vector<State>& out) const {
    const int u = order_[s.depth()];
    for (int v = 0; v < static_cast<int>(b_.labels.size()); ++v) {
      if (s.owner[v] < 0 && b_.labels[v] == a_.labels[u]) out.push_back(child(s, u, v));
    }
    out.push_back(child(s, u, -1));
  }

 private:
  int heuristic(const State& s) const {
    int h = 0;
    for (int l = 0; l < labels_; ++l) h += std::abs(s.left_a[l] - s.left_b[l]);
    return h + std::abs(s.open_a - s.open_b);
  }

  int mapped(const State& s, int x) const {
    const int p = position_[x];
    return p < s.depth() ? s.image[p] : -2;  // -2: unprocessed
  }

  State child(const State& s, int u, int v) const {
    State c = s;
    c.image.push_back(v);
    --c.left_a[a_.labels[u]];
    if (v >= 0) {
      --c.left_b[b_.labels[v]];
      c.owner[v] = u;
    } else {
      c.g += 1;
    }
    // Arcs of a that just became fully processed.
    std::vector<GedGraph::Arc> mapped_a;
    for (int ai : arcs_a_[u]) {
      const auto& arc = a_.arcs[ai];
      const int other = arc.from == u ? arc.to : arc.from;
      const int m = other == u ? v : mapped(c, other);
      if (m == -2) continue;
      --c.open_a;
      if (v < 0 || m < 0) {
        c.g += 1;
      } else {
        mapped_a.push_back({arc.from == u ? v : m, arc.to == u ? v : m, arc.from_slot, arc.to_slot});
      }
    }
    // Arcs of b that just got both endpoints used.
    std::vector<GedGraph::Arc> used_b;
    if (v >= 0) {
      for (int bi : arcs_b_[v]) {
        const auto& arc = b_.arcs[bi];
        const int other = arc.from == v ? arc.to : arc.from;
        if (c.owner[other] < 0) continue;
        --c.open_b;
        used_b.push_back(arc);
      }
    }
    std::sort(mapped_a.begin(), mapped_a.end());
    std::sort(used_b.begin(), used_b.end());
    std::vector<GedGraph::Arc> common;
    std::set_intersection(mapped_a.begin(), mapped_a.end(), used_b.begin(), used_b.end(), std::back_inserter(common));
    c.g += static_cast<int>(mapped_a.size() + used_b.size() - 2 * common.size());
    c.f = c.g + heuristic(c);
    return c;
  }

  const GedGraph& a_;
  const GedGraph& b_;
  int labels_ = 0;
  std::vector<std::vector<int>> arcs_a_, arcs_b_;
  std::vector<int> order_, position_;
};

struct ByF {
  bool operator()(const GedSearch::State& x, const GedSearch::State& y) const {
    if (x.f != y.f) return x.f > y.f;
    return x.depth() < y.depth();
  }
};

int beam_search(const GedSearch& search, int width) {
  std::vector<GedSearch::State> level{search.root()}, next;
  while (!search.complete(level.front())) {
    next.clear();
    for (const auto& s : level) search.expand(s, next);
    std::stable_sort(next.begin(), next.end(), [](const auto& x, const auto& y) { return x.f < y.f; });
    if (static_cast<int>(next.size()) > width) next.resize(width);
    level.swap(next);
  }
  int best = level.front().f;
  for (const auto& s : level) best = std::min(best, s.f);
  return best;
}

}  // namespace

GedResult graph_edit_distance(const GedGraph& a, const GedGraph& b, const GedOptions& options) {
  const GedSearch search(a, b);
  const auto root = search.root();
  GedResult r;
  int bound = root.f;
  const int largest = static_cast<int>(std::max(a.labels.size(), b.labels.size()));
  if (largest <= options.exact_cutoff) {
    std::priority_queue<GedSearch::State, std::vector<GedSearch::State>, ByF> open;
    open.push(root);
    long expansions = 0;
    std::vector<GedSearch::State> children;
    while (!open.empty()) {
      auto s = open.top();
      open.pop();
      bound = std::max(bound, s.f);
      if (search.complete(s)) {
        r.distance = r.lower_bound = s.f;
        r.exact = true;
        return r;
      }
      if (++expansions > options.max_expansions) break;
      children.clear();
      search.expand(s, children);
      for (auto& c : children) open.push(std::move(c));
    }
  }
  r.distance = beam_search(search, std::max(1, options.beam_width));
  r.lower_bound = std::min(bound, r.distance);
  r.exact = r.lower_bound == r.distance;
  return r;
}

GedResult graph_edit_distance(const MaterialGraph& a, const MaterialGraph& b, const GedOptions& options) {
  return graph_edit_distance(GedGraph::from(a), GedGraph::from(b), options);
}

NearestNeighborResult nearest_neighbor_edit_distance(std::span<const MaterialGraph> generated,
                                                     std::span<const MaterialGraph> reference, int min_nodes,
                                                     const GedOptions& options) {
  std::vector<GedGraph> gen, ref;
  for (const auto& g : generated) {
    if (g.node_count() >= min_nodes) gen.push_back(GedGraph::from(g));
  }
  for (const auto& g : reference) {
    if (g.node_count() >= min_nodes) ref.push_back(GedGraph::from(g));
  }
  NearestNeighborResult r;
  r.generated_eligible = static_cast<int>(gen.size());
  r.reference_eligible = static_cast<int>(ref.size());
  if (gen.empty()) throw std::invalid_argument("no generated graph has at least " + std::to_string(min_nodes) + " nodes");
  if (ref.size() < 2) {
    throw std::invalid_argument("fewer than 2 reference graphs have at least " + std::to_string(min_nodes) + " nodes");
  }
  auto distance = [&](const GedGraph& x, const GedGraph& y) {
    const auto d = graph_edit_distance(x, y, options);
    r.inexact_pairs += !d.exact;
    return static_cast<double>(d.distance);
  };
  for (const auto& g : gen) {
    double best = 1e300;
    for (const auto& h : ref) best = std::min(best, distance(g, h));
    r.numerator += best;
  }
  r.numerator /= static_cast<double>(gen.size());
  for (size_t i = 0; i < ref.size(); ++i) {
    double best = 1e300;
    for (size_t j = 0; j < ref.size(); ++j) {
      if (i != j) best = std::min(best, distance(ref[i], ref[j]));
    }
    r.denominator += best;
  }
  r.denominator /= static_cast<double>(ref.size());
  if (r.denominator <= 0) throw std::invalid_argument("reference graphs all have an exact duplicate; D_nne is undefined");
  r.value = r.numerator / r.denominator;
  return r;
}

std::vector<double> render_features(const MaterialOutput& output) {
  std::vector<double> f;
  f.reserve(kRenderFeatureDim);
  auto moments = [&](const ChannelImage& img, int c) {
    const size_t n = static_cast<size_t>(img.width) * img.height;
    if (n == 0) {
      f.push_back(0);
      f.push_back(0);
      return;
    }
    double sum = 0, sq = 0;
    for (int y = 0; y < img.height; ++y) {
      for (int x = 0; x < img.width; ++x) {
        const double v = img.at(x, y, c);
        sum += v;
        sq += v * v;
      }
    }
    const double mean = sum / static_cast<double>(n);
    f.push_back(mean);
    f.push_back(std::max(0.0, sq / static_cast<double>(n) - mean * mean));
  };
  const auto albedo = to_rgb(output.albedo);
  for (int c = 0; c < 3; ++c) moments(albedo, c);
  moments(to_gray(output.roughness), 0);
  moments(to_gray(output.height), 0);
  moments(to_gray(output.metallic), 0);

  std::vector<double> hist(8, 0.0);
  double grad = 0;
  const size_t n = static_cast<size_t>(albedo.width) * albedo.height;
  if (n > 0) {
    std::vector<float> lum(n);
    for (int y = 0; y < albedo.height; ++y) {
      for (int x = 0; x < albedo.width; ++x) {
        const float l = luminance(albedo, x, y);
        lum[static_cast<size_t>(y) * albedo.width + x] = l;
        hist[std::clamp(static_cast<int>(l * 8.0f), 0, 7)] += 1.0;
      }
    }
    auto at = [&](int x, int y) {
      x = (x % albedo.width + albedo.width) % albedo.width;
      y = (y % albedo.height + albedo.height) % albedo.height;
      return static_cast<double>(lum[static_cast<size_t>(y) * albedo.width + x]);
    };
    for (int y = 0; y < albedo.height; ++y) {
      for (int x = 0; x < albedo.width; ++x) {
        const double dx = 0.5 * (at(x + 1, y) - at(x - 1, y));
        const double dy = 0.5 * (at(x, y + 1) - at(x, y - 1));
        grad += std::sqrt(dx * dx + dy * dy);
      }
    }
    for (auto& h : hist) h /= static_cast<double>(n);
    grad /= static_cast<double>(n);
  }
  f.insert(f.end(), hist.begin(), hist.end());
  f.push_back(grad);
  return f;
}

namespace {

void gaussian_fit(const std::vector<std::vector<double>>& rows, Eigen::VectorXd& mean, Eigen::MatrixXd& cov) {
  const int n = static_cast<int>(rows.size());
  const int d = static_cast<int>(rows.front().size());
  Eigen::MatrixXd x(n, d);
  for (int i = 0; i < n; ++i) {
    if (static_cast<int>(rows[i].size()) != d) throw std::invalid_argument("feature rows differ in width");
    for (int j = 0; j < d; ++j) x(i, j) = rows[i][j];
  }
  mean = x.colwise().mean().transpose();
  const Eigen::MatrixXd centered = x.rowwise() - mean.transpose();
  cov = centered.transpose() * centered / static_cast<double>(n - 1);
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
  const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

double frechet_distance(const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b) {
  if (a.size() < 2 || b.size() < 2) throw std::invalid_argument("Frechet distance needs at least 2 samples per side");
  if (a.front().size() != b.front().size()) throw std::invalid_argument("feature populations differ in width");
  Eigen::VectorXd ma, mb;
  Eigen::MatrixXd ca, cb;
  gaussian_fit(a, ma, ca);
  gaussian_fit(b, mb, cb);
  const Eigen::MatrixXd ra = psd_sqrt(ca);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(ra * cb * ra);
  const double cross = es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  const double d = (ma - mb).squaredNorm() + ca.trace() + cb.trace() - 2.0 * cross;
  return std::max(0.0, d);
}

double render_stat_distance(std::span<const MaterialOutput> generated, std::span<const MaterialOutput> reference) {
  std::vector<std::vector<double>> a, b;
  for (const auto& o : generated) a.push_back(render_features(o));
  for (const auto& o : reference) b.push_back(render_features(o));
  return frechet_distance(a, b);
}

std::string MetricReport::to_json() const {
  json j;
  j["generated_count"] = generated_count;
  j["reference_count"] = reference_count;
  j["e_g"] = e_g;
  json stats = json::object();
  for (const auto& s : statistics) stats[s.name] = s.emd;
  j["statistics"] = stats;
  if (d_nne) {
    j["d_nne"] = {{"value", d_nne->value},
                  {"numerator", d_nne->numerator},
                  {"denominator", d_nne->denominator},
                  {"generated_eligible", d_nne->generated_eligible},
                  {"reference_eligible", d_nne->reference_eligible},
                  {"inexact_pairs", d_nne->inexact_pairs}};
  } else {
    j["d_nne"] = {{"error", d_nne_error}};
  }
  if (render_stat) {
    j["render_stat_distance"] = {{"value", *render_stat}};
  } else {
    j["render_stat_distance"] = {{"error", render_stat_error}};
  }
  return j.dump(2);
}

std::string MetricReport::to_table() const {
  std::ostringstream os;
  os << std::setprecision(6);
  os << "graphs               generated " << generated_count << ", reference " << reference_count << "\n";
  os << "E_g                  " << e_g << "  (" << statistics.size() << " histograms)\n";
  if (d_nne) {
    os << "D_nne                " << d_nne->value << "  (eligible: " << d_nne->generated_eligible << " generated, "
       << d_nne->reference_eligible << " reference; inexact pairs " << d_nne->inexact_pairs << ")\n";
  } else {
    os << "D_nne                n/a: " << d_nne_error << "\n";
  }
  if (render_stat) {
    os << "render_stat_distance " << *render_stat << "  (proxy, not comparable to FID)\n";
  } else {
    os << "render_stat_distance n/a: " << render_stat_error << "\n";
  }
  return os.str();
}

MetricReport evaluate_metrics(std::span<const MaterialGraph> generated, std::span<const MaterialGraph> reference,
                              const MetricOptions& options) {
  MetricReport r;
  r.generated_count = static_cast<int>(generated.size());
  r.reference_count = static_cast<int>(reference.size());
  if (generated.empty() || reference.empty()) throw std::invalid_argument("both corpora must be non-empty");
  r.e_g = graph_statistics_distance(graph_statistics(generated), graph_statistics(reference), &r.statistics);
  try {
    r.d_nne = nearest_neighbor_edit_distance(generated, reference, options.min_nodes, options.ged);
  } catch (const std::invalid_argument& e) {
    r.d_nne_error = e.what();
  }
  if (options.render) {
    try {
      std::vector<MaterialOutput> ga, rb;
      for (const auto& g : generated) ga.push_back(evaluate_graph(g, options.render_resolution));
      for (const auto& g : reference) rb.push_back(evaluate_graph(g, options.render_resolution));
      r.render_stat = render_stat_distance(ga, rb);
    } catch (const std::invalid_argument& e) {
      r.render_stat_error = e.what();
    }
  } else {
    r.render_stat_error = "rendering disabled";
  }
  return r;
}

}  // namespace matformer
