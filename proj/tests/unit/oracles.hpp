#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <set>
#include <utility>
#include <vector>

#include "matformer/metrics.hpp"

namespace testutil {

using namespace matformer;

inline double cumsum_emd(const std::vector<double>& a, const std::vector<double>& b, double w) {
  double ca = 0, cb = 0, d = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    ca += a[i];
    cb += b[i];
    d += std::abs(ca - cb) * w;
  }
  return d;
}

// Two node labels: 0 = generator (no input, one output), 1 = filter (one
// input, one output). Every filter input is either free or fed by another node.
inline std::vector<GedGraph> all_small_graphs(int max_nodes) {
  std::vector<GedGraph> out;
  for (int n = 0; n <= max_nodes; ++n) {
    for (int mask = 0; mask < (1 << n); ++mask) {
      std::vector<int> labels(n);
      for (int i = 0; i < n; ++i) labels[i] = (mask >> i) & 1;
      // choice[i] = -1 (free) or the source of filter i's input
      std::vector<int> choice(n, -1);
      std::function<void(int)> rec = [&](int i) {
        if (i == n) {
          GedGraph g;
          g.labels = labels;
          for (int v = 0; v < n; ++v) {
            if (choice[v] >= 0) g.arcs.push_back({choice[v], v, 0, 0});
          }
          // Reject cycles: following sources from any node must terminate.
          for (int v = 0; v < n; ++v) {
            int cur = v, steps = 0;
            while (cur >= 0 && steps <= n) {
              cur = choice[cur];
              ++steps;
            }
            if (steps > n) return;
          }
          std::sort(g.arcs.begin(), g.arcs.end());
          out.push_back(g);
          return;
        }
        if (labels[i] == 0) {
          rec(i + 1);
          return;
        }
        for (int s = -1; s < n; ++s) {
          if (s == i) continue;
          choice[i] = s;
          rec(i + 1);
        }
        choice[i] = -1;
      };
      rec(0);
    }
  }
  return out;
}

inline std::pair<std::vector<int>, std::vector<GedGraph::Arc>> canonical(const GedGraph& g) {
  const int n = static_cast<int>(g.labels.size());
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::pair<std::vector<int>, std::vector<GedGraph::Arc>> best;
  bool first = true;
  do {
    std::vector<int> labels(n);
    for (int i = 0; i < n; ++i) labels[perm[i]] = g.labels[i];
    std::vector<GedGraph::Arc> arcs;
    for (auto a : g.arcs) arcs.push_back({perm[a.from], perm[a.to], a.from_slot, a.to_slot});
    std::sort(arcs.begin(), arcs.end());
    auto key = std::make_pair(labels, arcs);
    if (first || key < best) best = key;
    first = false;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

/// Exhaustive search over every partial label-preserving injection a -> b.
inline int brute_ged(const GedGraph& a, const GedGraph& b) {
  const int na = static_cast<int>(a.labels.size()), nb = static_cast<int>(b.labels.size());
  std::set<GedGraph::Arc> barcs(b.arcs.begin(), b.arcs.end());
  std::vector<int> map(na, -1);
  std::vector<bool> used(nb, false);
  int best = 1 << 30;
  std::function<void(int, int)> rec = [&](int i, int matched) {
    if (i == na) {
      int kept = 0;
      for (const auto& e : a.arcs) {
        if (map[e.from] >= 0 && map[e.to] >= 0 && barcs.count({map[e.from], map[e.to], e.from_slot, e.to_slot})) ++kept;
      }
      const int cost = (na - matched) + (nb - matched) + static_cast<int>(a.arcs.size() + b.arcs.size()) - 2 * kept;
      best = std::min(best, cost);
      return;
    }
    map[i] = -1;
    rec(i + 1, matched);
    for (int j = 0; j < nb; ++j) {
      if (used[j] || b.labels[j] != a.labels[i]) continue;
      used[j] = true;
      map[i] = j;
      rec(i + 1, matched + 1);
      used[j] = false;
      map[i] = -1;
    }
  };
  rec(0, 0);
  return best;
}


/// Small graphs of every shape deduplicated up to isomorphism.
inline std::vector<GedGraph> distinct_small_graphs(int max_nodes) {
  std::set<std::pair<std::vector<int>, std::vector<GedGraph::Arc>>> seen;
  std::vector<GedGraph> out;
  for (const auto& g : all_small_graphs(max_nodes)) {
    if (seen.insert(canonical(g)).second) out.push_back(g);
  }
  return out;
}

}  // namespace testutil
