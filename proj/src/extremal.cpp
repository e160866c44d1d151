#include "treespan/extremal.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace treespan {
namespace {

// For fixed A, the minimum of e(A,B) over |B| = k is the sum of the k smallest
// values of deg(b, A). Returns (count, minimizing B).
std::pair<std::uint64_t, VertexSet> best_b(const Graph& g, const VertexSet& a, int k,
                                           std::vector<int>& degbuf, std::vector<int>& order) {
  int n = g.n();
  for (int v = 0; v < n; ++v) degbuf[std::size_t(v)] = int(g.row(v).count_and(a));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int x, int y) {
    return degbuf[std::size_t(x)] < degbuf[std::size_t(y)];
  });
  std::uint64_t c = 0;
  VertexSet b{std::size_t(n)};
  for (int i = 0; i < k; ++i) {
    c += std::uint64_t(degbuf[std::size_t(order[std::size_t(i)])]);
    b.set(std::size_t(order[std::size_t(i)]));
  }
  return {c, std::move(b)};
}

void consider(const Graph& g, const VertexSet& a, int k, std::vector<int>& degbuf,
              std::vector<int>& order, ExtremalityVerdict& v) {
  auto [c, b] = best_b(g, a, k, degbuf, order);
  ++v.candidates_checked;
  if (v.candidates_checked == 1 || c < v.min_count_seen) {
    v.min_count_seen = c;
    if (c <= v.threshold) {
      ExtremalWitness w;
      w.a = a;
      w.b = std::move(b);
      w.count = c;
      v.witness = std::move(w);
    }
  }
}

VertexSet half_from_order(const std::vector<int>& order, int k, std::size_t n) {
  VertexSet s(n);
  for (int i = 0; i < k; ++i) s.set(std::size_t(order[std::size_t(i)]));
  return s;
}

}  // namespace

ExtremalityVerdict check_nonextremal_exact(const Graph& g, double gamma, int cap) {
  int n = g.n();
  if (n < 2) throw std::invalid_argument("non-extremality needs n >= 2");
  if (n > cap)
    throw std::invalid_argument("exact non-extremality check limited to n <= " +
                                std::to_string(cap));
  ExtremalityVerdict v;
  v.gamma = gamma;
  v.mode = "exact";
  v.threshold = std::uint64_t(std::floor(gamma * double(n) * double(n)));
  int k = n / 2;
  std::vector<int> degbuf(std::size_t(n), 0), order(std::size_t(n), 0);
  std::vector<int> comb(std::size_t(k), 0);
  std::iota(comb.begin(), comb.end(), 0);
  while (true) {
    VertexSet a = Bitset::from(std::size_t(n), comb);
    consider(g, a, k, degbuf, order, v);
    if (v.witness) break;  // one witness suffices; min_count_seen is then partial
    int i = k - 1;
    while (i >= 0 && comb[std::size_t(i)] == n - k + i) --i;
    if (i < 0) break;
    ++comb[std::size_t(i)];
    for (int j = i + 1; j < k; ++j) comb[std::size_t(j)] = comb[std::size_t(j - 1)] + 1;
  }
  v.nonextremal = !v.witness.has_value();
  return v;
}

ExtremalityVerdict estimate_nonextremal(const Graph& g, double gamma, int trials, Rng& rng) {
  int n = g.n();
  if (n < 2) throw std::invalid_argument("non-extremality needs n >= 2");
  ExtremalityVerdict v;
  v.gamma = gamma;
  v.mode = "sampled";
  v.threshold = std::uint64_t(std::floor(gamma * double(n) * double(n)));
  int k = n / 2;
  std::vector<int> degbuf(std::size_t(n), 0), order(std::size_t(n), 0);

  // lowest-degree half
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int x, int y) { return g.deg(x) < g.deg(y); });
  consider(g, half_from_order(order, k, std::size_t(n)), k, degbuf, order, v);

  // neighborhood halves: A built from N(u), padded by non-neighbors
  int probes = std::min(n, 12);
  for (int i = 0; i < probes && !v.witness; ++i) {
    int u = (i * n) / probes;
    std::vector<int> ids;
    ids.reserve(std::size_t(n));
    g.row(u).for_each([&](int w) { ids.push_back(w); });
    for (int w = 0; w < n && int(ids.size()) < k; ++w)
      if (!g.has_edge(u, w) && w != u) ids.push_back(w);
    if (int(ids.size()) < k) ids.push_back(u);
    ids.resize(std::size_t(k));
    consider(g, Bitset::from(std::size_t(n), ids), k, degbuf, order, v);
  }

  // BFS layer cuts from a few roots: A = first half in BFS order
  for (int r = 0; r < std::min(n, 4) && !v.witness; ++r) {
    int root = (r * n) / std::min(n, 4);
    std::vector<int> bfs;
    bfs.reserve(std::size_t(n));
    Bitset seen{std::size_t(n)};
    bfs.push_back(root);
    seen.set(std::size_t(root));
    for (std::size_t h = 0; h < bfs.size(); ++h)
      g.row(bfs[h]).for_each([&](int w) {
        if (!seen.test(std::size_t(w))) {
          seen.set(std::size_t(w));
          bfs.push_back(w);
        }
      });
    for (int w = 0; w < n; ++w)
      if (!seen.test(std::size_t(w))) bfs.push_back(w);  // disconnected remainder
    bfs.resize(std::size_t(k));
    consider(g, Bitset::from(std::size_t(n), bfs), k, degbuf, order, v);
  }

  // random halves
  for (int t = 0; t < trials && !v.witness; ++t) {
    std::vector<int> ids = rng.sample(n, k);
    consider(g, Bitset::from(std::size_t(n), ids), k, degbuf, order, v);
  }

  v.nonextremal = !v.witness.has_value();
  return v;
}

VertexSet s_v_set(const Graph& g, int v, double gamma) {
  int n = g.n();
  Bitset outside = g.row(v).complement();  // V \ N(v), includes v itself
  VertexSet s{std::size_t(n)};
  double bound = gamma * double(n) / 2.0;
  for (int u = 0; u < n; ++u)
    if (double(g.row(u).count_and(outside)) < bound) s.set(std::size_t(u));
  return s;
}

}  // namespace treespan
