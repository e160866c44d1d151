#include "treespan/instances.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace treespan {

namespace {

Graph gnp_mindeg(int n, double p, double nu, int budget, Rng& rng) {
  int floor_deg = int(std::ceil((0.5 - nu) * double(n) - 1e-9));
  for (int attempt = 0; attempt < budget; ++attempt) {
    Graph g{n};
    for (int u = 0; u < n; ++u)
      for (int v = u + 1; v < n; ++v)
        if (rng.bernoulli(p)) g.add_edge(u, v);
    if (g.min_degree() >= floor_deg) return g;
  }
  throw std::runtime_error("gnp_mindeg: no sample reached min degree " +
                           std::to_string(floor_deg) + " in " + std::to_string(budget) +
                           " attempts");
}

Graph two_cliques_graph(int n) {
  Graph g{n};
  int h = (n + 1) / 2;
  for (int u = 0; u < h; ++u)
    for (int v = u + 1; v < h; ++v) g.add_edge(u, v);
  for (int u = h; u < n; ++u)
    for (int v = u + 1; v < n; ++v) g.add_edge(u, v);
  return g;
}

Graph complete_bipartite_graph(int n) {
  Graph g{n};
  int h = (n + 1) / 2;
  for (int u = 0; u < h; ++u)
    for (int v = h; v < n; ++v) g.add_edge(u, v);
  return g;
}

// `blocks` vertex-disjoint complete bipartite blocks; block b occupies a
// contiguous range split into a left and a right half.
Graph ideal_blocks_graph(int n, int blocks) {
  if (blocks < 1) throw std::invalid_argument("ideal_blocks needs at least one block");
  Graph g{n};
  int base = n / blocks, extra = n % blocks, start = 0;
  for (int b = 0; b < blocks; ++b) {
    int size = base + (b < extra ? 1 : 0);
    int mid = start + (size + 1) / 2;
    for (int u = start; u < mid; ++u)
      for (int v = mid; v < start + size; ++v) g.add_edge(u, v);
    start += size;
  }
  return g;
}

Graph near_extremal_graph(int n, double mix, Rng& rng) {
  Graph g = two_cliques_graph(n);
  int h = (n + 1) / 2;
  for (int u = 0; u < h; ++u)
    for (int v = h; v < n; ++v)
      if (rng.bernoulli(mix)) g.add_edge(u, v);
  return g;
}

Tree path_tree(int n) {
  std::vector<int> parent(std::size_t(n), -1);
  for (int i = 1; i < n; ++i) parent[std::size_t(i)] = i - 1;
  return Tree(parent);
}

Tree ternary_tree(int n) {
  // BFS prefix of the infinite complete ternary tree
  std::vector<int> parent(std::size_t(n), -1);
  for (int i = 1; i < n; ++i) parent[std::size_t(i)] = (i - 1) / 3;
  return Tree(parent);
}

Tree random_bounded_tree(int n, int D, Rng& rng) {
  if (D < 2) throw std::invalid_argument("random_bounded needs D >= 2");
  std::vector<int> parent(std::size_t(n), -1), deg(std::size_t(n), 0);
  std::vector<int> avail{0};  // vertices with degree budget left
  for (int i = 1; i < n; ++i) {
    std::size_t pick = std::size_t(rng.below(std::uint64_t(avail.size())));
    int p = avail[pick];
    parent[std::size_t(i)] = p;
    if (++deg[std::size_t(p)] >= D) {
      avail[pick] = avail.back();
      avail.pop_back();
    }
    deg[std::size_t(i)] = 1;
    if (D >= 2) avail.push_back(i);
  }
  return Tree(parent);
}

Tree caterpillar_tree(int n, int D) {
  if (D < 3 && n > 2) throw std::invalid_argument("caterpillar needs D >= 3");
  // spine long enough that every spine vertex carries at most D-2 legs
  int legs_per = D - 2;
  int spine = std::max(1, (n + legs_per) / (legs_per + 1));
  spine = std::min(spine, n);
  std::vector<int> parent(std::size_t(n), -1);
  for (int i = 1; i < spine; ++i) parent[std::size_t(i)] = i - 1;
  for (int i = spine; i < n; ++i) parent[std::size_t(i)] = (i - spine) % spine;
  return Tree(parent);
}

Tree broom_tree(int n, int D) {
  if (D < 2) throw std::invalid_argument("broom needs D >= 2");
  // path handle over the first half, a (D-1)-ary brush hanging off its end
  int handle = std::max(1, (n + 1) / 2);
  std::vector<int> parent(std::size_t(n), -1), deg(std::size_t(n), 0);
  for (int i = 1; i < handle; ++i) {
    parent[std::size_t(i)] = i - 1;
    ++deg[std::size_t(i - 1)];
    ++deg[std::size_t(i)];
  }
  int attach = handle - 1;
  for (int i = handle; i < n; ++i) {
    while (deg[std::size_t(attach)] >= D) ++attach;
    parent[std::size_t(i)] = attach;
    ++deg[std::size_t(attach)];
    ++deg[std::size_t(i)];
  }
  return Tree(parent);
}

}  // namespace

Graph gen_host(const HostSpec& spec, Rng& rng) {
  if (spec.n < 2) throw std::invalid_argument("host needs n >= 2");
  if (spec.model == "gnp_mindeg")
    return gnp_mindeg(spec.n, spec.p, spec.nu, spec.resample_budget, rng);
  if (spec.model == "two_cliques") return two_cliques_graph(spec.n);
  if (spec.model == "complete_bipartite") return complete_bipartite_graph(spec.n);
  if (spec.model == "ideal_blocks") return ideal_blocks_graph(spec.n, spec.blocks);
  if (spec.model == "near_extremal") return near_extremal_graph(spec.n, spec.mix, rng);
  throw std::invalid_argument("unknown host model: " + spec.model);
}

Tree gen_tree(const TreeSpec& spec, Rng& rng) {
  if (spec.n < 1) throw std::invalid_argument("tree needs n >= 1");
  Tree t = [&] {
    if (spec.model == "path") return path_tree(spec.n);
    if (spec.model == "complete_ternary") return ternary_tree(spec.n);
    if (spec.model == "random_bounded") return random_bounded_tree(spec.n, spec.D, rng);
    if (spec.model == "caterpillar") return caterpillar_tree(spec.n, spec.D);
    if (spec.model == "broom") return broom_tree(spec.n, spec.D);
    throw std::invalid_argument("unknown tree model: " + spec.model);
  }();
  int cap = spec.model == "complete_ternary" ? 4 : std::max(spec.D, 2);
  if (t.max_degree() > cap)
    throw std::runtime_error("generated tree exceeds degree bound " + std::to_string(cap));
  return t;
}

}  // namespace treespan
