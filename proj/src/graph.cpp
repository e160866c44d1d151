#include "treespan/graph.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace treespan {

void Graph::add_edge(int u, int v) {
  if (u < 0 || v < 0 || u >= n_ || v >= n_)
    throw std::invalid_argument("edge (" + std::to_string(u) + "," + std::to_string(v) +
                                ") out of range for n=" + std::to_string(n_));
  if (u == v)
    throw std::invalid_argument("self-loop (" + std::to_string(u) + "," + std::to_string(v) + ")");
  rows_[std::size_t(u)].set(std::size_t(v));
  rows_[std::size_t(v)].set(std::size_t(u));
}

int Graph::min_degree() const {
  if (n_ == 0) return 0;
  int d = n_;
  for (int v = 0; v < n_; ++v) d = std::min(d, deg(v));
  return d;
}

std::size_t Graph::edge_count() const {
  std::size_t twice = 0;
  for (int v = 0; v < n_; ++v) twice += rows_[std::size_t(v)].count();
  return twice / 2;
}

Graph build_graph(int n, const std::vector<std::pair<int, int>>& edges) {
  if (n < 0) throw std::invalid_argument("negative vertex count");
  Graph g(n);
  for (auto [u, v] : edges) g.add_edge(u, v);
  return g;
}

Graph read_graph_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open graph file: " + path);
  long long n = 0, m = 0;
  if (!(in >> n >> m)) throw std::runtime_error("bad graph header in " + path);
  if (n < 0 || m < 0) throw std::runtime_error("bad graph header in " + path);
  Graph g{int(n)};
  for (long long i = 0; i < m; ++i) {
    long long u, v;
    if (!(in >> u >> v))
      throw std::runtime_error("truncated edge list in " + path + " (expected " +
                               std::to_string(m) + " edges)");
    g.add_edge(int(u), int(v));
  }
  return g;
}

void write_graph_file(const Graph& g, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write graph file: " + path);
  out << g.n() << ' ' << g.edge_count() << '\n';
  for (int u = 0; u < g.n(); ++u)
    g.row(u).for_each([&](int v) {
      if (u < v) out << u << ' ' << v << '\n';
    });
}

std::uint64_t ordered_pair_count(const Graph& g, const VertexSet& a, const VertexSet& b) {
  std::uint64_t c = 0;
  a.for_each([&](int v) { c += std::uint64_t(g.row(v).count_and(b)); });
  return c;
}

BipartitePair::BipartitePair(const Graph& g, VertexSet l, VertexSet r)
    : host(&g), left(std::move(l)), right(std::move(r)) {
  if (left.intersects(right)) throw std::invalid_argument("bipartite pair sides overlap");
}

std::uint64_t BipartitePair::edges() const { return ordered_pair_count(*host, left, right); }

double BipartitePair::density() const {
  std::size_t l = left_size(), r = right_size();
  if (l == 0 || r == 0) throw std::domain_error("density of a pair with an empty side");
  return double(edges()) / (double(l) * double(r));
}

int BipartitePair::min_left_degree() const {
  int d = int(right.count());
  left.for_each([&](int v) { d = std::min(d, int(host->row(v).count_and(right))); });
  return d;
}

int BipartitePair::min_right_degree() const {
  int d = int(left.count());
  right.for_each([&](int v) { d = std::min(d, int(host->row(v).count_and(left))); });
  return d;
}

}  // namespace treespan
