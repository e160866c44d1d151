#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "treespan/bitset.hpp"

namespace treespan {

using VertexSet = Bitset;

// Simple undirected graph over dense integer vertex ids with bit-matrix rows.
class Graph {
 public:
  Graph() = default;
  explicit Graph(int n) : n_(n), rows_(std::size_t(n), Bitset(std::size_t(n))) {}

  int n() const { return n_; }
  const Bitset& row(int v) const { return rows_[std::size_t(v)]; }

  bool has_edge(int u, int v) const { return rows_[std::size_t(u)].test(std::size_t(v)); }

  // Duplicate edges collapse silently; loops and out-of-range ids throw.
  void add_edge(int u, int v);

  int deg(int v) const { return int(rows_[std::size_t(v)].count()); }
  int min_degree() const;
  std::size_t edge_count() const;

  VertexSet full_set() const {
    VertexSet s{std::size_t(n_)};
    for (int i = 0; i < n_; ++i) s.set(std::size_t(i));
    return s;
  }

 private:
  int n_ = 0;
  std::vector<Bitset> rows_;
};

Graph build_graph(int n, const std::vector<std::pair<int, int>>& edges);

// File format: first line "n m", then m lines "u v".
Graph read_graph_file(const std::string& path);
void write_graph_file(const Graph& g, const std::string& path);

// |N(v) cap S|
inline int deg_into(const Graph& g, int v, const VertexSet& s) {
  return int(g.row(v).count_and(s));
}

// Ordered pairs (a, b), a in A, b in B, ab an edge. A and B may overlap; each
// unordered edge with both ends in the intersection contributes twice.
std::uint64_t ordered_pair_count(const Graph& g, const VertexSet& a, const VertexSet& b);

// Bipartite view of disjoint vertex sets of one host graph.
struct BipartitePair {
  const Graph* host = nullptr;
  VertexSet left, right;

  BipartitePair() = default;
  BipartitePair(const Graph& g, VertexSet l, VertexSet r);

  std::size_t left_size() const { return left.count(); }
  std::size_t right_size() const { return right.count(); }
  std::uint64_t edges() const;
  // e(L,R) / (|L||R|); throws on an empty side, 0.0 for an edgeless pair
  double density() const;
  int min_left_degree() const;   // min over L of deg into R
  int min_right_degree() const;  // min over R of deg into L
};

}  // namespace treespan
