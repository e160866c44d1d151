#pragma once

#include <string>
#include <vector>

namespace treespan {

// Rooted tree on vertices 0..n-1, vertex 0 the root. Stored as a parent array
// plus adjacency lists (parent first, then children in id order).
class Tree {
 public:
  Tree() = default;
  // parent[0] ignored (root); validates that the array is acyclic and in range
  explicit Tree(std::vector<int> parent);

  int n() const { return int(parent_.size()); }
  int parent(int v) const { return parent_[std::size_t(v)]; }
  const std::vector<int>& parents() const { return parent_; }
  const std::vector<int>& adj(int v) const { return adj_[std::size_t(v)]; }
  int degree(int v) const { return int(adj_[std::size_t(v)].size()); }
  int max_degree() const;
  bool has_edge(int u, int v) const;

  // proper 2-coloring class by depth parity
  const std::vector<int>& color() const { return color_; }
  int depth(int v) const { return depth_[std::size_t(v)]; }

 private:
  std::vector<int> parent_;
  std::vector<std::vector<int>> adj_;
  std::vector<int> color_, depth_;
};

// File format: first line n, then n-1 lines: the parent of vertex i for
// i = 1..n-1.
Tree read_tree_file(const std::string& path);
void write_tree_file(const Tree& t, const std::string& path);

}  // namespace treespan
