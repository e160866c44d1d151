#include "treespan/tree.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

namespace treespan {

Tree::Tree(std::vector<int> parent) : parent_(std::move(parent)) {
  int n = int(parent_.size());
  if (n == 0) throw std::invalid_argument("empty tree");
  parent_[0] = -1;
  adj_.assign(std::size_t(n), {});
  for (int v = 1; v < n; ++v) {
    int p = parent_[std::size_t(v)];
    if (p < 0 || p >= n || p == v)
      throw std::invalid_argument("bad parent " + std::to_string(p) + " for vertex " +
                                  std::to_string(v));
  }
  // depth via memoized walk; detects cycles
  depth_.assign(std::size_t(n), -1);
  depth_[0] = 0;
  std::vector<int> path;
  for (int v = 1; v < n; ++v) {
    path.clear();
    int u = v;
    while (depth_[std::size_t(u)] < 0) {
      path.push_back(u);
      u = parent_[std::size_t(u)];
      if (int(path.size()) > n) throw std::invalid_argument("parent array contains a cycle");
    }
    int d = depth_[std::size_t(u)];
    for (auto it = path.rbegin(); it != path.rend(); ++it) depth_[std::size_t(*it)] = ++d;
  }
  for (int v = 1; v < n; ++v) adj_[std::size_t(parent_[std::size_t(v)])].push_back(v);
  for (int v = 1; v < n; ++v) {
    auto& a = adj_[std::size_t(v)];
    a.insert(a.begin(), parent_[std::size_t(v)]);
  }
  color_.assign(std::size_t(n), 0);
  for (int v = 0; v < n; ++v) color_[std::size_t(v)] = depth_[std::size_t(v)] & 1;
}

int Tree::max_degree() const {
  int d = 0;
  for (const auto& a : adj_) d = std::max(d, int(a.size()));
  return d;
}

bool Tree::has_edge(int u, int v) const {
  if (u == v) return false;
  return parent_[std::size_t(u)] == v || parent_[std::size_t(v)] == u;
}

Tree read_tree_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open tree file: " + path);
  long long n = 0;
  if (!(in >> n) || n <= 0) throw std::runtime_error("bad tree header in " + path);
  std::vector<int> parent(std::size_t(n), -1);
  for (long long v = 1; v < n; ++v) {
    long long p;
    if (!(in >> p)) throw std::runtime_error("truncated tree file " + path);
    parent[std::size_t(v)] = int(p);
  }
  return Tree(std::move(parent));
}

void write_tree_file(const Tree& t, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write tree file: " + path);
  out << t.n() << '\n';
  for (int v = 1; v < t.n(); ++v) out << t.parent(v) << '\n';
}

}  // namespace treespan
