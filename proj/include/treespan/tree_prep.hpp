#pragma once

#include <string>
#include <vector>

#include "treespan/audit.hpp"
#include "treespan/tree.hpp"

namespace treespan {

// Split vertex of a subtree: a vertex x whose removal lets the remaining
// vertices be grouped into two forests, each with between t/3 and 2t/3
// vertices (t the subtree size). t=4 admits none (two integer parts of a
// 3-vertex remainder cannot both reach 4/3).
struct SplitResult {
  bool found = false;
  int vertex = -1;
  std::vector<int> part1, part2;
  std::string error;
};
SplitResult split_vertex(const Tree& t, const std::vector<int>& component);
SplitResult split_vertex(const Tree& t);

// BFS level sets of a connected component from a root inside it.
std::vector<std::vector<int>> level_sets(const Tree& t, int root,
                                         const std::vector<int>& component);

// Proper 2-coloring class sizes of a connected component (parity from an
// arbitrary root; the two orderings are the same pair).
std::pair<int, int> component_classes(const Tree& t, const std::vector<int>& component);

// Imbalance of a forest: sum over components of |class0 - class1|.
int forest_imbalance(const Tree& t, const std::vector<std::vector<int>>& components);

struct TreeComponent {
  int id = -1;
  std::vector<int> vertices;
  int root = -1;       // x, adjacent to attach1
  int attach1 = -1;    // skeleton vertex s
  int root2 = -1;      // x' of a two-attachment component, else -1
  int attach2 = -1;    // s' of a two-attachment component, else -1
  std::vector<int> line;  // two-attachment: interior path root .. root2
  std::vector<std::vector<int>> levels;  // from root, within the component
  int class0 = 0, class1 = 0;            // sizes by level parity
  int imbalance = 0;
  int size() const { return int(vertices.size()); }
};

struct SkeletonLine {
  int end1 = -1, end2 = -1;   // marked endpoints
  std::vector<int> interior;  // in path order end1 -> end2
  int length() const { return int(interior.size()) + 1; }  // edge count
  bool long_line = false;     // length >= 10; interior removed from the skeleton
};

struct TreeDecomposition {
  int n = 0;
  double eta = 0.0;
  int max_degree = 0;
  std::vector<int> split_vertices;          // k of them
  std::vector<int> tprime;                  // T' vertex ids
  std::vector<int> skeleton;                // T_S vertex ids
  std::vector<int> skeleton_comp;           // component id per tree vertex, -1 off skeleton
  int skeleton_comp_count = 0;
  std::vector<SkeletonLine> lines;
  std::vector<TreeComponent> components;
  int relaxed_splits = 0;  // splits that needed the centroid fallback
  std::vector<ClauseAudit> audits;          // the five structural clauses
  bool ok() const {
    for (const auto& a : audits)
      if (!a.ok) return false;
    return true;
  }
};

// Repeated splitting to component cap floor(eta*n) (>= 4 required), minimal
// spanning subtree of the split vertices, deletion of long-line interiors,
// component extraction, clause audits. Guarantees at least one split vertex.
TreeDecomposition build_skeleton(const Tree& t, double eta);

struct Chunk {
  std::vector<int> component_ids;
  int size = 0;
  int imbalance = 0;
};

// Size-ascending accumulation to `threshold`; an undersized remainder merges
// into the most recent chunk. Output sorted by imbalance ascending.
std::vector<Chunk> form_chunks(const std::vector<TreeComponent>& components, int threshold);

}  // namespace treespan
