#pragma once

#include <optional>
#include <string>

#include "treespan/graph.hpp"
#include "treespan/rng.hpp"

namespace treespan {

struct RegularityWitness {
  VertexSet x, y;      // violating subsets, |d(X,Y) - d(A,B)| > eps
  double deviation = 0.0;
};

struct RegularityVerdict {
  bool regular = false;
  double epsilon = 0.0;
  double density = 0.0;
  double max_deviation = 0.0;  // largest deviation seen
  std::string mode;            // "exact" | "sampled"
  std::size_t samples_used = 0;
  std::optional<RegularityWitness> witness;
};

struct SuperRegularityVerdict {
  RegularityVerdict regularity;
  bool super_regular = false;
  double delta = 0.0;
  int min_left_degree = 0;   // min over left of deg into right
  int min_right_degree = 0;
  int degree_floor_left = 0;   // required: ceil-free real bound delta*|right|
  int degree_floor_right = 0;
};

// Exact eps-regularity. Decides "for all X subseteq L, Y subseteq R with
// |X| >= eps|L|, |Y| >= eps|R|: |d(X,Y) - d| <= eps" by enumerating X at the
// minimal qualifying size on the cheaper side and taking the extremal Y
// directly (e(X,Y) is additive over Y, and by averaging the maximum deviation
// over all qualifying pairs is attained at minimal sizes). Sides above `cap`
// are rejected.
RegularityVerdict check_regular_exact(const BipartitePair& p, double eps, int cap = 14);

// One-sided sampled falsifier: draws X at sizes ceil(eps m), ceil(2 eps m),
// ceil(4 eps m), ceil(m/2) plus degree-extreme structured candidates, and pairs
// each X with its exact worst-case Y. A returned witness always re-verifies; a
// pass is only evidence.
RegularityVerdict estimate_regularity(const BipartitePair& p, double eps, int trials, Rng& rng);

SuperRegularityVerdict check_super_regular_exact(const BipartitePair& p, double eps, double delta,
                                                 int cap = 14);
SuperRegularityVerdict estimate_super_regularity(const BipartitePair& p, double eps, double delta,
                                                 int trials, Rng& rng);

// Degree deviation sets of an eps-regular pair: low = {v : deg < (d-eps)|other|},
// high = {v : deg > (d+eps)|other|}, per side.
struct DegreeDeviationSets {
  VertexSet low_left, high_left, low_right, high_right;
  double density = 0.0;
};
DegreeDeviationSets degree_deviation_sets(const BipartitePair& p, double eps);

// Slicing: sub-pair on A1 x B1 where |A1| >= alpha|A|, |B1| >= alpha|B|,
// alpha > eps. Predicted parameters eps' = max(eps/alpha, 2 eps) and density
// within eps of the parent's.
struct SlicedPair {
  BipartitePair pair;
  double alpha = 0.0;          // actual min side ratio
  double eps_prime = 0.0;
  double parent_density = 0.0;
};
SlicedPair slice_pair(const BipartitePair& p, double eps, const VertexSet& a1, const VertexSet& b1);

// Insertion: add <= eps^2|A| left and <= eps^2|B| right vertices, each with at
// least d|B| (resp. d|A|) neighbors across the original pair. Prediction:
// (3 eps, delta - eps)-super-regular.
struct InsertedPair {
  BipartitePair pair;
  double eps_predicted = 0.0;    // 3 eps
  double delta_predicted = 0.0;  // delta - eps
};
InsertedPair insert_vertices(const BipartitePair& p, double eps, double d, double delta,
                             const std::vector<int>& new_left, const std::vector<int>& new_right);

}  // namespace treespan
