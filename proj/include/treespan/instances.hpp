#pragma once

#include <string>

#include "treespan/graph.hpp"
#include "treespan/rng.hpp"
#include "treespan/tree.hpp"

namespace treespan {

// Host graph generators. gnp_mindeg resamples until the degree floor holds;
// two_cliques / complete_bipartite are the deterministic extremal families;
// near_extremal rewires a `mix` fraction of the missing cross edges of
// two_cliques back in, charting the approach to non-extremality.
struct HostSpec {
  std::string model;  // gnp_mindeg | ideal_blocks | two_cliques | complete_bipartite | near_extremal
  int n = 0;
  double p = 0.5;           // gnp_mindeg edge probability
  double nu = 0.0002;       // gnp_mindeg degree floor slack
  int blocks = 4;           // ideal_blocks count
  double mix = 0.0;         // near_extremal rewiring fraction
  int resample_budget = 500;
};

Graph gen_host(const HostSpec& spec, Rng& rng);

struct TreeSpec {
  std::string model;  // random_bounded | complete_ternary | path | caterpillar | broom
  int n = 0;
  int D = 3;
};

Tree gen_tree(const TreeSpec& spec, Rng& rng);

}  // namespace treespan
