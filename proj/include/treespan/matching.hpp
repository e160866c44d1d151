#pragma once

#include <optional>
#include <string>
#include <vector>

#include "treespan/graph.hpp"

namespace treespan {

// Hall deficiency certificate for a bipartite graph with no perfect matching:
// a left set A' whose neighborhood is smaller than |A'|.
struct HallCertificate {
  std::vector<int> set;            // local left indices
  std::vector<int> neighborhood;   // local right indices, N(set)
};

// Maximum matching on an explicit bipartite adjacency (local indices; rows may
// be mutated by the caller between runs, e.g. to remove used edges).
struct MatchingResult {
  std::vector<int> match_left;   // right partner per left index, -1 unmatched
  std::vector<int> match_right;
  int size = 0;
  std::optional<HallCertificate> certificate;  // present iff some left vertex unmatched
};

MatchingResult max_bipartite_matching(const std::vector<Bitset>& left_rows, int right_count);

// r pairwise edge-disjoint perfect matchings of the pair, found by repeated
// maximum matching and edge deletion. On failure, the round and a re-verified
// Hall certificate (in global vertex ids) are reported.
struct RFactor {
  std::vector<int> left_ids, right_ids;             // global ids, fixed order
  std::vector<std::vector<int>> matchings;          // matchings[k][i] = local right index matched to left i
  bool complete = false;
  int rounds_done = 0;
  std::string error;
  std::optional<HallCertificate> certificate;       // local indices into left_ids/right_ids
};

RFactor find_r_factor(const BipartitePair& p, int r);

// Union of the matchings as a bipartite adjacency over the same local indexing
// (every vertex has degree exactly rounds_done when complete).
std::vector<Bitset> r_factor_support(const RFactor& f);

}  // namespace treespan
