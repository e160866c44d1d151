#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "treespan/graph.hpp"
#include "treespan/rng.hpp"

namespace treespan {

// Non-extremality of G at parameter gamma: every pair of (possibly
// overlapping) vertex sets A, B with |A| = |B| = floor(n/2) has ordered-pair
// edge count e(A,B) > gamma * n^2.
struct ExtremalWitness {
  VertexSet a, b;            // |A| = |B| = floor(n/2), e(A,B) <= gamma n^2
  std::uint64_t count = 0;
};

struct ExtremalityVerdict {
  bool nonextremal = false;
  double gamma = 0.0;
  std::string mode;                  // "exact" | "sampled"
  std::uint64_t min_count_seen = 0;  // smallest e(A,B) encountered
  std::uint64_t threshold = 0;       // floor(gamma n^2)
  std::size_t candidates_checked = 0;
  std::optional<ExtremalWitness> witness;
};

// Exhaustive over all floor(n/2)-subsets A; for each A the minimizing B is the
// floor(n/2) vertices of smallest degree into A (e(A,B) is additive over B).
// n above `cap` is rejected.
ExtremalityVerdict check_nonextremal_exact(const Graph& g, double gamma, int cap = 16);

// Sampled gate: random half-sets plus structured candidates (lowest-degree
// half against itself, neighborhood halves, BFS layer cuts), each paired with
// its exact minimizing B. A returned witness always re-verifies.
ExtremalityVerdict estimate_nonextremal(const Graph& g, double gamma, int trials, Rng& rng);

// S_v = { u : deg(u, V \ N(v)) < gamma n / 2 }.
VertexSet s_v_set(const Graph& g, int v, double gamma);

}  // namespace treespan
