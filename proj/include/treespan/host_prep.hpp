#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "treespan/audit.hpp"
#include "treespan/constants.hpp"
#include "treespan/graph.hpp"
#include "treespan/matching.hpp"
#include "treespan/rng.hpp"

namespace treespan {

// Host-side preprocessing: random bipartition, r-factor, clustering into
// super-regular pairs, and the balancing that empties the exceptional sets.

struct Bipartition {
  std::vector<int> a, b;  // ascending vertex ids, |a| = |b| = floor(n/2)
  int spare = -1;         // v0 for odd n, else -1
};

// Per-vertex degree audit of a split. The literal bound
// deg(v, side) >= floor(deg(v)/2 - nu*n) is recorded but only enforced through
// the concentration bound deg(v, side) >= deg(v)/2 - max(nu*n, sqrt(deg ln n)):
// at small n with tiny nu the literal form is unreachable for any coin-flip
// split, so it is reported rather than gated on.
struct SplitReport {
  int attempts = 0;
  std::vector<int> literal_violations;
  std::vector<int> enforced_violations;  // empty on success
  bool ok = false;
};

Bipartition random_split(const Graph& g, double nu, Rng& rng, int max_retries = 5,
                         SplitReport* report = nullptr);

// (v, u, w) with via clusters (s, t): v gains entry to pair s, u moves s -> t,
// w moves t -> target. side 0 = A-side clusters, 1 = B-side. All three degree
// conditions are gamma^3 * |opposite origin cluster|.
struct RelocatingTriple {
  int first = -1, second = -1, third = -1;
  int via_s = 0, via_t = 0;
  int target = 0;
  int side = 0;
};

struct RelocationStep {
  RelocatingTriple triple;
  int first_from = 0;  // cluster the first vertex left (0 = exceptional)
  int rule = 0;        // balancing rule 1..4 that issued it
};

struct PairMeta {
  int m = 0;                      // common cluster size after balancing
  double support_density = 0.0;   // density at decompose time, in the graph given to decompose
  double host_density = 0.0;      // density of the core pair in the full host
  double delta_used = 0.0;        // min-degree floor used by the decompose audit
};

void to_json(nlohmann::json& j, const ClauseAudit& a);
void from_json(const nlohmann::json& j, ClauseAudit& a);
void to_json(nlohmann::json& j, const RelocatingTriple& t);
void from_json(const nlohmann::json& j, RelocatingTriple& t);
void to_json(nlohmann::json& j, const RelocationStep& s);
void from_json(const nlohmann::json& j, RelocationStep& s);
void to_json(nlohmann::json& j, const PairMeta& m);
void from_json(const nlohmann::json& j, PairMeta& m);

// Cluster state over global vertex ids. cluster_of 0 is the exceptional set of
// the vertex's side; 1..k are the pairs. origin_cluster is frozen at decompose
// time and defines the primes: A'_i = current members that started in i,
// A''_i = current members added by relocation.
struct Decomposition {
  int n = 0;
  int k = 0;
  std::vector<int> side;            // per vertex: 0 in A, 1 in B, -1 absent
  std::vector<int> cluster_of;      // per vertex: -1 absent, 0 exceptional, 1..k
  std::vector<int> origin_cluster;  // per vertex: cluster at decompose time
  std::vector<int> half_tag;        // per vertex: 1 in S, 2 outside, 0 unassigned
  std::vector<PairMeta> pairs;      // size k+1, index 0 unused
  std::vector<RelocationStep> log;
  std::vector<ClauseAudit> audits;
  bool balanced = false;

  std::vector<int> members(int s, int cluster) const;
  std::vector<int> origin_members(int s, int cluster) const;
  std::vector<int> prime_members(int s, int cluster) const;   // members ∩ origin
  std::vector<int> added_members(int s, int cluster) const;   // members − origin
  std::vector<int> exceptional(int s) const { return members(s, 0); }
  Bitset member_set(int s, int cluster) const;
  int pair_size(int s, int cluster) const;
  bool ok() const { return all_ok(audits); }
};

void to_json(nlohmann::json& j, const Decomposition& d);
void from_json(const nlohmann::json& j, Decomposition& d);

// Greedy neighborhood-similarity clustering of the pair's sides into
// K = clamp(|side| / min_cluster, 1, max_K) pairs, then peel-and-retry:
// vertices failing the pair's min-degree floor or deviating from its density
// by more than decomp_audit_eps move to the exceptional set, undersized pairs
// dissolve into their nearest survivor, oversized side gaps are trimmed.
// Audits record the partition structure, exceptional budget, cluster floor,
// per-pair side gap, and the sampled super-regularity of every pair.
Decomposition decompose(const BipartitePair& p, const Constants& c, Rng& rng);

struct PathResult {
  std::vector<RelocatingTriple> triples;
  bool shortfall = false;
};

// Pairwise-disjoint relocating triples for first vertex v toward the given
// cluster, greedy in ascending (second, third) order. Degree thresholds read
// graph g against the origin clusters of d. When restrict_to is given, second
// and third vertices must lie inside it; `used` excludes vertices already
// consumed by earlier triples.
PathResult find_relocating_paths(const Decomposition& d, const Graph& g, double gamma, int v,
                                 int side, int target, int limit,
                                 const Bitset* restrict_to = nullptr,
                                 const Bitset* used = nullptr);

struct TripleDraw {
  RelocatingTriple triple;
  bool found = false;
  std::uint64_t available = 0;  // triples the draw was uniform over
};

// One relocating triple for v toward the target, drawn uniformly among all
// available (second, third) pairs under the same eligibility rules as
// find_relocating_paths. Used by the final vacancy-equalizing step.
TripleDraw draw_relocating_triple(const Decomposition& d, const Graph& g, double gamma, int v,
                                  int side, int target, Rng& rng,
                                  const Bitset* restrict_to = nullptr,
                                  const Bitset* used = nullptr);

// Balancing: coin-flip halves (tag 1 forms S), then rules 1..4 until the
// exceptional sets are empty and every pair has |A_i| = |B_i|. Second and
// third vertices come from S, chosen uniformly among available triples; first
// vertices and target pairs are lowest-index. Throws when some request has no
// available triple. Appends relocation-count, added-fraction, participation
// and conservation audits.
void balance(Decomposition& d, const Graph& g, const Constants& c, Rng& rng);

// State as it was before balancing: origin clusters, same half tags, no log.
Decomposition pre_balance_state(const Decomposition& d);
// Replays one logged step; throws std::logic_error if the sources don't match.
void apply_step(Decomposition& d, const RelocationStep& step);

// Sampled check of e(X, Y) >= gamma^2 n^2 / 50 over floor(n/4)-subsets X of A,
// Y of B: adversarial low-degree candidates plus random draws, each X paired
// with its exact minimizing Y.
ClauseAudit cross_nonextremality_audit(const Graph& g, const Bipartition& bip, double gamma,
                                       int trials, Rng& rng);

// Union of the factor's matchings as a graph on the host's vertex ids.
Graph support_graph(int n, const RFactor& f);

struct PrepResult {
  Bipartition bip;
  int r = 0;
  RFactor factor;
  Graph support;
  Decomposition decomp;  // balanced; audits include the five output clauses
  SplitReport split_report;
};

// Full pipeline: gate (sampled non-extremality, then minimum degree), split,
// r = max(1, floor(nu*n)) factor, decompose on the factor's support, balance
// against full-host degrees, then audit the five output clauses:
// equal cluster sizes >= min_cluster, partition structure, added fractions
// <= gamma^4 m_i, sampled (2 eps, d/3)-super-regularity of the core pairs in
// the host, and gamma^3 |core|/3 degrees for every added vertex.
PrepResult preprocess_host(const Graph& g, const Constants& c, Rng& rng);

}  // namespace treespan
