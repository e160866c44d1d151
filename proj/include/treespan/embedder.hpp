#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "treespan/audit.hpp"
#include "treespan/constants.hpp"
#include "treespan/graph.hpp"
#include "treespan/host_prep.hpp"
#include "treespan/rng.hpp"
#include "treespan/tree.hpp"
#include "treespan/tree_prep.hpp"

namespace treespan {

// The embedding engine: skeleton placement into pair 1, zigzag covering of the
// irregular (relocated) vertices, chunk-to-pair assignment, connection cones
// with restriction sets, vacancy-equalizing relocations, and the greedy +
// matching finish inside each super-regular pair.

// Aborts the current attempt; embed() retries with a fresh substream and keeps
// a per-phase failure histogram.
struct PhaseFailure : std::runtime_error {
  std::string phase;
  PhaseFailure(const std::string& ph, const std::string& msg)
      : std::runtime_error(ph + ": " + msg), phase(ph) {}
};

// Where a component's vertices are headed once its chunk is assigned: the pair
// and the host side receiving its even (root-parity) color class.
struct ComponentPlan {
  int pair = 0;
  int side_of_class0 = -1;
  bool covered = false;  // consumed by the covering phase instead
  int chunk = -1;
};

// A depth-<=3 rooted slice for connect_component: `anchor` is an already
// embedded tree vertex, levels[i] holds the slice vertices at distance i+1
// from it. The final level is the one that must land inside H.
struct TreeSlice {
  int anchor = -1;
  std::vector<std::vector<int>> levels;
};

struct EmbeddingState {
  const Graph* g = nullptr;
  const Tree* t = nullptr;
  const TreeDecomposition* td = nullptr;
  Decomposition dec;          // private copy; final_balance relocates inside it
  std::vector<Chunk> chunks;  // imbalance ascending
  Constants cons;
  Rng rng{0};

  std::vector<int> phi;       // tree -> host, -1 unset
  std::vector<int> preimage;  // host -> tree, -1 vacant
  Bitset used;                // image of phi
  Bitset cover_half;          // union of the covering-phase random halves
  std::vector<char> chunk_state;  // 0 free, 1 covering-consumed, 2 assigned
  std::vector<int> chunk_pair;    // pair that consumed each chunk, -1 free
  std::vector<ComponentPlan> plans;        // indexed by component id
  std::vector<int> comp_of;                // component id per tree vertex, -1 skeleton
  std::vector<int> comp_level;             // BFS depth within the component, -1 skeleton
  std::vector<int> dest_pair, dest_side;   // per tree vertex, -1 unplanned
  std::vector<std::array<long long, 2>> t_rem;  // [cluster][side]: planned, unembedded
  std::map<int, Bitset> restrictions;      // tree vertex -> C_y
  std::vector<ClauseAudit> audits;
  std::vector<std::string> events;
  int spare_leaf = -1;     // leaf pre-mapped onto the split's spare vertex
  std::size_t w_peak = 0;  // largest forbidden set handed to a connect call
  long long fixed_images = 0;      // placements made by connect_chunks
  long long relocations = 0;       // final_balance triples applied
  int chunk_cursor = 0;            // next unconsumed chunk (imbalance order)

  int host_n() const { return g->n(); }
  Bitset vacant_set(int side, int cluster) const;
  int vacant_count(int side, int cluster) const;
  bool embedded(int x) const { return phi[std::size_t(x)] >= 0; }
  // Injectivity and realization of every tree edge whose other end is already
  // embedded are enforced here; violations are internal logic errors.
  void set_phi(int x, int v);
};

EmbeddingState make_state(const Graph& g, const Tree& t, const TreeDecomposition& td,
                          const Decomposition& dec, const std::vector<Chunk>& chunks,
                          const Constants& c, Rng rng);

// Greedy placement of the skeleton forest into pair 1, alternating sides by
// the proper 2-coloring of each skeleton component.
void embed_skeleton(EmbeddingState& s);

// Embeds the slice level by level: each level inside its pool and outside w,
// every placement adjacent to its already-embedded parent; when h is given the
// final level must land inside it. pools may carry one extra entry, the
// continuation pool the last level's children will need, used only to rank
// candidates by forward degree. Returns the placements made.
std::vector<std::pair<int, int>> connect_component(EmbeddingState& s, const TreeSlice& slice,
                                                   const Bitset& w,
                                                   const std::vector<Bitset>& pools,
                                                   const Bitset* h = nullptr);

// u-w1-w2-v path with w1 in pool1, w2 in pool2, both outside w and {u, v}.
// Lowest-id pair; std::nullopt when none exists.
std::optional<std::pair<int, int>> three_path(const Graph& g, int u, int v, const Bitset& w,
                                              const Bitset& pool1, const Bitset& pool2);

// Zigzag covering: for every pair side whose vacant added set exceeds
// eps^3 m_i, embeds minimum-imbalance chunks through the four-level cycle
// (irregulars -> opposite half -> own half -> enriched set) until the residual
// drops below the threshold.
void cover_irregulars(EmbeddingState& s);

// Assigns the remaining chunks to pairs, larger color class toward the larger
// vacancy gap, then flips component orientations until the per-side totals
// match vacancies exactly.
void assign_chunks(EmbeddingState& s);

// Embeds the depth-3 cone of every assigned component from its attachment(s)
// and records the restriction sets C_y of the level-4 frontier.
void connect_chunks(EmbeddingState& s);

// Uniform-random relocating triples among doubly-intact vacant vertices until
// every cluster's vacancy equals its planned load.
void final_balance(EmbeddingState& s);

// Completes phi inside each pair: randomized greedy level by level with a
// reserved buffer, leaves finished by a perfect matching per cluster.
void blowup_embed(EmbeddingState& s);

struct EmbedVerdict {
  bool ok = false;
  std::string error;
};

// Bijectivity onto V(G) plus realization of every tree edge; reports the
// first violation found.
EmbedVerdict verify_embedding(const Graph& g, const Tree& t, const std::vector<int>& phi);

struct Embedding {
  std::vector<int> phi;
  bool success = false;
  int attempts = 0;
  std::uint64_t seed = 0;
  std::vector<ClauseAudit> audits;      // from the successful attempt
  std::vector<std::string> events;
  std::map<std::string, int> failures;  // phase -> failed attempts
  std::string error;                    // last failure message when unsuccessful
};

void to_json(nlohmann::json& j, const Embedding& e);
void from_json(const nlohmann::json& j, Embedding& e);

// Full pipeline with reseeded retries: host preprocessing, skeleton build,
// chunk formation, then the six embedding phases and final verification.
Embedding embed(const Graph& g, const Tree& t, const Constants& c, std::uint64_t seed,
                int retries = 5);

}  // namespace treespan
