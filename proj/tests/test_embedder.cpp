#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "treespan/embedder.hpp"
#include "treespan/graph.hpp"
#include "treespan/host_prep.hpp"
#include "treespan/instances.hpp"
#include "treespan/rng.hpp"
#include "treespan/tree.hpp"
#include "treespan/tree_prep.hpp"

using namespace treespan;

namespace {

Graph complete_graph(int n) {
  Graph g(n);
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v) g.add_edge(u, v);
  return g;
}

Graph gnp_graph(int n, double p, Rng& rng) {
  Graph g(n);
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v)
      if (rng.bernoulli(p)) g.add_edge(u, v);
  return g;
}

// two dense gnp blocks bridged at a lower rate: non-extremal, but clustered
// enough that the similarity seeding recovers both blocks
Graph blocky_graph(int n, double p_in, double p_out, Rng& rng) {
  Graph g(n);
  int half = n / 2;
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v) {
      bool same = (u < half) == (v < half);
      if (rng.bernoulli(same ? p_in : p_out)) g.add_edge(u, v);
    }
  return g;
}

Tree path_tree(int n) {
  std::vector<int> par(std::size_t(n), 0);
  for (int v = 1; v < n; ++v) par[std::size_t(v)] = v - 1;
  return Tree(par);
}

const ClauseAudit* audit_of(const std::vector<ClauseAudit>& audits, const std::string& name) {
  for (const auto& a : audits)
    if (a.name == name) return &a;
  return nullptr;
}

// re-checks every already-realized tree edge of a partial embedding
void check_partial(const EmbeddingState& s) {
  for (int x = 1; x < s.t->n(); ++x) {
    int p = s.t->parent(x);
    if (s.phi[std::size_t(x)] >= 0 && s.phi[std::size_t(p)] >= 0)
      CHECK(s.g->has_edge(s.phi[std::size_t(x)], s.phi[std::size_t(p)]));
  }
}

// in-place pipeline fixture: the state keeps pointers into the struct, so the
// members must never be reseated after fill() succeeds
struct Pipeline {
  Graph g;
  Tree t;
  Constants cons;
  PrepResult prep;
  TreeDecomposition td;
  std::vector<Chunk> chunks;
  EmbeddingState st;

  int m_min() const {
    int m = std::numeric_limits<int>::max();
    for (int i = 1; i <= prep.decomp.k; ++i) m = std::min(m, prep.decomp.pairs[std::size_t(i)].m);
    return m;
  }

  // returns false when the host itself flunks preparation (small random hosts
  // legitimately fail the decomposition audits now and then)
  bool try_fill(Graph host, Tree tree, Constants c, std::uint64_t seed) {
    g = std::move(host);
    t = std::move(tree);
    cons = c;
    Rng root(seed);
    Rng prng = root.substream("prep");
    try {
      prep = preprocess_host(g, cons, prng);
    } catch (const std::runtime_error&) {
      return false;
    }
    if (!prep.decomp.ok()) return false;
    const double e4 = std::pow(cons.eps, 4);
    const double eta = cons.eta > 0 ? cons.eta : e4 * double(m_min()) / (2.0 * double(g.n()));
    td = build_skeleton(t, eta);
    if (!td.ok()) return false;
    chunks = form_chunks(td.components, std::max(1, int(std::ceil(e4 * double(m_min()) - 1e-9))));
    st = make_state(g, t, td, prep.decomp, chunks, cons, root.substream("embed"));
    return true;
  }

  void fill(Graph host, Tree tree, Constants c, std::uint64_t seed) {
    REQUIRE(try_fill(std::move(host), std::move(tree), c, seed));
    REQUIRE(prep.bip.spare < 0);  // fixtures stay even-sized
  }
};

}  // namespace

TEST_CASE("verify_embedding accepts the identity and rejects corruption") {
  Tree t = path_tree(6);
  Graph g(6);
  for (int v = 1; v < 6; ++v) g.add_edge(v - 1, v);

  std::vector<int> phi{0, 1, 2, 3, 4, 5};
  CHECK(verify_embedding(g, t, phi).ok);

  auto swapped = phi;
  std::swap(swapped[1], swapped[3]);
  auto bad_edge = verify_embedding(g, t, swapped);
  CHECK_FALSE(bad_edge.ok);
  CHECK(bad_edge.error.find("non-edge") != std::string::npos);

  auto dup = phi;
  dup[5] = 0;
  auto bad_inj = verify_embedding(g, t, dup);
  CHECK_FALSE(bad_inj.ok);
  CHECK(bad_inj.error.find("share image") != std::string::npos);

  auto mis = phi;
  mis[2] = 17;
  CHECK_FALSE(verify_embedding(g, t, mis).ok);

  std::vector<int> shorter{0, 1, 2};
  CHECK_FALSE(verify_embedding(g, t, shorter).ok);
}

TEST_CASE("three_path picks the lexicographically least pair in a complete host") {
  Graph g = complete_graph(10);
  Bitset full = g.full_set();
  Bitset none{std::size_t(10)};

  auto r = three_path(g, 0, 9, none, full, full);
  REQUIRE(r.has_value());
  CHECK(r->first == 1);
  CHECK(r->second == 2);

  Bitset w{std::size_t(10)};
  w.set(1);
  w.set(2);
  auto r2 = three_path(g, 0, 9, w, full, full);
  REQUIRE(r2.has_value());
  CHECK(r2->first == 3);
  CHECK(r2->second == 4);

  CHECK_THROWS_AS(three_path(g, 4, 4, none, full, full), std::invalid_argument);
}

TEST_CASE("three_path respects forced structure") {
  // only 0-1-2-3 exists
  Graph g(5);
  g.add_edge(0, 1);
  g.add_edge(1, 2);
  g.add_edge(2, 3);
  Bitset none{std::size_t(5)};
  Bitset p1 = Bitset::from(5, {1, 4});
  Bitset p2 = Bitset::from(5, {2, 4});

  auto r = three_path(g, 0, 3, none, p1, p2);
  REQUIRE(r.has_value());
  CHECK(r->first == 1);
  CHECK(r->second == 2);

  Bitset w{std::size_t(5)};
  w.set(1);
  CHECK_FALSE(three_path(g, 0, 3, w, p1, p2).has_value());
  CHECK_FALSE(three_path(g, 0, 3, none, p1, Bitset{std::size_t(5)}).has_value());
}

TEST_CASE("three_path agrees with brute force on random instances") {
  Rng rng(404);
  for (int trial = 0; trial < 200; ++trial) {
    int n = 5 + int(rng.below(4));
    Graph g = gnp_graph(n, 0.45, rng);
    int u = int(rng.below(std::uint64_t(n)));
    int v = int(rng.below(std::uint64_t(n)));
    if (u == v) continue;
    Bitset p1{std::size_t(n)}, p2{std::size_t(n)}, w{std::size_t(n)};
    for (int x = 0; x < n; ++x) {
      if (rng.bernoulli(0.7)) p1.set(std::size_t(x));
      if (rng.bernoulli(0.7)) p2.set(std::size_t(x));
      if (rng.bernoulli(0.15)) w.set(std::size_t(x));
    }

    std::pair<int, int> best{-1, -1};
    for (int w1 = 0; w1 < n && best.first < 0; ++w1) {
      if (!p1.test(std::size_t(w1)) || w.test(std::size_t(w1)) || w1 == u || w1 == v) continue;
      if (!g.has_edge(u, w1)) continue;
      for (int w2 = 0; w2 < n; ++w2) {
        if (!p2.test(std::size_t(w2)) || w.test(std::size_t(w2))) continue;
        if (w2 == u || w2 == v || w2 == w1) continue;
        if (g.has_edge(w1, w2) && g.has_edge(w2, v)) {
          best = {w1, w2};
          break;
        }
      }
    }

    auto got = three_path(g, u, v, w, p1, p2);
    if (best.first < 0) {
      CHECK_FALSE(got.has_value());
    } else {
      REQUIRE(got.has_value());
      CHECK(got->first == best.first);
      CHECK(got->second == best.second);
    }
  }
}

TEST_CASE("connect_component walks a slice through a complete host") {
  Pipeline p;
  Constants cons;
  cons.min_cluster = 8;
  p.fill(complete_graph(20), path_tree(20), cons, 7);
  Bitset full = p.g.full_set();

  int anchor_img = p.prep.decomp.member_set(0, 1).first_set();
  REQUIRE(anchor_img >= 0);
  p.st.set_phi(0, anchor_img);

  TreeSlice slice;
  slice.anchor = 0;
  slice.levels = {{1}, {2}, {3}};
  Bitset none{std::size_t(20)};

  SUBCASE("places every level and links parents") {
    auto placed = connect_component(p.st, slice, none, {full, full, full});
    CHECK(placed.size() == 3);
    for (auto& [x, v] : placed) CHECK(p.st.phi[std::size_t(x)] == v);
    check_partial(p.st);
  }

  SUBCASE("an empty level pool names the level and vertex") {
    try {
      connect_component(p.st, slice, none, {Bitset{std::size_t(20)}, full, full});
      FAIL("expected a phase failure");
    } catch (const PhaseFailure& pf) {
      CHECK(pf.phase == "connect");
      CHECK(std::string(pf.what()).find("level 1") != std::string::npos);
      CHECK(std::string(pf.what()).find("vertex 1") != std::string::npos);
    }
  }

  SUBCASE("the target set pins the final level") {
    Bitset h{std::size_t(20)};
    int target = p.prep.decomp.member_set(1, 1).first_set();
    h.set(std::size_t(target));
    auto placed = connect_component(p.st, slice, h, {full, full, full}, &h);
    CHECK(placed.back().second == target);
  }

  SUBCASE("a level vertex without an embedded parent is a contract violation") {
    TreeSlice orphan;
    orphan.anchor = 0;
    orphan.levels = {{2}};
    CHECK_THROWS_AS(connect_component(p.st, orphan, none, {full}), std::logic_error);
  }
}

TEST_CASE("connect_component survives random dense hosts") {
  Rng rng(9090);
  Constants cons;
  cons.min_cluster = 16;
  cons.nu = 0.1;  // n=40 gnp min degree dips below the default gate
  int successes = 0, attempted = 0;
  for (int trial = 0; trial < 100; ++trial) {
    Pipeline p;
    if (!p.try_fill(gnp_graph(40, 0.7, rng), path_tree(40), cons, 1000 + std::uint64_t(trial)))
      continue;  // tiny hosts flunk the decomposition audits occasionally
    ++attempted;
    p.st.set_phi(0, 0);
    TreeSlice slice;
    slice.anchor = 0;
    slice.levels = {{1}, {2}, {3}, {4}};
    Bitset full = p.g.full_set(), none{std::size_t(40)};
    try {
      auto placed = connect_component(p.st, slice, none, {full, full, full, full});
      CHECK(placed.size() == 4);
      check_partial(p.st);
      ++successes;
    } catch (const PhaseFailure&) {
    }
  }
  CHECK(attempted >= 40);
  CHECK(successes >= (attempted * 9) / 10);
}

TEST_CASE("skeleton embedding alternates pair-1 sides and realizes every edge") {
  Constants cons;
  cons.eta = 0.45;
  cons.min_cluster = 100;
  Rng grng(11);
  Pipeline p;
  TreeSpec ts{"random_bounded", 300, 3};
  Rng trng(22);
  p.fill(gnp_graph(300, 0.72, grng), gen_tree(ts, trng), cons, 5);
  REQUIRE(!p.td.skeleton.empty());

  embed_skeleton(p.st);

  const auto* budget = audit_of(p.st.audits, "skeleton_budget");
  const auto* edges = audit_of(p.st.audits, "skeleton_edges");
  REQUIRE(budget != nullptr);
  REQUIRE(edges != nullptr);
  CHECK(budget->ok);
  CHECK(edges->ok);

  Bitset a1 = p.prep.decomp.member_set(0, 1), b1 = p.prep.decomp.member_set(1, 1);
  for (int x : p.td.skeleton) {
    int img = p.st.phi[std::size_t(x)];
    REQUIRE(img >= 0);
    CHECK((a1.test(std::size_t(img)) || b1.test(std::size_t(img))));
  }
  for (int x : p.td.skeleton)
    for (int y : p.t.adj(x)) {
      if (y < x || p.td.skeleton_comp[std::size_t(y)] < 0) continue;
      if (p.td.skeleton_comp[std::size_t(y)] != p.td.skeleton_comp[std::size_t(x)]) continue;
      int ix = p.st.phi[std::size_t(x)], iy = p.st.phi[std::size_t(y)];
      CHECK(p.g.has_edge(ix, iy));
      CHECK(a1.test(std::size_t(ix)) != a1.test(std::size_t(iy)));
    }
}

TEST_CASE("covering is vacuous on clean hosts") {
  Constants cons;
  cons.eta = 0.65;
  cons.min_cluster = 100;
  Rng grng(31);
  Pipeline p;
  TreeSpec ts{"random_bounded", 300, 3};
  Rng trng(32);
  p.fill(gnp_graph(300, 0.7, grng), gen_tree(ts, trng), cons, 8);

  embed_skeleton(p.st);
  std::size_t used_before = p.st.used.count();
  cover_irregulars(p.st);

  CHECK(p.st.used.count() == used_before);
  CHECK(p.st.cover_half.none());
  for (char stt : p.st.chunk_state) CHECK(stt == 0);
  for (const char* name : {"cover_residual", "cover_halves", "cover_enriched_pool",
                           "cover_component_coverage", "cover_chunk_coverage"}) {
    const auto* a = audit_of(p.st.audits, name);
    REQUIRE(a != nullptr);
    CHECK(a->ok);
  }
}

TEST_CASE("covering clears planted irregular vertices") {
  // scale constraint for a faithful run: every component must stay below the
  // irregular threshold eps^3*m, or a single piece could drain the pool
  // mid-walk; eta*n <= eps^3*m keeps that impossible
  const int n = 360, m = n / 2, planted = 45;
  Constants cons;
  cons.gamma = 0.24;
  cons.eps = 0.55;
  cons.d = 0.8;
  cons.eta = 0.08;

  Rng grng(77);
  Graph g = gnp_graph(n, 0.85, grng);
  TreeSpec ts{"caterpillar", n, 3};
  Rng trng(78);
  Tree t = gen_tree(ts, trng);

  Decomposition dec;
  dec.n = n;
  dec.k = 1;
  dec.side.assign(std::size_t(n), 0);
  for (int v = m; v < n; ++v) dec.side[std::size_t(v)] = 1;
  dec.cluster_of.assign(std::size_t(n), 1);
  dec.origin_cluster.assign(std::size_t(n), 1);
  // the first `planted` vertices of each side arrived after decomposition
  for (int j = 0; j < planted; ++j) {
    dec.origin_cluster[std::size_t(j)] = 0;
    dec.origin_cluster[std::size_t(m + j)] = 0;
  }
  dec.half_tag.assign(std::size_t(n), 2);
  dec.pairs.assign(2, PairMeta{});
  dec.pairs[1].m = m;
  dec.pairs[1].host_density = 0.8;
  dec.balanced = true;

  TreeDecomposition td = build_skeleton(t, cons.eta);
  REQUIRE(td.ok());
  const int chunk_floor = int(std::ceil(std::pow(cons.eps, 4) * double(m) - 1e-9));
  auto chunks = form_chunks(td.components, chunk_floor);
  EmbeddingState st = make_state(g, t, td, dec, chunks, cons, Rng(99));

  embed_skeleton(st);
  cover_irregulars(st);

  const double thresh = std::pow(cons.eps, 3) * double(m);
  for (int side = 0; side < 2; ++side) {
    int resid = 0;
    for (int v : st.dec.added_members(side, 1))
      if (!st.used.test(std::size_t(v))) ++resid;
    CHECK(double(resid) <= thresh + 1e-9);
  }

  int consumed = 0;
  for (std::size_t ci = 0; ci < st.chunk_state.size(); ++ci)
    if (st.chunk_state[ci] == 1) {
      ++consumed;
      CHECK(st.chunk_pair[ci] == 1);
      for (int cid : st.chunks[ci].component_ids) {
        CHECK(st.plans[std::size_t(cid)].covered);
        CHECK(st.plans[std::size_t(cid)].pair == 1);
      }
    }
  CHECK(consumed > 0);
  check_partial(st);

  // drawn halves stay inside the untouched prime parts
  for (int side = 0; side < 2; ++side) {
    Bitset primes = Bitset::from(std::size_t(n), st.dec.prime_members(side, 1));
    Bitset h = st.cover_half;
    h &= st.dec.member_set(side, 1);
    CHECK(h.is_subset_of(primes));
  }

  for (const char* name : {"cover_residual", "cover_halves", "cover_enriched_pool",
                           "cover_component_coverage", "cover_chunk_coverage"}) {
    const auto* a = audit_of(st.audits, name);
    REQUIRE(a != nullptr);
    CHECK(a->ok);
  }
}

TEST_CASE("assignment covers every chunk and meets side totals exactly") {
  // two real cluster pairs: the preprocessing clusters on the r-factor support,
  // which at the default nu carries no block signal, so build the decomposition
  // straight from a blocky host with an even/odd split
  const int n = 900;
  Constants cons;
  cons.eta = 0.2;
  Rng grng(55);
  Graph g = blocky_graph(n, 0.85, 0.35, grng);
  Bitset left{std::size_t(n)}, right{std::size_t(n)};
  for (int v = 0; v < n; ++v) (v % 2 == 0 ? left : right).set(std::size_t(v));
  BipartitePair split(g, left, right);
  Rng root(12);
  Rng drng = root.substream("decompose");
  Decomposition dec = decompose(split, cons, drng);
  REQUIRE(dec.k >= 2);
  Rng brng = root.substream("balance");
  balance(dec, g, cons, brng);
  REQUIRE(dec.ok());

  TreeSpec ts{"random_bounded", n, 3};
  Rng trng(56);
  Tree t = gen_tree(ts, trng);
  int m_min = std::numeric_limits<int>::max();
  for (int i = 1; i <= dec.k; ++i) m_min = std::min(m_min, dec.pairs[std::size_t(i)].m);
  const double e4 = std::pow(cons.eps, 4);
  TreeDecomposition td = build_skeleton(t, cons.eta);
  REQUIRE(td.ok());
  auto chunks = form_chunks(td.components, std::max(1, int(std::ceil(e4 * double(m_min) - 1e-9))));
  EmbeddingState st = make_state(g, t, td, dec, chunks, cons, root.substream("embed"));

  embed_skeleton(st);
  cover_irregulars(st);
  assign_chunks(st);

  for (const char* name : {"assign_complete", "assign_side_exact", "assign_drift", "assign_gap",
                           "assign_compensation"}) {
    const auto* a = audit_of(st.audits, name);
    REQUIRE(a != nullptr);
    CHECK(a->ok);
  }
  for (char stt : st.chunk_state) CHECK(stt != 0);

  // per-side conservation: remaining targets match the vacancies exactly
  for (int side = 0; side < 2; ++side) {
    long long vac = 0, trem = 0;
    for (int i = 1; i <= dec.k; ++i) {
      vac += st.vacant_count(side, i);
      trem += st.t_rem[std::size_t(i)][std::size_t(side)];
    }
    CHECK(vac == trem);
  }

  // destinations follow the class parity of each component's plan
  for (const auto& f : td.components) {
    const auto& plan = st.plans[std::size_t(f.id)];
    if (plan.covered) continue;
    CHECK(plan.pair >= 1);
    CHECK(plan.pair <= dec.k);
    for (int v : f.vertices) {
      if (st.embedded(v)) continue;
      CHECK(st.dest_pair[std::size_t(v)] == plan.pair);
      CHECK(st.dest_side[std::size_t(v)] ==
            (plan.side_of_class0 ^ (st.comp_level[std::size_t(v)] & 1)));
    }
  }

  // downstream at k=2: cones keep the partial embedding consistent and the
  // equalizer has real cluster pairs to shuffle between
  connect_chunks(st);
  std::size_t log_before = st.dec.log.size();
  final_balance(st);
  CHECK(audit_of(st.audits, "cluster_exact")->ok);
  CHECK(audit_of(st.audits, "relocation_total")->ok);
  CHECK(st.dec.log.size() - log_before == std::size_t(st.relocations));
  for (int i = 1; i <= st.dec.k; ++i)
    for (int side = 0; side < 2; ++side)
      CHECK(st.vacant_count(side, i) == st.t_rem[std::size_t(i)][std::size_t(side)]);
}

TEST_CASE("connection cones anchor restrictions to host neighborhoods") {
  Constants cons;
  Rng grng(61);
  Pipeline p;
  TreeSpec ts{"random_bounded", 600, 3};
  Rng trng(62);
  p.fill(gnp_graph(600, 0.6, grng), gen_tree(ts, trng), cons, 17);

  embed_skeleton(p.st);
  cover_irregulars(p.st);
  assign_chunks(p.st);
  long long unembedded_before = 0;
  for (int x = 0; x < p.t.n(); ++x)
    if (!p.st.embedded(x)) ++unembedded_before;
  connect_chunks(p.st);

  check_partial(p.st);
  for (const char* name : {"connect_fixed", "restriction_count", "restriction_size", "w_budget"}) {
    CHECK(audit_of(p.st.audits, name) != nullptr);
  }
  CHECK(audit_of(p.st.audits, "connect_fixed")->ok);
  CHECK(audit_of(p.st.audits, "restriction_size")->ok);

  // every restriction is cut from the host row of an embedded tree neighbor
  for (const auto& [y, cy] : p.st.restrictions) {
    CHECK_FALSE(p.st.embedded(y));
    bool anchored = false;
    for (int x : p.t.adj(y))
      if (p.st.embedded(x)) {
        anchored = true;
        CHECK(cy.is_subset_of(p.g.row(p.st.phi[std::size_t(x)])));
      }
    CHECK(anchored);
    CHECK(cy.is_subset_of(p.st.dec.member_set(p.st.dest_side[std::size_t(y)],
                                              p.st.dest_pair[std::size_t(y)])));
  }

  // cone placements drained targets in lockstep with the vacancies
  long long unembedded_now = 0;
  for (int x = 0; x < p.t.n(); ++x)
    if (!p.st.embedded(x)) ++unembedded_now;
  CHECK(unembedded_before - unembedded_now == p.st.fixed_images);
  long long trem_total = 0;
  for (int i = 1; i <= p.prep.decomp.k; ++i)
    trem_total += p.st.t_rem[std::size_t(i)][0] + p.st.t_rem[std::size_t(i)][1];
  CHECK(trem_total == unembedded_now);
}

TEST_CASE("vacancy equalization zeroes every cluster gap") {
  Constants cons;
  Rng grng(71);
  Pipeline p;
  TreeSpec ts{"random_bounded", 600, 3};
  Rng trng(72);
  p.fill(gnp_graph(600, 0.6, grng), gen_tree(ts, trng), cons, 23);

  embed_skeleton(p.st);
  cover_irregulars(p.st);
  assign_chunks(p.st);
  connect_chunks(p.st);
  std::size_t log_before = p.st.dec.log.size();
  final_balance(p.st);

  CHECK(audit_of(p.st.audits, "cluster_exact") != nullptr);
  CHECK(audit_of(p.st.audits, "cluster_exact")->ok);
  CHECK(audit_of(p.st.audits, "relocation_total")->ok);
  CHECK(audit_of(p.st.audits, "relocation_participation")->ok);
  CHECK(p.st.dec.log.size() - log_before == std::size_t(p.st.relocations));

  for (int i = 1; i <= p.st.dec.k; ++i)
    for (int side = 0; side < 2; ++side)
      CHECK(p.st.vacant_count(side, i) == p.st.t_rem[std::size_t(i)][std::size_t(side)]);

  // equalization moves only intact, unused vertices
  for (std::size_t li = log_before; li < p.st.dec.log.size(); ++li) {
    const auto& step = p.st.dec.log[li];
    CHECK(step.rule == 5);
    for (int v : {step.triple.first, step.triple.second, step.triple.third}) {
      CHECK_FALSE(p.st.used.test(std::size_t(v)));
      CHECK(p.st.dec.half_tag[std::size_t(v)] == 2);
    }
    for (int v : {step.triple.second, step.triple.third})
      CHECK_FALSE(p.st.cover_half.test(std::size_t(v)));
  }
}

TEST_CASE("equalization is a no-op when the gaps are already zero") {
  Graph g = complete_graph(40);
  Tree t = path_tree(40);
  Decomposition dec;
  dec.n = 40;
  dec.k = 1;
  dec.side.assign(40, 0);
  for (int v = 20; v < 40; ++v) dec.side[std::size_t(v)] = 1;
  dec.cluster_of.assign(40, 1);
  dec.origin_cluster.assign(40, 1);
  dec.half_tag.assign(40, 2);
  dec.pairs.assign(2, PairMeta{});
  dec.pairs[1].m = 20;
  dec.balanced = true;

  TreeDecomposition td = build_skeleton(t, 0.9);
  EmbeddingState st = make_state(g, t, td, dec, {}, Constants{}, Rng(3));
  st.t_rem[1] = {20, 20};

  final_balance(st);
  CHECK(st.relocations == 0);
  CHECK(st.dec.log.empty());
  CHECK(audit_of(st.audits, "cluster_exact")->ok);
  CHECK(audit_of(st.audits, "relocation_pool")->ok);
}

TEST_CASE("embed maps a Hamilton path into a complete host") {
  Graph g = complete_graph(200);
  Tree t = path_tree(200);
  Constants cons;
  cons.min_cluster = 80;
  cons.eta = 0.41;  // m=100 leaves a skeleton budget of 5; derived eta overshoots it
  Embedding e = embed(g, t, cons, 1234, 3);

  REQUIRE(e.success);
  CHECK(e.attempts == 1);
  CHECK(verify_embedding(g, t, e.phi).ok);
  const auto* v = audit_of(e.audits, "verify");
  REQUIRE(v != nullptr);
  CHECK(v->ok);
  CHECK(audit_of(e.audits, "blowup_complete")->ok);
}

TEST_CASE("embed handles an odd host through the spare vertex") {
  HostSpec hs;
  hs.model = "gnp_mindeg";
  hs.n = 121;
  hs.p = 0.62;
  hs.nu = 0.05;
  hs.resample_budget = 4000;
  Rng grng(2024);
  Graph g = gen_host(hs, grng);
  TreeSpec ts{"random_bounded", 121, 3};
  Rng trng(2025);
  Tree t = gen_tree(ts, trng);

  Constants cons;
  cons.eta = 0.65;
  cons.min_cluster = 50;
  Embedding e = embed(g, t, cons, 777, 5);
  REQUIRE(e.success);
  CHECK(verify_embedding(g, t, e.phi).ok);
}

TEST_CASE("embed rejects extremal hosts at the gate") {
  HostSpec hs;
  hs.model = "two_cliques";
  hs.n = 200;
  Rng grng(1);
  Graph g = gen_host(hs, grng);
  Tree t = path_tree(200);

  Embedding e = embed(g, t, Constants{}, 42, 2);
  CHECK_FALSE(e.success);
  CHECK(e.attempts == 2);
  CHECK(e.failures.at("gate") == 2);
  CHECK(e.error.find("gate") != std::string::npos);
  CHECK(e.phi.empty());
}

TEST_CASE("embed validates its arguments") {
  Graph g = complete_graph(10);
  CHECK_THROWS_AS(embed(g, path_tree(12), Constants{}, 1), std::invalid_argument);

  std::vector<int> par(10, 0);  // star: center degree 9
  CHECK_THROWS_AS(embed(g, Tree(par), Constants{}, 1), std::invalid_argument);
}

TEST_CASE("embed is deterministic and exposes the accounting audits") {
  HostSpec hs;
  hs.model = "gnp_mindeg";
  hs.n = 600;
  hs.p = 0.55;
  hs.nu = 0.0002;
  hs.resample_budget = 4000;
  Rng grng(3131);
  Graph g = gen_host(hs, grng);
  TreeSpec ts{"random_bounded", 600, 3};
  Rng trng(3232);
  Tree t = gen_tree(ts, trng);

  Constants cons;
  Embedding e1 = embed(g, t, cons, 2026, 5);
  Embedding e2 = embed(g, t, cons, 2026, 5);

  REQUIRE(e1.success);
  CHECK(verify_embedding(g, t, e1.phi).ok);
  CHECK(e1.phi == e2.phi);
  CHECK(e1.attempts == e2.attempts);
  nlohmann::json j1 = e1, j2 = e2;
  CHECK(j1 == j2);

  std::set<std::string> names;
  for (const auto& a : e1.audits) names.insert(a.name);
  for (const char* required :
       {"skeleton_budget", "assign_complete", "assign_drift", "assign_gap", "cluster_exact",
        "relocation_total", "restriction_post", "blowup_restriction_count", "blowup_complete",
        "verify"}) {
    CHECK_MESSAGE(names.count(required) == 1, required);
  }
  for (const auto& a : e1.audits)
    if (a.name != "w_budget") CHECK_MESSAGE(a.ok, a.name);
}

TEST_CASE("embedding reports serialize round-trip") {
  Embedding e;
  e.phi = {2, 0, 1};
  e.success = true;
  e.attempts = 2;
  e.seed = 99;
  e.audits.push_back({"verify", true, 0.0, 0.0});
  e.events.push_back("buffer_dip vertex=5 pair=1 side=A");
  e.failures["connect"] = 1;
  e.error = "";

  nlohmann::json j = e;
  Embedding back = j.get<Embedding>();
  CHECK(back.phi == e.phi);
  CHECK(back.success == e.success);
  CHECK(back.attempts == e.attempts);
  CHECK(back.seed == e.seed);
  CHECK(back.audits.size() == 1);
  CHECK(back.events == e.events);
  CHECK(back.failures == e.failures);
}
