#include <doctest.h>

#include <stdexcept>
#include <vector>

#include "treespan/graph.hpp"
#include "treespan/regularity.hpp"
#include "treespan/rng.hpp"

using namespace treespan;

namespace {

// complete bipartite pair on a+b vertices, left ids 0..a-1
BipartitePair make_complete(Graph& storage, int a, int b) {
  std::vector<std::pair<int, int>> edges;
  for (int u = 0; u < a; ++u)
    for (int v = a; v < a + b; ++v) edges.push_back({u, v});
  storage = build_graph(a + b, edges);
  Bitset l{std::size_t(a + b)}, r{std::size_t(a + b)};
  for (int i = 0; i < a; ++i) l.set(std::size_t(i));
  for (int i = a; i < a + b; ++i) r.set(std::size_t(i));
  return BipartitePair(storage, l, r);
}

BipartitePair make_random(Graph& storage, int a, int b, double p, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::pair<int, int>> edges;
  for (int u = 0; u < a; ++u)
    for (int v = a; v < a + b; ++v)
      if (rng.bernoulli(p)) edges.push_back({u, v});
  storage = build_graph(a + b, edges);
  Bitset l{std::size_t(a + b)}, r{std::size_t(a + b)};
  for (int i = 0; i < a; ++i) l.set(std::size_t(i));
  for (int i = a; i < a + b; ++i) r.set(std::size_t(i));
  return BipartitePair(storage, l, r);
}

// independent recount of |d(X,Y) - d| for a claimed witness
double witness_deviation(const BipartitePair& p, const RegularityWitness& w) {
  double dxy = double(ordered_pair_count(*p.host, w.x, w.y)) / (double(w.x.count()) * double(w.y.count()));
  return std::abs(dxy - p.density());
}

}  // namespace

TEST_CASE("exact checker on complete and empty pairs") {
  Graph g;
  auto p = make_complete(g, 4, 4);
  auto v = check_regular_exact(p, 0.1);
  CHECK(v.regular);
  CHECK(v.density == doctest::Approx(1.0));
  CHECK(v.mode == "exact");
  CHECK_FALSE(v.witness.has_value());

  Graph e = build_graph(8, {});
  Bitset l{8}, r{8};
  for (int i = 0; i < 4; ++i) l.set(std::size_t(i));
  for (int i = 4; i < 8; ++i) r.set(std::size_t(i));
  BipartitePair pe(e, l, r);
  auto ve = check_regular_exact(pe, 0.1);
  CHECK(ve.regular);
  CHECK(ve.density == doctest::Approx(0.0));
}

TEST_CASE("exact checker rejects a perfect matching with a real witness") {
  Graph g = build_graph(12, {{0, 6}, {1, 7}, {2, 8}, {3, 9}, {4, 10}, {5, 11}});
  Bitset l{12}, r{12};
  for (int i = 0; i < 6; ++i) l.set(std::size_t(i));
  for (int i = 6; i < 12; ++i) r.set(std::size_t(i));
  BipartitePair p(g, l, r);
  auto v = check_regular_exact(p, 0.3);
  CHECK_FALSE(v.regular);
  CHECK(v.density == doctest::Approx(1.0 / 6.0));
  REQUIRE(v.witness.has_value());
  // the witness must be a genuine qualifying violation
  const auto& w = *v.witness;
  CHECK(w.x.count() >= std::size_t(2));  // ceil(0.3 * 6)
  CHECK(w.y.count() >= std::size_t(2));
  CHECK(w.x.is_subset_of(l));
  CHECK(w.y.is_subset_of(r));
  CHECK(witness_deviation(p, w) > 0.3);
  CHECK(v.max_deviation == doctest::Approx(witness_deviation(p, w)));
}

TEST_CASE("exact checker refuses oversized sides") {
  Graph g;
  auto p = make_complete(g, 16, 4);
  CHECK_THROWS_AS(check_regular_exact(p, 0.1, 14), std::invalid_argument);
}

TEST_CASE("sampled checker agrees with exact on the matching and on K44") {
  Graph g;
  auto pk = make_complete(g, 4, 4);
  Rng rng(5);
  auto vk = estimate_regularity(pk, 0.1, 100, rng);
  CHECK(vk.regular);
  CHECK(vk.max_deviation == doctest::Approx(0.0));
  CHECK(vk.mode == "sampled");

  Graph m = build_graph(12, {{0, 6}, {1, 7}, {2, 8}, {3, 9}, {4, 10}, {5, 11}});
  Bitset l{12}, r{12};
  for (int i = 0; i < 6; ++i) l.set(std::size_t(i));
  for (int i = 6; i < 12; ++i) r.set(std::size_t(i));
  BipartitePair pm(m, l, r);
  Rng rng2(17);
  auto vm = estimate_regularity(pm, 0.3, 2000, rng2);
  CHECK_FALSE(vm.regular);
  REQUIRE(vm.witness.has_value());
  CHECK(witness_deviation(pm, *vm.witness) > 0.3);
}

TEST_CASE("sampled verdict matches exact oracle on random pairs; witnesses always real") {
  for (std::uint64_t seed = 1; seed <= 12; ++seed) {
    Graph g;
    auto p = make_random(g, 12, 12, 0.5, seed);
    auto exact = check_regular_exact(p, 0.45);
    Rng rng(seed * 1000 + 1);
    auto sampled = estimate_regularity(p, 0.45, 200, rng);
    // a sampled failure is always confirmed by the exact checker
    if (!sampled.regular) CHECK_FALSE(exact.regular);
    CHECK(sampled.max_deviation <= exact.max_deviation + 1e-12);
  }
}

TEST_CASE("degree deviation sets") {
  Graph g;
  auto pk = make_complete(g, 4, 4);
  auto s = degree_deviation_sets(pk, 0.1);
  CHECK(s.low_left.none());
  CHECK(s.high_left.none());
  CHECK(s.low_right.none());
  CHECK(s.high_right.none());

  // left = {star center 0, isolated 1}, right = {2,3,4,5}
  Graph st = build_graph(6, {{0, 2}, {0, 3}, {0, 4}, {0, 5}});
  BipartitePair ps(st, Bitset::from(6, {0, 1}), Bitset::from(6, {2, 3, 4, 5}));
  auto ds = degree_deviation_sets(ps, 0.1);
  CHECK(ds.low_left.test(1));
  CHECK_FALSE(ds.low_left.test(0));
  CHECK(ds.high_left.test(0));

  // Fact: on pairs that pass the exact check, deviation sets are eps-small
  for (std::uint64_t seed = 3; seed <= 8; ++seed) {
    Graph h;
    auto p = make_random(h, 12, 12, 0.5, seed);
    auto exact = check_regular_exact(p, 0.45);
    if (!exact.regular) continue;
    auto dd = degree_deviation_sets(p, 0.45);
    CHECK(double(dd.low_left.count()) <= 0.45 * 12);
    CHECK(double(dd.high_left.count()) <= 0.45 * 12);
    CHECK(double(dd.low_right.count()) <= 0.45 * 12);
    CHECK(double(dd.high_right.count()) <= 0.45 * 12);
  }
}

TEST_CASE("slice predictions") {
  Graph g;
  auto p = make_complete(g, 8, 8);
  Bitset a1{16}, b1{16};
  for (int i = 0; i < 4; ++i) a1.set(std::size_t(i));
  for (int i = 8; i < 12; ++i) b1.set(std::size_t(i));
  auto s = slice_pair(p, 0.1, a1, b1);
  CHECK(s.eps_prime == doctest::Approx(0.2));
  CHECK(s.alpha == doctest::Approx(0.5));
  CHECK(std::abs(s.pair.density() - s.parent_density) < 0.1 + 1e-12);

  auto ident = slice_pair(p, 0.1, p.left, p.right);
  CHECK(ident.eps_prime == doctest::Approx(0.2));  // alpha=1: max(eps, 2eps)
  CHECK(ident.pair.density() == doctest::Approx(p.density()));

  CHECK_THROWS_AS(slice_pair(p, 0.6, a1, b1), std::invalid_argument);  // alpha <= eps

  // K_{12,12} minus a perfect matching: worst deviation at subset size 4 is
  // Y = the partners of X, giving d(X,Y) = 12/16 vs density 11/12 -> 1/6
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < 12; ++i)
    for (int j = 0; j < 12; ++j)
      if (i != j) edges.push_back({i, 12 + j});
  Graph c = build_graph(24, edges);
  Bitset cl{24}, cr{24};
  for (int i = 0; i < 12; ++i) cl.set(std::size_t(i));
  for (int i = 12; i < 24; ++i) cr.set(std::size_t(i));
  BipartitePair pc(c, cl, cr);
  auto parent = check_regular_exact(pc, 0.3, 14);
  CHECK(parent.regular);
  CHECK(parent.max_deviation == doctest::Approx(1.0 / 6.0));
  // slice to the first 6 on each side, keeping the missing matching aligned
  Bitset sa{24}, sb{24};
  for (int i = 0; i < 6; ++i) sa.set(std::size_t(i));
  for (int i = 12; i < 18; ++i) sb.set(std::size_t(i));
  auto sc = slice_pair(pc, 0.3, sa, sb);
  CHECK(sc.eps_prime == doctest::Approx(0.6));
  auto child = check_regular_exact(sc.pair, sc.eps_prime);
  CHECK(child.regular);
  CHECK(std::abs(sc.pair.density() - sc.parent_density) < 0.3);
}

TEST_CASE("vertex insertion") {
  Graph g;
  auto p = make_complete(g, 10, 10);
  auto same = insert_vertices(p, 0.3, 0.5, 0.5, {}, {});
  CHECK(same.pair.left == p.left);
  CHECK(same.pair.right == p.right);
  CHECK(same.eps_predicted == doctest::Approx(0.9));
  CHECK(same.delta_predicted == doctest::Approx(0.2));

  // K_{10,10} plus one full-degree left vertex
  std::vector<std::pair<int, int>> edges;
  for (int u = 0; u < 10; ++u)
    for (int v = 10; v < 20; ++v) edges.push_back({u, v});
  for (int v = 10; v < 20; ++v) edges.push_back({20, v});
  Graph h = build_graph(21, edges);
  Bitset l{21}, r{21};
  for (int i = 0; i < 10; ++i) l.set(std::size_t(i));
  for (int i = 10; i < 20; ++i) r.set(std::size_t(i));
  BipartitePair ph(h, l, r);
  auto grown = insert_vertices(ph, 0.4, 0.5, 0.6, {20}, {});
  CHECK(grown.pair.left_size() == 11);
  auto verdict = check_super_regular_exact(grown.pair, grown.eps_predicted,
                                           grown.delta_predicted, 14);
  CHECK(verdict.super_regular);
  CHECK(grown.pair.density() == doctest::Approx(1.0));

  // low-degree insertion is rejected naming the vertex
  Graph h2 = build_graph(21, std::vector<std::pair<int, int>>(edges.begin(), edges.end() - 10));
  BipartitePair p2(h2, l, r);
  CHECK_THROWS_WITH_AS(insert_vertices(p2, 0.4, 0.5, 0.6, {20}, {}),
                       doctest::Contains("20"), std::invalid_argument);

  // budget violation
  CHECK_THROWS_AS(insert_vertices(ph, 0.1, 0.5, 0.6, {20}, {}), std::invalid_argument);
}
