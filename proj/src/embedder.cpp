#include "treespan/embedder.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <map>

#include "treespan/matching.hpp"
#include "treespan/regularity.hpp"

namespace treespan {

namespace {

int iceil(double x) { return int(std::ceil(x - 1e-9)); }

std::string side_tag(int side) { return side == 0 ? "A" : "B"; }

// max |N(v) cap target| over the pool, ties to the lowest id
int pick_ranked(const Graph& g, const Bitset& pool, const Bitset& target) {
  int best = -1;
  std::size_t best_deg = 0;
  pool.for_each([&](int v) {
    std::size_t dg = g.row(v).count_and(target);
    if (best < 0 || dg > best_deg) {
      best = v;
      best_deg = dg;
    }
  });
  return best;
}

void clip_restriction(const EmbeddingState& s, int x, Bitset& pool) {
  auto it = s.restrictions.find(x);
  if (it != s.restrictions.end()) pool &= it->second;
}

const TreeComponent& comp_by_id(const EmbeddingState& s, int cid) {
  for (const auto& f : s.td->components)
    if (f.id == cid) return f;
  throw std::logic_error("embedder: unknown component id " + std::to_string(cid));
}

int next_free_chunk(const EmbeddingState& s) {
  for (std::size_t ci = 0; ci < s.chunks.size(); ++ci)
    if (s.chunk_state[ci] == 0) return int(ci);
  return -1;
}

// BFS level lists of the piece reachable from `root` inside component `cid`
// without stepping on blocked vertices
std::vector<std::vector<int>> piece_levels(const EmbeddingState& s, int root, int cid,
                                           const std::vector<char>& block) {
  const Tree& t = *s.t;
  std::vector<std::vector<int>> out;
  std::vector<char> seen(std::size_t(t.n()), 0);
  std::vector<int> cur{root};
  seen[std::size_t(root)] = 1;
  while (!cur.empty()) {
    std::sort(cur.begin(), cur.end());
    out.push_back(cur);
    std::vector<int> nxt;
    for (int x : cur)
      for (int y : t.adj(x))
        if (!seen[std::size_t(y)] && !block[std::size_t(y)] &&
            s.comp_of[std::size_t(y)] == cid) {
          seen[std::size_t(y)] = 1;
          nxt.push_back(y);
        }
    cur = std::move(nxt);
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// state

Bitset EmbeddingState::vacant_set(int side, int cluster) const {
  Bitset m = dec.member_set(side, cluster);
  m -= used;
  return m;
}

int EmbeddingState::vacant_count(int side, int cluster) const {
  return int(vacant_set(side, cluster).count());
}

void EmbeddingState::set_phi(int x, int v) {
  if (x < 0 || x >= t->n() || v < 0 || v >= host_n())
    throw std::logic_error("set_phi: index out of range");
  if (phi[std::size_t(x)] >= 0)
    throw std::logic_error("set_phi: tree vertex " + std::to_string(x) + " already embedded");
  if (preimage[std::size_t(v)] >= 0)
    throw std::logic_error("set_phi: host vertex " + std::to_string(v) + " already an image");
  for (int y : t->adj(x))
    if (phi[std::size_t(y)] >= 0 && !g->has_edge(v, phi[std::size_t(y)]))
      throw std::logic_error("set_phi: tree edge " + std::to_string(x) + "-" + std::to_string(y) +
                             " has no host edge " + std::to_string(v) + "-" +
                             std::to_string(phi[std::size_t(y)]));
  phi[std::size_t(x)] = v;
  preimage[std::size_t(v)] = x;
  used.set(std::size_t(v));
}

EmbeddingState make_state(const Graph& g, const Tree& t, const TreeDecomposition& td,
                          const Decomposition& dec, const std::vector<Chunk>& chunks,
                          const Constants& c, Rng rng) {
  EmbeddingState s;
  s.g = &g;
  s.t = &t;
  s.td = &td;
  s.dec = dec;
  s.chunks = chunks;
  s.cons = c;
  s.rng = rng;
  s.phi.assign(std::size_t(t.n()), -1);
  s.preimage.assign(std::size_t(g.n()), -1);
  s.used = Bitset(std::size_t(g.n()));
  s.cover_half = Bitset(std::size_t(g.n()));
  s.chunk_state.assign(chunks.size(), 0);
  s.chunk_pair.assign(chunks.size(), -1);
  int max_id = -1;
  for (const auto& f : td.components) max_id = std::max(max_id, f.id);
  s.plans.assign(std::size_t(max_id + 1), ComponentPlan{});
  s.comp_of.assign(std::size_t(t.n()), -1);
  s.comp_level.assign(std::size_t(t.n()), -1);
  for (const auto& f : td.components)
    for (std::size_t l = 0; l < f.levels.size(); ++l)
      for (int x : f.levels[l]) {
        s.comp_of[std::size_t(x)] = f.id;
        s.comp_level[std::size_t(x)] = int(l);
      }
  s.dest_pair.assign(std::size_t(t.n()), -1);
  s.dest_side.assign(std::size_t(t.n()), -1);
  s.t_rem.assign(std::size_t(dec.k + 1), {0, 0});
  return s;
}

// ---------------------------------------------------------------------------
// phase 1: skeleton

void embed_skeleton(EmbeddingState& s) {
  const TreeDecomposition& td = *s.td;
  const Graph& g = *s.g;
  const Tree& t = *s.t;
  const int m1 = s.dec.k >= 1 ? s.dec.pairs[1].m : 0;
  const double budget = s.cons.d * double(m1) / 8.0;
  const std::size_t ts = td.skeleton.size();
  bool within = double(ts) <= budget + 1e-9;
  s.audits.push_back({"skeleton_budget", within, double(ts), budget});
  if (!within)
    throw PhaseFailure("skeleton", "skeleton size " + std::to_string(ts) + " exceeds d*m1/8 = " +
                                       std::to_string(budget));
  if (ts == 0) {
    s.audits.push_back({"skeleton_edges", true, 0.0, 0.0});
    return;
  }

  std::map<int, std::vector<int>> comps;
  for (int x : td.skeleton) comps[td.skeleton_comp[std::size_t(x)]].push_back(x);

  std::vector<char> in_skel(std::size_t(t.n()), 0);
  for (int x : td.skeleton) in_skel[std::size_t(x)] = 1;

  // each skeleton component lands with a coin-flipped orientation so a retry
  // can escape a side-parity dead end downstream
  Rng skrng = s.rng.substream("skeleton");
  for (auto& [cid, verts] : comps) {
    std::sort(verts.begin(), verts.end());
    const int root_side = skrng.coin() ? 1 : 0;
    std::vector<char> seen(std::size_t(t.n()), 0);
    std::vector<std::pair<int, int>> queue;  // vertex, depth
    queue.push_back({verts.front(), 0});
    seen[std::size_t(verts.front())] = 1;
    for (std::size_t qi = 0; qi < queue.size(); ++qi) {
      auto [x, depth] = queue[qi];
      if (!s.embedded(x)) {
        int side = root_side ^ (depth & 1);
        Bitset pool = s.vacant_set(side, 1);
        for (int y : t.adj(x))
          if (s.embedded(y)) pool &= g.row(s.phi[std::size_t(y)]);
        clip_restriction(s, x, pool);
        if (pool.none())
          throw PhaseFailure("skeleton", "no candidate in pair 1 side " + side_tag(side) +
                                             " for skeleton vertex " + std::to_string(x));
        int v = pick_ranked(g, pool, s.vacant_set(1 - side, 1));
        s.set_phi(x, v);
      }
      for (int y : t.adj(x))
        if (in_skel[std::size_t(y)] && td.skeleton_comp[std::size_t(y)] == cid &&
            !seen[std::size_t(y)]) {
          seen[std::size_t(y)] = 1;
          queue.push_back({y, depth + 1});
        }
    }
  }

  int bad = 0;
  for (int x : td.skeleton)
    for (int y : t.adj(x))
      if (y > x && in_skel[std::size_t(y)] &&
          !g.has_edge(s.phi[std::size_t(x)], s.phi[std::size_t(y)]))
        ++bad;
  s.audits.push_back({"skeleton_edges", bad == 0, double(bad), 0.0});
}

// ---------------------------------------------------------------------------
// connect primitive

std::vector<std::pair<int, int>> connect_component(EmbeddingState& s, const TreeSlice& slice,
                                                   const Bitset& w,
                                                   const std::vector<Bitset>& pools,
                                                   const Bitset* h) {
  if (slice.anchor < 0 || !s.embedded(slice.anchor))
    throw std::logic_error("connect_component: anchor not embedded");
  const std::size_t levels = slice.levels.size();
  if (pools.size() < levels) throw std::logic_error("connect_component: missing level pools");
  s.w_peak = std::max(s.w_peak, w.count());
  const Graph& g = *s.g;
  std::vector<std::pair<int, int>> placed;
  for (std::size_t l = 0; l < levels; ++l) {
    const bool last = (l + 1 == levels);
    for (int x : slice.levels[l]) {
      if (s.embedded(x)) continue;
      Bitset pool = pools[l];
      if (h && last)
        pool &= *h;
      else
        pool -= w;
      bool have_parent = false;
      for (int y : s.t->adj(x))
        if (s.embedded(y)) {
          pool &= g.row(s.phi[std::size_t(y)]);
          have_parent = true;
        }
      if (!have_parent)
        throw std::logic_error("connect_component: vertex " + std::to_string(x) +
                               " has no embedded neighbor");
      pool -= s.used;
      clip_restriction(s, x, pool);
      if (pool.none())
        throw PhaseFailure("connect", "no candidate at level " + std::to_string(l + 1) +
                                          " for tree vertex " + std::to_string(x));
      int v = l + 1 < pools.size() ? pick_ranked(g, pool, pools[l + 1]) : pool.first_set();
      s.set_phi(x, v);
      placed.push_back({x, v});
    }
  }
  return placed;
}

std::optional<std::pair<int, int>> three_path(const Graph& g, int u, int v, const Bitset& w,
                                              const Bitset& pool1, const Bitset& pool2) {
  if (u == v) throw std::invalid_argument("three_path: endpoints coincide");
  Bitset p1 = pool1;
  p1 -= w;
  p1.reset(std::size_t(u));
  p1.reset(std::size_t(v));
  p1 &= g.row(u);
  for (int w1 : p1.to_vector()) {
    Bitset p2 = pool2;
    p2 -= w;
    p2.reset(std::size_t(u));
    p2.reset(std::size_t(v));
    p2.reset(std::size_t(w1));
    p2 &= g.row(w1);
    p2 &= g.row(v);
    int w2 = p2.first_set();
    if (w2 >= 0) return std::make_pair(w1, w2);
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// phase 2: covering

namespace {

// accumulated covering statistics for the phase audits
struct CoverStats {
  double min_bt_margin = std::numeric_limits<double>::max();
  bool any_bt = false;
  double min_comp_margin = std::numeric_limits<double>::max();
  bool any_comp = false;
  double min_chunk_margin = std::numeric_limits<double>::max();
  bool any_chunk = false;
};

struct CoverCtx {
  int pair = 0;
  int sigma = 0;           // side holding the vacant irregulars
  Bitset own_half, opp_half;
  Bitset u_set;            // irregular membership, static; vacancy via `used`
  Bitset btilde;           // per-piece enriched subset of the opposite half
  int f = 4;               // first irregular-landing level of the last piece
  CoverStats* stats = nullptr;
};

// Embeds one rooted piece through the four-level cycle
// (irregulars, opposite half, own half, enriched set), levels 0..1 scattered
// into the pair's vacant sides, level 2 through the pre-qualified target set.
// Returns the number of irregulars consumed.
double cover_piece(EmbeddingState& s, CoverCtx& ctx, int anchor,
                   const std::vector<std::vector<int>>& levels) {
  const Graph& g = *s.g;
  const int n = s.host_n();
  const int D = s.cons.D;
  const double g3 = std::pow(s.cons.gamma, 3);
  const int depth = int(levels.size()) - 1;
  if (depth < 0) return 0.0;

  // tau = argmax of the residue-class level mass, lowest index on ties
  std::array<long long, 4> mass{0, 0, 0, 0};
  for (int l = 0; l <= depth; ++l) mass[std::size_t(l % 4)] += (long long)levels[std::size_t(l)].size();
  int tau = 0;
  for (int c = 1; c < 4; ++c)
    if (mass[std::size_t(c)] > mass[std::size_t(tau)]) tau = c;
  static const int first_landing[4] = {4, 5, 2, 3};
  const int f = first_landing[tau];
  ctx.f = f;

  auto side_of = [&](int l) { return ctx.sigma ^ ((l + f) & 1); };
  auto pos_of = [&](int l) { return ((l - f) % 4 + 4) % 4; };

  // refresh the enriched opposite-half subset for this piece
  Bitset uv = ctx.u_set;
  uv -= s.used;
  const double ucnt = double(uv.count());
  ctx.btilde = Bitset(std::size_t(n));
  {
    Bitset opp = ctx.opp_half;
    opp -= s.used;
    const double need = std::max(1.0, g3 * ucnt / 10.0 - 1e-9);
    opp.for_each([&](int b) {
      if (double(g.row(b).count_and(uv)) >= need) ctx.btilde.set(std::size_t(b));
    });
    double margin = double(ctx.btilde.count()) - g3 * ucnt / 10.0;
    ctx.stats->min_bt_margin = std::min(ctx.stats->min_bt_margin, margin);
    ctx.stats->any_bt = true;
  }

  auto cycle_pool = [&](int pos) {
    Bitset p{std::size_t(n)};
    switch (pos) {
      case 0: p = ctx.u_set; break;
      case 1: p = ctx.opp_half; break;
      case 2: p = ctx.own_half; break;
      default: p = ctx.btilde; break;
    }
    p -= s.used;
    return p;
  };

  double covered = 0.0;

  // slice part: levels 0..min(depth, 2)
  const int L = std::min(depth, 2);
  TreeSlice slice;
  slice.anchor = anchor;
  for (int l = 0; l <= L; ++l) slice.levels.push_back(levels[std::size_t(l)]);

  std::vector<Bitset> pools;
  for (int l = 0; l < std::min(L, 2); ++l) pools.push_back(s.vacant_set(side_of(l), ctx.pair));
  Bitset hset{std::size_t(n)};
  bool use_h = false;
  if (depth >= 2) {
    Bitset base = cycle_pool(pos_of(2));
    int need_cnt = 0;
    for (int x : levels[2])
      if (!s.embedded(x)) ++need_cnt;
    if (need_cnt > 0) {
      use_h = true;
      std::vector<std::pair<long long, int>> cand;
      if (depth >= 3 && tau == 0) {
        base.for_each([&](int v) {
          long long dg = (long long)g.row(v).count_and(ctx.btilde);
          if (dg >= (long long)(D * D * D)) cand.push_back({dg, v});
        });
      } else if (depth >= 3 && tau == 1) {
        Bitset own = ctx.own_half;
        own -= s.used;
        double floor_deg = s.dec.pairs[std::size_t(ctx.pair)].host_density * double(own.count()) / 2.0;
        base.for_each([&](int v) {
          long long dg = (long long)g.row(v).count_and(own);
          if (double(dg) + 1e-9 >= floor_deg) cand.push_back({dg, v});
        });
      } else {
        Bitset nxt = depth >= 3 ? cycle_pool(pos_of(3)) : base;
        base.for_each([&](int v) { cand.push_back({(long long)g.row(v).count_and(nxt), v}); });
      }
      std::sort(cand.begin(), cand.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
      });
      std::size_t cap = std::size_t(iceil(3.0 * D * D * D / s.cons.gamma));
      if (cand.size() > cap) cand.resize(cap);
      if (int(cand.size()) < need_cnt)
        throw PhaseFailure("cover", "target-set starvation in pair " + std::to_string(ctx.pair) +
                                        " (qualified " + std::to_string(cand.size()) + " of " +
                                        std::to_string(need_cnt) + " needed)");
      for (auto& [dg, v] : cand) hset.set(std::size_t(v));
    }
    pools.push_back(base);
  }
  while (pools.size() < slice.levels.size())
    pools.push_back(s.vacant_set(side_of(int(pools.size())), ctx.pair));
  if (depth >= 3) pools.push_back(cycle_pool(pos_of(3)));

  std::vector<std::pair<int, int>> placed;
  try {
    placed = connect_component(s, slice, hset, pools, use_h ? &hset : nullptr);
  } catch (const PhaseFailure& pf) {
    throw PhaseFailure("cover", pf.what());
  }
  for (auto& [x, v] : placed)
    if (ctx.u_set.test(std::size_t(v))) covered += 1.0;

  // deep levels follow the cycle pools
  for (int l = 3; l <= depth; ++l) {
    for (int x : levels[std::size_t(l)]) {
      if (s.embedded(x)) continue;
      Bitset pool = cycle_pool(pos_of(l));
      for (int y : s.t->adj(x))
        if (s.embedded(y)) pool &= g.row(s.phi[std::size_t(y)]);
      clip_restriction(s, x, pool);
      if (pool.none())
        throw PhaseFailure("cover", "pool starvation at level " + std::to_string(l) + " (cycle " +
                                        std::to_string(pos_of(l)) + ") in pair " +
                                        std::to_string(ctx.pair) + " side " + side_tag(ctx.sigma));
      Bitset nxt = l < depth ? cycle_pool(pos_of(l + 1)) : pool;
      int v = pick_ranked(g, pool, nxt);
      s.set_phi(x, v);
      if (ctx.u_set.test(std::size_t(v))) covered += 1.0;
    }
  }
  return covered;
}

double cover_case1(EmbeddingState& s, CoverCtx& ctx, const TreeComponent& f) {
  double cov = cover_piece(s, ctx, f.attach1, f.levels);
  auto& plan = s.plans[std::size_t(f.id)];
  plan.covered = true;
  plan.pair = ctx.pair;
  plan.side_of_class0 = ctx.sigma ^ (ctx.f & 1);
  return cov;
}

double cover_case2(EmbeddingState& s, CoverCtx& ctx, const TreeComponent& f) {
  const Tree& t = *s.t;
  const auto& line = f.line;
  const int tl = int(line.size());
  if (tl < 3) throw std::logic_error("cover_case2: line shorter than three vertices");
  const int xe = line[std::size_t(tl - 1)];   // adjacent to attach2
  const int xe1 = line[std::size_t(tl - 2)];
  const int xe2 = line[std::size_t(tl - 3)];

  std::vector<char> block(std::size_t(t.n()), 0);
  block[std::size_t(xe)] = 1;
  block[std::size_t(xe1)] = 1;
  double cov = cover_piece(s, ctx, f.attach1, piece_levels(s, f.root, f.id, block));
  const int ff = ctx.f;

  auto& plan = s.plans[std::size_t(f.id)];
  plan.covered = true;
  plan.pair = ctx.pair;
  plan.side_of_class0 = ctx.sigma ^ (ff & 1);

  // splice the line end onto the second attachment
  const int side_e1 = ctx.sigma ^ ((tl - 2 + ff) & 1);
  const int side_e = ctx.sigma ^ ((tl - 1 + ff) & 1);
  Bitset none{std::size_t(s.host_n())};
  auto res = three_path(*s.g, s.phi[std::size_t(xe2)], s.phi[std::size_t(f.attach2)], none,
                        s.vacant_set(side_e1, ctx.pair), s.vacant_set(side_e, ctx.pair));
  if (!res)
    throw PhaseFailure("cover", "no splice path for component " + std::to_string(f.id) +
                                    " in pair " + std::to_string(ctx.pair));
  if (ctx.u_set.test(std::size_t(res->first))) cov += 1.0;
  if (ctx.u_set.test(std::size_t(res->second))) cov += 1.0;
  s.set_phi(xe1, res->first);
  s.set_phi(xe, res->second);

  // subtrees hanging off the two spliced vertices
  for (int at : {xe1, xe}) {
    std::vector<char> blk(std::size_t(t.n()), 0);
    blk[std::size_t(at)] = 1;
    for (int y : t.adj(at))
      if (!s.embedded(y) && s.comp_of[std::size_t(y)] == f.id)
        cov += cover_piece(s, ctx, at, piece_levels(s, y, f.id, blk));
  }
  return cov;
}

}  // namespace

void cover_irregulars(EmbeddingState& s) {
  const int n = s.host_n();
  const int k = s.dec.k;
  const int D = s.cons.D;
  const double e3 = std::pow(s.cons.eps, 3);

  CoverStats stats;
  double worst_resid = -std::numeric_limits<double>::max();
  double min_half_frac = std::numeric_limits<double>::max();
  bool any_half = false;

  std::vector<std::array<Bitset, 2>> halves(std::size_t(k + 1));
  std::vector<char> drawn(std::size_t(k + 1), 0);
  auto ensure_halves = [&](int i) {
    if (drawn[std::size_t(i)]) return;
    drawn[std::size_t(i)] = 1;
    Rng hr = s.rng.substream("cover_half", std::uint64_t(i));
    for (int side = 0; side < 2; ++side) {
      Bitset h{std::size_t(n)};
      auto primes = s.dec.prime_members(side, i);
      for (int v : primes)
        if (hr.bernoulli(0.5)) h.set(std::size_t(v));
      halves[std::size_t(i)][std::size_t(side)] = h;
      s.cover_half |= h;
      if (!primes.empty()) {
        min_half_frac = std::min(min_half_frac, double(h.count()) / double(primes.size()));
        any_half = true;
      }
    }
  };

  for (int i = 1; i <= k; ++i) {
    const double m = double(s.dec.pairs[std::size_t(i)].m);
    const double thresh = e3 * m;
    for (int sigma = 0; sigma < 2; ++sigma) {
      Bitset u_set{std::size_t(n)};
      for (int v : s.dec.added_members(sigma, i))
        if (!s.used.test(std::size_t(v))) u_set.set(std::size_t(v));
      double ucnt = double(u_set.count());
      if (ucnt <= thresh + 1e-9) {
        worst_resid = std::max(worst_resid, ucnt - thresh);
        continue;
      }
      ensure_halves(i);
      CoverCtx ctx;
      ctx.pair = i;
      ctx.sigma = sigma;
      ctx.own_half = halves[std::size_t(i)][std::size_t(sigma)];
      ctx.opp_half = halves[std::size_t(i)][std::size_t(1 - sigma)];
      ctx.u_set = u_set;
      ctx.stats = &stats;
      const double u0 = ucnt;
      Bitset own_vac = ctx.own_half;
      own_vac -= s.used;
      const double own0 = double(own_vac.count());

      while (true) {
        Bitset uv = ctx.u_set;
        uv -= s.used;
        if (double(uv.count()) <= thresh + 1e-9) break;
        int ci = next_free_chunk(s);
        if (ci < 0)
          throw PhaseFailure("cover", "chunk supply exhausted while covering pair " +
                                          std::to_string(i) + " side " + side_tag(sigma));
        Bitset own_now = ctx.own_half;
        own_now -= s.used;
        if (double(own_now.count()) - double(s.chunks[std::size_t(ci)].size) < own0 - 5.0 * u0) {
          s.events.push_back("cover_early_stop pair=" + std::to_string(i) + " side=" +
                             side_tag(sigma) + " residual=" + std::to_string(uv.count()));
          break;
        }
        s.chunk_state[std::size_t(ci)] = 1;
        s.chunk_pair[std::size_t(ci)] = i;
        double chunk_cov = 0.0;
        int comp_cnt = 0;
        for (int cid : s.chunks[std::size_t(ci)].component_ids) {
          const TreeComponent& f = comp_by_id(s, cid);
          double cov = f.root2 >= 0 ? cover_case2(s, ctx, f) : cover_case1(s, ctx, f);
          s.plans[std::size_t(cid)].chunk = ci;
          ++comp_cnt;
          chunk_cov += cov;
          double margin = cov - (double(f.size()) / 4.0 - 2.0 * D * D);
          stats.min_comp_margin = std::min(stats.min_comp_margin, margin);
          stats.any_comp = true;
        }
        double chm =
            chunk_cov - (double(s.chunks[std::size_t(ci)].size) / 4.0 - 2.0 * comp_cnt * D * D);
        stats.min_chunk_margin = std::min(stats.min_chunk_margin, chm);
        stats.any_chunk = true;
      }
      Bitset uv = ctx.u_set;
      uv -= s.used;
      worst_resid = std::max(worst_resid, double(uv.count()) - thresh);
    }
  }

  s.audits.push_back({"cover_residual", worst_resid <= 1e-9, worst_resid, 0.0});
  s.audits.push_back({"cover_halves", !any_half || min_half_frac >= 0.25,
                      any_half ? min_half_frac : 0.5, 0.25});
  s.audits.push_back({"cover_enriched_pool", !stats.any_bt || stats.min_bt_margin >= -1e-9,
                      stats.any_bt ? stats.min_bt_margin : 0.0, 0.0});
  s.audits.push_back({"cover_component_coverage",
                      !stats.any_comp || stats.min_comp_margin >= -1e-9,
                      stats.any_comp ? stats.min_comp_margin : 0.0, 0.0});
  s.audits.push_back({"cover_chunk_coverage", !stats.any_chunk || stats.min_chunk_margin >= -1e-9,
                      stats.any_chunk ? stats.min_chunk_margin : 0.0, 0.0});
}

// ---------------------------------------------------------------------------
// phase 3: chunk assignment

void assign_chunks(EmbeddingState& s) {
  const int k = s.dec.k;
  const int n = s.host_n();
  const double e4 = std::pow(s.cons.eps, 4);

  struct CompCount {
    int c0 = 0, c1 = 0;
  };
  std::vector<CompCount> cc(s.plans.size());
  for (const auto& f : s.td->components) {
    int c0 = 0, c1 = 0;
    for (int v : f.vertices)
      if (!s.embedded(v)) ((s.comp_level[std::size_t(v)] & 1) ? c1 : c0)++;
    cc[std::size_t(f.id)] = {c0, c1};
  }

  std::vector<std::array<long long, 2>> vac(std::size_t(k + 1), {0, 0});
  std::vector<std::array<long long, 2>> planned(std::size_t(k + 1), {0, 0});
  for (int i = 1; i <= k; ++i)
    for (int side = 0; side < 2; ++side)
      vac[std::size_t(i)][std::size_t(side)] = s.vacant_count(side, i);

  std::vector<std::vector<int>> order(std::size_t(k + 1));

  auto place_component = [&](int cid, int pair, int ci) {
    long long gap0 = vac[std::size_t(pair)][0] - planned[std::size_t(pair)][0];
    long long gap1 = vac[std::size_t(pair)][1] - planned[std::size_t(pair)][1];
    int big = gap0 >= gap1 ? 0 : 1;
    int s0 = cc[std::size_t(cid)].c0 >= cc[std::size_t(cid)].c1 ? big : 1 - big;
    auto& plan = s.plans[std::size_t(cid)];
    plan.pair = pair;
    plan.side_of_class0 = s0;
    plan.chunk = ci;
    planned[std::size_t(pair)][std::size_t(s0)] += cc[std::size_t(cid)].c0;
    planned[std::size_t(pair)][std::size_t(1 - s0)] += cc[std::size_t(cid)].c1;
  };

  for (int i = 1; i <= k; ++i) {
    while (planned[std::size_t(i)][0] < vac[std::size_t(i)][0] ||
           planned[std::size_t(i)][1] < vac[std::size_t(i)][1]) {
      int ci = next_free_chunk(s);
      if (ci < 0) break;
      s.chunk_state[std::size_t(ci)] = 2;
      s.chunk_pair[std::size_t(ci)] = i;
      order[std::size_t(i)].push_back(ci);
      for (int cid : s.chunks[std::size_t(ci)].component_ids) place_component(cid, i, ci);
    }
  }
  // conservation leaves nothing here; kept as a guarded tail
  for (int ci = next_free_chunk(s); ci >= 0; ci = next_free_chunk(s)) {
    int best = 1;
    long long best_gap = std::numeric_limits<long long>::min();
    for (int i = 1; i <= k; ++i) {
      long long gp = (vac[std::size_t(i)][0] - planned[std::size_t(i)][0]) +
                     (vac[std::size_t(i)][1] - planned[std::size_t(i)][1]);
      if (gp > best_gap) {
        best_gap = gp;
        best = i;
      }
    }
    s.events.push_back("assign_leftover chunk=" + std::to_string(ci) + " pair=" +
                       std::to_string(best));
    s.chunk_state[std::size_t(ci)] = 2;
    s.chunk_pair[std::size_t(ci)] = best;
    order[std::size_t(best)].push_back(ci);
    for (int cid : s.chunks[std::size_t(ci)].component_ids) place_component(cid, best, ci);
  }

  int unassigned = 0;
  for (char st : s.chunk_state)
    if (st == 0) ++unassigned;
  s.audits.push_back({"assign_complete", unassigned == 0, double(unassigned), 0.0});

  long long total_planned = 0, total_vac = 0;
  for (int i = 1; i <= k; ++i) {
    total_planned += planned[std::size_t(i)][0] + planned[std::size_t(i)][1];
    total_vac += vac[std::size_t(i)][0] + vac[std::size_t(i)][1];
  }
  if (total_planned != total_vac)
    throw std::logic_error("assign_chunks: " + std::to_string(total_planned) +
                           " tree vertices planned against " + std::to_string(total_vac) +
                           " vacancies");

  // component flips until the per-side totals meet the vacancies exactly:
  // flipping component j adds e_j to the side-0 planned total, so delta needs
  // an exact subset of the e_j summing to it — solved by a sum-table walk
  long long delta = 0;
  for (int i = 1; i <= k; ++i) delta += vac[std::size_t(i)][0] - planned[std::size_t(i)][0];
  if (delta != 0) {
    std::vector<std::pair<int, long long>> items;  // component id, flip effect
    for (const auto& f : s.td->components) {
      const auto& plan = s.plans[std::size_t(f.id)];
      if (plan.covered || plan.pair < 1) continue;
      long long e = plan.side_of_class0 == 0
                        ? (long long)(cc[std::size_t(f.id)].c1 - cc[std::size_t(f.id)].c0)
                        : (long long)(cc[std::size_t(f.id)].c0 - cc[std::size_t(f.id)].c1);
      if (e != 0) items.push_back({f.id, e});
    }
    const long long off = n;
    const std::size_t width = 2 * std::size_t(n) + 1;
    std::vector<char> reach(width, 0);
    std::vector<int> via(width, -1), back(width, -1);
    reach[std::size_t(off)] = 1;
    via[std::size_t(off)] = -2;
    for (std::size_t j = 0; j < items.size(); ++j) {
      std::vector<std::size_t> snapshot;
      for (std::size_t sm = 0; sm < width; ++sm)
        if (reach[sm]) snapshot.push_back(sm);
      for (std::size_t sm : snapshot) {
        long long ns = (long long)sm + items[j].second;
        if (ns < 0 || ns >= (long long)width || reach[std::size_t(ns)]) continue;
        reach[std::size_t(ns)] = 1;
        via[std::size_t(ns)] = int(j);
        back[std::size_t(ns)] = int(sm);
      }
    }
    std::size_t want = std::size_t(delta + off);
    if (reach[want]) {
      for (std::size_t sm = want; via[sm] != -2; sm = std::size_t(back[sm])) {
        int cid = items[std::size_t(via[sm])].first;
        auto& plan = s.plans[std::size_t(cid)];
        int pair = plan.pair;
        int olds0 = plan.side_of_class0;
        planned[std::size_t(pair)][std::size_t(olds0)] -= cc[std::size_t(cid)].c0;
        planned[std::size_t(pair)][std::size_t(1 - olds0)] -= cc[std::size_t(cid)].c1;
        plan.side_of_class0 = 1 - olds0;
        planned[std::size_t(pair)][std::size_t(1 - olds0)] += cc[std::size_t(cid)].c0;
        planned[std::size_t(pair)][std::size_t(olds0)] += cc[std::size_t(cid)].c1;
      }
    }
    delta = 0;
    for (int i = 1; i <= k; ++i) delta += vac[std::size_t(i)][0] - planned[std::size_t(i)][0];
  }
  s.audits.push_back({"assign_side_exact", delta == 0, double(delta), 0.0});
  if (delta != 0)
    throw PhaseFailure("assign", "side totals unreachable (parity), residual " +
                                     std::to_string(delta));

  double drift = 0.0, gap = 0.0;
  for (int i = 1; i <= k; ++i) {
    double m = double(s.dec.pairs[std::size_t(i)].m);
    drift = std::max(drift,
                     double(std::llabs(planned[std::size_t(i)][0] - planned[std::size_t(i)][1])) /
                         std::max(1.0, m));
    for (int side = 0; side < 2; ++side)
      gap = std::max(gap, double(std::llabs(vac[std::size_t(i)][std::size_t(side)] -
                                            planned[std::size_t(i)][std::size_t(side)])) /
                              std::max(1.0, m));
  }
  s.audits.push_back({"assign_drift", drift <= 3.0 * e4 + 1e-12, drift, 3.0 * e4});
  s.audits.push_back({"assign_gap", gap <= 3.0 * e4 + 1e-12, gap, 3.0 * e4});

  int m_min = std::numeric_limits<int>::max();
  for (int i = 1; i <= k; ++i) m_min = std::min(m_min, s.dec.pairs[std::size_t(i)].m);
  const int r = std::max(1, int(std::floor(s.cons.nu * double(n))));
  double comp_obs = 0.0;
  for (int i = 1; i <= k; ++i) {
    long long imb_cov = 0, imb_first = 0;
    for (std::size_t ci = 0; ci < s.chunks.size(); ++ci)
      if (s.chunk_state[ci] == 1 && s.chunk_pair[ci] == i) imb_cov += s.chunks[ci].imbalance;
    std::size_t take = std::min(order[std::size_t(i)].size(), std::size_t(3 * r));
    for (std::size_t oi = 0; oi < take; ++oi)
      imb_first += s.chunks[std::size_t(order[std::size_t(i)][oi])].imbalance;
    comp_obs = std::max(comp_obs, double(std::llabs(imb_cov - imb_first)));
  }
  double comp_bound = 3.0 * e4 * double(m_min);
  s.audits.push_back({"assign_compensation", comp_obs <= comp_bound + 1e-9, comp_obs, comp_bound});

  // materialize destinations and remaining per-cluster loads
  for (const auto& f : s.td->components) {
    const auto& plan = s.plans[std::size_t(f.id)];
    if (plan.covered || plan.pair < 1) continue;
    for (int v : f.vertices) {
      if (s.embedded(v)) continue;
      int side = plan.side_of_class0 ^ (s.comp_level[std::size_t(v)] & 1);
      s.dest_pair[std::size_t(v)] = plan.pair;
      s.dest_side[std::size_t(v)] = side;
      s.t_rem[std::size_t(plan.pair)][std::size_t(side)]++;
    }
  }
}

// ---------------------------------------------------------------------------
// phase 4: connection cones

void connect_chunks(EmbeddingState& s) {
  const Graph& g = *s.g;
  const Tree& t = *s.t;
  const int n = s.host_n();
  const int D = s.cons.D;
  int m_min = std::numeric_limits<int>::max();
  for (int i = 1; i <= s.dec.k; ++i) m_min = std::min(m_min, s.dec.pairs[std::size_t(i)].m);
  const double kt = 20.0 * D * D * double(n) / (std::pow(s.cons.eps, 4) * double(m_min));
  const std::size_t h_cap = std::size_t(iceil(3.0 * D * D * D / s.cons.gamma));

  double min_cy_ratio = std::numeric_limits<double>::max();
  bool any_cy = false;

  auto embed_cone = [&](const TreeComponent& f, int anchor,
                        const std::vector<std::vector<int>>& lv, auto side_of) {
    const int depth = int(lv.size()) - 1;
    if (depth < 0) return;
    const int pair = s.plans[std::size_t(f.id)].pair;
    const double m = double(s.dec.pairs[std::size_t(pair)].m);
    const int L = std::min(depth, 2);

    Bitset hset{std::size_t(n)};
    bool use_h = false;
    if (depth >= 3 && L == 2) {
      int need = 0;
      for (int x : lv[2])
        if (!s.embedded(x)) ++need;
      if (need > 0) {
        use_h = true;
        Bitset base = s.vacant_set(side_of(2), pair);
        Bitset nxt = s.vacant_set(side_of(3), pair);
        const double floor_deg = s.cons.d * m / 4.0 + 3.0 * D;  // slack for in-cone consumption
        std::vector<std::pair<long long, int>> cand;
        base.for_each([&](int v) {
          long long dg = (long long)g.row(v).count_and(nxt);
          if (double(dg) + 1e-9 >= floor_deg) cand.push_back({dg, v});
        });
        std::sort(cand.begin(), cand.end(), [](const auto& a, const auto& b) {
          return a.first != b.first ? a.first > b.first : a.second < b.second;
        });
        // keep the reservation from swallowing the whole side: when nearly all
        // of it qualifies, reserving everything would starve the level-0 pool
        const std::size_t want =
            std::max(std::size_t(need + 3 * D), std::min(h_cap, cand.size() / 2));
        if (cand.size() > want) cand.resize(want);
        if (int(cand.size()) < need)
          throw PhaseFailure("connect", "target-set starvation for component " +
                                            std::to_string(f.id) + " in pair " +
                                            std::to_string(pair) + " (qualified " +
                                            std::to_string(cand.size()) + ")");
        for (auto& [dg, v] : cand) hset.set(std::size_t(v));
      }
    }

    TreeSlice slice;
    slice.anchor = anchor;
    for (int l = 0; l <= L; ++l) slice.levels.push_back(lv[std::size_t(l)]);
    std::vector<Bitset> pools;
    for (int l = 0; l <= L; ++l) pools.push_back(s.vacant_set(side_of(l), pair));
    if (depth >= 3) pools.push_back(s.vacant_set(side_of(3), pair));

    auto placed = connect_component(s, slice, hset, pools, use_h ? &hset : nullptr);
    s.fixed_images += (long long)placed.size();
    for (auto& [x, v] : placed)
      s.t_rem[std::size_t(s.dest_pair[std::size_t(x)])][std::size_t(s.dest_side[std::size_t(x)])]--;
  };

  for (std::size_t ci = 0; ci < s.chunks.size(); ++ci) {
    if (s.chunk_state[ci] != 2) continue;
    for (int cid : s.chunks[ci].component_ids) {
      const TreeComponent& f = comp_by_id(s, cid);
      const int s0 = s.plans[std::size_t(f.id)].side_of_class0;
      if (s0 < 0)
        throw std::logic_error("connect_chunks: component " + std::to_string(f.id) +
                               " has no side assignment");
      embed_cone(f, f.attach1, f.levels, [&](int l) { return s0 ^ (l & 1); });
      if (f.root2 >= 0) {
        auto lv2 = level_sets(t, f.root2, f.vertices);
        const int tl = int(f.line.size());
        embed_cone(f, f.attach2, lv2, [&](int l) { return s0 ^ ((l + tl - 1) & 1); });
      }
      // restriction sets for the level-4 frontier of both cones
      const int pair = s.plans[std::size_t(f.id)].pair;
      const double m = double(s.dec.pairs[std::size_t(pair)].m);
      for (int x : f.vertices) {
        if (!s.embedded(x)) continue;
        for (int y : t.adj(x)) {
          if (s.embedded(y) || s.comp_of[std::size_t(y)] != f.id) continue;
          Bitset cy = g.row(s.phi[std::size_t(x)]);
          cy &= s.vacant_set(s.dest_side[std::size_t(y)], s.dest_pair[std::size_t(y)]);
          auto it = s.restrictions.find(y);
          if (it != s.restrictions.end())
            it->second &= cy;
          else
            it = s.restrictions.emplace(y, cy).first;
          min_cy_ratio = std::min(min_cy_ratio, double(it->second.count()) / std::max(1.0, m));
          any_cy = true;
        }
      }
    }
  }

  s.audits.push_back({"connect_fixed", double(s.fixed_images) <= 3.0 * D * D * D * kt + 1e-9,
                      double(s.fixed_images), 3.0 * D * D * D * kt});
  s.audits.push_back({"restriction_count",
                      double(s.restrictions.size()) <= 3.0 * D * D * D * D * kt + 1e-9,
                      double(s.restrictions.size()), 3.0 * D * D * D * D * kt});
  s.audits.push_back({"restriction_size", !any_cy || min_cy_ratio >= s.cons.d / 4.0 - 1e-9,
                      any_cy ? min_cy_ratio : 1.0, s.cons.d / 4.0});
  s.audits.push_back({"w_budget", double(s.w_peak) <= s.cons.gamma * double(n) / 10.0,
                      double(s.w_peak), s.cons.gamma * double(n) / 10.0});
}

// ---------------------------------------------------------------------------
// phase 5: vacancy equalization

void final_balance(EmbeddingState& s) {
  const Graph& g = *s.g;
  const int n = s.host_n();
  const int k = s.dec.k;
  const double e3 = std::pow(s.cons.eps, 3);
  const double e4 = std::pow(s.cons.eps, 4);

  for (int side = 0; side < 2; ++side) {
    long long tot = 0;
    for (int j = 1; j <= k; ++j)
      tot += (long long)s.vacant_count(side, j) - s.t_rem[std::size_t(j)][std::size_t(side)];
    if (tot != 0)
      throw std::logic_error("final_balance: side " + side_tag(side) + " totals off by " +
                             std::to_string(tot));
  }

  // second/third vertices must be untouched by both the preprocessing halves
  // and the covering halves
  Bitset avail{std::size_t(n)};
  for (int v = 0; v < n; ++v)
    if (s.dec.cluster_of[std::size_t(v)] >= 1 && s.dec.half_tag[std::size_t(v)] == 2 &&
        !s.cover_half.test(std::size_t(v)) && !s.used.test(std::size_t(v)))
      avail.set(std::size_t(v));
  Bitset moved{std::size_t(n)};

  Rng br = s.rng.substream("balance");
  const long long cap = (long long)std::ceil(6.0 * e4 * double(n)) + 4 * k + 8;
  std::vector<std::array<long long, 2>> part(std::size_t(k + 1), {0, 0});
  std::uint64_t min_avail = std::numeric_limits<std::uint64_t>::max();
  bool any_draw = false;

  for (int side = 0; side < 2; ++side) {
    while (true) {
      int jminus = -1, jplus = -1;
      for (int j = 1; j <= k; ++j) {
        long long gp = (long long)s.vacant_count(side, j) - s.t_rem[std::size_t(j)][std::size_t(side)];
        if (gp < 0 && jminus < 0) jminus = j;
        if (gp > 0 && jplus < 0) jplus = j;
      }
      if (jminus < 0) break;
      if (jplus < 0)
        throw std::logic_error("final_balance: deficit without surplus on side " + side_tag(side));
      Bitset firsts = s.dec.member_set(side, jplus);
      firsts -= s.used;
      firsts -= moved;
      int v = firsts.first_set();
      if (v < 0)
        throw PhaseFailure("balance", "no available first vertex in pair " + std::to_string(jplus) +
                                          " side " + side_tag(side));
      auto draw =
          draw_relocating_triple(s.dec, g, s.cons.gamma, v, side, jminus, br, &avail, &s.used);
      if (!draw.found)
        throw PhaseFailure("balance", "no available relocating triple from pair " +
                                          std::to_string(jplus) + " toward pair " +
                                          std::to_string(jminus) + " side " + side_tag(side));
      any_draw = true;
      min_avail = std::min(min_avail, draw.available);
      RelocationStep step{draw.triple, jplus, 5};
      apply_step(s.dec, step);
      s.dec.log.push_back(step);
      s.relocations++;
      moved.set(std::size_t(draw.triple.first));
      moved.set(std::size_t(draw.triple.second));
      moved.set(std::size_t(draw.triple.third));
      avail.reset(std::size_t(draw.triple.first));
      avail.reset(std::size_t(draw.triple.second));
      avail.reset(std::size_t(draw.triple.third));
      part[std::size_t(jplus)][std::size_t(side)]++;
      part[std::size_t(draw.triple.via_s)][std::size_t(side)]++;
      part[std::size_t(draw.triple.via_t)][std::size_t(side)]++;
      if (s.relocations > cap)
        throw PhaseFailure("balance", "relocation cap exceeded (" + std::to_string(s.relocations) +
                                          ")");
    }
  }

  const double total_bound = 6.0 * e4 * double(n);
  s.audits.push_back({"relocation_total", double(s.relocations) <= total_bound + 1e-9,
                      double(s.relocations), total_bound});
  double worst_part = 0.0;
  for (int j = 1; j <= k; ++j)
    for (int side = 0; side < 2; ++side)
      worst_part = std::max(worst_part, double(part[std::size_t(j)][std::size_t(side)]) /
                                            std::max(1.0, double(s.dec.pairs[std::size_t(j)].m)));
  s.audits.push_back({"relocation_participation", worst_part < e3, worst_part, e3});
  const double pool_bound = std::pow(s.cons.gamma, 6) * double(n) / 1000.0;
  s.audits.push_back({"relocation_pool", !any_draw || double(min_avail) + 1e-9 >= pool_bound,
                      any_draw ? double(min_avail) : 0.0, pool_bound});

  long long worst_gap = 0;
  for (int j = 1; j <= k; ++j)
    for (int side = 0; side < 2; ++side)
      worst_gap = std::max(worst_gap,
                           std::llabs((long long)s.vacant_count(side, j) -
                                      s.t_rem[std::size_t(j)][std::size_t(side)]));
  s.audits.push_back({"cluster_exact", worst_gap == 0, double(worst_gap), 0.0});

  double min_post = std::numeric_limits<double>::max();
  bool any_post = false;
  for (auto& [y, cy] : s.restrictions) {
    if (s.embedded(y) || s.dest_pair[std::size_t(y)] < 1) continue;
    cy &= s.dec.member_set(s.dest_side[std::size_t(y)], s.dest_pair[std::size_t(y)]);
    cy -= s.used;
    double m = double(s.dec.pairs[std::size_t(s.dest_pair[std::size_t(y)])].m);
    min_post = std::min(min_post, double(cy.count()) / std::max(1.0, m));
    any_post = true;
  }
  s.audits.push_back({"restriction_post", !any_post || min_post >= s.cons.d / 5.0 - 1e-9,
                      any_post ? min_post : 1.0, s.cons.d / 5.0});
}

// ---------------------------------------------------------------------------
// phase 6: greedy + matching finish

void blowup_embed(EmbeddingState& s) {
  const Graph& g = *s.g;
  const Tree& t = *s.t;
  const int n = s.host_n();
  const int k = s.dec.k;
  const double e3 = std::pow(s.cons.eps, 3);

  for (int i = 1; i <= k; ++i) {
    std::string name = "blowup_pair_" + std::to_string(i) + "_super_regular";
    Bitset va = s.vacant_set(0, i), vb = s.vacant_set(1, i);
    if (va.none() || vb.none()) {
      s.audits.push_back({name, true, 0.0, 0.0});
      continue;
    }
    BipartitePair p(g, va, vb);
    Rng ar = s.rng.substream("blowup_audit", std::uint64_t(i));
    auto vd = estimate_super_regularity(p, 9.0 * s.cons.eps,
                                        std::max(0.0, s.cons.d / 4.0 - s.cons.eps),
                                        s.cons.audit_trials, ar);
    s.audits.push_back({name, vd.super_regular, vd.regularity.max_deviation, 9.0 * s.cons.eps});
    if (!vd.super_regular)
      throw PhaseFailure("blowup", "pair " + std::to_string(i) +
                                       " fails the sampled super-regularity audit");
  }

  std::vector<std::array<int, 2>> rc(std::size_t(k + 1), {0, 0});
  for (auto& [y, cy] : s.restrictions)
    if (!s.embedded(y) && s.dest_pair[std::size_t(y)] >= 1)
      rc[std::size_t(s.dest_pair[std::size_t(y)])][std::size_t(s.dest_side[std::size_t(y)])]++;
  double worst_rc = 0.0;
  for (int i = 1; i <= k; ++i)
    for (int side = 0; side < 2; ++side)
      worst_rc = std::max(worst_rc, double(rc[std::size_t(i)][std::size_t(side)]) /
                                        std::max(1.0, double(s.dec.pairs[std::size_t(i)].m)));
  bool rc_ok = worst_rc <= e3 + 1e-12;
  s.audits.push_back({"blowup_restriction_count", rc_ok, worst_rc, e3});
  if (!rc_ok)
    throw PhaseFailure("blowup", "restricted vertex fraction " + std::to_string(worst_rc) +
                                     " exceeds eps^3");

  std::vector<std::array<Bitset, 2>> buffer(std::size_t(k + 1));
  for (int i = 1; i <= k; ++i)
    for (int side = 0; side < 2; ++side) {
      Bitset b{std::size_t(n)};
      Rng brng = s.rng.substream("buffer", std::uint64_t(i * 2 + side));
      s.vacant_set(side, i).for_each([&](int v) {
        if (brng.bernoulli(s.cons.buffer_frac)) b.set(std::size_t(v));
      });
      buffer[std::size_t(i)][std::size_t(side)] = b;
    }

  Rng gr = s.rng.substream("greedy");
  std::vector<std::array<std::vector<int>, 2>> deferred(std::size_t(k + 1));

  // one-step lookahead: placing y on v must leave every unembedded neighbor a
  // nonempty candidate pool
  auto guard_ok = [&](int y, int v) {
    for (int z : t.adj(y)) {
      if (s.embedded(z)) continue;
      int zp = s.dest_pair[std::size_t(z)], zs = s.dest_side[std::size_t(z)];
      if (zp < 1) continue;
      Bitset pz = s.vacant_set(zs, zp);
      pz &= g.row(v);
      for (int p : t.adj(z))
        if (p != y && s.embedded(p)) pz &= g.row(s.phi[std::size_t(p)]);
      clip_restriction(s, z, pz);
      pz.reset(std::size_t(v));
      if (pz.none()) return false;
    }
    return true;
  };

  auto greedy_choose = [&](int y, const Bitset& pool) {
    std::vector<int> ties;
    long long best = -1;
    Bitset opposite = s.vacant_set(1 - s.dest_side[std::size_t(y)], s.dest_pair[std::size_t(y)]);
    pool.for_each([&](int v) {
      if (!guard_ok(y, v)) return;
      long long dg = (long long)g.row(v).count_and(opposite);
      if (dg > best) {
        best = dg;
        ties.clear();
      }
      if (dg == best) ties.push_back(v);
    });
    if (ties.empty()) return -1;
    return ties[std::size_t(gr.below(ties.size()))];
  };

  std::vector<int> sub(std::size_t(t.n()), 0);
  for (std::size_t ci = 0; ci < s.chunks.size(); ++ci) {
    if (s.chunk_state[ci] != 2) continue;
    for (int cid : s.chunks[ci].component_ids) {
      const TreeComponent& f = comp_by_id(s, cid);
      for (int v : f.vertices) sub[std::size_t(v)] = s.embedded(v) ? 0 : 1;
      for (int l = int(f.levels.size()) - 1; l >= 1; --l)
        for (int x : f.levels[std::size_t(l)]) {
          for (int y : t.adj(x))
            if (s.comp_of[std::size_t(y)] == f.id &&
                s.comp_level[std::size_t(y)] == s.comp_level[std::size_t(x)] - 1)
              sub[std::size_t(y)] += sub[std::size_t(x)];
        }
      for (const auto& level : f.levels) {
        std::vector<int> ord = level;
        std::sort(ord.begin(), ord.end(), [&](int a, int b) {
          return sub[std::size_t(a)] != sub[std::size_t(b)] ? sub[std::size_t(a)] > sub[std::size_t(b)]
                                                            : a < b;
        });
        for (int x : ord) {
          if (s.embedded(x)) continue;
          bool has_unemb = false;
          for (int y : t.adj(x))
            if (!s.embedded(y)) {
              has_unemb = true;
              break;
            }
          const int dp = s.dest_pair[std::size_t(x)], ds = s.dest_side[std::size_t(x)];
          if (!has_unemb) {
            deferred[std::size_t(dp)][std::size_t(ds)].push_back(x);
            continue;
          }
          Bitset pool = s.vacant_set(ds, dp);
          pool -= buffer[std::size_t(dp)][std::size_t(ds)];
          for (int y : t.adj(x))
            if (s.embedded(y)) pool &= g.row(s.phi[std::size_t(y)]);
          clip_restriction(s, x, pool);
          int v = greedy_choose(x, pool);
          if (v < 0) {
            Bitset pool2 = s.vacant_set(ds, dp);
            for (int y : t.adj(x))
              if (s.embedded(y)) pool2 &= g.row(s.phi[std::size_t(y)]);
            clip_restriction(s, x, pool2);
            v = greedy_choose(x, pool2);
            if (v >= 0)
              s.events.push_back("buffer_dip vertex=" + std::to_string(x) + " pair=" +
                                 std::to_string(dp) + " side=" + side_tag(ds));
          }
          if (v < 0)
            throw PhaseFailure("blowup", "greedy starvation at tree vertex " + std::to_string(x) +
                                             " (pair " + std::to_string(dp) + " side " +
                                             side_tag(ds) + ")");
          s.set_phi(x, v);
          s.t_rem[std::size_t(dp)][std::size_t(ds)]--;
        }
      }
    }
  }

  long long count_mismatch = 0;
  for (int i = 1; i <= k; ++i)
    for (int side = 0; side < 2; ++side)
      count_mismatch = std::max(
          count_mismatch,
          std::llabs((long long)deferred[std::size_t(i)][std::size_t(side)].size() -
                     (long long)s.vacant_count(side, i)));
  s.audits.push_back({"blowup_counts", count_mismatch == 0, double(count_mismatch), 0.0});

  for (int i = 1; i <= k; ++i)
    for (int side = 0; side < 2; ++side) {
      auto& dl = deferred[std::size_t(i)][std::size_t(side)];
      Bitset vac = s.vacant_set(side, i);
      if (dl.empty() && vac.none()) continue;
      std::vector<int> right = vac.to_vector();
      std::vector<int> local(std::size_t(n), -1);
      for (std::size_t ri = 0; ri < right.size(); ++ri) local[std::size_t(right[ri])] = int(ri);
      std::vector<Bitset> rows;
      rows.reserve(dl.size());
      for (int y : dl) {
        Bitset py = vac;
        for (int p : t.adj(y))
          if (s.embedded(p)) py &= g.row(s.phi[std::size_t(p)]);
        clip_restriction(s, y, py);
        Bitset row(right.size());
        py.for_each([&](int v) {
          if (local[std::size_t(v)] >= 0) row.set(std::size_t(local[std::size_t(v)]));
        });
        rows.push_back(row);
      }
      auto res = max_bipartite_matching(rows, int(right.size()));
      if (res.size < int(dl.size())) {
        std::string msg = "matching infeasible in pair " + std::to_string(i) + " side " +
                          side_tag(side) + " (" + std::to_string(res.size) + "/" +
                          std::to_string(dl.size()) + " matched";
        if (res.certificate)
          msg += "; Hall set " + std::to_string(res.certificate->set.size()) +
                 " -> neighborhood " + std::to_string(res.certificate->neighborhood.size());
        msg += ")";
        throw PhaseFailure("blowup", msg);
      }
      for (std::size_t yi = 0; yi < dl.size(); ++yi) {
        int v = right[std::size_t(res.match_left[yi])];
        s.set_phi(dl[yi], v);
        s.t_rem[std::size_t(i)][std::size_t(side)]--;
      }
    }

  long long left = 0;
  for (int x = 0; x < t.n(); ++x)
    if (!s.embedded(x)) ++left;
  s.audits.push_back({"blowup_complete", left == 0, double(left), 0.0});
  if (left > 0)
    throw PhaseFailure("blowup", std::to_string(left) + " tree vertices left unembedded");
}

// ---------------------------------------------------------------------------
// verification and the driver

EmbedVerdict verify_embedding(const Graph& g, const Tree& t, const std::vector<int>& phi) {
  EmbedVerdict v;
  if (int(phi.size()) != t.n()) {
    v.error = "phi has " + std::to_string(phi.size()) + " entries for a " +
              std::to_string(t.n()) + "-vertex tree";
    return v;
  }
  if (t.n() != g.n()) {
    v.error = "tree and host sizes differ";
    return v;
  }
  std::vector<int> seen(std::size_t(g.n()), -1);
  for (int x = 0; x < t.n(); ++x) {
    int im = phi[std::size_t(x)];
    if (im < 0 || im >= g.n()) {
      v.error = "vertex " + std::to_string(x) + " has image " + std::to_string(im) +
                " outside the host";
      return v;
    }
    if (seen[std::size_t(im)] >= 0) {
      v.error = "vertices " + std::to_string(seen[std::size_t(im)]) + " and " + std::to_string(x) +
                " share image " + std::to_string(im);
      return v;
    }
    seen[std::size_t(im)] = x;
  }
  for (int x = 1; x < t.n(); ++x) {
    int p = t.parent(x);
    if (!g.has_edge(phi[std::size_t(x)], phi[std::size_t(p)])) {
      v.error = "tree edge " + std::to_string(p) + "-" + std::to_string(x) +
                " maps to the non-edge " + std::to_string(phi[std::size_t(p)]) + "-" +
                std::to_string(phi[std::size_t(x)]);
      return v;
    }
  }
  v.ok = true;
  return v;
}

void to_json(nlohmann::json& j, const Embedding& e) {
  j = nlohmann::json{{"version", 1},        {"phi", e.phi},
                     {"success", e.success}, {"attempts", e.attempts},
                     {"seed", e.seed},       {"audits", e.audits},
                     {"events", e.events},   {"failures", e.failures},
                     {"error", e.error}};
}

void from_json(const nlohmann::json& j, Embedding& e) {
  j.at("phi").get_to(e.phi);
  j.at("success").get_to(e.success);
  j.at("attempts").get_to(e.attempts);
  j.at("seed").get_to(e.seed);
  j.at("audits").get_to(e.audits);
  j.at("events").get_to(e.events);
  j.at("failures").get_to(e.failures);
  j.at("error").get_to(e.error);
}

Embedding embed(const Graph& g, const Tree& t, const Constants& c, std::uint64_t seed,
                int retries) {
  if (g.n() != t.n())
    throw std::invalid_argument("embed: host has " + std::to_string(g.n()) +
                                " vertices, tree has " + std::to_string(t.n()));
  if (t.max_degree() > c.D)
    throw std::invalid_argument("embed: tree degree " + std::to_string(t.max_degree()) +
                                " exceeds D = " + std::to_string(c.D));

  Rng root(seed);
  Embedding out;
  out.seed = seed;
  const int attempts = std::max(1, retries);

  for (int a = 0; a < attempts; ++a) {
    out.attempts = a + 1;
    Rng arng = root.substream("attempt", std::uint64_t(a));
    try {
      Rng prng = arng.substream("prep");
      PrepResult prep = preprocess_host(g, c, prng);
      if (!prep.decomp.ok()) throw PhaseFailure("host_prep", "decomposition audits failed");

      int m_min = std::numeric_limits<int>::max();
      for (int i = 1; i <= prep.decomp.k; ++i)
        m_min = std::min(m_min, prep.decomp.pairs[std::size_t(i)].m);
      const double e4 = std::pow(c.eps, 4);
      // half a chunk: enough components that the side-parity subset sums are
      // dense, while the skeleton stays inside its d*m/8 budget
      const double eta = c.eta > 0 ? c.eta : e4 * double(m_min) / (2.0 * double(g.n()));

      TreeDecomposition td = build_skeleton(t, eta);
      if (!td.ok()) throw PhaseFailure("tree_prep", "skeleton audits failed");
      auto chunks = form_chunks(td.components, std::max(1, iceil(e4 * double(m_min))));

      EmbeddingState st = make_state(g, t, td, prep.decomp, chunks, c, arng.substream("embed"));
      if (prep.bip.spare >= 0) {
        int z = -1;
        for (int x = 1; x < t.n(); ++x)
          if (t.degree(x) == 1 && td.skeleton_comp[std::size_t(x)] < 0) {
            z = x;
            break;
          }
        if (z < 0) throw PhaseFailure("tree_prep", "no off-skeleton leaf for the spare vertex");
        st.spare_leaf = z;
        st.set_phi(z, prep.bip.spare);
        st.restrictions[t.parent(z)] = g.row(prep.bip.spare);
      }

      embed_skeleton(st);
      cover_irregulars(st);
      assign_chunks(st);
      connect_chunks(st);
      final_balance(st);
      blowup_embed(st);

      auto verdict = verify_embedding(g, t, st.phi);
      st.audits.push_back({"verify", verdict.ok, verdict.ok ? 0.0 : 1.0, 0.0});
      if (!verdict.ok) throw PhaseFailure("verify", verdict.error);

      out.phi = st.phi;
      out.success = true;
      out.audits = st.audits;
      out.events = st.events;
      out.error.clear();
      return out;
    } catch (const PhaseFailure& pf) {
      out.failures[pf.phase]++;
      out.error = pf.what();
    } catch (const std::runtime_error& e) {
      std::string what = e.what();
      std::string bucket = "runtime";
      auto lb = what.find('[');
      auto rb = what.find(']');
      if (lb != std::string::npos && rb != std::string::npos && rb > lb + 1)
        bucket = what.substr(lb + 1, rb - lb - 1);
      out.failures[bucket]++;
      out.error = what;
    }
  }
  out.success = false;
  return out;
}

}  // namespace treespan
