#include "treespan/host_prep.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "treespan/extremal.hpp"
#include "treespan/regularity.hpp"

namespace treespan {

namespace {

const char* side_name(int s) { return s == 0 ? "A" : "B"; }

}  // namespace

Bipartition random_split(const Graph& g, double nu, Rng& rng, int max_retries,
                         SplitReport* report) {
  int n = g.n();
  if (n < 2) throw std::invalid_argument("random_split: graph too small");
  if (double(g.min_degree()) < (0.5 - nu) * double(n) - 1e-9)
    throw std::invalid_argument("random_split: min degree " + std::to_string(g.min_degree()) +
                                " below (1/2 - nu) n = " + std::to_string((0.5 - nu) * double(n)));

  SplitReport local;
  SplitReport& rep = report ? *report : local;
  int attempts_allowed = std::max(1, max_retries + 1);
  double logn = std::log(double(std::max(n, 3)));

  for (int attempt = 1; attempt <= attempts_allowed; ++attempt) {
    rep = SplitReport{};
    rep.attempts = attempt;
    Bipartition bip;
    bip.spare = (n % 2 == 1) ? 0 : -1;
    std::vector<int> a, b;
    for (int v = 0; v < n; ++v) {
      if (v == bip.spare) continue;
      if (rng.coin())
        a.push_back(v);
      else
        b.push_back(v);
    }
    auto shift = [](std::vector<int>& big, std::vector<int>& small) {
      std::size_t cnt = (big.size() - small.size()) / 2;
      small.insert(small.end(), big.begin(), big.begin() + long(cnt));
      big.erase(big.begin(), big.begin() + long(cnt));
    };
    if (a.size() > b.size())
      shift(a, b);
    else if (b.size() > a.size())
      shift(b, a);
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    bip.a = a;
    bip.b = b;

    VertexSet sa = Bitset::from(std::size_t(n), a), sb = Bitset::from(std::size_t(n), b);
    for (int v = 0; v < n; ++v) {
      int deg = g.deg(v);
      int da = deg_into(g, v, sa), db = deg_into(g, v, sb);
      double lit = std::floor(double(deg) / 2.0 - nu * double(n) + 1e-9);
      if (double(da) < lit - 1e-9 || double(db) < lit - 1e-9) rep.literal_violations.push_back(v);
      double slack = std::max(nu * double(n), std::sqrt(double(std::max(deg, 1)) * logn));
      double floor_enf = double(deg) / 2.0 - slack - 1e-9;
      if (double(da) < floor_enf || double(db) < floor_enf) rep.enforced_violations.push_back(v);
    }
    if (rep.enforced_violations.empty()) {
      rep.ok = true;
      return bip;
    }
  }
  throw std::runtime_error("random_split: vertex " + std::to_string(rep.enforced_violations.front()) +
                           " misses the concentration degree bound after " +
                           std::to_string(attempts_allowed) + " attempts");
}

std::vector<int> Decomposition::members(int s, int cluster) const {
  std::vector<int> out;
  for (int v = 0; v < n; ++v)
    if (side[std::size_t(v)] == s && cluster_of[std::size_t(v)] == cluster) out.push_back(v);
  return out;
}

std::vector<int> Decomposition::origin_members(int s, int cluster) const {
  std::vector<int> out;
  for (int v = 0; v < n; ++v)
    if (side[std::size_t(v)] == s && origin_cluster[std::size_t(v)] == cluster) out.push_back(v);
  return out;
}

std::vector<int> Decomposition::prime_members(int s, int cluster) const {
  std::vector<int> out;
  for (int v = 0; v < n; ++v)
    if (side[std::size_t(v)] == s && cluster_of[std::size_t(v)] == cluster &&
        origin_cluster[std::size_t(v)] == cluster)
      out.push_back(v);
  return out;
}

std::vector<int> Decomposition::added_members(int s, int cluster) const {
  std::vector<int> out;
  for (int v = 0; v < n; ++v)
    if (side[std::size_t(v)] == s && cluster_of[std::size_t(v)] == cluster &&
        origin_cluster[std::size_t(v)] != cluster)
      out.push_back(v);
  return out;
}

Bitset Decomposition::member_set(int s, int cluster) const {
  Bitset out{std::size_t(n)};
  for (int v = 0; v < n; ++v)
    if (side[std::size_t(v)] == s && cluster_of[std::size_t(v)] == cluster) out.set(std::size_t(v));
  return out;
}

int Decomposition::pair_size(int s, int cluster) const {
  int cnt = 0;
  for (int v = 0; v < n; ++v)
    if (side[std::size_t(v)] == s && cluster_of[std::size_t(v)] == cluster) ++cnt;
  return cnt;
}

void to_json(nlohmann::json& j, const ClauseAudit& a) {
  j = nlohmann::json{{"name", a.name}, {"ok", a.ok}, {"observed", a.observed}, {"bound", a.bound}};
}

void from_json(const nlohmann::json& j, ClauseAudit& a) {
  a.name = j.value("name", std::string{});
  a.ok = j.value("ok", false);
  a.observed = j.value("observed", 0.0);
  a.bound = j.value("bound", 0.0);
}

void to_json(nlohmann::json& j, const RelocatingTriple& t) {
  j = nlohmann::json{{"first", t.first}, {"second", t.second}, {"third", t.third},
                     {"via_s", t.via_s}, {"via_t", t.via_t},   {"target", t.target},
                     {"side", t.side}};
}

void from_json(const nlohmann::json& j, RelocatingTriple& t) {
  t.first = j.value("first", -1);
  t.second = j.value("second", -1);
  t.third = j.value("third", -1);
  t.via_s = j.value("via_s", 0);
  t.via_t = j.value("via_t", 0);
  t.target = j.value("target", 0);
  t.side = j.value("side", 0);
}

void to_json(nlohmann::json& j, const RelocationStep& s) {
  j = nlohmann::json{{"triple", s.triple}, {"first_from", s.first_from}, {"rule", s.rule}};
}

void from_json(const nlohmann::json& j, RelocationStep& s) {
  s.triple = j.value("triple", RelocatingTriple{});
  s.first_from = j.value("first_from", 0);
  s.rule = j.value("rule", 0);
}

void to_json(nlohmann::json& j, const PairMeta& m) {
  j = nlohmann::json{{"m", m.m},
                     {"support_density", m.support_density},
                     {"host_density", m.host_density},
                     {"delta_used", m.delta_used}};
}

void from_json(const nlohmann::json& j, PairMeta& m) {
  m.m = j.value("m", 0);
  m.support_density = j.value("support_density", 0.0);
  m.host_density = j.value("host_density", 0.0);
  m.delta_used = j.value("delta_used", 0.0);
}

void to_json(nlohmann::json& j, const Decomposition& d) {
  j = nlohmann::json{{"version", 1},
                     {"n", d.n},
                     {"k", d.k},
                     {"side", d.side},
                     {"cluster_of", d.cluster_of},
                     {"origin_cluster", d.origin_cluster},
                     {"half_tag", d.half_tag},
                     {"pairs", d.pairs},
                     {"log", d.log},
                     {"audits", d.audits},
                     {"balanced", d.balanced}};
}

void from_json(const nlohmann::json& j, Decomposition& d) {
  if (j.value("version", 0) != 1)
    throw std::runtime_error("decomposition record: unsupported version");
  d.n = j.at("n").get<int>();
  d.k = j.at("k").get<int>();
  d.side = j.at("side").get<std::vector<int>>();
  d.cluster_of = j.at("cluster_of").get<std::vector<int>>();
  d.origin_cluster = j.at("origin_cluster").get<std::vector<int>>();
  d.half_tag = j.at("half_tag").get<std::vector<int>>();
  d.pairs = j.at("pairs").get<std::vector<PairMeta>>();
  d.log = j.at("log").get<std::vector<RelocationStep>>();
  d.audits = j.at("audits").get<std::vector<ClauseAudit>>();
  d.balanced = j.at("balanced").get<bool>();
}

namespace {

long nbhd_sim(const Graph& h, int x, int y) {
  return long(h.row(x).count_and(h.row(y)));
}

}  // namespace

Decomposition decompose(const BipartitePair& p, const Constants& c, Rng& rng) {
  const Graph& h = *p.host;
  int n = h.n();
  std::vector<int> A = p.left.to_vector(), B = p.right.to_vector();
  if (A.empty() || B.empty()) throw std::invalid_argument("decompose: empty side");

  Decomposition d;
  d.n = n;
  d.side.assign(std::size_t(n), -1);
  d.cluster_of.assign(std::size_t(n), -1);
  d.origin_cluster.assign(std::size_t(n), -1);
  d.half_tag.assign(std::size_t(n), 0);
  for (int v : A) d.side[std::size_t(v)] = 0;
  for (int v : B) d.side[std::size_t(v)] = 1;

  int m = int(std::min(A.size(), B.size()));
  int k = std::max(1, std::min(c.max_K, m / std::max(1, c.min_cluster)));

  // greedy k-center seeds on the left side by shared-neighborhood size
  std::vector<int> seeds{A.front()};
  std::vector<char> is_seed(std::size_t(n), 0);
  is_seed[std::size_t(A.front())] = 1;
  while (int(seeds.size()) < k) {
    int best = -1;
    long best_val = std::numeric_limits<long>::max();
    for (int a : A) {
      if (is_seed[std::size_t(a)]) continue;
      long worst = 0;
      for (int s : seeds) worst = std::max(worst, nbhd_sim(h, a, s));
      if (worst < best_val) {
        best_val = worst;
        best = a;
      }
    }
    seeds.push_back(best);
    is_seed[std::size_t(best)] = 1;
  }

  std::vector<char> alive(std::size_t(k) + 1, 1);
  auto assign_left = [&](int a) {
    int bestj = 0;
    long bestsim = -1;
    for (int j = 1; j <= k; ++j) {
      if (!alive[std::size_t(j)]) continue;
      long s2 = nbhd_sim(h, a, seeds[std::size_t(j - 1)]);
      if (s2 > bestsim) {
        bestsim = s2;
        bestj = j;
      }
    }
    d.cluster_of[std::size_t(a)] = bestj;
  };
  auto left_sets = [&]() {
    std::vector<Bitset> aset(std::size_t(k) + 1, Bitset(std::size_t(n)));
    for (int a : A)
      if (d.cluster_of[std::size_t(a)] >= 1) aset[std::size_t(d.cluster_of[std::size_t(a)])].set(std::size_t(a));
    return aset;
  };
  auto assign_right = [&](int b, const std::vector<Bitset>& aset) {
    int bestj = 0;
    long best = -1;
    for (int j = 1; j <= k; ++j) {
      if (!alive[std::size_t(j)]) continue;
      long s2 = long(deg_into(h, b, aset[std::size_t(j)]));
      if (s2 > best) {
        best = s2;
        bestj = j;
      }
    }
    d.cluster_of[std::size_t(b)] = bestj;
  };

  for (int a : A) assign_left(a);
  {
    auto aset = left_sets();
    for (int b : B) assign_right(b, aset);
  }

  // peel-and-retry refinement
  int rounds = std::max(1, c.retries);
  for (int round = 0; round < rounds; ++round) {
    bool changed = false;

    // peel degree deviators against each pair's own density
    for (int j = 1; j <= k; ++j) {
      if (!alive[std::size_t(j)]) continue;
      Bitset aj = d.member_set(0, j), bj = d.member_set(1, j);
      if (!aj.any() || !bj.any()) continue;
      BipartitePair pair(h, aj, bj);
      auto devs = degree_deviation_sets(pair, c.decomp_audit_eps);
      for (const Bitset* s : {&devs.low_left, &devs.high_left, &devs.low_right, &devs.high_right})
        for (int v : s->to_vector()) {
          d.cluster_of[std::size_t(v)] = 0;
          changed = true;
        }
    }

    // dissolve undersized pairs into their nearest survivor
    std::vector<int> sz_a(std::size_t(k) + 1, 0), sz_b(std::size_t(k) + 1, 0);
    for (int a : A)
      if (d.cluster_of[std::size_t(a)] >= 1) ++sz_a[std::size_t(d.cluster_of[std::size_t(a)])];
    for (int b : B)
      if (d.cluster_of[std::size_t(b)] >= 1) ++sz_b[std::size_t(d.cluster_of[std::size_t(b)])];
    std::vector<int> dying;
    int keeper = -1, keeper_size = -1;
    for (int j = 1; j <= k; ++j) {
      if (!alive[std::size_t(j)]) continue;
      int sz = std::min(sz_a[std::size_t(j)], sz_b[std::size_t(j)]);
      if (sz > keeper_size) {
        keeper_size = sz;
        keeper = j;
      }
      if (sz < c.min_cluster) dying.push_back(j);
    }
    bool all_die = true;
    for (int j = 1; j <= k; ++j)
      if (alive[std::size_t(j)] && std::find(dying.begin(), dying.end(), j) == dying.end())
        all_die = false;
    if (all_die && keeper >= 0) dying.erase(std::find(dying.begin(), dying.end(), keeper));
    if (!dying.empty()) {
      changed = true;
      std::vector<int> orphans_a, orphans_b;
      for (int j : dying) {
        alive[std::size_t(j)] = 0;
        for (int a : A)
          if (d.cluster_of[std::size_t(a)] == j) orphans_a.push_back(a);
        for (int b : B)
          if (d.cluster_of[std::size_t(b)] == j) orphans_b.push_back(b);
      }
      for (int a : orphans_a) assign_left(a);
      auto aset = left_sets();
      for (int b : orphans_b) assign_right(b, aset);
    }

    // trim side gaps to the contract tolerance, worst-connected members first
    for (int j = 1; j <= k; ++j) {
      if (!alive[std::size_t(j)]) continue;
      while (true) {
        Bitset aj = d.member_set(0, j), bj = d.member_set(1, j);
        int sa = int(aj.count()), sb = int(bj.count());
        if (sa == 0 || sb == 0) break;
        double bound = 2.0 * c.eps * c.eps * double(sa);
        if (double(std::abs(sa - sb)) <= bound + 1e-9) break;
        const Bitset& big = sa > sb ? aj : bj;
        const Bitset& opp = sa > sb ? bj : aj;
        int worst = -1, worst_deg = std::numeric_limits<int>::max();
        for (int v : big.to_vector()) {
          int deg = deg_into(h, v, opp);
          if (deg < worst_deg) {
            worst_deg = deg;
            worst = v;
          }
        }
        d.cluster_of[std::size_t(worst)] = 0;
        changed = true;
      }
    }

    if (!changed) break;
  }

  // renumber surviving pairs densely
  std::vector<int> newid(std::size_t(k) + 1, 0);
  int kk = 0;
  for (int j = 1; j <= k; ++j)
    if (alive[std::size_t(j)]) newid[std::size_t(j)] = ++kk;
  for (int v = 0; v < n; ++v)
    if (d.cluster_of[std::size_t(v)] >= 1)
      d.cluster_of[std::size_t(v)] = newid[std::size_t(d.cluster_of[std::size_t(v)])];
  d.k = kk;
  d.origin_cluster = d.cluster_of;
  d.pairs.assign(std::size_t(kk) + 1, PairMeta{});

  // contract audits
  Rng audit_rng = rng.substream("decompose-audit");
  int exceptional_total = d.pair_size(0, 0) + d.pair_size(1, 0);
  double ebound = c.exceptional_budget >= 0 ? double(c.exceptional_budget)
                                            : 8.0 * std::cbrt(c.d) * double(n);
  d.audits.push_back({"exceptional_budget", double(exceptional_total) <= ebound + 1e-9,
                      double(exceptional_total), ebound});
  int min_side = std::numeric_limits<int>::max();
  double worst_gap = 0.0;
  for (int j = 1; j <= kk; ++j) {
    Bitset aj = d.member_set(0, j), bj = d.member_set(1, j);
    int sa = int(aj.count()), sb = int(bj.count());
    min_side = std::min(min_side, std::min(sa, sb));
    worst_gap = std::max(worst_gap, double(std::abs(sa - sb)) / std::max(1.0, double(sa)));
    PairMeta& meta = d.pairs[std::size_t(j)];
    if (sa == 0 || sb == 0) {
      d.audits.push_back({"pair_" + std::to_string(j) + "_super_regular", false, 1.0,
                          c.decomp_audit_eps});
      continue;
    }
    BipartitePair pair(h, aj, bj);
    meta.support_density = pair.density();
    meta.delta_used = std::max(0.0, meta.support_density - c.decomp_audit_eps);
    auto verdict =
        estimate_super_regularity(pair, c.decomp_audit_eps, meta.delta_used, c.audit_trials, audit_rng);
    d.audits.push_back({"pair_" + std::to_string(j) + "_super_regular", verdict.super_regular,
                        verdict.regularity.max_deviation, c.decomp_audit_eps});
  }
  d.audits.push_back(
      {"cluster_floor", min_side >= c.min_cluster, double(min_side), double(c.min_cluster)});
  d.audits.push_back({"pair_side_gap", worst_gap <= 2.0 * c.eps * c.eps + 1e-12, worst_gap,
                      2.0 * c.eps * c.eps});
  int stray = 0;
  for (int v = 0; v < n; ++v) {
    bool in_pair = p.left.test(std::size_t(v)) || p.right.test(std::size_t(v));
    if (in_pair != (d.cluster_of[std::size_t(v)] >= 0)) ++stray;
  }
  d.audits.push_back({"cluster_partition", stray == 0, double(stray), 0.0});
  return d;
}

namespace {

struct OriginSets {
  std::array<std::vector<Bitset>, 2> set;
  std::array<std::vector<int>, 2> size;
};

OriginSets origin_sets(const Decomposition& d) {
  OriginSets o;
  for (int s = 0; s < 2; ++s) {
    o.set[std::size_t(s)].assign(std::size_t(d.k) + 1, Bitset(std::size_t(d.n)));
    o.size[std::size_t(s)].assign(std::size_t(d.k) + 1, 0);
  }
  for (int v = 0; v < d.n; ++v) {
    int s = d.side[std::size_t(v)], j = d.origin_cluster[std::size_t(v)];
    if (s >= 0 && j >= 0) {
      o.set[std::size_t(s)][std::size_t(j)].set(std::size_t(v));
      ++o.size[std::size_t(s)][std::size_t(j)];
    }
  }
  return o;
}

// qual[v * (k+1) + j]: v has at least gamma^3 |opposite origin cluster j|
// neighbors there (and at least one; the threshold is fractional at small n).
std::vector<char> qual_table(const Decomposition& d, const Graph& g, double gamma,
                             const OriginSets& o) {
  double g3 = gamma * gamma * gamma;
  std::size_t stride = std::size_t(d.k + 1);
  std::vector<char> q(std::size_t(d.n) * stride, 0);
  for (int v = 0; v < d.n; ++v) {
    int s = d.side[std::size_t(v)];
    if (s < 0) continue;
    int opp = 1 - s;
    for (int j = 1; j <= d.k; ++j) {
      int sz = o.size[std::size_t(opp)][std::size_t(j)];
      if (sz == 0) continue;
      int deg = deg_into(g, v, o.set[std::size_t(opp)][std::size_t(j)]);
      if (deg >= 1 && double(deg) >= g3 * double(sz) - 1e-9)
        q[std::size_t(v) * stride + std::size_t(j)] = 1;
    }
  }
  return q;
}

struct EligibleSets {
  std::vector<int> seconds;              // ascending; first-vertex condition folded in
  std::vector<std::vector<int>> thirds;  // per origin cluster, ascending; target condition folded in
};

EligibleSets eligible_sets(const Decomposition& d, const std::vector<char>& qual, int v, int side,
                           int target, const Bitset* restrict_to, const Bitset* used) {
  EligibleSets e;
  e.thirds.assign(std::size_t(d.k) + 1, {});
  std::size_t stride = std::size_t(d.k + 1);
  for (int x = 0; x < d.n; ++x) {
    if (x == v || d.side[std::size_t(x)] != side) continue;
    if (d.origin_cluster[std::size_t(x)] < 1 ||
        d.cluster_of[std::size_t(x)] != d.origin_cluster[std::size_t(x)])
      continue;
    if (restrict_to && !restrict_to->test(std::size_t(x))) continue;
    if (used && used->test(std::size_t(x))) continue;
    int t = d.origin_cluster[std::size_t(x)];
    if (qual[std::size_t(x) * stride + std::size_t(target)]) e.thirds[std::size_t(t)].push_back(x);
    if (qual[std::size_t(v) * stride + std::size_t(t)]) e.seconds.push_back(x);
  }
  return e;
}

std::uint64_t pairs_for_second(const Decomposition& d, const std::vector<char>& qual,
                               const EligibleSets& e, int u, int target) {
  std::size_t stride = std::size_t(d.k + 1);
  std::uint64_t total = 0;
  for (int t = 1; t <= d.k; ++t) {
    if (!qual[std::size_t(u) * stride + std::size_t(t)]) continue;
    std::uint64_t w = e.thirds[std::size_t(t)].size();
    if (t == d.origin_cluster[std::size_t(u)] &&
        qual[std::size_t(u) * stride + std::size_t(target)])
      --w;  // the pair (u, u) is not a triple
    total += w;
  }
  return total;
}

struct DrawnPair {
  int u = -1, w = -1;
};

DrawnPair draw_uniform(const Decomposition& d, const std::vector<char>& qual,
                       const EligibleSets& e, int target, Rng& rng) {
  std::vector<std::uint64_t> cnt(e.seconds.size());
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < e.seconds.size(); ++i) {
    cnt[i] = pairs_for_second(d, qual, e, e.seconds[i], target);
    total += cnt[i];
  }
  if (total == 0) return {};
  std::uint64_t idx = rng.below(total);
  std::size_t stride = std::size_t(d.k + 1);
  for (std::size_t i = 0; i < e.seconds.size(); ++i) {
    if (idx >= cnt[i]) {
      idx -= cnt[i];
      continue;
    }
    int u = e.seconds[i];
    for (int t = 1; t <= d.k; ++t) {
      if (!qual[std::size_t(u) * stride + std::size_t(t)]) continue;
      const auto& lst = e.thirds[std::size_t(t)];
      std::uint64_t avail = lst.size();
      if (t == d.origin_cluster[std::size_t(u)] &&
          qual[std::size_t(u) * stride + std::size_t(target)])
        --avail;
      if (idx >= avail) {
        idx -= avail;
        continue;
      }
      for (int w : lst) {
        if (w == u) continue;
        if (idx == 0) return {u, w};
        --idx;
      }
    }
  }
  return {};
}

}  // namespace

PathResult find_relocating_paths(const Decomposition& d, const Graph& g, double gamma, int v,
                                 int side, int target, int limit, const Bitset* restrict_to,
                                 const Bitset* used) {
  if (d.k < 1 || target < 1 || target > d.k)
    throw std::invalid_argument("find_relocating_paths: target must be a non-exceptional cluster");
  OriginSets o = origin_sets(d);
  std::vector<char> qual = qual_table(d, g, gamma, o);
  Bitset taken{std::size_t(d.n)};
  if (used) taken = *used;
  std::size_t stride = std::size_t(d.k + 1);

  PathResult res;
  while (int(res.triples.size()) < limit) {
    EligibleSets e = eligible_sets(d, qual, v, side, target, restrict_to, &taken);
    int bu = -1, bw = -1;
    for (int u : e.seconds) {
      int w_min = -1;
      for (int t = 1; t <= d.k; ++t) {
        if (!qual[std::size_t(u) * stride + std::size_t(t)]) continue;
        for (int w : e.thirds[std::size_t(t)]) {
          if (w == u) continue;
          if (w_min < 0 || w < w_min) w_min = w;
          break;
        }
      }
      if (w_min >= 0) {
        bu = u;
        bw = w_min;
        break;
      }
    }
    if (bu < 0) break;
    res.triples.push_back({v, bu, bw, d.origin_cluster[std::size_t(bu)],
                           d.origin_cluster[std::size_t(bw)], target, side});
    taken.set(std::size_t(bu));
    taken.set(std::size_t(bw));
  }
  res.shortfall = int(res.triples.size()) < limit;
  return res;
}

TripleDraw draw_relocating_triple(const Decomposition& d, const Graph& g, double gamma, int v,
                                  int side, int target, Rng& rng, const Bitset* restrict_to,
                                  const Bitset* used) {
  if (d.k < 1 || target < 1 || target > d.k)
    throw std::invalid_argument("draw_relocating_triple: target must be a non-exceptional cluster");
  OriginSets o = origin_sets(d);
  std::vector<char> qual = qual_table(d, g, gamma, o);
  EligibleSets e = eligible_sets(d, qual, v, side, target, restrict_to, used);
  TripleDraw res;
  for (int u : e.seconds) res.available += pairs_for_second(d, qual, e, u, target);
  if (res.available == 0) return res;
  DrawnPair dp = draw_uniform(d, qual, e, target, rng);
  res.triple = {v,
                dp.u,
                dp.w,
                d.origin_cluster[std::size_t(dp.u)],
                d.origin_cluster[std::size_t(dp.w)],
                target,
                side};
  res.found = true;
  return res;
}

void apply_step(Decomposition& d, const RelocationStep& step) {
  const RelocatingTriple& t = step.triple;
  auto expect = [&](int v, int cluster, const char* role) {
    if (v < 0 || v >= d.n || d.cluster_of[std::size_t(v)] != cluster ||
        d.side[std::size_t(v)] != t.side)
      throw std::logic_error(std::string("apply_step: ") + role + " vertex " + std::to_string(v) +
                             " is not a side-" + side_name(t.side) + " member of cluster " +
                             std::to_string(cluster));
  };
  expect(t.first, step.first_from, "first");
  expect(t.second, t.via_s, "second");
  expect(t.third, t.via_t, "third");
  d.cluster_of[std::size_t(t.first)] = t.via_s;
  d.cluster_of[std::size_t(t.second)] = t.via_t;
  d.cluster_of[std::size_t(t.third)] = t.target;
}

Decomposition pre_balance_state(const Decomposition& d) {
  Decomposition out = d;
  out.cluster_of = out.origin_cluster;
  out.log.clear();
  out.audits.clear();
  out.balanced = false;
  for (auto& meta : out.pairs) meta.m = 0;
  return out;
}

void balance(Decomposition& d, const Graph& g, const Constants& c, Rng& rng) {
  if (d.balanced) throw std::logic_error("balance: decomposition is already balanced");
  if (d.k < 1) throw std::invalid_argument("balance: no cluster pairs");
  int n = d.n;
  if (g.n() != n) throw std::invalid_argument("balance: graph size mismatch");

  Rng halves = rng.substream("halves");
  for (int v = 0; v < n; ++v)
    if (d.cluster_of[std::size_t(v)] >= 1) d.half_tag[std::size_t(v)] = halves.coin() ? 1 : 2;

  OriginSets o = origin_sets(d);
  std::vector<char> qual = qual_table(d, g, c.gamma, o);
  Bitset s_mask{std::size_t(n)}, used{std::size_t(n)};
  for (int v = 0; v < n; ++v)
    if (d.half_tag[std::size_t(v)] == 1) s_mask.set(std::size_t(v));

  int v0_initial = d.pair_size(0, 0) + d.pair_size(1, 0);
  Rng triples_rng = rng.substream("triples");
  std::array<std::vector<int>, 2> participants;
  participants[0].assign(std::size_t(d.k) + 1, 0);
  participants[1].assign(std::size_t(d.k) + 1, 0);

  auto sizes = [&](int s) {
    std::vector<int> sz(std::size_t(d.k) + 1, 0);
    for (int v = 0; v < n; ++v)
      if (d.side[std::size_t(v)] == s && d.cluster_of[std::size_t(v)] >= 1)
        ++sz[std::size_t(d.cluster_of[std::size_t(v)])];
    return sz;
  };
  auto lowest_exceptional = [&](int s) {
    for (int v = 0; v < n; ++v)
      if (d.side[std::size_t(v)] == s && d.cluster_of[std::size_t(v)] == 0) return v;
    return -1;
  };

  int relocations = 0;
  while (true) {
    std::vector<int> sa = sizes(0), sb = sizes(1);
    int a0 = lowest_exceptional(0), b0 = lowest_exceptional(1);
    int lowest_deficit = -1, lowest_surplus = -1, min_surplus_pair = -1;
    int min_surplus = std::numeric_limits<int>::max();
    for (int j = 1; j <= d.k; ++j) {
      int diff = sa[std::size_t(j)] - sb[std::size_t(j)];
      if (diff < 0 && lowest_deficit < 0) lowest_deficit = j;
      if (diff > 0 && lowest_surplus < 0) lowest_surplus = j;
      if (diff < min_surplus) {
        min_surplus = diff;
        min_surplus_pair = j;
      }
    }

    int first = -1, first_from = 0, side = 0, target = -1, rule = 0;
    if (a0 >= 0 && lowest_deficit >= 0) {
      rule = 1;
      first = a0;
      side = 0;
      target = lowest_deficit;
    } else if (a0 >= 0) {
      rule = 2;
      first = a0;
      side = 0;
      target = min_surplus_pair;
    } else if (b0 >= 0) {
      if (lowest_surplus < 0)
        throw std::logic_error("balance: B-side exceptional vertices without any surplus pair");
      rule = 3;
      first = b0;
      side = 1;
      target = lowest_surplus;
    } else if (lowest_surplus >= 0 && lowest_deficit >= 0) {
      rule = 4;
      side = 0;
      target = lowest_deficit;
      for (int v = 0; v < n; ++v)
        if (d.side[std::size_t(v)] == 0 && d.cluster_of[std::size_t(v)] == lowest_surplus &&
            d.half_tag[std::size_t(v)] == 1 && !used.test(std::size_t(v))) {
          first = v;
          break;
        }
      if (first < 0)
        throw std::runtime_error("balance: no available first vertex in the random half of pair " +
                                 std::to_string(lowest_surplus));
      first_from = lowest_surplus;
    } else {
      break;  // everything balanced, exceptional sets empty
    }

    EligibleSets e = eligible_sets(d, qual, first, side, target, &s_mask, &used);
    DrawnPair dp = draw_uniform(d, qual, e, target, triples_rng);
    if (dp.u < 0)
      throw std::runtime_error("balance: no available relocating triple for vertex " +
                               std::to_string(first) + " toward " + side_name(side) + "_" +
                               std::to_string(target) +
                               " (constants likely out of admissible range)");
    RelocationStep step;
    step.triple = RelocatingTriple{first,
                                   dp.u,
                                   dp.w,
                                   d.origin_cluster[std::size_t(dp.u)],
                                   d.origin_cluster[std::size_t(dp.w)],
                                   target,
                                   side};
    step.first_from = rule == 4 ? first_from : 0;
    step.rule = rule;
    apply_step(d, step);
    d.log.push_back(step);
    for (int x : {first, dp.u, dp.w}) {
      used.set(std::size_t(x));
      int oc = d.origin_cluster[std::size_t(x)];
      if (oc >= 1) ++participants[std::size_t(d.side[std::size_t(x)])][std::size_t(oc)];
    }
    ++relocations;
  }

  d.balanced = true;
  std::vector<int> sa = sizes(0), sb = sizes(1);
  int worst_diff = 0;
  for (int j = 1; j <= d.k; ++j) {
    worst_diff = std::max(worst_diff, std::abs(sa[std::size_t(j)] - sb[std::size_t(j)]));
    d.pairs[std::size_t(j)].m = sa[std::size_t(j)];
  }
  d.audits.push_back({"pairs_balanced", worst_diff == 0, double(worst_diff), 0.0});
  double step_bound = double(v0_initial) + 2.0 * c.eps * c.eps * double(n);
  d.audits.push_back({"relocation_count", double(relocations) <= step_bound + 1e-9,
                      double(relocations), step_bound});
  double g4 = std::pow(c.gamma, 4);
  double worst_added = 0.0, worst_part = 0.0;
  for (int s = 0; s < 2; ++s)
    for (int j = 1; j <= d.k; ++j) {
      int mj = (s == 0 ? sa : sb)[std::size_t(j)];
      worst_added = std::max(worst_added, double(d.added_members(s, j).size()) /
                                              std::max(1.0, double(mj)));
      worst_part =
          std::max(worst_part, double(participants[std::size_t(s)][std::size_t(j)]) /
                                   std::max(1.0, double(o.size[std::size_t(s)][std::size_t(j)])));
    }
  d.audits.push_back({"added_fraction", worst_added <= g4 + 1e-12, worst_added, g4});
  d.audits.push_back({"participation_fraction", worst_part <= g4 + 1e-12, worst_part, g4});
  int strays = 0;
  for (int v = 0; v < n; ++v) {
    int s = d.side[std::size_t(v)], cl = d.cluster_of[std::size_t(v)];
    if (s < 0) {
      if (cl != -1) ++strays;
    } else if (cl < 0 || cl > d.k) {
      ++strays;
    }
  }
  d.audits.push_back({"conservation", strays == 0, double(strays), 0.0});
}

ClauseAudit cross_nonextremality_audit(const Graph& g, const Bipartition& bip, double gamma,
                                       int trials, Rng& rng) {
  int n = g.n();
  int q = n / 4;
  if (q < 1 || int(bip.a.size()) < q || int(bip.b.size()) < q)
    throw std::invalid_argument("cross_nonextremality_audit: sides smaller than n/4");

  ClauseAudit audit;
  audit.name = "cross_nonextremality";
  audit.bound = gamma * gamma * double(n) * double(n) / 50.0;

  std::vector<std::vector<int>> candidates;
  auto prefix_by_key = [&](const std::vector<long>& key) {
    std::vector<int> order(bip.a.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int x, int y) { return key[std::size_t(x)] < key[std::size_t(y)]; });
    std::vector<int> out;
    for (int i = 0; i < q; ++i) out.push_back(bip.a[std::size_t(order[std::size_t(i)])]);
    return out;
  };

  Bitset bset = Bitset::from(std::size_t(n), bip.b);
  {
    std::vector<long> key;
    for (int a : bip.a) key.push_back(deg_into(g, a, bset));
    candidates.push_back(prefix_by_key(key));
  }
  {
    std::vector<long> key;
    for (int a : bip.a) key.push_back(g.deg(a));
    candidates.push_back(prefix_by_key(key));
  }
  {
    // low-degree vertices' non-neighborhoods, the shape extremal cuts take
    std::vector<int> order(std::size_t(n), 0);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return g.deg(x) < g.deg(y); });
    for (int i = 0; i < 3 && i < n; ++i) {
      int v = order[std::size_t(i)];
      std::vector<long> key;
      for (int a : bip.a) key.push_back(g.has_edge(v, a) ? 1 : 0);
      candidates.push_back(prefix_by_key(key));
    }
  }
  for (int t = 0; t < trials; ++t) {
    std::vector<int> pick = rng.sample(int(bip.a.size()), q);
    std::vector<int> x;
    for (int i : pick) x.push_back(bip.a[std::size_t(i)]);
    candidates.push_back(std::move(x));
  }

  std::uint64_t best = std::numeric_limits<std::uint64_t>::max();
  for (const auto& x : candidates) {
    Bitset xset = Bitset::from(std::size_t(n), x);
    std::vector<std::uint64_t> degs;
    degs.reserve(bip.b.size());
    for (int b : bip.b) degs.push_back(std::uint64_t(deg_into(g, b, xset)));
    std::sort(degs.begin(), degs.end());
    std::uint64_t e = std::accumulate(degs.begin(), degs.begin() + q, std::uint64_t(0));
    best = std::min(best, e);
  }
  audit.observed = double(best);
  audit.ok = double(best) + 1e-9 >= audit.bound;
  return audit;
}

Graph support_graph(int n, const RFactor& f) {
  Graph g(n);
  for (const auto& matching : f.matchings)
    for (std::size_t i = 0; i < matching.size(); ++i)
      if (matching[i] >= 0) g.add_edge(f.left_ids[i], f.right_ids[std::size_t(matching[i])]);
  return g;
}

PrepResult preprocess_host(const Graph& g, const Constants& c, Rng& rng) {
  int n = g.n();
  {
    Rng gate_rng = rng.substream("gate");
    auto ext = estimate_nonextremal(g, c.gamma, c.audit_trials, gate_rng);
    if (!ext.nonextremal)
      throw std::runtime_error(
          "preprocess_host[gate]: host fails the sampled non-extremality check at gamma=" +
          std::to_string(c.gamma) + " (half-set pair with " +
          std::to_string(ext.min_count_seen) + " ordered cross pairs)");
    if (double(g.min_degree()) < (0.5 - c.nu) * double(n) - 1e-9)
      throw std::runtime_error("preprocess_host[gate]: min degree " +
                               std::to_string(g.min_degree()) + " below (1/2 - nu) n = " +
                               std::to_string((0.5 - c.nu) * double(n)));
  }

  PrepResult res;
  Rng split_rng = rng.substream("split");
  try {
    res.bip = random_split(g, c.nu, split_rng, c.retries, &res.split_report);
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("preprocess_host[split]: ") + e.what());
  }

  res.r = std::max(1, int(std::floor(c.nu * double(n) + 1e-9)));
  VertexSet aset = Bitset::from(std::size_t(n), res.bip.a);
  VertexSet bset = Bitset::from(std::size_t(n), res.bip.b);
  BipartitePair full_pair(g, aset, bset);
  res.factor = find_r_factor(full_pair, res.r);
  if (!res.factor.complete)
    throw std::runtime_error("preprocess_host[r_factor]: " + res.factor.error);
  res.support = support_graph(n, res.factor);

  BipartitePair support_pair(res.support, aset, bset);
  Rng dec_rng = rng.substream("decompose");
  res.decomp = decompose(support_pair, c, dec_rng);

  Rng bal_rng = rng.substream("balance");
  try {
    balance(res.decomp, g, c, bal_rng);
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("preprocess_host[balance]: ") + e.what());
  }

  // output clauses, audited against the full host
  Decomposition& d = res.decomp;
  Rng audit_rng = rng.substream("clause-audit");
  int min_m = std::numeric_limits<int>::max();
  bool equal = true;
  for (int j = 1; j <= d.k; ++j) {
    int sa = d.pair_size(0, j), sb = d.pair_size(1, j);
    if (sa != sb) equal = false;
    min_m = std::min(min_m, std::min(sa, sb));
  }
  d.audits.push_back({"cluster_sizes", equal && min_m >= c.min_cluster, double(min_m),
                      double(c.min_cluster)});
  int leftover = d.pair_size(0, 0) + d.pair_size(1, 0);
  d.audits.push_back({"exceptional_emptied", leftover == 0, double(leftover), 0.0});

  double g4 = std::pow(c.gamma, 4), g3 = std::pow(c.gamma, 3);
  double worst_added = 0.0;
  double min_margin = std::numeric_limits<double>::max();
  bool any_added = false;
  for (int s = 0; s < 2; ++s)
    for (int j = 1; j <= d.k; ++j) {
      auto added = d.added_members(s, j);
      int mj = d.pair_size(s, j);
      worst_added = std::max(worst_added, double(added.size()) / std::max(1.0, double(mj)));
      if (added.empty()) continue;
      Bitset opp_core = Bitset::from(std::size_t(n), d.prime_members(1 - s, j));
      double need = g3 * double(opp_core.count()) / 3.0;
      for (int v : added) {
        any_added = true;
        min_margin = std::min(min_margin, double(deg_into(g, v, opp_core)) - need);
      }
    }
  if (!any_added) min_margin = 0.0;
  d.audits.push_back({"irregular_fraction", worst_added <= g4 + 1e-12, worst_added, g4});
  d.audits.push_back({"irregular_degree", min_margin >= -1e-9, min_margin, 0.0});

  for (int j = 1; j <= d.k; ++j) {
    Bitset ca = Bitset::from(std::size_t(n), d.prime_members(0, j));
    Bitset cb = Bitset::from(std::size_t(n), d.prime_members(1, j));
    if (!ca.any() || !cb.any()) {
      d.audits.push_back({"core_" + std::to_string(j) + "_super_regular", false, 1.0, 2.0 * c.eps});
      continue;
    }
    BipartitePair core(g, ca, cb);
    d.pairs[std::size_t(j)].host_density = core.density();
    auto verdict = estimate_super_regularity(core, 2.0 * c.eps, c.d / 3.0, c.audit_trials, audit_rng);
    d.audits.push_back({"core_" + std::to_string(j) + "_super_regular", verdict.super_regular,
                        verdict.regularity.max_deviation, 2.0 * c.eps});
  }
  d.audits.push_back(cross_nonextremality_audit(g, res.bip, c.gamma, c.audit_trials, audit_rng));
  return res;
}

}  // namespace treespan
