#include "treespan/regularity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace treespan {
namespace {

int qualifying_size(double eps, std::size_t side) {
  // minimal integer k with k >= eps * side; at least 1
  double t = eps * double(side);
  int k = int(std::ceil(t - 1e-12));
  return std::max(k, 1);
}

// Given X (as row-sum vector over the right side), the extremal size-b subsets
// of the right side are the top-b and bottom-b column sums.
struct ExtremeY {
  double dev;
  std::vector<int> ids;  // indices into the right-id list
};

ExtremeY worst_y(const std::vector<int>& colsum, const std::vector<int>& order_asc, int b,
                 std::size_t xsize, double d) {
  long long lo = 0, hi = 0;
  std::size_t m = order_asc.size();
  for (int i = 0; i < b; ++i) lo += colsum[std::size_t(order_asc[std::size_t(i)])];
  for (int i = 0; i < b; ++i) hi += colsum[std::size_t(order_asc[m - 1 - std::size_t(i)])];
  double denom = double(xsize) * double(b);
  double dev_lo = d - double(lo) / denom;
  double dev_hi = double(hi) / denom - d;
  ExtremeY r;
  if (dev_lo >= dev_hi) {
    r.dev = dev_lo;
    r.ids.assign(order_asc.begin(), order_asc.begin() + b);
  } else {
    r.dev = dev_hi;
    r.ids.assign(order_asc.end() - b, order_asc.end());
  }
  return r;
}

struct PairView {
  std::vector<int> lid, rid;   // global ids
  std::vector<Bitset> rows;    // rows[i] = adjacency of lid[i] restricted to rid, indexed locally
  double density = 0.0;
};

PairView make_view(const BipartitePair& p, bool swap_sides) {
  PairView v;
  const VertexSet& l = swap_sides ? p.right : p.left;
  const VertexSet& r = swap_sides ? p.left : p.right;
  v.lid = l.to_vector();
  v.rid = r.to_vector();
  std::vector<int> pos(std::size_t(p.host->n()), -1);
  for (std::size_t j = 0; j < v.rid.size(); ++j) pos[std::size_t(v.rid[j])] = int(j);
  v.rows.assign(v.lid.size(), Bitset(v.rid.size()));
  std::uint64_t e = 0;
  for (std::size_t i = 0; i < v.lid.size(); ++i) {
    p.host->row(v.lid[i]).for_each([&](int u) {
      int j = pos[std::size_t(u)];
      if (j >= 0) v.rows[i].set(std::size_t(j));
    });
    e += v.rows[i].count();
  }
  v.density = double(e) / (double(v.lid.size()) * double(v.rid.size()));
  return v;
}

RegularityWitness make_witness(const BipartitePair& p, const PairView& v, bool swapped,
                               const std::vector<int>& xlocal, const std::vector<int>& ylocal,
                               double dev) {
  RegularityWitness w;
  std::size_t n = std::size_t(p.host->n());
  Bitset xs(n), ys(n);
  for (int i : xlocal) xs.set(std::size_t(v.lid[std::size_t(i)]));
  for (int j : ylocal) ys.set(std::size_t(v.rid[std::size_t(j)]));
  if (swapped) std::swap(xs, ys);
  w.x = std::move(xs);
  w.y = std::move(ys);
  w.deviation = dev;
  return w;
}

void colsums_for(const PairView& v, const std::vector<int>& xlocal, std::vector<int>& colsum) {
  std::fill(colsum.begin(), colsum.end(), 0);
  for (int i : xlocal)
    v.rows[std::size_t(i)].for_each([&](int j) { ++colsum[std::size_t(j)]; });
}

void consider(const PairView& v, const std::vector<int>& xlocal, int b, double d,
              std::vector<int>& colsum, std::vector<int>& order, double& best_dev,
              std::vector<int>& best_x, std::vector<int>& best_y) {
  colsums_for(v, xlocal, colsum);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a2, int b2) { return colsum[std::size_t(a2)] < colsum[std::size_t(b2)]; });
  ExtremeY ey = worst_y(colsum, order, b, xlocal.size(), d);
  if (ey.dev > best_dev) {
    best_dev = ey.dev;
    best_x = xlocal;
    best_y = ey.ids;
  }
}

}  // namespace

RegularityVerdict check_regular_exact(const BipartitePair& p, double eps, int cap) {
  std::size_t L = p.left_size(), R = p.right_size();
  if (L == 0 || R == 0) throw std::domain_error("regularity of a pair with an empty side");
  if (int(L) > cap || int(R) > cap)
    throw std::invalid_argument("exact regularity check limited to sides <= " +
                                std::to_string(cap));
  RegularityVerdict verdict;
  verdict.epsilon = eps;
  verdict.mode = "exact";

  // enumerate X on the side with fewer boundary-size subsets
  auto cost = [](std::size_t m, int k) {
    double c = 1;
    for (int i = 0; i < k; ++i) c *= double(m - std::size_t(i)) / double(i + 1);
    return c;
  };
  int ka = qualifying_size(eps, L), kb = qualifying_size(eps, R);
  bool swapped = false;
  if (ka <= int(L) && kb <= int(R)) swapped = cost(R, kb) < cost(L, ka);
  PairView v = make_view(p, swapped);
  verdict.density = v.density;
  int a = swapped ? kb : ka;
  int b = swapped ? ka : kb;
  if (a > int(v.lid.size()) || b > int(v.rid.size())) {
    verdict.regular = true;  // no qualifying subsets
    return verdict;
  }

  std::vector<int> xlocal(std::size_t(a), 0);
  std::iota(xlocal.begin(), xlocal.end(), 0);
  std::vector<int> colsum(v.rid.size(), 0), order(v.rid.size());
  double best_dev = 0.0;
  std::vector<int> best_x, best_y;
  std::size_t m = v.lid.size();
  while (true) {
    consider(v, xlocal, b, v.density, colsum, order, best_dev, best_x, best_y);
    ++verdict.samples_used;
    // next combination
    int i = a - 1;
    while (i >= 0 && xlocal[std::size_t(i)] == int(m) - a + i) --i;
    if (i < 0) break;
    ++xlocal[std::size_t(i)];
    for (int j = i + 1; j < a; ++j) xlocal[std::size_t(j)] = xlocal[std::size_t(j - 1)] + 1;
  }
  verdict.max_deviation = best_dev;
  if (best_dev > eps) {
    verdict.regular = false;
    verdict.witness = make_witness(p, v, swapped, best_x, best_y, best_dev);
  } else {
    verdict.regular = true;
  }
  return verdict;
}

RegularityVerdict estimate_regularity(const BipartitePair& p, double eps, int trials, Rng& rng) {
  std::size_t L = p.left_size(), R = p.right_size();
  if (L == 0 || R == 0) throw std::domain_error("regularity of a pair with an empty side");
  RegularityVerdict verdict;
  verdict.epsilon = eps;
  verdict.mode = "sampled";

  PairView v = make_view(p, false);
  verdict.density = v.density;
  int base = qualifying_size(eps, L);
  std::vector<int> xsizes;
  for (int k : {base, 2 * base, 4 * base, int(L) / 2})
    if (k >= base && k <= int(L)) xsizes.push_back(k);
  if (xsizes.empty()) {
    verdict.regular = true;  // eps|L| exceeds |L|: nothing qualifies
    return verdict;
  }
  int yb = qualifying_size(eps, R);
  if (yb > int(R)) {
    verdict.regular = true;
    return verdict;
  }

  std::vector<int> colsum(v.rid.size(), 0), order(v.rid.size());
  double best_dev = 0.0;
  std::vector<int> best_x, best_y;

  // structured candidates: degree-extreme prefixes per size
  std::vector<int> bydeg(v.lid.size());
  std::iota(bydeg.begin(), bydeg.end(), 0);
  std::stable_sort(bydeg.begin(), bydeg.end(), [&](int a2, int b2) {
    return v.rows[std::size_t(a2)].count() < v.rows[std::size_t(b2)].count();
  });
  for (int k : xsizes) {
    std::vector<int> lowx(bydeg.begin(), bydeg.begin() + k);
    std::vector<int> highx(bydeg.end() - k, bydeg.end());
    consider(v, lowx, yb, v.density, colsum, order, best_dev, best_x, best_y);
    consider(v, highx, yb, v.density, colsum, order, best_dev, best_x, best_y);
    verdict.samples_used += 2;
  }
  // random candidates, each paired with its exact worst Y
  for (int t = 0; t < trials; ++t) {
    int k = xsizes[std::size_t(t) % xsizes.size()];
    std::vector<int> x = rng.sample(int(v.lid.size()), k);
    consider(v, x, yb, v.density, colsum, order, best_dev, best_x, best_y);
    ++verdict.samples_used;
  }
  verdict.max_deviation = best_dev;
  if (best_dev > eps) {
    verdict.regular = false;
    verdict.witness = make_witness(p, v, false, best_x, best_y, best_dev);
  } else {
    verdict.regular = true;
  }
  return verdict;
}

namespace {
SuperRegularityVerdict super_from(const BipartitePair& p, RegularityVerdict reg, double delta) {
  SuperRegularityVerdict s;
  s.delta = delta;
  s.min_left_degree = p.min_left_degree();
  s.min_right_degree = p.min_right_degree();
  s.degree_floor_left = int(std::ceil(delta * double(p.right_size()) - 1e-12));
  s.degree_floor_right = int(std::ceil(delta * double(p.left_size()) - 1e-12));
  bool degrees_ok = s.min_left_degree >= s.degree_floor_left &&
                    s.min_right_degree >= s.degree_floor_right;
  s.super_regular = reg.regular && degrees_ok;
  s.regularity = std::move(reg);
  return s;
}
}  // namespace

SuperRegularityVerdict check_super_regular_exact(const BipartitePair& p, double eps, double delta,
                                                 int cap) {
  return super_from(p, check_regular_exact(p, eps, cap), delta);
}

SuperRegularityVerdict estimate_super_regularity(const BipartitePair& p, double eps, double delta,
                                                 int trials, Rng& rng) {
  return super_from(p, estimate_regularity(p, eps, trials, rng), delta);
}

DegreeDeviationSets degree_deviation_sets(const BipartitePair& p, double eps) {
  DegreeDeviationSets s;
  s.density = p.density();
  std::size_t n = std::size_t(p.host->n());
  s.low_left = Bitset(n);
  s.high_left = Bitset(n);
  s.low_right = Bitset(n);
  s.high_right = Bitset(n);
  double rsize = double(p.right_size()), lsize = double(p.left_size());
  p.left.for_each([&](int v) {
    double d = double(p.host->row(v).count_and(p.right));
    if (d < (s.density - eps) * rsize) s.low_left.set(std::size_t(v));
    if (d > (s.density + eps) * rsize) s.high_left.set(std::size_t(v));
  });
  p.right.for_each([&](int v) {
    double d = double(p.host->row(v).count_and(p.left));
    if (d < (s.density - eps) * lsize) s.low_right.set(std::size_t(v));
    if (d > (s.density + eps) * lsize) s.high_right.set(std::size_t(v));
  });
  return s;
}

SlicedPair slice_pair(const BipartitePair& p, double eps, const VertexSet& a1,
                      const VertexSet& b1) {
  if (!a1.is_subset_of(p.left) || !b1.is_subset_of(p.right))
    throw std::invalid_argument("slice is not contained in the pair");
  double alpha = std::min(double(a1.count()) / double(p.left_size()),
                          double(b1.count()) / double(p.right_size()));
  if (alpha <= eps)
    throw std::invalid_argument("slice ratio alpha=" + std::to_string(alpha) +
                                " must exceed eps=" + std::to_string(eps));
  SlicedPair s;
  s.parent_density = p.density();
  s.pair = BipartitePair(*p.host, a1, b1);
  s.alpha = alpha;
  s.eps_prime = std::max(eps / alpha, 2 * eps);
  return s;
}

InsertedPair insert_vertices(const BipartitePair& p, double eps, double d, double delta,
                             const std::vector<int>& new_left, const std::vector<int>& new_right) {
  double la = double(p.left_size()), lb = double(p.right_size());
  if (double(new_left.size()) > eps * eps * la || double(new_right.size()) > eps * eps * lb)
    throw std::invalid_argument("insertion exceeds eps^2 side budget");
  for (int x : new_left) {
    if (p.left.test(std::size_t(x)) || p.right.test(std::size_t(x)))
      throw std::invalid_argument("inserted vertex " + std::to_string(x) + " already in the pair");
    if (double(p.host->row(x).count_and(p.right)) < d * lb)
      throw std::invalid_argument("inserted left vertex " + std::to_string(x) +
                                  " has fewer than d|B| neighbors");
  }
  for (int y : new_right) {
    if (p.left.test(std::size_t(y)) || p.right.test(std::size_t(y)))
      throw std::invalid_argument("inserted vertex " + std::to_string(y) + " already in the pair");
    if (double(p.host->row(y).count_and(p.left)) < d * la)
      throw std::invalid_argument("inserted right vertex " + std::to_string(y) +
                                  " has fewer than d|A| neighbors");
  }
  VertexSet l = p.left, r = p.right;
  for (int x : new_left) l.set(std::size_t(x));
  for (int y : new_right) r.set(std::size_t(y));
  InsertedPair out;
  out.pair = BipartitePair(*p.host, std::move(l), std::move(r));
  out.eps_predicted = 3 * eps;
  out.delta_predicted = delta - eps;
  return out;
}

}  // namespace treespan
