#include "treespan/matching.hpp"

#include <algorithm>
#include <functional>
#include <limits>
#include <stdexcept>

namespace treespan {

MatchingResult max_bipartite_matching(const std::vector<Bitset>& left_rows, int right_count) {
  int L = int(left_rows.size());
  MatchingResult res;
  res.match_left.assign(std::size_t(L), -1);
  res.match_right.assign(std::size_t(right_count), -1);

  const int INF = std::numeric_limits<int>::max();
  std::vector<int> dist(std::size_t(L), 0);
  std::vector<int> queue_buf;
  queue_buf.reserve(std::size_t(L));

  auto bfs = [&]() -> bool {
    queue_buf.clear();
    for (int u = 0; u < L; ++u) {
      if (res.match_left[std::size_t(u)] < 0) {
        dist[std::size_t(u)] = 0;
        queue_buf.push_back(u);
      } else {
        dist[std::size_t(u)] = INF;
      }
    }
    bool found = false;
    for (std::size_t h = 0; h < queue_buf.size(); ++h) {
      int u = queue_buf[h];
      left_rows[std::size_t(u)].for_each([&](int v) {
        int w = res.match_right[std::size_t(v)];
        if (w < 0) {
          found = true;
        } else if (dist[std::size_t(w)] == INF) {
          dist[std::size_t(w)] = dist[std::size_t(u)] + 1;
          queue_buf.push_back(w);
        }
      });
    }
    return found;
  };

  std::vector<int> it(std::size_t(L), 0);
  std::function<bool(int)> dfs = [&](int u) -> bool {
    // iterate neighbors starting at cached position
    int found = -1;
    int idx = 0;
    bool ok = false;
    left_rows[std::size_t(u)].for_each([&](int v) {
      if (ok || idx++ < it[std::size_t(u)]) return;
      ++it[std::size_t(u)];
      int w = res.match_right[std::size_t(v)];
      if (w < 0 || (dist[std::size_t(w)] == dist[std::size_t(u)] + 1 && dfs(w))) {
        found = v;
        ok = true;
      }
    });
    if (ok) {
      res.match_left[std::size_t(u)] = found;
      res.match_right[std::size_t(found)] = u;
      return true;
    }
    dist[std::size_t(u)] = INF;
    return false;
  };

  while (bfs()) {
    std::fill(it.begin(), it.end(), 0);
    for (int u = 0; u < L; ++u)
      if (res.match_left[std::size_t(u)] < 0 && dfs(u)) ++res.size;
  }

  // Hall certificate: left vertices reachable by alternating paths from an
  // unmatched left vertex, together with their (fully matched) neighborhood.
  if (res.size < L) {
    Bitset seen_l{std::size_t(L)}, seen_r{std::size_t(right_count)};
    std::vector<int> stack;
    for (int u = 0; u < L; ++u)
      if (res.match_left[std::size_t(u)] < 0) {
        seen_l.set(std::size_t(u));
        stack.push_back(u);
      }
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      left_rows[std::size_t(u)].for_each([&](int v) {
        if (seen_r.test(std::size_t(v))) return;
        seen_r.set(std::size_t(v));
        int w = res.match_right[std::size_t(v)];
        if (w >= 0 && !seen_l.test(std::size_t(w))) {
          seen_l.set(std::size_t(w));
          stack.push_back(w);
        }
      });
    }
    HallCertificate cert;
    cert.set = seen_l.to_vector();
    cert.neighborhood = seen_r.to_vector();
    res.certificate = std::move(cert);
  }
  return res;
}

RFactor find_r_factor(const BipartitePair& p, int r) {
  if (r < 0) throw std::invalid_argument("negative r");
  RFactor f;
  f.left_ids = p.left.to_vector();
  f.right_ids = p.right.to_vector();
  if (f.left_ids.size() != f.right_ids.size()) {
    f.error = "sides differ: " + std::to_string(f.left_ids.size()) + " vs " +
              std::to_string(f.right_ids.size());
    return f;
  }
  int m = int(f.left_ids.size());
  std::vector<int> pos(std::size_t(p.host->n()), -1);
  for (int j = 0; j < m; ++j) pos[std::size_t(f.right_ids[std::size_t(j)])] = j;
  std::vector<Bitset> rows(std::size_t(m), Bitset{std::size_t(m)});
  for (int i = 0; i < m; ++i)
    p.host->row(f.left_ids[std::size_t(i)]).for_each([&](int u) {
      int j = pos[std::size_t(u)];
      if (j >= 0) rows[std::size_t(i)].set(std::size_t(j));
    });

  for (int round = 0; round < r; ++round) {
    MatchingResult mr = max_bipartite_matching(rows, m);
    if (mr.size < m) {
      f.error = "no perfect matching in round " + std::to_string(round + 1);
      f.certificate = std::move(mr.certificate);
      return f;
    }
    for (int i = 0; i < m; ++i) rows[std::size_t(i)].reset(std::size_t(mr.match_left[std::size_t(i)]));
    f.matchings.push_back(std::move(mr.match_left));
    f.rounds_done = round + 1;
  }
  f.complete = true;
  return f;
}

std::vector<Bitset> r_factor_support(const RFactor& f) {
  std::size_t m = f.left_ids.size();
  std::vector<Bitset> rows(m, Bitset(m));
  for (const auto& match : f.matchings)
    for (std::size_t i = 0; i < m; ++i) rows[i].set(std::size_t(match[i]));
  return rows;
}

}  // namespace treespan
