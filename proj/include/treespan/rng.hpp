#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace treespan {

// Deterministic RNG. All distributions are hand-rolled on top of mt19937_64 so
// that runs are bit-reproducible across standard libraries (the std::*_distribution
// algorithms are implementation-defined). Substreams are derived from the base
// seed and a label, never from live engine state, so the stream tree is stable
// no matter how many draws intervene.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), eng_(splitmix(seed)) {}

  std::uint64_t seed() const { return seed_; }

  Rng substream(std::string_view label, std::uint64_t index = 0) const {
    std::uint64_t h = fnv1a(label);
    std::uint64_t s = seed_;
    s = splitmix(s ^ h);
    s = splitmix(s ^ index);
    return Rng(s);
  }

  std::uint64_t next_u64() { return eng_(); }

  // uniform in [0, n), n > 0; rejection sampling for exactness
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) return 0;
    std::uint64_t lim = ~std::uint64_t(0) - (~std::uint64_t(0) % n);
    std::uint64_t x;
    do {
      x = eng_();
    } while (x >= lim);
    return x % n;
  }

  int uniform_int(int lo, int hi) {  // inclusive range
    return lo + int(below(std::uint64_t(hi - lo + 1)));
  }

  double unit() {  // [0,1) with 53 bits
    return double(eng_() >> 11) * 0x1.0p-53;
  }

  bool coin() { return eng_() & 1; }
  bool bernoulli(double p) { return unit() < p; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = std::size_t(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // k distinct values from [0, n), in random order
  std::vector<int> sample(int n, int k) {
    std::vector<int> ids(std::size_t(n), 0);
    for (int i = 0; i < n; ++i) ids[std::size_t(i)] = i;
    for (int i = 0; i < k; ++i) {
      int j = i + int(below(std::uint64_t(n - i)));
      std::swap(ids[std::size_t(i)], ids[std::size_t(j)]);
    }
    ids.resize(std::size_t(k));
    return ids;
  }

  template <typename T>
  const T& pick(const std::vector<T>& v) {
    return v[std::size_t(below(v.size()))];
  }

  static std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  static std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
      h ^= std::uint64_t(static_cast<unsigned char>(c));
      h *= 0x100000001b3ULL;
    }
    return h;
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 eng_;
};

}  // namespace treespan
