#pragma once

#include <bit>
#include <cassert>
#include <cstdint>
#include <vector>

namespace treespan {

// Fixed-universe bitset over 64-bit words. Vertex sets and adjacency rows are
// all instances of this; every hot loop in the engine is popcount over words.
class Bitset {
 public:
  Bitset() = default;
  explicit Bitset(std::size_t n) : n_(n), w_((n + 63) / 64, 0) {}

  std::size_t universe() const { return n_; }
  std::size_t words() const { return w_.size(); }
  const std::uint64_t* data() const { return w_.data(); }

  void set(std::size_t i) {
    assert(i < n_);
    w_[i >> 6] |= std::uint64_t(1) << (i & 63);
  }
  void reset(std::size_t i) {
    assert(i < n_);
    w_[i >> 6] &= ~(std::uint64_t(1) << (i & 63));
  }
  bool test(std::size_t i) const {
    assert(i < n_);
    return (w_[i >> 6] >> (i & 63)) & 1;
  }
  void clear() { std::fill(w_.begin(), w_.end(), 0); }

  std::size_t count() const {
    std::size_t c = 0;
    for (auto w : w_) c += std::size_t(std::popcount(w));
    return c;
  }
  bool any() const {
    for (auto w : w_)
      if (w) return true;
    return false;
  }
  bool none() const { return !any(); }

  Bitset& operator&=(const Bitset& o) {
    assert(n_ == o.n_);
    for (std::size_t i = 0; i < w_.size(); ++i) w_[i] &= o.w_[i];
    return *this;
  }
  Bitset& operator|=(const Bitset& o) {
    assert(n_ == o.n_);
    for (std::size_t i = 0; i < w_.size(); ++i) w_[i] |= o.w_[i];
    return *this;
  }
  // set difference
  Bitset& operator-=(const Bitset& o) {
    assert(n_ == o.n_);
    for (std::size_t i = 0; i < w_.size(); ++i) w_[i] &= ~o.w_[i];
    return *this;
  }
  friend Bitset operator&(Bitset a, const Bitset& b) { return a &= b; }
  friend Bitset operator|(Bitset a, const Bitset& b) { return a |= b; }
  friend Bitset operator-(Bitset a, const Bitset& b) { return a -= b; }

  Bitset complement() const {
    Bitset r(*this);
    for (auto& w : r.w_) w = ~w;
    r.trim();
    return r;
  }

  bool operator==(const Bitset& o) const { return n_ == o.n_ && w_ == o.w_; }

  // |this & o| without materializing the intersection.
  std::size_t count_and(const Bitset& o) const {
    assert(n_ == o.n_);
    std::size_t c = 0;
    for (std::size_t i = 0; i < w_.size(); ++i)
      c += std::size_t(std::popcount(w_[i] & o.w_[i]));
    return c;
  }
  bool intersects(const Bitset& o) const {
    assert(n_ == o.n_);
    for (std::size_t i = 0; i < w_.size(); ++i)
      if (w_[i] & o.w_[i]) return true;
    return false;
  }
  bool is_subset_of(const Bitset& o) const {
    assert(n_ == o.n_);
    for (std::size_t i = 0; i < w_.size(); ++i)
      if (w_[i] & ~o.w_[i]) return false;
    return true;
  }

  int first_set() const {
    for (std::size_t i = 0; i < w_.size(); ++i)
      if (w_[i]) return int(i * 64 + std::size_t(std::countr_zero(w_[i])));
    return -1;
  }

  // k-th set bit, k zero-based; -1 if fewer than k+1 bits set.
  int nth_set(std::size_t k) const {
    for (std::size_t i = 0; i < w_.size(); ++i) {
      auto c = std::size_t(std::popcount(w_[i]));
      if (k < c) {
        std::uint64_t w = w_[i];
        for (; k > 0; --k) w &= w - 1;
        return int(i * 64 + std::size_t(std::countr_zero(w)));
      }
      k -= c;
    }
    return -1;
  }

  template <typename F>
  void for_each(F&& f) const {
    for (std::size_t i = 0; i < w_.size(); ++i) {
      std::uint64_t w = w_[i];
      while (w) {
        f(int(i * 64 + std::size_t(std::countr_zero(w))));
        w &= w - 1;
      }
    }
  }

  std::vector<int> to_vector() const {
    std::vector<int> v;
    v.reserve(count());
    for_each([&](int i) { v.push_back(i); });
    return v;
  }

  static Bitset from(std::size_t n, const std::vector<int>& ids) {
    Bitset b(n);
    for (int i : ids) b.set(std::size_t(i));
    return b;
  }

 private:
  void trim() {
    if (n_ % 64) w_.back() &= (std::uint64_t(1) << (n_ % 64)) - 1;
  }
  std::size_t n_ = 0;
  std::vector<std::uint64_t> w_;
};

}  // namespace treespan
