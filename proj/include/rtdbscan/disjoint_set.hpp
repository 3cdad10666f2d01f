#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace rtdbscan {

/// Parent + rank forest over ids [0, n) with linearizable concurrent union/find.
///
/// Each slot packs (rank << 32 | parent) into one 64-bit atomic word. A union
/// installs a root under another root with a single compare-and-swap that only
/// succeeds while the slot still describes a root of the expected rank, and
/// retries otherwise. Path compression is opportunistic: a failed compression
/// CAS is simply dropped. Single-threaded use gives classic union by rank with
/// path halving.
class DisjointSet {
public:
  explicit DisjointSet(std::size_t n) : size_(n), data_(std::make_unique<std::atomic<std::uint64_t>[]>(n)) {
    if (n > std::size_t{std::numeric_limits<std::uint32_t>::max()}) {
      throw std::invalid_argument("DisjointSet supports at most 2^32 - 1 ids");
    }
    for (std::size_t i = 0; i < n; ++i) data_[i].store(i, std::memory_order_relaxed);
  }

  DisjointSet(DisjointSet&&) noexcept = default;
  DisjointSet& operator=(DisjointSet&&) noexcept = default;

  std::size_t size() const { return size_; }

  std::uint32_t find(std::uint32_t id) const {
    check(id);
    while (true) {
      std::uint64_t value = data_[id].load(std::memory_order_acquire);
      const std::uint32_t p = parent_of(value);
      if (p == id) return id;
      const std::uint32_t grand = parent_of(data_[p].load(std::memory_order_acquire));
      if (grand != p) {
        const std::uint64_t halved = (value & kRankMask) | grand;
        data_[id].compare_exchange_weak(value, halved, std::memory_order_acq_rel, std::memory_order_relaxed);
      }
      id = p;
    }
  }

  bool same(std::uint32_t a, std::uint32_t b) const {
    check(a);
    check(b);
    while (true) {
      a = find(a);
      b = find(b);
      if (a == b) return true;
      // a is still a root, so the answer was not invalidated by a concurrent union.
      if (parent_of(data_[a].load(std::memory_order_acquire)) == a) return false;
    }
  }

  /// Merges the sets of `a` and `b`. Returns false when they were already joined.
  bool unite(std::uint32_t a, std::uint32_t b) {
    check(a);
    check(b);
    while (true) {
      a = find(a);
      b = find(b);
      if (a == b) return false;

      std::uint32_t rank_a = rank_of(data_[a].load(std::memory_order_acquire));
      std::uint32_t rank_b = rank_of(data_[b].load(std::memory_order_acquire));
      // Attach the lower-ranked root under the other; equal ranks attach the larger id.
      if (rank_a > rank_b || (rank_a == rank_b && a < b)) {
        std::swap(a, b);
        std::swap(rank_a, rank_b);
      }
      std::uint64_t expected = pack(a, rank_a);
      if (!data_[a].compare_exchange_strong(expected, pack(b, rank_a), std::memory_order_acq_rel,
                                            std::memory_order_relaxed)) {
        continue;
      }
      if (rank_a == rank_b) {
        std::uint64_t old_b = pack(b, rank_b);
        // May fail if b was re-parented or re-ranked meanwhile; ranks are only a balance hint.
        data_[b].compare_exchange_strong(old_b, pack(b, rank_b + 1), std::memory_order_acq_rel,
                                         std::memory_order_relaxed);
      }
      return true;
    }
  }

  std::uint32_t rank(std::uint32_t id) const {
    check(id);
    return rank_of(data_[id].load(std::memory_order_acquire));
  }

  std::uint32_t parent(std::uint32_t id) const {
    check(id);
    return parent_of(data_[id].load(std::memory_order_acquire));
  }

  std::size_t root_count() const {
    std::size_t roots = 0;
    for (std::size_t i = 0; i < size_; ++i) roots += parent_of(data_[i].load(std::memory_order_acquire)) == i;
    return roots;
  }

  /// Root of every id after full compression. Call once no unions are in flight.
  std::vector<std::uint32_t> flatten() const {
    std::vector<std::uint32_t> roots(size_);
    for (std::size_t i = 0; i < size_; ++i) roots[i] = find(static_cast<std::uint32_t>(i));
    return roots;
  }

private:
  static constexpr std::uint64_t kRankMask = 0xFFFFFFFF00000000ULL;

  static std::uint32_t parent_of(std::uint64_t v) { return static_cast<std::uint32_t>(v); }
  static std::uint32_t rank_of(std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); }
  static std::uint64_t pack(std::uint32_t parent, std::uint32_t rank) {
    return (std::uint64_t{rank} << 32) | parent;
  }

  void check(std::uint32_t id) const {
    if (id >= size_) {
      throw std::out_of_range("disjoint set id " + std::to_string(id) + " outside [0, " + std::to_string(size_) + ")");
    }
  }

  std::size_t size_;
  std::unique_ptr<std::atomic<std::uint64_t>[]> data_;
};

}  // namespace rtdbscan
