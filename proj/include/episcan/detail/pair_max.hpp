#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <utility>
#include <vector>

namespace episcan {

enum class Sided { one, two };

// Maximiser of f(k, m) over 0 <= k < m <= n, (k, m) != (0, n).
struct PairMax {
  double value = -std::numeric_limits<double>::infinity();
  std::size_t k = 0;
  std::size_t m = 0;
};

namespace detail {

// Value of a single pair. Every code path computes pair values through this
// function so that brute force and pruned search agree bit for bit.
inline double pair_value(double pk, double pm, double rho, Sided sided) noexcept {
  const double diff = pm - pk;
  return (sided == Sided::two ? std::abs(diff) : diff) / rho;
}

// Larger value wins; equal values go to the lexicographically smallest (k, m).
inline void offer(PairMax& best, double v, std::size_t k, std::size_t m) noexcept {
  if (v > best.value ||
      (v == best.value && (k < best.k || (k == best.k && m < best.m)))) {
    best.value = v;
    best.k = k;
    best.m = m;
  }
}

// Reference O(n^2) maximiser of |P_m - P_k| / rho[m - k] (two-sided) or
// (P_m - P_k) / rho[m - k] (one-sided).
inline PairMax pair_max_brute(std::span<const double> prefix,
                              std::span<const double> rho_by_lag, Sided sided) {
  const std::size_t n = prefix.size() - 1;
  PairMax best;
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t m = k + 1; m <= n; ++m) {
      if (m - k == n) continue;
      offer(best, pair_value(prefix[k], prefix[m], rho_by_lag[m - k], sided), k, m);
    }
  }
  return best;
}

// Range min/max over a fixed array in O(1) per query after O(n log n) setup.
class SparseMinMax {
 public:
  SparseMinMax() = default;
  explicit SparseMinMax(std::span<const double> a) {
    const std::size_t n = a.size();
    levels_ = 1;
    while ((std::size_t{1} << levels_) <= n) ++levels_;
    mn_.assign(levels_ * n, 0.0);
    mx_.assign(levels_ * n, 0.0);
    n_ = n;
    std::copy(a.begin(), a.end(), mn_.begin());
    std::copy(a.begin(), a.end(), mx_.begin());
    for (std::size_t j = 1; j < levels_; ++j) {
      const std::size_t half = std::size_t{1} << (j - 1);
      for (std::size_t i = 0; i + (std::size_t{1} << j) <= n; ++i) {
        mn_[j * n + i] = std::min(mn_[(j - 1) * n + i], mn_[(j - 1) * n + i + half]);
        mx_[j * n + i] = std::max(mx_[(j - 1) * n + i], mx_[(j - 1) * n + i + half]);
      }
    }
  }

  // Inclusive range [lo, hi].
  std::pair<double, double> minmax(std::size_t lo, std::size_t hi) const noexcept {
    assert(lo <= hi && hi < n_);
    const std::size_t len = hi - lo + 1;
    std::size_t j = 0;
    while ((std::size_t{2} << j) <= len) ++j;
    const std::size_t r = hi + 1 - (std::size_t{1} << j);
    return {std::min(mn_[j * n_ + lo], mn_[j * n_ + r]),
            std::max(mx_[j * n_ + lo], mx_[j * n_ + r])};
  }

 private:
  std::size_t n_ = 0;
  std::size_t levels_ = 0;
  std::vector<double> mn_, mx_;
};

// Exact branch-and-bound maximiser of the weighted increments of a path.
//
// The index set {0..n} is covered by a complete binary tree of blocks, each
// holding the min and max of the path over its range. A pair of blocks (A, B)
// with A left of (or equal to) B bounds every pair k in A, m in B by
// (max_B P - min_A P) / min rho over the admissible lags. Block pairs are
// explored best-bound-first and discarded only when the bound is strictly
// below the incumbent, so the result (value and tie-broken argmax) is the
// same as pair_max_brute's.
//
// The object caches the lag weights and the tree storage; reuse one instance
// per thread for many paths of the same length.
class WeightedIncrementMax {
 public:
  static constexpr std::size_t kLeaf = 16;

  // rho_by_lag[d] is the weight of lag d = m - k for d in [1, n - 1]; entry 0
  // is ignored. All weights must be positive.
  explicit WeightedIncrementMax(std::vector<double> rho_by_lag)
      : rho_(std::move(rho_by_lag)) {
    n_ = rho_.size();  // path has n + 1 points when rho has n entries
    rho_range_ = SparseMinMax(rho_);
    nleaves_ = (n_ + 1 + kLeaf - 1) / kLeaf;
    width_ = 1;
    while (width_ < nleaves_) width_ <<= 1;
    nodes_.resize(2 * width_);
  }

  std::size_t path_length() const noexcept { return n_ + 1; }
  std::span<const double> weights() const noexcept { return rho_; }

  PairMax operator()(std::span<const double> prefix, Sided sided) {
    assert(prefix.size() == n_ + 1);
    PairMax best;
    if (n_ < 2) return best;  // n = 1 admits only the excluded pair (0, 1)
    build(prefix);
    stack_.clear();
    push_if_alive(1, 1, sided, best);
    while (!stack_.empty()) {
      const Task t = stack_.back();
      stack_.pop_back();
      if (t.bound < best.value) continue;
      const Node& a = nodes_[t.a];
      const Node& b = nodes_[t.b];
      if (t.a >= width_) {
        // Leaf blocks: evaluate every admissible pair.
        for (std::size_t k = a.first; k <= a.last; ++k) {
          const std::size_t m0 = std::max(k + 1, b.first);
          for (std::size_t m = m0; m <= b.last; ++m) {
            const std::size_t d = m - k;
            if (d >= n_) continue;
            offer(best, pair_value(prefix[k], prefix[m], rho_[d], sided), k, m);
          }
        }
        continue;
      }
      const std::size_t al = 2 * t.a, ar = 2 * t.a + 1;
      const std::size_t bl = 2 * t.b, br = 2 * t.b + 1;
      const std::size_t before = stack_.size();
      if (t.a == t.b) {
        push_if_alive(al, al, sided, best);
        push_if_alive(al, ar, sided, best);
        push_if_alive(ar, ar, sided, best);
      } else {
        push_if_alive(al, bl, sided, best);
        push_if_alive(al, br, sided, best);
        push_if_alive(ar, bl, sided, best);
        push_if_alive(ar, br, sided, best);
      }
      // Highest bound on top of the stack.
      std::sort(stack_.begin() + static_cast<std::ptrdiff_t>(before), stack_.end(),
                [](const Task& x, const Task& y) { return x.bound < y.bound; });
    }
    return best;
  }

 private:
  struct Node {
    std::size_t first = 1;
    std::size_t last = 0;  // first > last marks an empty block
    double lo = 0.0;
    double hi = 0.0;
    bool empty() const noexcept { return first > last; }
  };
  struct Task {
    std::size_t a, b;
    double bound;
  };

  void build(std::span<const double> prefix) {
    for (std::size_t j = 0; j < width_; ++j) {
      Node& leaf = nodes_[width_ + j];
      leaf = Node{};
      const std::size_t first = j * kLeaf;
      if (first > n_) continue;
      leaf.first = first;
      leaf.last = std::min(first + kLeaf - 1, n_);
      leaf.lo = leaf.hi = prefix[first];
      for (std::size_t i = first + 1; i <= leaf.last; ++i) {
        leaf.lo = std::min(leaf.lo, prefix[i]);
        leaf.hi = std::max(leaf.hi, prefix[i]);
      }
    }
    for (std::size_t i = width_ - 1; i >= 1; --i) {
      const Node& l = nodes_[2 * i];
      const Node& r = nodes_[2 * i + 1];
      Node& p = nodes_[i];
      if (l.empty()) {
        p = Node{};
      } else if (r.empty()) {
        p = l;
      } else {
        p.first = l.first;
        p.last = r.last;
        p.lo = std::min(l.lo, r.lo);
        p.hi = std::max(l.hi, r.hi);
      }
    }
  }

  void push_if_alive(std::size_t ia, std::size_t ib, Sided sided,
                     const PairMax& best) {
    const Node& a = nodes_[ia];
    const Node& b = nodes_[ib];
    if (a.empty() || b.empty()) return;
    std::size_t dlo, dhi;
    double diff;
    if (ia == ib) {
      if (a.last == a.first) return;
      dlo = 1;
      dhi = std::min(a.last - a.first, n_ - 1);
      diff = a.hi - a.lo;
    } else {
      dlo = b.first - a.last;
      dhi = std::min(b.last - a.first, n_ - 1);
      if (dlo > dhi) return;
      diff = b.hi - a.lo;
      if (sided == Sided::two) diff = std::max(diff, a.hi - b.lo);
    }
    const auto [rmin, rmax] = rho_range_.minmax(dlo, dhi);
    const double bound = diff >= 0.0 ? diff / rmin : diff / rmax;
    if (bound < best.value) return;
    stack_.push_back(Task{ia, ib, bound});
  }

  std::vector<double> rho_;
  SparseMinMax rho_range_;
  std::size_t n_ = 0;
  std::size_t nleaves_ = 0;
  std::size_t width_ = 1;
  std::vector<Node> nodes_;
  std::vector<Task> stack_;
};

}  // namespace detail
}  // namespace episcan
