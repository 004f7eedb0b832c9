#pragma once

#include <algorithm>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace episcan {

// Which specialised algorithm may replace the generic O(n^2) double loop.
enum class KernelFastpath { cusum, wilcoxon, generic };

// An antisymmetric kernel h(x, y) = -h(y, x) on the real line.
//
// Kernels are immutable value types; copies share nothing mutable and may be
// used concurrently. NaN arguments propagate (the built-in kernels do not
// branch on them); ingestion rejects NaN before a kernel ever sees it.
class Kernel {
 public:
  using Function = std::function<double(double, double)>;

  Kernel(Function f, KernelFastpath fastpath, std::string name)
      : f_(std::move(f)), fastpath_(fastpath), name_(std::move(name)) {}

  double operator()(double x, double y) const { return f_(x, y); }
  KernelFastpath fastpath() const noexcept { return fastpath_; }
  const std::string& name() const noexcept { return name_; }

 private:
  Function f_;
  KernelFastpath fastpath_;
  std::string name_;
};

inline double cusum_eval(double x, double y) noexcept { return x - y; }

inline double wilcoxon_eval(double x, double y) noexcept {
  return static_cast<double>(x < y) - static_cast<double>(y < x);
}

// h_C(x, y) = x - y.
inline Kernel cusum_kernel() {
  return Kernel(&cusum_eval, KernelFastpath::cusum, "cusum");
}

// h_W(x, y) = 1{x < y} - 1{y < x}; ties give exactly 0.
inline Kernel wilcoxon_kernel() {
  return Kernel(&wilcoxon_eval, KernelFastpath::wilcoxon, "wilcoxon");
}

// f(x, y) - f(y, x) for an arbitrary bivariate f.
inline Kernel antisymmetrize(std::function<double(double, double)> f,
                             std::string name = "antisymmetrized") {
  return Kernel(
      [f = std::move(f)](double x, double y) { return f(x, y) - f(y, x); },
      KernelFastpath::generic, std::move(name));
}

// psi(x) - psi(y): the CUSUM kernel applied to transformed data.
inline Kernel transformed_cusum(std::function<double(double)> psi,
                                std::string name = "transformed_cusum") {
  return Kernel(
      [psi = std::move(psi)](double x, double y) { return psi(x) - psi(y); },
      KernelFastpath::generic, std::move(name));
}

// Parses the CLI selector strings `cusum` and `wilcoxon`.
inline Kernel kernel_from_name(const std::string& name) {
  if (name == "cusum") return cusum_kernel();
  if (name == "wilcoxon") return wilcoxon_kernel();
  throw std::invalid_argument("unknown kernel '" + name +
                              "' (expected cusum or wilcoxon)");
}

// r_i = sum_{j=1}^n h(X_i, X_j) for every i.
//
// These row sums drive both the prefix double sums (U_k = sum_{i<=k} r_i) and
// the Hoeffding projection estimate (h1_hat(X_i) = r_i / n).
inline std::vector<double> kernel_row_sums(std::span<const double> x,
                                           const Kernel& h) {
  const std::size_t n = x.size();
  std::vector<double> rows(n, 0.0);
  switch (h.fastpath()) {
    case KernelFastpath::cusum: {
      double total = 0.0;
      for (double v : x) total += v;
      const double dn = static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) rows[i] = dn * x[i] - total;
      break;
    }
    case KernelFastpath::wilcoxon: {
      // #{j : X_j > X_i} - #{j : X_j < X_i}, exact in integers.
      std::vector<double> sorted(x.begin(), x.end());
      std::sort(sorted.begin(), sorted.end());
      for (std::size_t i = 0; i < n; ++i) {
        const auto lo = std::lower_bound(sorted.begin(), sorted.end(), x[i]);
        const auto hi = std::upper_bound(lo, sorted.end(), x[i]);
        const auto less = static_cast<long long>(lo - sorted.begin());
        const auto greater = static_cast<long long>(sorted.end() - hi);
        rows[i] = static_cast<double>(greater - less);
      }
      break;
    }
    case KernelFastpath::generic: {
      // Antisymmetry: h(X_j, X_i) = -h(X_i, X_j), so each pair is evaluated once.
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
          const double v = h(x[i], x[j]);
          rows[i] += v;
          rows[j] -= v;
        }
      }
      break;
    }
  }
  return rows;
}

// The O(n^2) path regardless of fastpath tag; used to cross-check fastpaths.
inline std::vector<double> kernel_row_sums_generic(std::span<const double> x,
                                                   const Kernel& h) {
  const std::size_t n = x.size();
  std::vector<double> rows(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = h(x[i], x[j]);
      rows[i] += v;
      rows[j] -= v;
    }
  }
  return rows;
}

}  // namespace episcan
