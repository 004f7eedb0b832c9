#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "episcan/detail/pair_max.hpp"
#include "episcan/error.hpp"
#include "episcan/kernel.hpp"
#include "episcan/time_series.hpp"

namespace episcan {

struct ScanParams {
  double gamma = 0.2;
  Sided sided = Sided::two;

  void validate() const {
    if (!(gamma >= 0.0 && gamma < 0.5)) {
      throw domain_error("gamma must lie in [0, 0.5), got " + std::to_string(gamma));
    }
  }
};

// Outcome of a scan. The estimated changed segment is {k_star + 1, ..., m_star}
// in 1-based observation indices.
struct ScanResult {
  double raw_stat = 0.0;
  double normalized_stat = 0.0;  // filled in by normalize()
  std::size_t k_star = 0;
  std::size_t m_star = 0;
  double gamma = 0.0;
  Sided sided = Sided::two;
  std::vector<double> prefix;  // U_0 .. U_n

  std::size_t n() const noexcept { return prefix.empty() ? 0 : prefix.size() - 1; }
  // rho_gamma((m_star - k_star) / n)
  double weight() const;
};

inline const char* to_string(Sided s) noexcept { return s == Sided::one ? "one" : "two"; }

inline Sided sided_from_string(const std::string& s) {
  if (s == "one") return Sided::one;
  if (s == "two") return Sided::two;
  throw std::invalid_argument("sided must be 'one' or 'two', got '" + s + "'");
}

// [t (1 - t)]^gamma for t in (0, 1).
inline double rho_gamma(double t, double gamma) {
  if (!(t > 0.0 && t < 1.0)) {
    throw domain_error("rho_gamma: t must lie in (0, 1), got " + std::to_string(t));
  }
  return std::pow(t * (1.0 - t), gamma);
}

inline double ScanResult::weight() const {
  return rho_gamma(static_cast<double>(m_star - k_star) / static_cast<double>(n()), gamma);
}

// rho_gamma(d / n) for every lag d in [1, n - 1]; entry 0 is set to 1.
inline std::vector<double> lag_weights(std::size_t n, double gamma) {
  std::vector<double> rho(n, 1.0);
  for (std::size_t d = 1; d < n; ++d) {
    rho[d] = rho_gamma(static_cast<double>(d) / static_cast<double>(n), gamma);
  }
  return rho;
}

// U_k = sum_{i<=k} sum_{j>k} h(X_i, X_j), k = 0..n, with U_0 = U_n = 0.
//
// Built from the kernel row sums through U_{k+1} - U_k = sum_{j != k+1}
// h(X_{k+1}, X_j), which holds for antisymmetric h. Cost is O(n) for the CUSUM
// kernel, O(n log n) for Wilcoxon and O(n^2) kernel evaluations otherwise.
inline std::vector<double> prefix_from_row_sums(std::span<const double> rows) {
  const std::size_t n = rows.size();
  std::vector<double> u(n + 1, 0.0);
  for (std::size_t k = 0; k + 1 < n; ++k) u[k + 1] = u[k] + rows[k];
  u[n] = 0.0;
  return u;
}

inline std::vector<double> prefix_double_sums(std::span<const double> x, const Kernel& h) {
  detail::require_usable(x);
  return prefix_from_row_sums(kernel_row_sums(x, h));
}

inline std::vector<double> prefix_double_sums(const TimeSeries& s, const Kernel& h) {
  return prefix_double_sums(s.view(), h);
}

// Maximises |U_m - U_k| / rho_gamma((m - k)/n) (or the signed version) over
// 0 <= k < m <= n excluding (0, n), for a prefix sequence already computed.
// `search` must have been built with lag_weights(n, params.gamma).
inline ScanResult scan_prefix(std::vector<double> prefix, const ScanParams& params,
                              detail::WeightedIncrementMax& search) {
  const PairMax best = search(prefix, params.sided);
  ScanResult r;
  r.raw_stat = best.value;
  r.k_star = best.k;
  r.m_star = best.m;
  r.gamma = params.gamma;
  r.sided = params.sided;
  r.prefix = std::move(prefix);
  return r;
}

inline ScanResult scan_prefix(std::vector<double> prefix, const ScanParams& params) {
  params.validate();
  if (prefix.size() < 3) throw data_error("scan needs at least 2 observations");
  detail::WeightedIncrementMax search(lag_weights(prefix.size() - 1, params.gamma));
  return scan_prefix(std::move(prefix), params, search);
}

// T_n(gamma, h) together with its maximising segment.
inline ScanResult scan(std::span<const double> x, const Kernel& h, const ScanParams& params) {
  params.validate();
  return scan_prefix(prefix_double_sums(x, h), params);
}

inline ScanResult scan(const TimeSeries& s, const Kernel& h, const ScanParams& params) {
  return scan(s.view(), h, params);
}

// n^{-3/2} raw / sigma, where sigma is a standard deviation (not a variance).
inline double normalized_stat(double raw_stat, std::size_t n, double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw degenerate_variance("cannot normalize by sigma = " + std::to_string(sigma));
  }
  return raw_stat / (std::pow(static_cast<double>(n), 1.5) * sigma);
}

inline double normalized_stat(const ScanResult& r, std::size_t n, double sigma) {
  return normalized_stat(r.raw_stat, n, sigma);
}

// Stores the normalized statistic in `r` and returns it.
inline double normalize(ScanResult& r, double sigma) {
  r.normalized_stat = normalized_stat(r.raw_stat, r.n(), sigma);
  return r.normalized_stat;
}

}  // namespace episcan
