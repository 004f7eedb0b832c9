#pragma once

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <mutex>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "episcan/error.hpp"
#include "episcan/kernel.hpp"
#include "episcan/time_series.hpp"

namespace episcan {

enum class VarianceMethodKind { known, iid, lrv_fixed, lrv_adaptive_median };
enum class LagKernel { quadratic_spectral, bartlett };

inline constexpr double kDegenerateVariance = 1e-12;

struct VarianceEstimate {
  double value = 0.0;
  VarianceMethodKind method = VarianceMethodKind::iid;
  double bandwidth = 0.0;  // 0 when not applicable
  std::optional<LagKernel> lag_kernel;
  bool degenerate = false;  // value below kDegenerateVariance
  bool floored = false;     // a lag-window sum was raised to its floor

  double sigma() const { return std::sqrt(value); }
};

inline const char* to_string(VarianceMethodKind m) noexcept {
  switch (m) {
    case VarianceMethodKind::known: return "known";
    case VarianceMethodKind::iid: return "iid";
    case VarianceMethodKind::lrv_fixed: return "lrv_fixed";
    case VarianceMethodKind::lrv_adaptive_median: return "lrv_adaptive_median";
  }
  return "?";
}

inline const char* to_string(LagKernel k) noexcept {
  return k == LagKernel::bartlett ? "bartlett" : "quadratic_spectral";
}

inline LagKernel lag_kernel_from_string(const std::string& s) {
  if (s == "qs" || s == "quadratic_spectral") return LagKernel::quadratic_spectral;
  if (s == "bartlett") return LagKernel::bartlett;
  throw std::invalid_argument("lag kernel must be 'qs' or 'bartlett', got '" + s + "'");
}

// Lag windows K with K(0) = 1.
inline double quadratic_spectral(double x) noexcept {
  if (x == 0.0) return 1.0;
  const double z = 6.0 * std::numbers::pi * x / 5.0;
  return 25.0 / (12.0 * std::numbers::pi * std::numbers::pi * x * x) *
         (std::sin(z) / z - std::cos(z));
}

inline double bartlett(double x) noexcept { return std::max(0.0, 1.0 - std::abs(x)); }

inline double lag_window(LagKernel k, double x) noexcept {
  return k == LagKernel::bartlett ? bartlett(x) : quadratic_spectral(x);
}

// h1_hat(X_i) = n^{-1} sum_{j=1}^n h(X_i, X_j).
inline std::vector<double> h1_hat(std::span<const double> x, const Kernel& h) {
  detail::require_usable(x);
  std::vector<double> v = kernel_row_sums(x, h);
  const double dn = static_cast<double>(x.size());
  for (double& e : v) e /= dn;
  return v;
}

inline std::vector<double> h1_hat(const TimeSeries& s, const Kernel& h) {
  return h1_hat(s.view(), h);
}

// rho_hat(k) = n^{-1} sum_{i=1}^{n-k} h1(X_i) h1(X_{i+k}); the divisor is n.
inline double autocov_hat(std::span<const double> h1, std::size_t k) {
  const std::size_t n = h1.size();
  if (k >= n) {
    throw domain_error("autocov_hat: lag " + std::to_string(k) +
                       " must be below n = " + std::to_string(n));
  }
  double s = 0.0;
  for (std::size_t i = 0; i + k < n; ++i) s += h1[i] * h1[i + k];
  return s / static_cast<double>(n);
}

namespace detail {

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

// n * rho_hat(k) for k = 0..n-1 via a zero-padded real FFT.
inline std::vector<double> autocov_sums_fft(std::span<const double> h1) {
  const std::size_t n = h1.size();
  std::size_t len = 1;
  while (len < 2 * n) len <<= 1;
  const std::size_t nc = len / 2 + 1;
  double* in = fftw_alloc_real(len);
  fftw_complex* freq = fftw_alloc_complex(nc);
  fftw_plan fwd, bwd;
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fwd = fftw_plan_dft_r2c_1d(static_cast<int>(len), in, freq, FFTW_ESTIMATE);
    bwd = fftw_plan_dft_c2r_1d(static_cast<int>(len), freq, in, FFTW_ESTIMATE);
  }
  std::fill(in, in + len, 0.0);
  std::copy(h1.begin(), h1.end(), in);
  fftw_execute(fwd);
  for (std::size_t i = 0; i < nc; ++i) {
    const double re = freq[i][0], im = freq[i][1];
    freq[i][0] = re * re + im * im;
    freq[i][1] = 0.0;
  }
  fftw_execute(bwd);
  std::vector<double> out(in, in + n);
  for (double& e : out) e /= static_cast<double>(len);
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fftw_destroy_plan(fwd);
    fftw_destroy_plan(bwd);
  }
  fftw_free(in);
  fftw_free(freq);
  return out;
}

// Below this length the direct O(n * lags) sum is used.
inline constexpr std::size_t kFftThreshold = 4096;

struct LagWindowSum {
  double value;
  double iid;  // rho_hat(0)
  bool floored;
};

// rho_hat(0) + 2 sum_{k=1}^{n-1} K(k / b) rho_hat(k), floored at 1e-3 rho_hat(0).
inline LagWindowSum lag_window_sum(std::span<const double> h1, LagKernel lag,
                                   double bandwidth) {
  const std::size_t n = h1.size();
  const double dn = static_cast<double>(n);
  // Bartlett has compact support: K(k / b) = 0 for k >= b.
  std::size_t kmax = n - 1;
  if (lag == LagKernel::bartlett) {
    const double cap = std::ceil(bandwidth);
    if (cap < static_cast<double>(kmax)) kmax = static_cast<std::size_t>(cap);
  }
  double iid = 0.0;
  double tail = 0.0;
  if (n > kFftThreshold && kmax > 64) {
    const std::vector<double> sums = autocov_sums_fft(h1);
    iid = sums[0] / dn;
    for (std::size_t k = 1; k <= kmax; ++k) {
      tail += lag_window(lag, static_cast<double>(k) / bandwidth) * (sums[k] / dn);
    }
  } else {
    iid = autocov_hat(h1, 0);
    for (std::size_t k = 1; k <= kmax; ++k) {
      const double w = lag_window(lag, static_cast<double>(k) / bandwidth);
      if (w == 0.0) continue;
      tail += w * autocov_hat(h1, k);
    }
  }
  double value = iid + 2.0 * tail;
  const double floor = 1e-3 * iid;
  bool floored = false;
  if (value < floor) {
    value = floor;
    floored = true;
  }
  return {value, iid, floored};
}

}  // namespace detail

// sigma_hat^2_{n,h} = n^{-1} sum_i h1_hat(X_i)^2. Never throws on degeneracy;
// the estimate carries the `degenerate` flag instead.
inline VarianceEstimate sigma_iid(std::span<const double> x, const Kernel& h) {
  const std::vector<double> h1 = h1_hat(x, h);
  VarianceEstimate e;
  e.value = autocov_hat(h1, 0);
  e.method = VarianceMethodKind::iid;
  e.degenerate = !(e.value >= kDegenerateVariance);
  return e;
}

inline VarianceEstimate sigma_iid(const TimeSeries& s, const Kernel& h) {
  return sigma_iid(s.view(), h);
}

// Lag-window long-run variance from precomputed h1_hat values.
inline VarianceEstimate lrv_from_h1(std::span<const double> h1, LagKernel lag,
                                    double bandwidth) {
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) {
    throw domain_error("bandwidth must be positive, got " + std::to_string(bandwidth));
  }
  if (h1.empty()) throw data_error("empty h1 sequence");
  const auto s = detail::lag_window_sum(h1, lag, bandwidth);
  VarianceEstimate e;
  e.value = s.value;
  e.method = VarianceMethodKind::lrv_fixed;
  e.bandwidth = bandwidth;
  e.lag_kernel = lag;
  e.floored = s.floored;
  if (!(e.value >= kDegenerateVariance)) {
    throw degenerate_variance("long-run variance estimate " + std::to_string(e.value) +
                              " is degenerate");
  }
  return e;
}

inline VarianceEstimate lrv_fixed(std::span<const double> x, const Kernel& h,
                                  LagKernel lag, double bandwidth) {
  return lrv_from_h1(h1_hat(x, h), lag, bandwidth);
}

inline VarianceEstimate lrv_fixed(const TimeSeries& s, const Kernel& h, LagKernel lag,
                                  double bandwidth) {
  return lrv_fixed(s.view(), h, lag, bandwidth);
}

// First-order autoregressive plug-in bandwidth (Andrews-type rule) for a
// block of h1 values of length m.
inline double ar1_plugin_bandwidth(std::span<const double> h1, LagKernel lag) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < h1.size(); ++i) {
    den += h1[i] * h1[i];
    if (i + 1 < h1.size()) num += h1[i] * h1[i + 1];
  }
  if (!(den > 0.0)) return 0.0;
  const double r = std::clamp(num / den, -0.97, 0.97);
  const double m = static_cast<double>(h1.size());
  if (lag == LagKernel::bartlett) {
    const double a1 = 4.0 * r * r / ((1.0 - r) * (1.0 - r) * (1.0 + r) * (1.0 + r));
    return 1.1447 * std::cbrt(a1 * m);
  }
  const double a2 = 4.0 * r * r / std::pow(1.0 - r, 4);
  return 1.3221 * std::pow(a2 * m, 0.2);
}

// Splits the series into `blocks` contiguous equal parts (dropping the
// trailing remainder), estimates the long-run variance of each part with a
// plug-in bandwidth and returns the median. A changed segment contaminates at
// most two parts through its two endpoints.
inline VarianceEstimate lrv_adaptive_median(std::span<const double> x, const Kernel& h,
                                            std::size_t blocks = 5,
                                            LagKernel lag = LagKernel::quadratic_spectral) {
  if (blocks == 0) throw domain_error("blocks must be positive");
  if (x.size() < 10 * blocks) {
    throw data_error("adaptive variance with " + std::to_string(blocks) +
                     " blocks needs n >= " + std::to_string(10 * blocks) + ", got " +
                     std::to_string(x.size()));
  }
  detail::require_usable(x);
  const std::size_t len = x.size() / blocks;
  struct Block {
    double value;
    double bandwidth;
    bool floored;
  };
  std::vector<Block> est;
  est.reserve(blocks);
  for (std::size_t b = 0; b < blocks; ++b) {
    const std::vector<double> h1 = h1_hat(x.subspan(b * len, len), h);
    const double bw = ar1_plugin_bandwidth(h1, lag);
    if (bw > 1e-8) {
      const auto s = detail::lag_window_sum(h1, lag, bw);
      est.push_back({s.value, bw, s.floored});
    } else {
      est.push_back({autocov_hat(h1, 0), 0.0, false});
    }
  }
  std::sort(est.begin(), est.end(),
            [](const Block& a, const Block& b) { return a.value < b.value; });
  VarianceEstimate e;
  e.method = VarianceMethodKind::lrv_adaptive_median;
  e.lag_kernel = lag;
  const std::size_t mid = blocks / 2;
  if (blocks % 2 == 1) {
    e.value = est[mid].value;
    e.bandwidth = est[mid].bandwidth;
    e.floored = est[mid].floored;
  } else {
    e.value = 0.5 * (est[mid - 1].value + est[mid].value);
    e.bandwidth = 0.5 * (est[mid - 1].bandwidth + est[mid].bandwidth);
    e.floored = est[mid - 1].floored || est[mid].floored;
  }
  if (!(e.value >= kDegenerateVariance)) {
    throw degenerate_variance("median block variance " + std::to_string(e.value) +
                              " is degenerate");
  }
  return e;
}

inline VarianceEstimate lrv_adaptive_median(const TimeSeries& s, const Kernel& h,
                                            std::size_t blocks = 5,
                                            LagKernel lag = LagKernel::quadratic_spectral) {
  return lrv_adaptive_median(s.view(), h, blocks, lag);
}

// A variance method as selected on the command line or in an experiment file:
// `known:<v>`, `iid`, `lrv[:<bandwidth>]`, `adaptive[:<blocks>]`.
struct VarianceMethod {
  VarianceMethodKind kind = VarianceMethodKind::lrv_fixed;
  double known_value = 1.0;  // a variance, not a standard deviation
  double bandwidth = 4.0;
  std::size_t blocks = 5;
  LagKernel lag_kernel = LagKernel::quadratic_spectral;

  static VarianceMethod parse(const std::string& spec,
                              LagKernel lag = LagKernel::quadratic_spectral) {
    VarianceMethod m;
    m.lag_kernel = lag;
    const auto colon = spec.find(':');
    const std::string head = spec.substr(0, colon);
    const std::string arg = colon == std::string::npos ? "" : spec.substr(colon + 1);
    auto number = [&](const char* what) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(arg, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != arg.size() || arg.empty()) {
        throw std::invalid_argument(std::string("bad ") + what + " in variance '" + spec + "'");
      }
      return v;
    };
    if (head == "known") {
      m.kind = VarianceMethodKind::known;
      m.known_value = number("variance value");
      if (!(m.known_value > 0.0)) throw std::invalid_argument("known variance must be > 0");
    } else if (head == "iid") {
      if (!arg.empty()) throw std::invalid_argument("iid takes no argument");
      m.kind = VarianceMethodKind::iid;
    } else if (head == "lrv") {
      m.kind = VarianceMethodKind::lrv_fixed;
      if (!arg.empty()) m.bandwidth = number("bandwidth");
      if (!(m.bandwidth > 0.0)) throw std::invalid_argument("bandwidth must be > 0");
    } else if (head == "adaptive") {
      m.kind = VarianceMethodKind::lrv_adaptive_median;
      if (!arg.empty()) {
        const double b = number("block count");
        if (b < 1 || b != std::floor(b)) throw std::invalid_argument("blocks must be a positive integer");
        m.blocks = static_cast<std::size_t>(b);
      }
    } else {
      throw std::invalid_argument("unknown variance method '" + spec + "'");
    }
    return m;
  }

  std::string describe() const {
    switch (kind) {
      case VarianceMethodKind::known: return "known:" + std::to_string(known_value);
      case VarianceMethodKind::iid: return "iid";
      case VarianceMethodKind::lrv_fixed: return "lrv:" + std::to_string(bandwidth);
      case VarianceMethodKind::lrv_adaptive_median: return "adaptive:" + std::to_string(blocks);
    }
    return "?";
  }
};

// Dispatches to the estimator named by `m`. The iid estimator reports
// degeneracy through the flag; this function turns it into an exception so
// callers that normalize can rely on a usable value.
inline VarianceEstimate estimate_variance(std::span<const double> x, const Kernel& h,
                                          const VarianceMethod& m) {
  switch (m.kind) {
    case VarianceMethodKind::known: {
      VarianceEstimate e;
      e.value = m.known_value;
      e.method = VarianceMethodKind::known;
      return e;
    }
    case VarianceMethodKind::iid: {
      VarianceEstimate e = sigma_iid(x, h);
      if (e.degenerate) {
        throw degenerate_variance("iid variance estimate " + std::to_string(e.value) +
                                  " is degenerate");
      }
      return e;
    }
    case VarianceMethodKind::lrv_fixed:
      return lrv_fixed(x, h, m.lag_kernel, m.bandwidth);
    case VarianceMethodKind::lrv_adaptive_median:
      return lrv_adaptive_median(x, h, m.blocks, m.lag_kernel);
  }
  throw std::logic_error("unreachable");
}

}  // namespace episcan
