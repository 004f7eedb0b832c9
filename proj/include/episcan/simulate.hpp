#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "episcan/error.hpp"
#include "episcan/kernel.hpp"
#include "episcan/limitdist.hpp"
#include "episcan/parallel.hpp"
#include "episcan/rng.hpp"
#include "episcan/scan.hpp"
#include "episcan/table_cache.hpp"
#include "episcan/time_series.hpp"
#include "episcan/variance.hpp"

namespace episcan {

enum class Innovation { normal, exponential_centered, t5 };

inline const char* to_string(Innovation d) noexcept {
  switch (d) {
    case Innovation::normal: return "normal";
    case Innovation::exponential_centered: return "exponential";
    case Innovation::t5: return "t5";
  }
  return "?";
}

inline Innovation innovation_from_string(const std::string& s) {
  if (s == "normal") return Innovation::normal;
  if (s == "exponential" || s == "exponential_centered") return Innovation::exponential_centered;
  if (s == "t5") return Innovation::t5;
  throw std::invalid_argument("innovation must be normal, exponential or t5, got '" + s + "'");
}

// Var(eps); every law has mean zero.
inline double innovation_variance(Innovation d) noexcept {
  return d == Innovation::t5 ? 5.0 / 3.0 : 1.0;
}

inline void gen_innovations(Innovation d, Engine& rng, std::span<double> out) {
  switch (d) {
    case Innovation::normal: {
      std::normal_distribution<double> dist(0.0, 1.0);
      for (double& v : out) v = dist(rng);
      break;
    }
    case Innovation::exponential_centered: {
      std::exponential_distribution<double> dist(1.0);
      for (double& v : out) v = dist(rng) - 1.0;
      break;
    }
    case Innovation::t5: {
      std::student_t_distribution<double> dist(5.0);
      for (double& v : out) v = dist(rng);
      break;
    }
  }
}

inline std::vector<double> gen_innovations(Innovation d, std::size_t n, Engine& rng) {
  if (n < 1) throw domain_error("need n >= 1 innovations");
  std::vector<double> v(n);
  gen_innovations(d, rng, v);
  return v;
}

inline constexpr std::size_t kAr1BurnIn = 1000;

// Y_i = a Y_{i-1} + eps_i started at 0, a burn-in of kAr1BurnIn steps
// discarded, output scaled by sqrt((1 - a^2) / Var(eps)) to unit variance.
inline TimeSeries gen_ar1(double a, Innovation d, std::size_t n, Engine& rng) {
  if (!(std::abs(a) < 1.0)) throw domain_error("AR coefficient must satisfy |a| < 1");
  std::vector<double> eps(kAr1BurnIn + n);
  gen_innovations(d, rng, eps);
  const double scale = std::sqrt((1.0 - a * a) / innovation_variance(d));
  std::vector<double> y(n);
  double state = 0.0;
  for (std::size_t i = 0; i < eps.size(); ++i) {
    state = a * state + eps[i];
    if (i >= kAr1BurnIn) y[i - kAr1BurnIn] = state * scale;
  }
  return TimeSeries(std::move(y));
}

// Adds delta to observations k*+1 .. k*+L (1-based).
inline TimeSeries inject_segment(TimeSeries s, std::size_t start, std::size_t len, double delta) {
  if (start + len > s.size()) {
    throw domain_error("segment " + std::to_string(start + 1) + ".." +
                       std::to_string(start + len) + " exceeds series length " +
                       std::to_string(s.size()));
  }
  for (std::size_t i = start; i < start + len; ++i) s.values[i] += delta;
  return s;
}

struct ExperimentSpec {
  std::size_t n = 480;
  double ar_coeff = 0.5;
  Innovation innovation = Innovation::normal;
  std::size_t segment_start = 0;  // k*: the segment is k*+1 .. k*+L
  std::size_t segment_len = 0;    // L = 0 is the null hypothesis
  double delta = 0.58;
  std::vector<double> gammas{0.0, 0.1, 0.2, 0.3, 0.4};
  std::vector<std::string> kernels{"cusum", "wilcoxon"};
  VarianceMethod variance;  // lrv:4 with the quadratic spectral window
  // Variances used by `known`, per kernel. For unit-variance data these are
  // Var(X) = 1 (CUSUM) and Var(1 - 2F(X)) = 1/3 (Wilcoxon).
  std::map<std::string, double> known_variance{{"cusum", 1.0}, {"wilcoxon", 1.0 / 3.0}};
  std::vector<double> alphas{0.01, 0.025, 0.05, 0.1};
  Sided sided = Sided::two;
  std::size_t reps = 3000;
  std::uint64_t seed = 1;
  // Critical values come from the table with this grid, reps and seed.
  std::size_t table_grid = 10000;
  std::size_t table_reps = 30000;
  std::uint64_t table_seed = 1;

  void validate() const {
    if (n < 2) throw domain_error("experiment needs n >= 2");
    if (!(std::abs(ar_coeff) < 1.0)) throw domain_error("AR coefficient must satisfy |a| < 1");
    if (segment_start + segment_len > n) throw domain_error("segment exceeds n");
    if (reps < 1) throw domain_error("reps must be >= 1");
    if (gammas.empty() || kernels.empty() || alphas.empty()) {
      throw domain_error("gammas, kernels and alphas must be non-empty");
    }
    for (double g : gammas) ScanParams{g, sided}.validate();
    for (double a : alphas) {
      if (!(a > 0.0 && a < 1.0)) throw domain_error("alpha must lie in (0, 1)");
    }
    for (const auto& k : kernels) {
      kernel_from_name(k);
      if (variance.kind == VarianceMethodKind::known && !known_variance.count(k)) {
        throw domain_error("no known variance for kernel " + k);
      }
    }
  }

  std::vector<TableKey> table_keys() const {
    std::vector<TableKey> keys;
    for (double g : gammas) keys.push_back({g, sided, table_grid, table_reps, table_seed});
    return keys;
  }
};

struct RejectionEntry {
  std::string kernel;
  double gamma = 0.0;
  double alpha = 0.0;
  double critical = 0.0;
  std::size_t rejections = 0;
  double rejection = 0.0;  // rejections / reps
};

struct RejectionReport {
  ExperimentSpec spec;
  std::vector<RejectionEntry> entries;  // kernel-major, then gamma, then alpha
  std::map<std::string, std::size_t> degenerate;  // replicates per kernel
  double runtime_seconds = 0.0;

  const RejectionEntry& at(const std::string& kernel, double gamma, double alpha) const {
    for (const auto& e : entries) {
      if (e.kernel == kernel && e.gamma == gamma && e.alpha == alpha) return e;
    }
    throw std::out_of_range("no entry for " + kernel);
  }
};

// Per-replicate outcome: normalized statistic per (kernel, gamma), or NaN
// when the variance estimate was degenerate.
using ReplicateStats = std::vector<double>;

namespace detail {

struct ExperimentScratch {
  std::vector<WeightedIncrementMax> searches;  // one per gamma
};

inline ReplicateStats run_replicate(const ExperimentSpec& spec, const std::vector<Kernel>& kernels,
                                    std::size_t r, bool inject, ExperimentScratch& scratch) {
  Engine rng = replicate_engine(spec.seed, r, kDataStream);
  TimeSeries data = gen_ar1(spec.ar_coeff, spec.innovation, spec.n, rng);
  if (inject) data = inject_segment(std::move(data), spec.segment_start, spec.segment_len, spec.delta);
  ReplicateStats out(kernels.size() * spec.gammas.size());
  for (std::size_t ki = 0; ki < kernels.size(); ++ki) {
    const Kernel& h = kernels[ki];
    const std::vector<double> rows = kernel_row_sums(data.view(), h);
    double sigma = 0.0;
    try {
      VarianceMethod vm = spec.variance;
      if (vm.kind == VarianceMethodKind::known) vm.known_value = spec.known_variance.at(h.name());
      sigma = estimate_variance(data.view(), h, vm).sigma();
    } catch (const degenerate_variance&) {
      sigma = 0.0;
    }
    const std::vector<double> prefix = prefix_from_row_sums(rows);
    for (std::size_t gi = 0; gi < spec.gammas.size(); ++gi) {
      double& slot = out[ki * spec.gammas.size() + gi];
      if (!(sigma > 0.0)) {
        slot = std::numeric_limits<double>::quiet_NaN();
        continue;
      }
      const PairMax best = scratch.searches[gi](prefix, spec.sided);
      slot = normalized_stat(best.value, spec.n, sigma);
    }
  }
  return out;
}

inline RejectionReport tally(const ExperimentSpec& spec, const std::vector<ReplicateStats>& stats,
                             const std::vector<QuantileTable>& tables) {
  RejectionReport rep;
  rep.spec = spec;
  const std::size_t ng = spec.gammas.size();
  for (std::size_t ki = 0; ki < spec.kernels.size(); ++ki) {
    std::size_t degenerate = 0;
    for (const auto& s : stats) degenerate += std::isnan(s[ki * ng]) ? 1 : 0;
    rep.degenerate[spec.kernels[ki]] = degenerate;
    for (std::size_t gi = 0; gi < ng; ++gi) {
      for (double alpha : spec.alphas) {
        RejectionEntry e;
        e.kernel = spec.kernels[ki];
        e.gamma = spec.gammas[gi];
        e.alpha = alpha;
        e.critical = upper_quantile(tables[gi], alpha);
        for (const auto& s : stats) {
          const double v = s[ki * ng + gi];
          if (!std::isnan(v) && v > e.critical) ++e.rejections;
        }
        e.rejection = static_cast<double>(e.rejections) / static_cast<double>(stats.size());
        rep.entries.push_back(e);
      }
    }
  }
  return rep;
}

inline std::vector<ReplicateStats> replicate_all(const ExperimentSpec& spec, bool inject,
                                                 unsigned threads) {
  std::vector<Kernel> kernels;
  for (const auto& k : spec.kernels) kernels.push_back(kernel_from_name(k));
  threads = std::max(1u, threads);
  std::vector<ExperimentScratch> scratch(threads);
  for (auto& s : scratch) {
    for (double g : spec.gammas) s.searches.emplace_back(lag_weights(spec.n, g));
  }
  std::vector<ReplicateStats> stats(spec.reps);
  parallel_for(spec.reps, threads, [&](unsigned w, std::size_t r) {
    stats[r] = run_replicate(spec, kernels, r, inject, scratch[w]);
  });
  return stats;
}

}  // namespace detail

// Tables must correspond to spec.table_keys() (one per gamma, same order).
inline RejectionReport run_experiment(const ExperimentSpec& spec,
                                      const std::vector<QuantileTable>& tables,
                                      unsigned threads = default_threads()) {
  spec.validate();
  if (tables.size() != spec.gammas.size()) throw std::invalid_argument("one table per gamma required");
  const auto t0 = std::chrono::steady_clock::now();
  const auto stats = detail::replicate_all(spec, true, threads);
  RejectionReport rep = detail::tally(spec, stats, tables);
  rep.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

inline RejectionReport run_experiment(const ExperimentSpec& spec, const TableCache* cache,
                                      unsigned threads = default_threads()) {
  spec.validate();
  return run_experiment(spec, obtain_tables(spec.table_keys(), cache, threads), threads);
}

// Size and power from the same replicates: each replicate's data is scored
// once as generated (null) and once with the segment injected.
struct SizePowerReport {
  RejectionReport size;
  RejectionReport power;
};

inline SizePowerReport run_size_power(const ExperimentSpec& spec,
                                      const std::vector<QuantileTable>& tables,
                                      unsigned threads = default_threads()) {
  spec.validate();
  ExperimentSpec null_spec = spec;
  null_spec.segment_len = 0;
  SizePowerReport out;
  out.size = run_experiment(null_spec, tables, threads);
  out.power = run_experiment(spec, tables, threads);
  return out;
}

inline void write_rejection_csv(std::ostream& out, const RejectionReport& rep) {
  out << "kernel,gamma,alpha,rejection,reps,seed\n";
  for (const auto& e : rep.entries) {
    out << e.kernel << ',' << format_double(e.gamma) << ',' << format_double(e.alpha) << ','
        << format_double(e.rejection) << ',' << rep.spec.reps << ',' << rep.spec.seed << '\n';
  }
}

inline void write_size_power_csv(std::ostream& out, const SizePowerReport& rep) {
  out << "kernel,gamma,alpha,size,power,reps,seed\n";
  for (std::size_t i = 0; i < rep.power.entries.size(); ++i) {
    const auto& p = rep.power.entries[i];
    const auto& s = rep.size.entries[i];
    out << p.kernel << ',' << format_double(p.gamma) << ',' << format_double(p.alpha) << ','
        << format_double(s.rejection) << ',' << format_double(p.rejection) << ','
        << rep.power.spec.reps << ',' << rep.power.spec.seed << '\n';
  }
}

}  // namespace episcan
