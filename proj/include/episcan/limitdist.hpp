#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "episcan/detail/pair_max.hpp"
#include "episcan/error.hpp"
#include "episcan/parallel.hpp"
#include "episcan/rng.hpp"
#include "episcan/scan.hpp"

namespace episcan {

// Identifies a simulated table: together with the fixed engine and
// seeding scheme these five values determine the replicates exactly.
struct TableKey {
  double gamma = 0.0;
  Sided sided = Sided::two;
  std::size_t grid = 10000;
  std::size_t reps = 30000;
  std::uint64_t seed = 1;

  friend bool operator==(const TableKey&, const TableKey&) = default;
};

// Sorted Monte Carlo replicates of sup_{s<t} [B(t) - B(s)] / rho_gamma(t - s)
// (one-sided) or of its absolute-value version (two-sided).
struct QuantileTable {
  double gamma = 0.0;
  Sided sided = Sided::two;
  std::size_t grid = 0;
  std::size_t reps = 0;
  std::uint64_t seed = 0;
  std::vector<double> replicates;

  TableKey key() const { return {gamma, sided, grid, reps, seed}; }
};

// Upper-tail levels reported in the standard quantile layout.
inline constexpr std::array<double, 9> kTableLevels{0.5,   0.2,   0.1,    0.05, 0.025,
                                                     0.01,  0.005, 0.0025, 0.001};

inline void validate_limit_params(double gamma, std::size_t grid) {
  if (!(gamma >= 0.0 && gamma < 0.5)) {
    throw domain_error("gamma must lie in [0, 0.5), got " + std::to_string(gamma));
  }
  if (grid < 2) throw domain_error("grid must be at least 2");
}

// Brownian bridge on {i / grid}: W from iid N(0, 1/grid) increments, then
// B(t) = W(t) - t W(1). Writes grid + 1 values into `out`.
inline void bridge_path(std::size_t grid, Engine& rng, std::vector<double>& out) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const double step = 1.0 / std::sqrt(static_cast<double>(grid));
  out.resize(grid + 1);
  out[0] = 0.0;
  for (std::size_t i = 1; i <= grid; ++i) out[i] = out[i - 1] + step * normal(rng);
  const double end = out[grid];
  const double dg = static_cast<double>(grid);
  for (std::size_t i = 1; i <= grid; ++i) out[i] -= (static_cast<double>(i) / dg) * end;
  out[grid] = 0.0;
}

// Weighted sup-functional of a discretised path (the pair (0, 1) excluded).
inline double bridge_functional(std::span<const double> path, Sided sided,
                                detail::WeightedIncrementMax& search) {
  return search(path, sided).value;
}

// One replicate of the limit functional, drawing the path from `rng`.
inline double bridge_sup(double gamma, Sided sided, std::size_t grid, Engine& rng) {
  validate_limit_params(gamma, grid);
  std::vector<double> path;
  bridge_path(grid, rng, path);
  detail::WeightedIncrementMax search(lag_weights(grid, gamma));
  return bridge_functional(path, sided, search);
}

// Simulates several tables that share grid, reps and seed. Replicate r of
// every table is computed from the same bridge path (engine stream
// (seed, r)), so each table equals what simulate_table would return for its
// own key, and per-path relations between tables (monotone in gamma,
// one-sided <= two-sided) hold replicate by replicate before sorting.
inline std::vector<QuantileTable> simulate_tables(
    const std::vector<std::pair<double, Sided>>& functionals, std::size_t grid,
    std::size_t reps, std::uint64_t seed, unsigned threads = default_threads()) {
  if (reps < 100) throw domain_error("reps must be at least 100");
  std::vector<double> gammas;
  for (const auto& [g, s] : functionals) {
    validate_limit_params(g, grid);
    if (std::find(gammas.begin(), gammas.end(), g) == gammas.end()) gammas.push_back(g);
  }
  std::vector<std::size_t> gamma_slot(functionals.size());
  for (std::size_t f = 0; f < functionals.size(); ++f) {
    gamma_slot[f] = static_cast<std::size_t>(
        std::find(gammas.begin(), gammas.end(), functionals[f].first) - gammas.begin());
  }

  threads = std::max(1u, threads);
  // Per worker: one search object per distinct gamma plus a path buffer.
  struct Scratch {
    std::vector<detail::WeightedIncrementMax> searches;
    std::vector<double> path;
  };
  std::vector<Scratch> scratch(threads);
  for (auto& s : scratch) {
    for (double g : gammas) s.searches.emplace_back(lag_weights(grid, g));
  }

  std::vector<std::vector<double>> values(functionals.size(), std::vector<double>(reps));
  parallel_for(reps, threads, [&](unsigned worker, std::size_t r) {
    Scratch& s = scratch[worker];
    Engine rng = replicate_engine(seed, r, kBridgeStream);
    bridge_path(grid, rng, s.path);
    for (std::size_t f = 0; f < functionals.size(); ++f) {
      values[f][r] =
          bridge_functional(s.path, functionals[f].second, s.searches[gamma_slot[f]]);
    }
  });

  std::vector<QuantileTable> tables;
  tables.reserve(functionals.size());
  for (std::size_t f = 0; f < functionals.size(); ++f) {
    QuantileTable t;
    t.gamma = functionals[f].first;
    t.sided = functionals[f].second;
    t.grid = grid;
    t.reps = reps;
    t.seed = seed;
    t.replicates = std::move(values[f]);
    std::sort(t.replicates.begin(), t.replicates.end());
    tables.push_back(std::move(t));
  }
  return tables;
}

inline QuantileTable simulate_table(double gamma, Sided sided, std::size_t grid,
                                    std::size_t reps, std::uint64_t seed,
                                    unsigned threads = default_threads()) {
  return std::move(simulate_tables({{gamma, sided}}, grid, reps, seed, threads).front());
}

inline QuantileTable simulate_table(const TableKey& key, unsigned threads = default_threads()) {
  return simulate_table(key.gamma, key.sided, key.grid, key.reps, key.seed, threads);
}

// Type-1 empirical quantile: the ceil((1 - alpha) * reps)-th order statistic.
inline double upper_quantile(const QuantileTable& table, double alpha) {
  if (table.replicates.empty()) throw data_error("empty quantile table");
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw domain_error("alpha must lie in (0, 1), got " + std::to_string(alpha));
  }
  const auto reps = static_cast<double>(table.replicates.size());
  // The small offset keeps (1 - 0.05) * 30000 = 28500.000000000004 at 28500.
  double rank = std::ceil((1.0 - alpha) * reps - 1e-9);
  rank = std::clamp(rank, 1.0, reps);
  return table.replicates[static_cast<std::size_t>(rank) - 1];
}

// (1 + #{replicates >= observed}) / (reps + 1).
inline double p_value(const QuantileTable& table, double observed) {
  if (table.replicates.empty()) throw data_error("empty quantile table");
  const auto first_ge =
      std::lower_bound(table.replicates.begin(), table.replicates.end(), observed);
  const auto count = static_cast<double>(table.replicates.end() - first_ge);
  return (1.0 + count) / (static_cast<double>(table.replicates.size()) + 1.0);
}

}  // namespace episcan
