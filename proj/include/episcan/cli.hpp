#pragma once

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "episcan/error.hpp"
#include "episcan/experiment_config.hpp"
#include "episcan/io.hpp"
#include "episcan/kernel.hpp"
#include "episcan/limitdist.hpp"
#include "episcan/scan.hpp"
#include "episcan/simulate.hpp"
#include "episcan/table_cache.hpp"
#include "episcan/variance.hpp"

namespace episcan::cli {

inline constexpr int kExitNoRejection = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitRejection = 2;

// Tables with fewer replicates than this get a precision warning.
inline constexpr std::size_t kLowPrecisionReps = 1000;

struct CacheOptions {
  std::string dir;
  bool disabled = false;
  unsigned threads = default_threads();

  std::optional<TableCache> open() const {
    if (disabled) return std::nullopt;
    return TableCache(resolve_cache_dir(dir));
  }
};

struct TestArgs {
  std::string input;
  CsvOptions csv;
  std::string kernel = "wilcoxon";
  double gamma = 0.2;
  std::string sided = "two";
  std::string variance = "lrv:4";
  std::string lag_kernel = "qs";
  std::vector<double> alphas{0.01, 0.05, 0.1};
  std::size_t grid = 10000;
  std::size_t reps = 30000;
  std::uint64_t seed = 1;
  CacheOptions cache;
  std::string report_path;
};

struct CriticalValue {
  double alpha;
  double value;
  bool rejected;
};

struct TestReport {
  std::string input;
  std::size_t n = 0;
  std::string kernel;
  double gamma = 0.0;
  Sided sided = Sided::two;
  VarianceEstimate variance;
  std::string variance_spec;
  double raw_stat = 0.0;
  double normalized_stat = 0.0;
  std::vector<CriticalValue> critical;
  double p_value = 1.0;
  std::size_t segment_start = 0;  // 1-based, inclusive
  std::size_t segment_end = 0;
  std::string segment_start_label;
  std::string segment_end_label;
  TableKey table;
};

inline nlohmann::ordered_json to_json(const TestReport& r) {
  nlohmann::ordered_json j;
  j["format"] = "episcan-test-report";
  j["format_version"] = 1;
  j["input"] = r.input;
  j["n"] = r.n;
  j["kernel"] = r.kernel;
  j["gamma"] = r.gamma;
  j["sided"] = to_string(r.sided);
  j["variance"] = {
      {"spec", r.variance_spec},
      {"method", to_string(r.variance.method)},
      {"value", r.variance.value},
      {"bandwidth", r.variance.bandwidth},
      {"lag_kernel", r.variance.lag_kernel ? to_string(*r.variance.lag_kernel) : "none"},
      {"floored", r.variance.floored},
      {"degenerate", r.variance.degenerate},
  };
  j["raw_stat"] = r.raw_stat;
  j["normalized_stat"] = r.normalized_stat;
  auto crit = nlohmann::ordered_json::array();
  for (const auto& c : r.critical) {
    crit.push_back({{"alpha", c.alpha}, {"critical_value", c.value}, {"rejected", c.rejected}});
  }
  j["critical_values"] = crit;
  j["p_value"] = r.p_value;
  nlohmann::ordered_json seg{{"start", r.segment_start}, {"end", r.segment_end}};
  if (!r.segment_start_label.empty()) {
    seg["start_label"] = r.segment_start_label;
    seg["end_label"] = r.segment_end_label;
  }
  j["segment"] = seg;
  j["table"] = {{"gamma", r.table.gamma},
                {"sided", to_string(r.table.sided)},
                {"grid", r.table.grid},
                {"reps", r.table.reps},
                {"seed", r.table.seed}};
  return j;
}

inline void print_report(std::ostream& out, const TestReport& r) {
  out << "episcan test: " << r.input << "\n"
      << "  n                 " << r.n << "\n"
      << "  kernel            " << r.kernel << "\n"
      << "  gamma             " << r.gamma << "\n"
      << "  sided             " << to_string(r.sided) << "\n"
      << "  variance          " << to_string(r.variance.method) << " = " << r.variance.value;
  if (r.variance.bandwidth > 0.0) out << " (bandwidth " << r.variance.bandwidth << ")";
  if (r.variance.lag_kernel) out << " [" << to_string(*r.variance.lag_kernel) << "]";
  if (r.variance.floored) out << " FLOORED";
  out << "\n"
      << "  raw statistic     " << r.raw_stat << "\n"
      << "  normalized        " << r.normalized_stat << "\n"
      << "  p-value           " << r.p_value << "\n"
      << "  segment           " << r.segment_start << ".." << r.segment_end;
  if (!r.segment_start_label.empty()) {
    out << " (" << r.segment_start_label << " .. " << r.segment_end_label << ")";
  }
  out << "\n";
  for (const auto& c : r.critical) {
    out << "  alpha " << std::setw(6) << c.alpha << "  critical " << std::setw(8) << c.value
        << "  " << (c.rejected ? "REJECT" : "accept") << "\n";
  }
}

// Library form of `episcan test`: throws on bad input, returns the report.
inline TestReport run_test(const TestArgs& a, std::ostream& err) {
  ScanParams params{a.gamma, sided_from_string(a.sided)};
  params.validate();
  if (a.alphas.empty()) throw std::invalid_argument("at least one alpha is required");
  for (double al : a.alphas) {
    if (!(al > 0.0 && al < 1.0)) throw domain_error("alpha must lie in (0, 1)");
  }
  const VarianceMethod vm =
      VarianceMethod::parse(a.variance, lag_kernel_from_string(a.lag_kernel));
  const Kernel h = kernel_from_name(a.kernel);
  const TimeSeries series = ingest_csv(a.input, a.csv);
  if (series.size() < 2) throw data_error("need at least 2 observations");

  ScanResult s = scan(series, h, params);
  TestReport r;
  r.variance = estimate_variance(series.view(), h, vm);
  r.variance_spec = vm.describe();
  normalize(s, r.variance.sigma());

  r.input = a.input;
  r.n = series.size();
  r.kernel = h.name();
  r.gamma = a.gamma;
  r.sided = params.sided;
  r.raw_stat = s.raw_stat;
  r.normalized_stat = s.normalized_stat;
  r.segment_start = s.k_star + 1;
  r.segment_end = s.m_star;
  if (series.has_labels()) {
    r.segment_start_label = series.labels[s.k_star];
    r.segment_end_label = series.labels[s.m_star - 1];
  }
  r.table = TableKey{a.gamma, params.sided, a.grid, a.reps, a.seed};
  if (a.reps < kLowPrecisionReps) {
    err << "warning: " << a.reps << " replicates give low-precision critical values\n";
  }
  const auto cache = a.cache.open();
  const QuantileTable table = obtain_tables({r.table}, cache ? &*cache : nullptr, a.cache.threads,
                                            [&](const TableKey&) {
                                              err << "simulating critical values (grid "
                                                  << a.grid << ", reps " << a.reps << ")\n";
                                            })
                                  .front();
  std::vector<double> alphas = a.alphas;
  std::sort(alphas.begin(), alphas.end());
  for (double al : alphas) {
    const double c = upper_quantile(table, al);
    r.critical.push_back({al, c, r.normalized_stat > c});
  }
  r.p_value = p_value(table, r.normalized_stat);
  return r;
}

struct QuantilesArgs {
  std::vector<double> gammas{0.0, 0.1, 0.2, 0.3, 0.4};
  std::string sided = "both";
  std::size_t grid = 10000;
  std::size_t reps = 30000;
  std::uint64_t seed = 1;
  CacheOptions cache;
  std::string csv_path;
};

inline std::vector<QuantileTable> run_quantiles(const QuantilesArgs& a, std::ostream& out,
                                                std::ostream& err) {
  std::vector<Sided> sides;
  if (a.sided == "both") sides = {Sided::one, Sided::two};
  else sides = {sided_from_string(a.sided)};
  if (a.gammas.empty()) throw std::invalid_argument("at least one gamma is required");
  for (double g : a.gammas) validate_limit_params(g, a.grid);
  if (a.reps < 100) throw domain_error("reps must be at least 100");
  if (a.reps < kLowPrecisionReps) {
    err << "warning: " << a.reps << " replicates give low-precision quantiles\n";
  }
  std::vector<TableKey> keys;
  for (Sided s : sides) {
    for (double g : a.gammas) keys.push_back({g, s, a.grid, a.reps, a.seed});
  }
  const auto cache = a.cache.open();
  auto tables = obtain_tables(keys, cache ? &*cache : nullptr, a.cache.threads,
                              [&](const TableKey& k) {
                                err << "simulating gamma=" << k.gamma << " sided="
                                    << to_string(k.sided) << "\n";
                              });

  out << "Upper quantiles of the weighted Brownian bridge sup-functional (grid " << a.grid
      << ", reps " << a.reps << ", seed " << a.seed << ")\n";
  out << std::left << std::setw(8) << "sided" << std::setw(8) << "gamma";
  for (double lvl : kTableLevels) {
    std::ostringstream h;
    h << lvl * 100 << "%";
    out << std::right << std::setw(8) << h.str();
  }
  out << "\n";
  char buf[32];
  for (const auto& t : tables) {
    out << std::left << std::setw(8) << to_string(t.sided) << std::setw(8)
        << format_double(t.gamma);
    for (double lvl : kTableLevels) {
      std::snprintf(buf, sizeof buf, "%8.3f", upper_quantile(t, lvl));
      out << buf;
    }
    out << "\n";
  }
  if (!a.csv_path.empty()) {
    std::ofstream csv(a.csv_path);
    if (!csv) throw io_error("cannot write '" + a.csv_path + "'");
    csv << "sided,gamma,level,quantile,grid,reps,seed\n";
    for (const auto& t : tables) {
      for (double lvl : kTableLevels) {
        csv << to_string(t.sided) << ',' << format_double(t.gamma) << ',' << format_double(lvl)
            << ',' << format_double(upper_quantile(t, lvl)) << ',' << t.grid << ',' << t.reps
            << ',' << t.seed << '\n';
      }
    }
  }
  return tables;
}

struct SimulateArgs {
  std::string config_path;
  std::vector<std::string> settings;  // key=value overrides
  std::string out_path;
  bool size_power = false;
  CacheOptions cache;
};

inline ExperimentSpec build_experiment(const SimulateArgs& a) {
  ExperimentSpec spec;
  if (!a.config_path.empty()) spec = read_experiment_config(a.config_path, spec);
  for (const auto& kv : a.settings) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
    apply_experiment_setting(spec, detail::trim(kv.substr(0, eq)), detail::trim(kv.substr(eq + 1)));
  }
  spec.validate();
  return spec;
}

inline void run_simulate(const SimulateArgs& a, std::ostream& out, std::ostream& err) {
  const ExperimentSpec spec = build_experiment(a);
  const auto cache = a.cache.open();
  const auto tables = obtain_tables(spec.table_keys(), cache ? &*cache : nullptr, a.cache.threads,
                                    [&](const TableKey& k) {
                                      err << "simulating critical values gamma=" << k.gamma
                                          << "\n";
                                    });
  std::ofstream file;
  std::ostream* dst = &out;
  if (!a.out_path.empty()) {
    file.open(a.out_path);
    if (!file) throw io_error("cannot write '" + a.out_path + "'");
    dst = &file;
  }
  auto report_degenerate = [&](const RejectionReport& r, const char* what) {
    for (const auto& [k, count] : r.degenerate) {
      if (count > 0) {
        err << "warning: " << what << ": " << count << " of " << r.spec.reps
            << " replicates had degenerate variance for " << k << "\n";
      }
    }
  };
  if (a.size_power) {
    const SizePowerReport r = run_size_power(spec, tables, a.cache.threads);
    report_degenerate(r.size, "null");
    report_degenerate(r.power, "alternative");
    write_size_power_csv(*dst, r);
    err << "runtime " << (r.size.runtime_seconds + r.power.runtime_seconds) << " s\n";
  } else {
    const RejectionReport r = run_experiment(spec, tables, a.cache.threads);
    report_degenerate(r, "experiment");
    write_rejection_csv(*dst, r);
    err << "runtime " << r.runtime_seconds << " s\n";
  }
}

inline void add_cache_options(CLI::App* cmd, CacheOptions& c) {
  cmd->add_option("--cache-dir", c.dir,
                  std::string("Quantile table cache directory (default: $") + kCacheEnvVar +
                      ", then ~/.cache/episcan)");
  cmd->add_flag("--no-cache", c.disabled, "Do not read or write cached tables");
  cmd->add_option("--threads", c.threads, "Worker threads")->check(CLI::PositiveNumber);
}

// Entry point shared by the executable and the tests. `args` excludes the
// program name.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Epidemic change detection with weighted U-statistic scans"};
  app.require_subcommand(1);

  TestArgs targs;
  std::size_t column = 0;
  auto* test = app.add_subcommand("test", "Test a CSV series for a changed segment");
  test->add_option("--input,-i", targs.input, "CSV file")->required();
  test->add_option("--column", column, "1-based value column");
  test->add_option("--column-name", targs.csv.column_name, "Value column by header name");
  test->add_flag("--skip-header", targs.csv.skip_header, "First non-blank line is a header");
  test->add_flag("--timestamps", targs.csv.timestamps, "First column holds labels");
  test->add_option("--kernel", targs.kernel, "cusum | wilcoxon")
      ->check(CLI::IsMember({"cusum", "wilcoxon"}));
  test->add_option("--gamma", targs.gamma, "Weight exponent in [0, 0.5)");
  test->add_option("--sided", targs.sided, "one | two")->check(CLI::IsMember({"one", "two"}));
  test->add_option("--variance", targs.variance, "known:<v> | iid | lrv[:<b>] | adaptive[:<blocks>]");
  test->add_option("--lag-kernel", targs.lag_kernel, "qs | bartlett")
      ->check(CLI::IsMember({"qs", "bartlett"}));
  test->add_option("--alpha", targs.alphas, "Significance levels")->delimiter(',');
  test->add_option("--grid", targs.grid, "Grid size of the critical-value simulation");
  test->add_option("--reps", targs.reps, "Replicates of the critical-value simulation");
  test->add_option("--seed", targs.seed, "Seed of the critical-value simulation");
  test->add_option("--report", targs.report_path, "Write a JSON report to this path");
  add_cache_options(test, targs.cache);

  QuantilesArgs qargs;
  auto* quant = app.add_subcommand("quantiles", "Simulate and print limit-distribution quantiles");
  quant->add_option("--gamma", qargs.gammas, "Weight exponents")->delimiter(',');
  quant->add_option("--sided", qargs.sided, "one | two | both")
      ->check(CLI::IsMember({"one", "two", "both"}));
  quant->add_option("--grid", qargs.grid, "Grid points on [0, 1]");
  quant->add_option("--reps", qargs.reps, "Monte Carlo replicates");
  quant->add_option("--seed", qargs.seed, "Seed");
  quant->add_option("--csv", qargs.csv_path, "Also write the quantiles as CSV");
  add_cache_options(quant, qargs.cache);

  SimulateArgs sargs;
  auto* sim = app.add_subcommand("simulate", "Run a size/power experiment");
  sim->add_option("--config,-c", sargs.config_path, "Experiment file (key = value lines)");
  sim->add_option("--set", sargs.settings, "Override a setting, key=value (repeatable)");
  sim->add_option("--out,-o", sargs.out_path, "CSV output path (default stdout)");
  sim->add_flag("--size-power", sargs.size_power,
                "Score each replicate with and without the segment; emit size and power");
  add_cache_options(sim, sargs.cache);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : kExitError;
  }

  try {
    if (*test) {
      if (column > 0) targs.csv.column = column;
      const TestReport r = run_test(targs, err);
      print_report(out, r);
      if (!targs.report_path.empty()) {
        std::ofstream f(targs.report_path);
        if (!f) throw io_error("cannot write '" + targs.report_path + "'");
        f << to_json(r).dump(2) << '\n';
      }
      return r.critical.front().rejected ? kExitRejection : kExitNoRejection;
    }
    if (*quant) {
      run_quantiles(qargs, out, err);
      return 0;
    }
    if (*sim) {
      run_simulate(sargs, out, err);
      return 0;
    }
  } catch (const degenerate_variance& e) {
    err << "error: degenerate variance: " << e.what()
        << "\n  the series carries no usable variation for this kernel; the statistic cannot "
           "be normalized\n";
    return kExitError;
  } catch (const domain_error& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}

}  // namespace episcan::cli
