#pragma once

#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include "episcan/error.hpp"
#include "episcan/io.hpp"
#include "episcan/simulate.hpp"
#include "episcan/table_cache.hpp"

namespace episcan {

namespace detail {

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline std::vector<double> parse_double_list(const std::string& s, const std::string& what) {
  std::vector<double> out;
  for (const auto& item : split_list(s)) out.push_back(parse_double(item, what));
  return out;
}

}  // namespace detail

// Applies one `key = value` setting to an experiment. Unknown keys throw.
inline void apply_experiment_setting(ExperimentSpec& spec, const std::string& key,
                                     const std::string& value) {
  using detail::parse_double_list;
  if (key == "n") spec.n = parse_u64(value, key);
  else if (key == "a" || key == "ar_coeff") spec.ar_coeff = parse_double(value, key);
  else if (key == "innovation") spec.innovation = innovation_from_string(value);
  else if (key == "segment_start") spec.segment_start = parse_u64(value, key);
  else if (key == "segment_len") spec.segment_len = parse_u64(value, key);
  else if (key == "delta") spec.delta = parse_double(value, key);
  else if (key == "gammas" || key == "gamma") spec.gammas = parse_double_list(value, key);
  else if (key == "kernels" || key == "kernel") spec.kernels = detail::split_list(value);
  else if (key == "variance" && value == "known") {
    // Per-kernel values come from known_cusum / known_wilcoxon.
    spec.variance.kind = VarianceMethodKind::known;
  } else if (key == "variance") spec.variance = VarianceMethod::parse(value, spec.variance.lag_kernel);
  else if (key == "lag_kernel") spec.variance.lag_kernel = lag_kernel_from_string(value);
  else if (key == "bandwidth") spec.variance.bandwidth = parse_double(value, key);
  else if (key == "blocks") spec.variance.blocks = parse_u64(value, key);
  else if (key == "known_cusum") spec.known_variance["cusum"] = parse_double(value, key);
  else if (key == "known_wilcoxon") spec.known_variance["wilcoxon"] = parse_double(value, key);
  else if (key == "alphas" || key == "alpha") spec.alphas = parse_double_list(value, key);
  else if (key == "sided") spec.sided = sided_from_string(value);
  else if (key == "reps") spec.reps = parse_u64(value, key);
  else if (key == "seed") spec.seed = parse_u64(value, key);
  else if (key == "table_grid" || key == "grid") spec.table_grid = parse_u64(value, key);
  else if (key == "table_reps") spec.table_reps = parse_u64(value, key);
  else if (key == "table_seed") spec.table_seed = parse_u64(value, key);
  else throw parse_error("unknown experiment key '" + key + "'");
}

// Flat `key = value` file; `#` starts a comment. Settings apply in file order
// on top of the defaults.
inline ExperimentSpec read_experiment_config(std::istream& in, ExperimentSpec spec = {}) {
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (detail::blank(line)) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw parse_error("line " + std::to_string(row) + ": expected key = value", row);
    }
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    try {
      apply_experiment_setting(spec, key, value);
    } catch (const parse_error& e) {
      throw parse_error("line " + std::to_string(row) + ": " + e.what(), row);
    } catch (const std::invalid_argument& e) {
      throw parse_error("line " + std::to_string(row) + ": " + e.what(), row);
    }
  }
  return spec;
}

inline ExperimentSpec read_experiment_config(const std::string& path, ExperimentSpec spec = {}) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open '" + path + "'");
  return read_experiment_config(in, std::move(spec));
}

}  // namespace episcan
