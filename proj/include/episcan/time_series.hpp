#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "episcan/error.hpp"

namespace episcan {

// Ordered real-valued observations. `labels` is either empty or holds one
// label (typically a timestamp) per observation.
struct TimeSeries {
  std::vector<double> values;
  std::vector<std::string> labels;

  TimeSeries() = default;
  explicit TimeSeries(std::vector<double> v) : values(std::move(v)) {}
  TimeSeries(std::vector<double> v, std::vector<std::string> l)
      : values(std::move(v)), labels(std::move(l)) {}

  std::size_t size() const noexcept { return values.size(); }
  bool empty() const noexcept { return values.empty(); }
  bool has_labels() const noexcept { return !labels.empty(); }
  std::span<const double> view() const noexcept { return values; }
  double operator[](std::size_t i) const { return values[i]; }
};

namespace detail {

inline void require_usable(std::span<const double> x, std::size_t min_n = 2) {
  if (x.size() < min_n) {
    throw data_error("series has " + std::to_string(x.size()) +
                     " observations, need at least " + std::to_string(min_n));
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (std::isnan(x[i])) {
      throw data_error("observation " + std::to_string(i + 1) + " is NaN");
    }
  }
}

}  // namespace detail
}  // namespace episcan
