#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>
#include <sstream>

#include "episcan/experiment_config.hpp"
#include "episcan/simulate.hpp"

using namespace episcan;
using Catch::Approx;

namespace {

struct Moments {
  double mean, var, skew;
};

Moments moments(const std::vector<double>& x) {
  const double n = static_cast<double>(x.size());
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double m2 = 0, m3 = 0;
  for (double v : x) {
    const double d = v - mean;
    m2 += d * d;
    m3 += d * d * d;
  }
  m2 /= n;
  m3 /= n;
  return {mean, m2, m3 / std::pow(m2, 1.5)};
}

double lag1_autocorrelation(const std::vector<double>& x) {
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
  double num = 0, den = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    den += (x[i] - mean) * (x[i] - mean);
    if (i + 1 < x.size()) num += (x[i] - mean) * (x[i + 1] - mean);
  }
  return num / den;
}

// Small critical-value tables keep these tests fast.
ExperimentSpec small_spec() {
  ExperimentSpec s;
  s.n = 120;
  s.reps = 200;
  s.gammas = {0.0, 0.3};
  s.table_grid = 300;
  s.table_reps = 1000;
  return s;
}

}  // namespace

TEST_CASE("innovation laws", "[simulate]") {
  Engine rng = replicate_engine(2024, 0);
  const auto normal = gen_innovations(Innovation::normal, 1000000, rng);
  CHECK(std::abs(moments(normal).mean) <= 0.005);
  const auto t5 = gen_innovations(Innovation::t5, 1000000, rng);
  CHECK(std::abs(moments(t5).var - 5.0 / 3.0) <= 0.02);
  const auto ex = gen_innovations(Innovation::exponential_centered, 1000000, rng);
  const auto m = moments(ex);
  CHECK(std::abs(m.mean) <= 0.005);
  CHECK(std::abs(m.var - 1.0) <= 0.01);
  CHECK(std::abs(m.skew - 2.0) <= 0.05);
  CHECK_THROWS_AS(gen_innovations(Innovation::normal, 0, rng), domain_error);
}

TEST_CASE("AR(1) generator", "[simulate]") {
  // a = 0: the burn-in draws are discarded and the rest emitted unscaled.
  Engine a = replicate_engine(5, 1);
  Engine b = a;
  const auto iid = gen_ar1(0.0, Innovation::normal, 50, a);
  const auto raw = gen_innovations(Innovation::normal, kAr1BurnIn + 50, b);
  for (std::size_t i = 0; i < 50; ++i) REQUIRE(iid[i] == raw[kAr1BurnIn + i]);

  Engine rng = replicate_engine(5, 2);
  const auto y = gen_ar1(0.5, Innovation::normal, 100000, rng);
  CHECK(std::abs(lag1_autocorrelation(y.values) - 0.5) <= 0.02);
  const auto z = gen_ar1(0.5, Innovation::t5, 100000, rng);
  CHECK(std::abs(moments(z.values).var - 1.0) <= 0.05);
  CHECK_THROWS_AS(gen_ar1(1.0, Innovation::normal, 10, rng), domain_error);
}

TEST_CASE("inject_segment", "[simulate]") {
  const TimeSeries s(std::vector<double>{0, 0, 0, 0, 0});
  CHECK(inject_segment(s, 2, 0, 5.0).values == s.values);
  CHECK(inject_segment(s, 1, 3, 0.0).values == s.values);
  CHECK(inject_segment(s, 1, 2, 1.5).values == std::vector<double>{0, 1.5, 1.5, 0, 0});
  CHECK(inject_segment(s, 0, 5, 1.0).values == std::vector<double>(5, 1.0));
  CHECK_THROWS_AS(inject_segment(s, 3, 3, 1.0), domain_error);

  Engine rng = replicate_engine(1, 0);
  const auto y = gen_ar1(0.5, Innovation::t5, 480, rng);
  const auto x = inject_segment(y, 0, 160, 0.58);
  for (std::size_t i = 0; i < 480; ++i) {
    REQUIRE(x[i] == (i < 160 ? y[i] + 0.58 : y[i]));
  }
}

TEST_CASE("rejection frequencies are nested across alpha", "[simulate][property]") {
  auto spec = small_spec();
  spec.segment_len = 30;
  spec.segment_start = 40;
  spec.delta = 0.7;
  spec.alphas = {0.01, 0.05, 0.1, 0.2};
  const auto rep = run_experiment(spec, nullptr, 2);
  REQUIRE(rep.entries.size() == 2 * 2 * 4);
  for (const auto& k : spec.kernels) {
    for (double g : spec.gammas) {
      double prev = -1;
      for (double a : spec.alphas) {
        const auto& e = rep.at(k, g, a);
        REQUIRE(e.rejection >= 0.0);
        REQUIRE(e.rejection <= 1.0);
        REQUIRE(e.rejection >= prev);
        prev = e.rejection;
      }
    }
  }
  for (const auto& [k, d] : rep.degenerate) CHECK(d == 0);
}

TEST_CASE("experiments are reproducible across thread counts", "[simulate][property]") {
  auto spec = small_spec();
  spec.segment_len = 20;
  spec.delta = 0.5;
  spec.variance = VarianceMethod::parse("adaptive");
  const auto tables = obtain_tables(spec.table_keys(), nullptr, 1);
  const auto a = run_experiment(spec, tables, 1);
  const auto b = run_experiment(spec, tables, 4);
  std::ostringstream sa, sb;
  write_rejection_csv(sa, a);
  write_rejection_csv(sb, b);
  CHECK(sa.str() == sb.str());
}

TEST_CASE("the null configuration equals L = 0 or delta = 0", "[simulate]") {
  auto spec = small_spec();
  const auto tables = obtain_tables(spec.table_keys(), nullptr, 1);
  spec.segment_len = 0;
  const auto null = run_experiment(spec, tables, 1);
  spec.segment_len = 25;
  spec.delta = 0.0;
  const auto zero = run_experiment(spec, tables, 1);
  for (std::size_t i = 0; i < null.entries.size(); ++i) {
    REQUIRE(null.entries[i].rejections == zero.entries[i].rejections);
  }
  spec.delta = 1.0;
  const auto sp = run_size_power(spec, tables, 1);
  for (std::size_t i = 0; i < null.entries.size(); ++i) {
    REQUIRE(sp.size.entries[i].rejections == null.entries[i].rejections);
  }
}

TEST_CASE("rejection CSV layout", "[simulate]") {
  auto spec = small_spec();
  spec.kernels = {"wilcoxon"};
  spec.gammas = {0.2};
  spec.alphas = {0.05};
  spec.reps = 10;
  const auto rep = run_experiment(spec, nullptr, 1);
  std::ostringstream out;
  write_rejection_csv(out, rep);
  std::istringstream in(out.str());
  std::string header, row, extra;
  std::getline(in, header);
  std::getline(in, row);
  CHECK(header == "kernel,gamma,alpha,rejection,reps,seed");
  CHECK(row.rfind("wilcoxon,0.2,0.05,", 0) == 0);
  CHECK(row.substr(row.size() - 5) == ",10,1");
  CHECK_FALSE(std::getline(in, extra));
}

TEST_CASE("experiment config file", "[simulate][config]") {
  std::istringstream in(R"(# Table 2 configuration
n = 480
a = 0.5
innovation = t5
segment_start = 160   # second third
segment_len = 160
delta = 0.58
gammas = 0, 0.1
kernels = wilcoxon
variance = lrv:4
lag_kernel = bartlett
alphas = 0.05
reps = 3000
seed = 9
table_grid = 2000
)");
  const auto s = read_experiment_config(in);
  CHECK(s.n == 480);
  CHECK(s.ar_coeff == 0.5);
  CHECK(s.innovation == Innovation::t5);
  CHECK(s.segment_start == 160);
  CHECK(s.segment_len == 160);
  CHECK(s.gammas == std::vector<double>{0.0, 0.1});
  CHECK(s.kernels == std::vector<std::string>{"wilcoxon"});
  CHECK(s.variance.kind == VarianceMethodKind::lrv_fixed);
  CHECK(s.variance.lag_kernel == LagKernel::bartlett);
  CHECK(s.alphas == std::vector<double>{0.05});
  CHECK(s.seed == 9);
  CHECK(s.table_grid == 2000);
  CHECK(s.table_reps == 30000);

  const ExperimentSpec defaults;
  CHECK(defaults.ar_coeff == 0.5);
  CHECK(defaults.variance.bandwidth == 4.0);
  CHECK(defaults.variance.blocks == 5);
  CHECK(defaults.variance.lag_kernel == LagKernel::quadratic_spectral);

  std::istringstream bad("n = 480\nbogus = 1\n");
  try {
    read_experiment_config(bad);
    FAIL("expected a parse error");
  } catch (const parse_error& e) {
    CHECK(e.row() == 2);
  }
  std::istringstream bad2("n 480\n");
  CHECK_THROWS_AS(read_experiment_config(bad2), parse_error);

  std::istringstream known("variance = known\nknown_wilcoxon = 0.25\n");
  const auto k = read_experiment_config(known);
  CHECK(k.variance.kind == VarianceMethodKind::known);
  CHECK(k.known_variance.at("wilcoxon") == 0.25);
  CHECK(k.known_variance.at("cusum") == 1.0);
}

TEST_CASE("experiment validation", "[simulate]") {
  auto spec = small_spec();
  spec.segment_start = 100;
  spec.segment_len = 30;
  CHECK_THROWS_AS(spec.validate(), domain_error);
  spec = small_spec();
  spec.gammas = {0.5};
  CHECK_THROWS_AS(spec.validate(), domain_error);
  spec = small_spec();
  spec.kernels = {"median"};
  CHECK_THROWS(spec.validate());
}
