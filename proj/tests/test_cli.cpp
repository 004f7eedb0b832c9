#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "episcan/cli.hpp"
#include "episcan/io.hpp"

using namespace episcan;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
  static const fs::path dir = [] {
    auto p = fs::temp_directory_path() / "episcan_cli_test";
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return dir;
}

fs::path write_file(const std::string& name, const std::string& content) {
  const auto p = scratch_dir() / name;
  std::ofstream(p) << content;
  return p;
}

fs::path write_series(const std::string& name, const std::vector<double>& x) {
  std::ostringstream ss;
  ss.precision(17);
  for (double v : x) ss << v << '\n';
  return write_file(name, ss.str());
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

// Small critical-value simulations keep the CLI tests fast.
std::vector<std::string> fast_table() {
  return {"--grid", "500", "--reps", "2000", "--cache-dir", (scratch_dir() / "cache").string()};
}

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

TEST_CASE("ingest single-column CSV", "[cli][io]") {
  const auto p = write_file("plain.csv", "1\n2\n3\n");
  CHECK(ingest_csv(p.string()).values == std::vector<double>{1, 2, 3});

  const auto h = write_file("header.csv", "value\n1\n\n2.5\n-3e2\n");
  CsvOptions o;
  o.skip_header = true;
  CHECK(ingest_csv(h.string(), o).values == std::vector<double>{1, 2.5, -300});
  CHECK_THROWS_AS(ingest_csv(h.string()), parse_error);
}

TEST_CASE("ingest reports the failing row", "[cli][io]") {
  const auto p = write_file("bad.csv", "1\n2\n3\n4\n5\n6\nabc\n8\n");
  try {
    ingest_csv(p.string());
    FAIL("expected parse error");
  } catch (const parse_error& e) {
    CHECK(e.row() == 7);
    CHECK(std::string(e.what()).find("row 7") != std::string::npos);
  }
  CHECK_THROWS_AS(ingest_csv(write_file("nan.csv", "1\nnan\n").string()), parse_error);
  CHECK_THROWS_AS(ingest_csv(write_file("empty.csv", "\n\n").string()), data_error);
  CHECK_THROWS_AS(ingest_csv((scratch_dir() / "missing.csv").string()), io_error);
}

TEST_CASE("ingest with timestamps and named columns", "[cli][io]") {
  const auto p = write_file("ts.csv", "month,hits,other\n2004-01,10,0\n2004-02,12,1\n2004-03,7,2\n");
  CsvOptions o;
  o.skip_header = true;
  o.timestamps = true;
  const auto s = ingest_csv(p.string(), o);
  CHECK(s.values == std::vector<double>{10, 12, 7});
  CHECK(s.labels == std::vector<std::string>{"2004-01", "2004-02", "2004-03"});
  o.column_name = "other";
  CHECK(ingest_csv(p.string(), o).values == std::vector<double>{0, 1, 2});
  o.column_name.clear();
  o.column = 3;
  CHECK(ingest_csv(p.string(), o).values == std::vector<double>{0, 1, 2});
  o.column = 4;
  CHECK_THROWS_AS(ingest_csv(p.string(), o), parse_error);
}

TEST_CASE("test command on a constant series fails with a degeneracy message", "[cli]") {
  const auto p = write_series("const.csv", std::vector<double>(50, 3.0));
  const auto r = run(concat({"test", "--input", p.string()}, fast_table()));
  CHECK(r.code == cli::kExitError);
  CHECK(r.err.find("degenerate variance") != std::string::npos);
}

TEST_CASE("test command rejects gamma outside [0, 1/2)", "[cli]") {
  const auto p = write_series("g.csv", {1, 2, 3, 4, 5, 6});
  const auto r = run(concat({"test", "--input", p.string(), "--gamma", "0.6"}, fast_table()));
  CHECK(r.code == cli::kExitError);
  CHECK(r.err.find("usage error") != std::string::npos);
  const auto u = run({"test"});
  CHECK(u.code == cli::kExitError);
  const auto k = run(concat({"test", "--input", p.string(), "--kernel", "median"}, fast_table()));
  CHECK(k.code == cli::kExitError);
}

TEST_CASE("a large shift is detected and located", "[cli]") {
  int detected = 0;
  int runs = 0;
  for (std::uint64_t seed = 0; seed < 40; ++seed, ++runs) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    std::vector<double> x(100);
    for (auto& v : x) v = nd(rng);
    for (std::size_t i = 40; i < 60; ++i) x[i] += 3.0;
    const auto p = write_series("shift.csv", x);
    const auto rep = scratch_dir() / "shift.json";
    const auto r = run(concat({"test", "--input", p.string(), "--kernel", "wilcoxon", "--gamma",
                               "0.3", "--alpha", "0.05", "--report", rep.string()},
                              fast_table()));
    REQUIRE(r.code != cli::kExitError);
    const auto j = nlohmann::json::parse(slurp(rep));
    const std::size_t start = j["segment"]["start"], end = j["segment"]["end"];
    const bool overlap = start <= 60 && end >= 41;
    if (r.code == cli::kExitRejection && overlap) ++detected;
  }
  CHECK(detected >= 0.95 * runs);
}

TEST_CASE("test reports are byte-identical and rank-invariant", "[cli][property]") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> nd;
  std::vector<double> x(150), y(150);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = nd(rng) + (i >= 30 && i < 60 ? 1.0 : 0.0);
    y[i] = std::exp(x[i]) + 2.0;
  }
  const auto px = write_series("x.csv", x);
  const auto py = write_series("y.csv", y);
  auto report = [&](const fs::path& in, const std::string& name) {
    const auto out = scratch_dir() / name;
    const auto r = run(concat({"test", "--input", in.string(), "--gamma", "0.1", "--report",
                               out.string(), "--alpha", "0.01,0.05,0.1"},
                              fast_table()));
    REQUIRE(r.code != cli::kExitError);
    auto j = nlohmann::json::parse(slurp(out));
    return std::make_pair(slurp(out), j);
  };
  const auto [a1, ja] = report(px, "a1.json");
  const auto [a2, ja2] = report(px, "a2.json");
  CHECK(a1 == a2);
  auto [b, jb] = report(py, "b.json");
  auto jx = ja;
  jx.erase("input");
  jb.erase("input");
  CHECK(jx == jb);
  CHECK(ja["segment"]["start"] >= 1);
  CHECK(ja["segment"]["end"] <= 150);
  CHECK(ja["p_value"] > 0.0);
  CHECK(ja["p_value"] <= 1.0);
  CHECK(ja["critical_values"].size() == 3);
}

TEST_CASE("test report carries timestamp labels", "[cli]") {
  std::ostringstream ss;
  for (int i = 0; i < 60; ++i) ss << "t" << i << "," << (i >= 20 && i < 35 ? 5 : 0) + (i % 7) << "\n";
  const auto p = write_file("labels.csv", ss.str());
  const auto out = scratch_dir() / "labels.json";
  const auto r = run(concat({"test", "--input", p.string(), "--timestamps", "--variance", "iid",
                             "--report", out.string()},
                            fast_table()));
  REQUIRE(r.code != cli::kExitError);
  const auto j = nlohmann::json::parse(slurp(out));
  const std::size_t start = j["segment"]["start"], end = j["segment"]["end"];
  CHECK(j["segment"]["start_label"] == "t" + std::to_string(start - 1));
  CHECK(j["segment"]["end_label"] == "t" + std::to_string(end - 1));
  CHECK(r.out.find("segment") != std::string::npos);
}

TEST_CASE("quantiles command prints the table layout and caches", "[cli]") {
  const auto cache = (scratch_dir() / "qcache").string();
  const std::vector<std::string> args{"quantiles", "--gamma", "0,0.2", "--grid",  "300",
                                      "--reps",    "1500",    "--seed", "3", "--cache-dir",
                                      cache};
  const auto first = run(args);
  REQUIRE(first.code == 0);
  CHECK(first.err.find("simulating") != std::string::npos);
  CHECK(first.out.find("50%") != std::string::npos);
  CHECK(first.out.find("0.1%") != std::string::npos);
  const auto second = run(args);
  CHECK(second.code == 0);
  CHECK(second.out == first.out);
  CHECK(second.err.find("simulating") == std::string::npos);
  // 1 header line + 1 column header + 2 sides x 2 gammas.
  CHECK(std::count(first.out.begin(), first.out.end(), '\n') == 6);

  const auto low = run({"quantiles", "--gamma", "0.1", "--sided", "two", "--grid", "100",
                        "--reps", "100", "--no-cache"});
  CHECK(low.code == 0);
  CHECK(low.err.find("low-precision") != std::string::npos);
  const auto bad = run({"quantiles", "--gamma", "0.5", "--no-cache"});
  CHECK(bad.code == cli::kExitError);
}

TEST_CASE("simulate command writes a deterministic CSV", "[cli]") {
  const auto cfg = write_file("exp.cfg", "n = 100\nreps = 50\ngammas = 0.1\nalphas = 0.05,0.1\n"
                                         "segment_len = 25\ndelta = 1\nvariance = iid\n"
                                         "table_grid = 300\ntable_reps = 1000\n");
  const auto cache = (scratch_dir() / "scache").string();
  const auto o1 = scratch_dir() / "sim1.csv";
  const auto o2 = scratch_dir() / "sim2.csv";
  auto r = run({"simulate", "--config", cfg.string(), "--out", o1.string(), "--cache-dir", cache,
                "--threads", "1"});
  REQUIRE(r.code == 0);
  r = run({"simulate", "--config", cfg.string(), "--out", o2.string(), "--cache-dir", cache,
           "--threads", "3"});
  REQUIRE(r.code == 0);
  CHECK(slurp(o1) == slurp(o2));
  const std::string csv = slurp(o1);
  CHECK(csv.rfind("kernel,gamma,alpha,rejection,reps,seed\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 2 * 1 * 2);

  const auto sp = run({"simulate", "--config", cfg.string(), "--set", "kernels=wilcoxon",
                       "--size-power", "--cache-dir", cache});
  REQUIRE(sp.code == 0);
  CHECK(sp.out.rfind("kernel,gamma,alpha,size,power,reps,seed\n", 0) == 0);

  const auto bad = run({"simulate", "--set", "n=10", "--set", "segment_len=20", "--no-cache"});
  CHECK(bad.code == cli::kExitError);
  const auto unknown = run({"simulate", "--set", "colour=blue", "--no-cache"});
  CHECK(unknown.code == cli::kExitError);
}
