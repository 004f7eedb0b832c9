#pragma once

#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "episcan/error.hpp"
#include "episcan/limitdist.hpp"

namespace episcan {

// On-disk layout of a cached table (text, one item per line):
//
//   episcan-quantile-table
//   format_version=1
//   gamma=<shortest round-trip decimal>
//   sided=one|two
//   grid=<int>
//   reps=<int>
//   seed=<uint64>
//   replicates
//   <reps lines, ascending, shortest round-trip decimal>
//
// Doubles are written with std::to_chars and read with std::from_chars, so a
// stored table reloads bit for bit.
inline constexpr int kTableFormatVersion = 1;
inline constexpr const char* kTableMagic = "episcan-quantile-table";
inline constexpr const char* kCacheEnvVar = "EPISCAN_CACHE_DIR";

inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s, const std::string& what) {
  double v = 0.0;
  const char* end = s.data() + s.size();
  const auto res = std::from_chars(s.data(), end, v);
  if (res.ec != std::errc{} || res.ptr != end) {
    throw parse_error("cannot parse " + what + " '" + s + "'");
  }
  return v;
}

inline std::uint64_t parse_u64(const std::string& s, const std::string& what) {
  std::uint64_t v = 0;
  const char* end = s.data() + s.size();
  const auto res = std::from_chars(s.data(), end, v);
  if (res.ec != std::errc{} || res.ptr != end) {
    throw parse_error("cannot parse " + what + " '" + s + "'");
  }
  return v;
}

inline void write_table(std::ostream& out, const QuantileTable& t) {
  out << kTableMagic << '\n'
      << "format_version=" << kTableFormatVersion << '\n'
      << "gamma=" << format_double(t.gamma) << '\n'
      << "sided=" << to_string(t.sided) << '\n'
      << "grid=" << t.grid << '\n'
      << "reps=" << t.reps << '\n'
      << "seed=" << t.seed << '\n'
      << "replicates\n";
  for (double v : t.replicates) out << format_double(v) << '\n';
}

inline QuantileTable read_table(std::istream& in) {
  std::string line;
  std::size_t row = 0;
  auto next = [&]() -> std::string& {
    if (!std::getline(in, line)) throw parse_error("truncated quantile table", row + 1);
    ++row;
    return line;
  };
  auto field = [&](const char* name) {
    const std::string& l = next();
    const std::string prefix = std::string(name) + "=";
    if (l.rfind(prefix, 0) != 0) throw parse_error("expected '" + prefix + "'", row);
    return l.substr(prefix.size());
  };
  if (next() != kTableMagic) throw parse_error("not a quantile table file", row);
  if (parse_u64(field("format_version"), "format_version") != kTableFormatVersion) {
    throw parse_error("unsupported table format version", row);
  }
  QuantileTable t;
  t.gamma = parse_double(field("gamma"), "gamma");
  t.sided = sided_from_string(field("sided"));
  t.grid = parse_u64(field("grid"), "grid");
  t.reps = parse_u64(field("reps"), "reps");
  t.seed = parse_u64(field("seed"), "seed");
  if (next() != "replicates") throw parse_error("expected 'replicates'", row);
  t.replicates.reserve(t.reps);
  for (std::size_t i = 0; i < t.reps; ++i) {
    t.replicates.push_back(parse_double(next(), "replicate"));
  }
  if (!std::is_sorted(t.replicates.begin(), t.replicates.end())) {
    throw parse_error("replicates are not sorted");
  }
  return t;
}

// Resolution order: explicit path, $EPISCAN_CACHE_DIR, $XDG_CACHE_HOME/episcan,
// $HOME/.cache/episcan, ./.episcan-cache.
inline std::filesystem::path resolve_cache_dir(const std::string& explicit_dir = "") {
  if (!explicit_dir.empty()) return explicit_dir;
  if (const char* e = std::getenv(kCacheEnvVar); e && *e) return e;
  if (const char* x = std::getenv("XDG_CACHE_HOME"); x && *x) {
    return std::filesystem::path(x) / "episcan";
  }
  if (const char* h = std::getenv("HOME"); h && *h) {
    return std::filesystem::path(h) / ".cache" / "episcan";
  }
  return ".episcan-cache";
}

// Directory of cached tables, one file per key. A lookup hits only if the
// stored header matches the requested key exactly.
class TableCache {
 public:
  explicit TableCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

  const std::filesystem::path& dir() const noexcept { return dir_; }

  std::filesystem::path path_for(const TableKey& k) const {
    return dir_ / ("table_g" + format_double(k.gamma) + "_" + to_string(k.sided) + "_grid" +
                   std::to_string(k.grid) + "_reps" + std::to_string(k.reps) + "_seed" +
                   std::to_string(k.seed) + ".tbl");
  }

  std::optional<QuantileTable> load(const TableKey& k) const {
    const auto p = path_for(k);
    std::ifstream in(p);
    if (!in) return std::nullopt;
    try {
      QuantileTable t = read_table(in);
      if (t.key() == k && t.replicates.size() == k.reps) return t;
    } catch (const std::exception&) {
      // A corrupt or foreign file is treated as a miss and overwritten later.
    }
    return std::nullopt;
  }

  // Writes to a temporary file in the cache directory, then renames it into
  // place so concurrent readers never see a partial table.
  void store(const QuantileTable& t) const {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw io_error("cannot create cache directory " + dir_.string() + ": " + ec.message());
    const auto target = path_for(t.key());
    std::random_device rd;
    auto tmp = target;
    tmp += ".tmp" + std::to_string(rd());
    {
      std::ofstream out(tmp, std::ios::trunc);
      if (!out) throw io_error("cannot write " + tmp.string());
      write_table(out, t);
      out.flush();
      if (!out) throw io_error("failed writing " + tmp.string());
    }
    std::filesystem::rename(tmp, target, ec);
    if (ec) {
      std::filesystem::remove(tmp);
      throw io_error("cannot move table into " + target.string() + ": " + ec.message());
    }
  }

 private:
  std::filesystem::path dir_;
};

// Looks every key up in `cache` (if given); simulates the misses in one
// shared-path batch per (grid, reps, seed) and stores them. Returns tables in
// the order of `keys`. `on_miss` is called once per simulated key.
inline std::vector<QuantileTable> obtain_tables(
    const std::vector<TableKey>& keys, const TableCache* cache,
    unsigned threads = default_threads(),
    const std::function<void(const TableKey&)>& on_miss = {}) {
  std::vector<std::optional<QuantileTable>> found(keys.size());
  if (cache) {
    for (std::size_t i = 0; i < keys.size(); ++i) found[i] = cache->load(keys[i]);
  }
  std::vector<bool> done(keys.size(), false);
  for (std::size_t i = 0; i < keys.size(); ++i) done[i] = found[i].has_value();
  for (std::size_t i = 0; i < keys.size(); ++i) {
    if (done[i]) continue;
    // Group with every other miss sharing grid, reps and seed.
    std::vector<std::size_t> group;
    std::vector<std::pair<double, Sided>> functionals;
    for (std::size_t j = i; j < keys.size(); ++j) {
      if (done[j] || keys[j].grid != keys[i].grid || keys[j].reps != keys[i].reps ||
          keys[j].seed != keys[i].seed) {
        continue;
      }
      bool dup = false;
      for (std::size_t g : group) dup = dup || keys[g] == keys[j];
      if (!dup) functionals.emplace_back(keys[j].gamma, keys[j].sided);
      group.push_back(j);
    }
    for (const auto& [g, s] : functionals) {
      if (on_miss) on_miss(TableKey{g, s, keys[i].grid, keys[i].reps, keys[i].seed});
    }
    auto tables = simulate_tables(functionals, keys[i].grid, keys[i].reps, keys[i].seed, threads);
    for (const auto& t : tables) {
      if (cache) cache->store(t);
    }
    for (std::size_t j : group) {
      for (const auto& t : tables) {
        if (t.key() == keys[j]) found[j] = t;
      }
      done[j] = true;
    }
  }
  std::vector<QuantileTable> out;
  out.reserve(keys.size());
  for (auto& f : found) out.push_back(std::move(*f));
  return out;
}

inline QuantileTable obtain_table(const TableKey& key, const TableCache* cache,
                                  unsigned threads = default_threads()) {
  return std::move(obtain_tables({key}, cache, threads).front());
}

}  // namespace episcan
