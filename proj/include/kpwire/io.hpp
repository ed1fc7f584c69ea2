#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kpwire/spectrum.hpp"

namespace kpwire {

std::string_view version();

/// FNV-1a over bytes.
std::uint64_t fnv1a(std::string_view bytes);
std::string hex64(std::uint64_t value);

struct Provenance {
  std::string command;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
};

/// Header comment lines `# key=value` shared by every CSV output.
void write_provenance(std::ostream &out, const Provenance &prov);

/// Writes through `fill` into a sibling temp file, then renames over `path`.
/// Parent directories are created.
void write_atomic(const std::filesystem::path &path,
                  const std::function<void(std::ostream &)> &fill,
                  bool binary = false);

// ---------------------------------------------------------------------------
// Eigenpair cache: one file per (params hash, R, N, L, k_z). The file is a
// single JSON header line followed by little-endian f64 payload: 4N energies,
// then the 4N x 4N eigenvector matrix column-major as interleaved (re, im).

struct CacheKey {
  std::uint64_t params_hash = 0;
  double R = 0.0;
  int N = 0;
  int L = 0;
  double kz = 0.0;

  std::string file_name() const;
};

struct CachedSolution {
  CacheKey key;
  Vector energies;
  CMatrix vectors;
};

class StateCache {
public:
  /// Root from KPWIRE_CACHE, falling back to `fallback`. Empty root disables
  /// the cache.
  static StateCache from_environment(const std::filesystem::path &fallback);
  explicit StateCache(std::filesystem::path root) : root_(std::move(root)) {}

  bool enabled() const { return !root_.empty(); }
  const std::filesystem::path &root() const { return root_; }
  std::filesystem::path states_dir() const { return root_ / "states"; }

  std::optional<CachedSolution> load(const CacheKey &key) const;
  void store(const CachedSolution &solution) const;

  struct Summary {
    std::size_t files = 0;
    std::uintmax_t bytes = 0;
  };
  Summary inspect() const;
  /// Removes every cached state file; returns the count removed.
  std::size_t clear() const;

private:
  std::filesystem::path root_;
};

void write_solution(std::ostream &out, const CachedSolution &solution);
CachedSolution read_solution(std::istream &in);

/// Solve one (L, k_z) through the cache: reuse a stored eigen-decomposition
/// when present, otherwise solve and store it. States come back classified.
std::vector<VariationalState> cached_solve(const StateCache &cache,
                                           const MaterialParams &params,
                                           const WireGeometry &geom, int L,
                                           double kz, int N, double margin);

} // namespace kpwire
