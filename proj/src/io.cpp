#include "kpwire/io.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>
#include <unistd.h>

#include <nlohmann/json.hpp>

#ifndef KPWIRE_VERSION
#define KPWIRE_VERSION "0.0.0"
#endif

namespace kpwire {

namespace fs = std::filesystem;

std::string_view version() { return KPWIRE_VERSION; }

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(value));
  return buf;
}

void write_provenance(std::ostream &out, const Provenance &prov) {
  out << "# kpwire " << version() << '\n'
      << "# command=" << prov.command << '\n'
      << "# config_hash=" << hex64(prov.config_hash) << '\n'
      << "# seed=" << prov.seed << '\n';
}

void write_atomic(const fs::path &path,
                  const std::function<void(std::ostream &)> &fill, bool binary) {
  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path());
  }
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, binary ? std::ios::binary : std::ios::out);
    if (!out) {
      throw Error("cannot open " + tmp.string() + " for writing");
    }
    try {
      fill(out);
    } catch (...) {
      out.close();
      fs::remove(tmp);
      throw;
    }
    out.flush();
    if (!out) {
      fs::remove(tmp);
      throw Error("write failed for " + path.string());
    }
  }
  fs::rename(tmp, path);
}

std::string CacheKey::file_name() const {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%s_R%.6g_N%d_L%d_kz%+.9f.bin",
                hex64(params_hash).c_str(), R, N, L, kz);
  return buf;
}

namespace {

void put_doubles(std::ostream &out, const double *data, std::size_t count) {
  static_assert(sizeof(double) == 8);
  out.write(reinterpret_cast<const char *>(data),
            static_cast<std::streamsize>(count * sizeof(double)));
}

void get_doubles(std::istream &in, double *data, std::size_t count) {
  if (!in.read(reinterpret_cast<char *>(data),
               static_cast<std::streamsize>(count * sizeof(double)))) {
    throw Error("cache file truncated");
  }
}

} // namespace

void write_solution(std::ostream &out, const CachedSolution &s) {
  const nlohmann::json header = {
      {"format", "kpwire-states"},
      {"version", std::string(version())},
      {"params_hash", hex64(s.key.params_hash)},
      {"R", s.key.R},
      {"N", s.key.N},
      {"L", s.key.L},
      {"kz", s.key.kz},
      {"dim", s.energies.size()},
      {"layout", "f64le energies[dim], then vectors column-major (re, im)"}};
  out << header.dump() << '\n';
  put_doubles(out, s.energies.data(), s.energies.size());
  put_doubles(out, reinterpret_cast<const double *>(s.vectors.data()),
              2 * s.vectors.size());
}

CachedSolution read_solution(std::istream &in) {
  std::string line;
  if (!std::getline(in, line)) {
    throw Error("cache file has no header");
  }
  const auto header = nlohmann::json::parse(line);
  if (header.value("format", "") != "kpwire-states") {
    throw Error("not a kpwire state cache file");
  }
  CachedSolution s;
  s.key.params_hash =
      std::stoull(header.at("params_hash").get<std::string>(), nullptr, 16);
  s.key.R = header.at("R").get<double>();
  s.key.N = header.at("N").get<int>();
  s.key.L = header.at("L").get<int>();
  s.key.kz = header.at("kz").get<double>();
  const auto dim = header.at("dim").get<Eigen::Index>();
  s.energies.resize(dim);
  s.vectors.resize(dim, dim);
  get_doubles(in, s.energies.data(), dim);
  get_doubles(in, reinterpret_cast<double *>(s.vectors.data()), 2 * dim * dim);
  return s;
}

StateCache StateCache::from_environment(const fs::path &fallback) {
  if (const char *env = std::getenv("KPWIRE_CACHE")) {
    return StateCache(env);
  }
  return StateCache(fallback);
}

std::optional<CachedSolution> StateCache::load(const CacheKey &key) const {
  if (!enabled()) {
    return std::nullopt;
  }
  std::ifstream in(states_dir() / key.file_name(), std::ios::binary);
  if (!in) {
    return std::nullopt;
  }
  CachedSolution s = read_solution(in);
  if (s.key.params_hash != key.params_hash || s.key.N != key.N ||
      s.key.L != key.L || s.key.R != key.R || s.key.kz != key.kz) {
    return std::nullopt;
  }
  return s;
}

void StateCache::store(const CachedSolution &solution) const {
  if (!enabled()) {
    return;
  }
  write_atomic(states_dir() / solution.key.file_name(),
               [&](std::ostream &out) { write_solution(out, solution); }, true);
}

StateCache::Summary StateCache::inspect() const {
  Summary s;
  if (!enabled() || !fs::exists(states_dir())) {
    return s;
  }
  for (const auto &entry : fs::directory_iterator(states_dir())) {
    if (entry.is_regular_file() && entry.path().extension() == ".bin") {
      ++s.files;
      s.bytes += entry.file_size();
    }
  }
  return s;
}

std::size_t StateCache::clear() const {
  std::size_t removed = 0;
  if (!enabled() || !fs::exists(states_dir())) {
    return removed;
  }
  for (const auto &entry : fs::directory_iterator(states_dir())) {
    if (entry.is_regular_file() && entry.path().extension() == ".bin") {
      fs::remove(entry.path());
      ++removed;
    }
  }
  return removed;
}

std::vector<VariationalState> cached_solve(const StateCache &cache,
                                           const MaterialParams &params,
                                           const WireGeometry &geom, int L,
                                           double kz, int N, double margin) {
  const CacheKey key{params.hash(), geom.R, N, L, kz};
  std::vector<VariationalState> states;
  if (auto hit = cache.load(key)) {
    for (Eigen::Index j = 0; j < hit->energies.size(); ++j) {
      VariationalState s;
      s.L = L;
      s.kz = kz;
      s.N = N;
      s.energy = hit->energies[j];
      s.coeffs = hit->vectors.col(j);
      states.push_back(std::move(s));
    }
  } else {
    states = solve(assemble(params, geom, L, kz, N));
    if (cache.enabled()) {
      CachedSolution sol;
      sol.key = key;
      sol.energies.resize(static_cast<Eigen::Index>(states.size()));
      sol.vectors.resize(4 * N, static_cast<Eigen::Index>(states.size()));
      for (std::size_t j = 0; j < states.size(); ++j) {
        sol.energies[j] = states[j].energy;
        sol.vectors.col(j) = states[j].coeffs;
      }
      cache.store(sol);
    }
  }
  return classify(std::move(states), gap_window_unchecked(params, kz), margin);
}

} // namespace kpwire
