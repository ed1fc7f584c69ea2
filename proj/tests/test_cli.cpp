#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

#include "kpwire/cli.hpp"

using namespace kpwire;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string &tag) {
    path = fs::temp_directory_path() /
           ("kpwire_test_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int count_data_rows(const fs::path &p) {
  std::ifstream in(p);
  std::string line;
  int rows = -1; // column header
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] != '#') {
      ++rows;
    }
  }
  return rows;
}

RunConfig small_config(const fs::path &out) {
  RunConfig cfg = parse_run_config("kz_min=0.05\nkz_max=0.1\nkz_steps=2\nL=0\nN=8\n");
  cfg.out = out;
  return cfg;
}

int run_cli(const std::string &args) {
  const std::string cmd = std::string(KPWIRE_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

} // namespace

TEST_CASE("run config parsing") {
  const auto kv = parse_run_config("# sweep\nN = 12\nL = 0,2\nkz_steps=3\nrc=100,200\nA0=3.5\n");
  CHECK(kv.N == 12);
  CHECK(kv.L_list == std::vector<int>{0, 2});
  CHECK(kv.kz_grid().size() == 3);
  CHECK(kv.kz_grid().front() == -0.3);
  CHECK(kv.kz_grid().back() == 0.3);
  CHECK(kv.rc_values() == std::vector<double>{100.0, 200.0});
  CHECK(kv.wire.params.A0 == 3.5);

  const auto js = parse_run_config(R"({"N": 16, "L": [1, 3], "qpt_target": "md", "seed": 9})");
  CHECK(js.N == 16);
  CHECK(js.L_list == std::vector<int>{1, 3});
  CHECK(js.qpt_target == QptTarget::md);
  CHECK(js.qpt_basis_size() == 64);
  CHECK(js.qpt_options().n_k == 30);
  CHECK(js.qpt_options().tol == 0.1);
  CHECK(js.seed == 9);

  RunConfig defaults;
  CHECK(defaults.qpt_basis_size() == 40);
  CHECK(defaults.qpt_options().n_k == 20);
  CHECK(defaults.qpt_options().tol == 0.01);
  CHECK(defaults.rc_values() == std::vector<double>{150.0});
  CHECK(defaults.hash() == RunConfig{}.hash());
  CHECK(defaults.hash() != kv.hash());

  CHECK_THROWS_AS(parse_run_config("bogus=1\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("N=ten\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("N=0\n").validate(), ConfigError);
  CHECK_THROWS_AS(parse_run_config("rc=700\n").validate(), ConfigError);
  CHECK_THROWS_AS(parse_run_config("kz_steps=0\n").validate(), ConfigError);
  CHECK_THROWS_AS(parse_entropy_kind("all"), ConfigError);
}

TEST_CASE("bands: one grid point gives 4N rows") {
  TempDir tmp("bands");
  ::setenv("KPWIRE_CACHE", (tmp.path / "cache").c_str(), 1);
  RunConfig cfg = parse_run_config("kz_min=0.1\nkz_max=0.1\nkz_steps=1\nL=0\n");
  cfg.out = tmp.path / "out";
  std::ostringstream log;
  REQUIRE(cmd_bands(cfg, log) == kExitOk);
  CHECK(count_data_rows(cfg.out / "bands.csv") == 160);
  CHECK(count_data_rows(cfg.out / "gap_window.csv") == 1);
  const std::string text = slurp(cfg.out / "bands.csv");
  CHECK(text.rfind("# kpwire " + std::string(version()), 0) == 0);
  CHECK(text.find("# config_hash=" + hex64(cfg.hash())) != std::string::npos);
  CHECK(text.find("# seed=1") != std::string::npos);
  ::unsetenv("KPWIRE_CACHE");
}

TEST_CASE("numerical failure exits with 3") {
  TempDir tmp("overflow");
  RunConfig cfg = parse_run_config("kz_min=1e155\nkz_max=1e155\nkz_steps=1\nL=0\nN=4\n");
  cfg.out = tmp.path / "out";
  std::ostringstream log;
  CHECK(cmd_bands(cfg, log) == kExitNumerical);
  CHECK_FALSE(fs::exists(cfg.out / "bands.csv"));
}

TEST_CASE("entropy output is deterministic and reuses the cache") {
  TempDir tmp("entropy");
  ::setenv("KPWIRE_CACHE", (tmp.path / "cache").c_str(), 1);
  std::ostringstream log;
  RunConfig first = small_config(tmp.path / "a");
  RunConfig second = small_config(tmp.path / "b");
  REQUIRE(cmd_entropy(first, EntropyKind::both, log) == kExitOk);
  const auto cached = StateCache(tmp.path / "cache").inspect();
  CHECK(cached.files == 2);
  REQUIRE(cmd_entropy(second, EntropyKind::both, log) == kExitOk);
  for (const char *name : {"topo.csv", "md.csv", "spectrum.csv"}) {
    CHECK(slurp(first.out / name) == slurp(second.out / name));
  }
  CHECK(count_data_rows(first.out / "topo.csv") == 2 * 32);
  CHECK(count_data_rows(first.out / "md.csv") == 2 * 32);

  std::ostringstream report;
  CHECK(cmd_cache(first, "inspect", report) == kExitOk);
  CHECK(report.str().find("state files: 2") != std::string::npos);
  CHECK(cmd_cache(first, "clear", report) == kExitOk);
  CHECK(StateCache(tmp.path / "cache").inspect().files == 0);
  CHECK(cmd_cache(first, "shred", report) == kExitConfig);
  ::unsetenv("KPWIRE_CACHE");
}

TEST_CASE("cached eigenvectors keep their residual") {
  TempDir tmp("cache");
  const StateCache cache(tmp.path);
  const MaterialParams p;
  const WireGeometry g;
  const auto fresh = cached_solve(cache, p, g, 1, 0.07, 10, kDefaultMargin);
  const auto loaded = cached_solve(cache, p, g, 1, 0.07, 10, kDefaultMargin);
  REQUIRE(loaded.size() == 40);
  const auto H = assemble(p, g, 1, 0.07, 10).H;
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    CHECK(loaded[i].energy == fresh[i].energy);
    CHECK(loaded[i].label == fresh[i].label);
    CHECK((H * loaded[i].coeffs - loaded[i].energy * loaded[i].coeffs).norm() < 1e-10);
  }
  CHECK(cache.inspect().files == 1);

  const CacheKey other{p.hash(), 600.0, 10, 2, 0.07};
  CHECK_FALSE(cache.load(other).has_value());

  std::stringstream ss;
  CachedSolution sol{other, Vector::LinSpaced(4, 0, 3), CMatrix::Identity(4, 4)};
  write_solution(ss, sol);
  const auto back = read_solution(ss);
  CHECK(back.energies == sol.energies);
  CHECK(back.vectors == sol.vectors);
}

TEST_CASE("write_atomic leaves no partial file") {
  TempDir tmp("atomic");
  const fs::path target = tmp.path / "sub" / "x.csv";
  CHECK_THROWS(write_atomic(target, [](std::ostream &out) {
    out << "partial";
    throw std::runtime_error("boom");
  }));
  CHECK_FALSE(fs::exists(target));
  CHECK(fs::is_empty(tmp.path / "sub"));
  write_atomic(target, [](std::ostream &out) { out << "done\n"; });
  CHECK(slurp(target) == "done\n");
}

TEST_CASE("qpt: fixed seed reproduces cost traces") {
  TempDir tmp("qpt");
  ::setenv("KPWIRE_CACHE", (tmp.path / "cache").c_str(), 1);
  std::ostringstream log;
  RunConfig a = parse_run_config("N=8\nqpt_N=8\nqpt_kz=0.1\nmax_iters=40\n");
  a.out = tmp.path / "a";
  RunConfig b = a;
  b.out = tmp.path / "b";
  const int code = cmd_qpt(a, log);
  CHECK((code == kExitOk || code == kExitNumerical));
  CHECK(cmd_qpt(b, log) == code);
  for (const auto &entry : fs::directory_iterator(a.out)) {
    const auto name = entry.path().filename().string();
    if (name.rfind("qpt_cost_", 0) == 0 || name.rfind("qpt_kraus_", 0) == 0) {
      CHECK(slurp(entry.path()) == slurp(b.out / name));
    }
  }
  CHECK(fs::exists(a.out / "qpt_summary_abc.csv"));
  ::unsetenv("KPWIRE_CACHE");
}

TEST_CASE("command-line front end") {
  TempDir tmp("front");
  const fs::path bad = tmp.path / "bad.cfg";
  std::ofstream(bad) << "N=8\nnot_a_key=1\n";
  const fs::path out = tmp.path / "out";
  CHECK(run_cli("bands --config " + bad.string() + " --out " + out.string()) == kExitConfig);
  CHECK_FALSE(fs::exists(out));
  CHECK(run_cli("frobnicate") == kExitConfig);
  CHECK(run_cli("--version") == 0);
  CHECK(run_cli("bands --workers nope") == kExitConfig);

  const fs::path good = tmp.path / "good.cfg";
  std::ofstream(good) << "kz_min=0\nkz_max=0\nkz_steps=1\nL=1\nN=6\n";
  CHECK(run_cli("bands --config " + good.string() + " --out " + out.string()) == kExitOk);
  CHECK(count_data_rows(out / "bands.csv") == 24);
}
