#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "kpwire/io.hpp"
#include "kpwire/qpt.hpp"

namespace kpwire {

enum class QptTarget { abc, md };

/// Everything a command needs. Keys in config files match the field names
/// below (plus the material/geometry keys C0..B0, R, Rc).
struct RunConfig {
  WireConfig wire;
  double kz_min = -0.3;
  double kz_max = 0.3;
  int kz_steps = 101;
  std::vector<int> L_list{0, 1, 2, 3};
  int N = 40;
  double margin = kDefaultMargin;
  std::vector<double> rc_list; // empty: the geometry's Rc

  std::vector<int> conv_sizes{20, 24, 28, 32, 36, 40, 44, 48, 52, 56, 60, 64};
  int conv_L = 0;
  double conv_kz = 0.1;
  StateLabel conv_label = StateLabel::topological_upper;

  QptTarget qpt_target = QptTarget::abc;
  int qpt_N = 0; // 0: 40 for abc, 64 for md
  int qpt_L = 0;
  std::vector<double> qpt_kz{0.02, 0.04, 0.06, 0.08, 0.1};
  StateLabel qpt_label = StateLabel::topological_upper;
  int n_k = 0;      // 0: 20 for abc, 30 for md
  double tol = 0.0; // 0: 0.01 for abc, 0.1 for md
  double lambda_reg = 0.0;
  std::uint64_t seed = 1;
  int max_iters = 3000;
  double step = 1.0;

  std::filesystem::path out = "out";
  int workers = 1;

  std::vector<double> kz_grid() const;
  std::vector<double> rc_values() const;
  QptOptions qpt_options() const;
  int qpt_basis_size() const;
  /// Throws ConfigError on any inconsistency.
  void validate() const;
  /// Canonical JSON text; its FNV-1a hash goes into provenance headers.
  std::string canonical() const;
  std::uint64_t hash() const;
};

/// Applies one `key = value` setting. Throws ConfigError for unknown keys or
/// malformed values.
void set_run_field(RunConfig &cfg, std::string_view key, std::string_view value);

/// key=value lines (# comments) or a flat JSON object.
RunConfig parse_run_config(std::string_view text);
RunConfig load_run_config(const std::string &path);

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;

enum class EntropyKind { topo, md, both };
EntropyKind parse_entropy_kind(std::string_view name);

/// Each command validates, computes, writes its files atomically into
/// cfg.out, and returns an exit code. Diagnostics go to `log`.
int cmd_bands(const RunConfig &cfg, std::ostream &log);
int cmd_entropy(const RunConfig &cfg, EntropyKind kind, std::ostream &log);
int cmd_qpt(const RunConfig &cfg, std::ostream &log);
int cmd_convergence(const RunConfig &cfg, std::ostream &log);
int cmd_cache(const RunConfig &cfg, std::string_view action, std::ostream &out);

} // namespace kpwire
