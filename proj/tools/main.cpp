// Command-line front end: bands, entropy, qpt, convergence, cache.
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kpwire/cli.hpp"

namespace {

struct Overrides {
  std::string config;
  std::string out;
  int workers = 0;
  std::optional<std::uint64_t> seed;
  std::vector<double> rc;
  int nk = 0;
  std::optional<double> tol;
  std::optional<double> lambda;
};

void add_common(CLI::App *cmd, Overrides &o) {
  cmd->add_option("--config", o.config, "key=value or JSON run config");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--workers", o.workers, "worker threads");
  cmd->add_option("--seed", o.seed, "RNG seed");
  cmd->add_option("--rc", o.rc, "sector radii (A), comma separated")
      ->delimiter(',');
  cmd->add_option("--nk", o.nk, "number of Kraus operators");
  cmd->add_option("--tol", o.tol, "QPT cost tolerance");
  cmd->add_option("--lambda", o.lambda, "L1 regularization strength");
}

kpwire::RunConfig build_config(const Overrides &o) {
  kpwire::RunConfig cfg =
      o.config.empty() ? kpwire::RunConfig{} : kpwire::load_run_config(o.config);
  if (!o.out.empty()) {
    cfg.out = o.out;
  }
  if (o.workers > 0) {
    cfg.workers = o.workers;
  }
  if (o.seed) {
    cfg.seed = *o.seed;
  }
  if (!o.rc.empty()) {
    cfg.rc_list = o.rc;
  }
  if (o.nk > 0) {
    cfg.n_k = o.nk;
  }
  if (o.tol) {
    cfg.tol = *o.tol;
  }
  if (o.lambda) {
    cfg.lambda_reg = *o.lambda;
  }
  return cfg;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"k.p nanowire band structure, entropies and process tomography"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kpwire::version()));

  Overrides o;
  std::string which = "both";
  std::string target;
  std::string action;

  auto *bands = app.add_subcommand("bands", "band sweep -> bands.csv");
  auto *entropy = app.add_subcommand("entropy", "topological / mode entropies");
  entropy->add_option("--which", which, "topo, md or both");
  auto *qpt = app.add_subcommand("qpt", "Kraus process tomography");
  qpt->add_option("--target", target, "abc or md");
  auto *conv = app.add_subcommand("convergence", "basis-size convergence");
  auto *cache = app.add_subcommand("cache", "inspect or clear the state cache");
  cache->add_option("action", action, "inspect or clear")->required();
  for (auto *cmd : {bands, entropy, qpt, conv, cache}) {
    add_common(cmd, o);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kpwire::kExitConfig;
  }

  kpwire::RunConfig cfg;
  kpwire::EntropyKind kind = kpwire::EntropyKind::both;
  try {
    cfg = build_config(o);
    if (!target.empty()) {
      kpwire::set_run_field(cfg, "qpt_target", target);
    }
    kind = kpwire::parse_entropy_kind(which);
    cfg.validate();
  } catch (const kpwire::ConfigError &e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kpwire::kExitConfig;
  }

  if (*bands) {
    return kpwire::cmd_bands(cfg, std::cerr);
  }
  if (*entropy) {
    return kpwire::cmd_entropy(cfg, kind, std::cerr);
  }
  if (*qpt) {
    return kpwire::cmd_qpt(cfg, std::cerr);
  }
  if (*conv) {
    return kpwire::cmd_convergence(cfg, std::cerr);
  }
  return kpwire::cmd_cache(cfg, action, std::cout);
}
