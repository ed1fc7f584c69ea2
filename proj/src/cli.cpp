#include "kpwire/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <future>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "kpwire/entropy.hpp"

namespace kpwire {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) {
    return {};
  }
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

template <class T> T parse_scalar(std::string_view key, std::string_view text) {
  text = trim(text);
  T value{};
  const auto [ptr, ec] =
      std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ConfigError("bad value '" + std::string(text) + "' for key '" +
                      std::string(key) + "'");
  }
  return value;
}

template <class T>
std::vector<T> parse_list(std::string_view key, std::string_view text) {
  std::vector<T> out;
  text = trim(text);
  if (!text.empty() && text.front() == '[' && text.back() == ']') {
    text = text.substr(1, text.size() - 2);
  }
  while (!trim(text).empty()) {
    const auto comma = text.find(',');
    out.push_back(parse_scalar<T>(key, text.substr(0, comma)));
    if (comma == std::string_view::npos) {
      break;
    }
    text = text.substr(comma + 1);
  }
  if (out.empty()) {
    throw ConfigError("empty list for key '" + std::string(key) + "'");
  }
  return out;
}

template <class F> void parallel_for(std::size_t n, int workers, F &&body) {
  const auto n_workers =
      static_cast<std::size_t>(std::clamp<long>(workers, 1, std::max<long>(1, n)));
  if (n_workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) {
      body(i);
    }
    return;
  }
  std::vector<std::future<void>> jobs;
  for (std::size_t w = 0; w < n_workers; ++w) {
    jobs.push_back(std::async(std::launch::async, [&, w] {
      for (std::size_t i = w; i < n; i += n_workers) {
        body(i);
      }
    }));
  }
  for (auto &j : jobs) {
    j.get();
  }
}

std::string state_context(int L, double kz, StateLabel label) {
  std::ostringstream os;
  os << "(L = " << L << ", kz = " << kz << ", " << label_name(label) << ")";
  return os.str();
}

int guarded(std::ostream &log, const std::function<void()> &body) {
  try {
    body();
    return kExitOk;
  } catch (const ConfigError &e) {
    log << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const Error &e) {
    log << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::filesystem::filesystem_error &e) {
    log << "i/o failure: " << e.what() << '\n';
    return kExitNumerical;
  }
}

StateCache cache_for(const RunConfig &cfg) {
  return StateCache::from_environment(cfg.out / "cache");
}

Provenance provenance(const RunConfig &cfg, std::string command) {
  return {std::move(command), cfg.hash(), cfg.seed};
}

} // namespace

std::vector<double> RunConfig::kz_grid() const {
  if (kz_steps == 1) {
    return {kz_min};
  }
  std::vector<double> grid(kz_steps);
  for (int i = 0; i < kz_steps; ++i) {
    grid[i] = kz_min + (kz_max - kz_min) * i / (kz_steps - 1);
  }
  return grid;
}

std::vector<double> RunConfig::rc_values() const {
  return rc_list.empty() ? std::vector<double>{wire.geom.Rc} : rc_list;
}

int RunConfig::qpt_basis_size() const {
  if (qpt_N > 0) {
    return qpt_N;
  }
  return qpt_target == QptTarget::abc ? 40 : 64;
}

QptOptions RunConfig::qpt_options() const {
  QptOptions o;
  o.n_k = n_k > 0 ? n_k : (qpt_target == QptTarget::abc ? 20 : 30);
  o.tol = tol > 0.0 ? tol : (qpt_target == QptTarget::abc ? 0.01 : 0.1);
  o.lambda_reg = lambda_reg;
  o.max_iters = max_iters;
  o.step = step;
  o.seed = seed;
  return o;
}

void RunConfig::validate() const {
  wire.params.validate();
  wire.geom.validate();
  if (kz_steps < 1 || (kz_steps > 1 && !(kz_max > kz_min))) {
    throw ConfigError("k_z grid must have >= 1 point and kz_max > kz_min");
  }
  if (L_list.empty() || N < 1 || !(margin >= 0.0)) {
    throw ConfigError("need a nonempty L list, N >= 1 and margin >= 0");
  }
  for (double rc : rc_values()) {
    if (!(rc > 0.0 && rc < wire.geom.R)) {
      throw ConfigError("every Rc must satisfy 0 < Rc < R");
    }
  }
  if (conv_sizes.size() < 2 || !std::is_sorted(conv_sizes.begin(), conv_sizes.end()) ||
      conv_sizes.front() < 1) {
    throw ConfigError("conv_sizes must hold >= 2 ascending positive sizes");
  }
  if (!is_topological(conv_label) || !is_topological(qpt_label)) {
    throw ConfigError("conv_label and qpt_label must be topological labels");
  }
  if (qpt_kz.empty() || n_k < 0 || tol < 0.0 || lambda_reg < 0.0 ||
      max_iters < 0 || !(step > 0.0)) {
    throw ConfigError("invalid QPT options");
  }
  const int dim = 4 * qpt_basis_size();
  if (qpt_target == QptTarget::md && (dim & (dim - 1)) != 0) {
    throw ConfigError("md QPT needs 4N to be a power of two");
  }
  if (workers < 1) {
    throw ConfigError("workers must be >= 1");
  }
}

std::string RunConfig::canonical() const {
  const auto &p = wire.params;
  nlohmann::json j = {
      {"C0", p.C0}, {"C1", p.C1}, {"C2", p.C2}, {"M0", p.M0},
      {"M1", p.M1}, {"M2", p.M2}, {"A0", p.A0}, {"B0", p.B0},
      {"R", wire.geom.R}, {"Rc", wire.geom.Rc},
      {"kz_min", kz_min}, {"kz_max", kz_max}, {"kz_steps", kz_steps},
      {"L", L_list}, {"N", N}, {"margin", margin}, {"rc", rc_values()},
      {"conv_sizes", conv_sizes}, {"conv_L", conv_L}, {"conv_kz", conv_kz},
      {"conv_label", label_name(conv_label)},
      {"qpt_target", qpt_target == QptTarget::abc ? "abc" : "md"},
      {"qpt_N", qpt_basis_size()}, {"qpt_L", qpt_L}, {"qpt_kz", qpt_kz},
      {"qpt_label", label_name(qpt_label)}, {"n_k", qpt_options().n_k},
      {"tol", qpt_options().tol}, {"lambda", lambda_reg}, {"seed", seed},
      {"max_iters", max_iters}, {"step", step}};
  return j.dump();
}

std::uint64_t RunConfig::hash() const { return fnv1a(canonical()); }

void set_run_field(RunConfig &cfg, std::string_view key, std::string_view value) {
  static constexpr std::string_view wire_keys[] = {"C0", "C1", "C2", "M0", "M1",
                                                   "M2", "A0", "B0", "R",  "Rc"};
  if (std::find(std::begin(wire_keys), std::end(wire_keys), key) !=
      std::end(wire_keys)) {
    set_wire_field(cfg.wire, key, parse_scalar<double>(key, value));
    return;
  }
  if (key == "kz_min") {
    cfg.kz_min = parse_scalar<double>(key, value);
  } else if (key == "kz_max") {
    cfg.kz_max = parse_scalar<double>(key, value);
  } else if (key == "kz_steps") {
    cfg.kz_steps = parse_scalar<int>(key, value);
  } else if (key == "L") {
    cfg.L_list = parse_list<int>(key, value);
  } else if (key == "N") {
    cfg.N = parse_scalar<int>(key, value);
  } else if (key == "margin") {
    cfg.margin = parse_scalar<double>(key, value);
  } else if (key == "rc") {
    cfg.rc_list = parse_list<double>(key, value);
  } else if (key == "conv_sizes") {
    cfg.conv_sizes = parse_list<int>(key, value);
  } else if (key == "conv_L") {
    cfg.conv_L = parse_scalar<int>(key, value);
  } else if (key == "conv_kz") {
    cfg.conv_kz = parse_scalar<double>(key, value);
  } else if (key == "conv_label") {
    cfg.conv_label = parse_label(trim(value));
  } else if (key == "qpt_target") {
    const auto v = trim(value);
    if (v == "abc") {
      cfg.qpt_target = QptTarget::abc;
    } else if (v == "md") {
      cfg.qpt_target = QptTarget::md;
    } else {
      throw ConfigError("qpt_target must be abc or md");
    }
  } else if (key == "qpt_N") {
    cfg.qpt_N = parse_scalar<int>(key, value);
  } else if (key == "qpt_L") {
    cfg.qpt_L = parse_scalar<int>(key, value);
  } else if (key == "qpt_kz") {
    cfg.qpt_kz = parse_list<double>(key, value);
  } else if (key == "qpt_label") {
    cfg.qpt_label = parse_label(trim(value));
  } else if (key == "n_k") {
    cfg.n_k = parse_scalar<int>(key, value);
  } else if (key == "tol") {
    cfg.tol = parse_scalar<double>(key, value);
  } else if (key == "lambda") {
    cfg.lambda_reg = parse_scalar<double>(key, value);
  } else if (key == "seed") {
    cfg.seed = parse_scalar<std::uint64_t>(key, value);
  } else if (key == "max_iters") {
    cfg.max_iters = parse_scalar<int>(key, value);
  } else if (key == "step") {
    cfg.step = parse_scalar<double>(key, value);
  } else if (key == "out") {
    cfg.out = std::string(trim(value));
  } else if (key == "workers") {
    cfg.workers = parse_scalar<int>(key, value);
  } else {
    throw ConfigError("unknown config key '" + std::string(key) + "'");
  }
}

RunConfig parse_run_config(std::string_view text) {
  RunConfig cfg;
  const auto body = trim(text);
  if (!body.empty() && body.front() == '{') {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::parse_error &e) {
      throw ConfigError(std::string("malformed JSON config: ") + e.what());
    }
    for (const auto &[key, value] : j.items()) {
      std::string flat;
      if (value.is_string()) {
        flat = value.get<std::string>();
      } else if (value.is_array()) {
        for (const auto &item : value) {
          flat += (flat.empty() ? "" : ",") + item.dump();
        }
      } else {
        flat = value.dump();
      }
      set_run_field(cfg, key, flat);
    }
  } else {
    std::istringstream in{std::string(body)};
    std::string line;
    while (std::getline(in, line)) {
      std::string_view view = line;
      if (auto hash = view.find('#'); hash != std::string_view::npos) {
        view = view.substr(0, hash);
      }
      view = trim(view);
      if (view.empty()) {
        continue;
      }
      const auto eq = view.find('=');
      if (eq == std::string_view::npos) {
        throw ConfigError("malformed config line: '" + std::string(view) + "'");
      }
      set_run_field(cfg, trim(view.substr(0, eq)), trim(view.substr(eq + 1)));
    }
  }
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::string &path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file '" + path + "'");
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

EntropyKind parse_entropy_kind(std::string_view name) {
  if (name == "topo") {
    return EntropyKind::topo;
  }
  if (name == "md") {
    return EntropyKind::md;
  }
  if (name == "both") {
    return EntropyKind::both;
  }
  throw ConfigError("entropy kind must be topo, md or both");
}

int cmd_bands(const RunConfig &cfg, std::ostream &log) {
  return guarded(log, [&] {
    cfg.validate();
    const auto grid = cfg.kz_grid();
    const BandTable table = band_sweep(cfg.wire.params, cfg.wire.geom,
                                       cfg.L_list, grid, cfg.N, cfg.margin,
                                       cfg.workers);
    const auto prov = provenance(cfg, "bands");
    write_atomic(cfg.out / "bands.csv", [&](std::ostream &out) {
      write_provenance(out, prov);
      out << "L,k_z,index,energy_eV,label\n";
      write_band_rows(out, table);
    });
    write_atomic(cfg.out / "gap_window.csv", [&](std::ostream &out) {
      write_provenance(out, prov);
      out << "L,k_z,E_lo_eV,E_hi_eV,in_gap\n";
      write_window_rows(out, table);
    });
    for (const auto &p : table.points) {
      if (p.in_gap != 2) {
        log << "note: " << p.in_gap << " in-gap states at (L = " << p.L
            << ", kz = " << p.kz << ")\n";
      }
    }
  });
}

int cmd_entropy(const RunConfig &cfg, EntropyKind kind, std::ostream &log) {
  return guarded(log, [&] {
    cfg.validate();
    const auto cache = cache_for(cfg);
    const auto grid = cfg.kz_grid();
    const auto rcs = cfg.rc_values();
    const bool topo = kind != EntropyKind::md;
    const bool md = kind != EntropyKind::topo;

    struct Point {
      int L;
      double kz;
    };
    std::vector<Point> points;
    for (int L : cfg.L_list) {
      for (double kz : grid) {
        points.push_back({L, kz});
      }
    }
    std::vector<std::string> topo_rows(points.size());
    std::vector<std::string> md_rows(points.size());
    std::vector<std::string> spectrum_rows(points.size());

    std::vector<std::vector<SectorTables>> tables(cfg.L_list.size());
    for (std::size_t li = 0; li < cfg.L_list.size(); ++li) {
      for (double rc : rcs) {
        WireGeometry g = cfg.wire.geom;
        g.Rc = rc;
        tables[li].emplace_back(cfg.L_list[li], cfg.N, g);
      }
    }

    parallel_for(points.size(), cfg.workers, [&](std::size_t i) {
      const auto [L, kz] = points[i];
      const std::size_t li = i / grid.size();
      const auto states =
          cached_solve(cache, cfg.wire.params, cfg.wire.geom, L, kz, cfg.N,
                       cfg.margin);
      std::ostringstream t, m, s;
      t.precision(12);
      m.precision(12);
      s.precision(12);
      for (const auto &state : states) {
        for (const auto &tab : tables[li]) {
          const double rc = tab.geometry().Rc;
          try {
            if (topo) {
              const auto r = topological_entropy(state, tab);
              t << L << ',' << kz << ',' << label_name(state.label) << ','
                << state.energy;
              for (double v : r.S) {
                t << ',' << v;
              }
              t << ',' << r.S_t << ',' << r.abs_S_t << ',' << rc << '\n';
            }
            if (md) {
              const auto rho = mode_rdm(state, tab);
              m << L << ',' << kz << ',' << label_name(state.label) << ','
                << state.energy << ',' << von_neumann(rho) << ',' << rc << '\n';
              if (is_topological(state.label)) {
                const auto es = entanglement_spectrum(rho);
                for (Eigen::Index k = 0; k < es.lambdas.size(); ++k) {
                  s << L << ',' << kz << ',' << label_name(state.label) << ','
                    << rc << ',' << k + 1 << ',' << es.lambdas[k] << ',';
                  if (k < es.zetas.size()) {
                    s << es.zetas[k];
                  }
                  s << ',' << es.fit.c << ',' << es.fit.alpha << ','
                    << es.fit.length << ',' << es.fit.quality << '\n';
                }
              }
            }
          } catch (const Error &e) {
            throw DensityError(std::string(e.what()) + " at " +
                               state_context(L, kz, state.label));
          }
        }
      }
      topo_rows[i] = t.str();
      md_rows[i] = m.str();
      spectrum_rows[i] = s.str();
    });

    const auto prov = provenance(cfg, "entropy");
    if (topo) {
      write_atomic(cfg.out / "topo.csv", [&](std::ostream &out) {
        write_provenance(out, prov);
        out << "L,k_z,label,energy_eV,S_A,S_B,S_C,S_AB,S_BC,S_AC,S_ABC,S_t,"
               "abs_S_t,Rc\n";
        for (const auto &r : topo_rows) {
          out << r;
        }
      });
    }
    if (md) {
      write_atomic(cfg.out / "md.csv", [&](std::ostream &out) {
        write_provenance(out, prov);
        out << "L,k_z,label,energy_eV,S_MD,Rc\n";
        for (const auto &r : md_rows) {
          out << r;
        }
      });
      write_atomic(cfg.out / "spectrum.csv", [&](std::ostream &out) {
        write_provenance(out, prov);
        out << "L,k_z,label,Rc,k,lambda_k,zeta_k,fit_c,fit_alpha,fit_length,"
               "fit_quality\n";
        for (const auto &r : spectrum_rows) {
          out << r;
        }
      });
    }
  });
}

int cmd_qpt(const RunConfig &cfg, std::ostream &log) {
  return guarded(log, [&] {
    cfg.validate();
    const auto cache = cache_for(cfg);
    const int N = cfg.qpt_basis_size();
    const QptOptions opts = cfg.qpt_options();
    const bool abc = cfg.qpt_target == QptTarget::abc;
    int n_qubits = 2;
    if (!abc) {
      n_qubits = 0;
      while ((1 << n_qubits) < 4 * N) {
        ++n_qubits;
      }
    }
    const MeasurementSet M = measurement_set(
        n_qubits, abc ? MeasurementMode::full_pauli : MeasurementMode::x_string);
    const SectorTables tables(cfg.qpt_L, N, cfg.wire.geom);

    struct Outcome {
      double kz = 0.0;
      bool found = false;
      QptRun run;
      double S_target = 0.0;
      double S_pred = 0.0;
    };
    std::vector<Outcome> outcomes(cfg.qpt_kz.size());
    parallel_for(outcomes.size(), cfg.workers, [&](std::size_t i) {
      Outcome &o = outcomes[i];
      o.kz = cfg.qpt_kz[i];
      const auto states = cached_solve(cache, cfg.wire.params, cfg.wire.geom,
                                       cfg.qpt_L, o.kz, N, cfg.margin);
      const auto it = std::find_if(states.begin(), states.end(), [&](const auto &s) {
        return s.label == cfg.qpt_label;
      });
      if (it == states.end()) {
        return;
      }
      o.found = true;
      const DensityMatrix target =
          abc ? sector_rdm(*it, Region::ABC, tables) : mode_rdm(*it, tables);
      o.run = learn_process(pure_density(*it), target, M, opts);
      o.S_target = von_neumann(target);
      o.S_pred = von_neumann(o.run.predicted);
    });

    const auto prov = provenance(cfg, "qpt");
    const std::string tag = abc ? "abc" : "md";
    int succeeded = 0;
    nlohmann::json summary = nlohmann::json::array();
    for (const auto &o : outcomes) {
      if (!o.found) {
        log << "no " << label_name(cfg.qpt_label) << " state at kz = " << o.kz
            << '\n';
        summary.push_back({{"k_z", o.kz}, {"status", "no target state"}});
        continue;
      }
      succeeded += o.run.converged ? 1 : 0;
      std::ostringstream id;
      id << tag << "_L" << cfg.qpt_L << "_kz" << o.kz;
      write_atomic(cfg.out / ("qpt_cost_" + id.str() + ".csv"),
                   [&](std::ostream &out) {
                     write_provenance(out, prov);
                     out.precision(12);
                     out << "iteration,cost\n";
                     for (std::size_t k = 0; k < o.run.cost_trace.size(); ++k) {
                       out << k << ',' << o.run.cost_trace[k] << '\n';
                     }
                   });
      write_atomic(cfg.out / ("qpt_kraus_" + id.str() + ".bin"),
                   [&](std::ostream &out) {
                     const nlohmann::json header = {
                         {"n_k", o.run.result.n_k()},
                         {"rows", o.run.result.rows()},
                         {"cols", o.run.result.cols()},
                         {"layout", "f64le, operators in order, each "
                                    "column-major (re, im)"}};
                     out << header.dump() << '\n';
                     for (const auto &k : o.run.result.ops) {
                       out.write(reinterpret_cast<const char *>(k.data()),
                                 static_cast<std::streamsize>(k.size() * 16));
                     }
                   },
                   true);
      summary.push_back({{"k_z", o.kz},
                         {"status", o.run.status},
                         {"converged", o.run.converged},
                         {"iterations", o.run.cost_trace.size() - 1},
                         {"final_cost", o.run.cost_trace.back()},
                         {"S_target", o.S_target},
                         {"S_predicted", o.S_pred},
                         {"abs_dS", std::abs(o.S_pred - o.S_target)},
                         {"fidelity", o.run.fidelity_to_target},
                         {"trace_factor", o.run.trace_factor},
                         {"completeness_defect", o.run.result.completeness_defect}});
    }
    write_atomic(cfg.out / ("qpt_summary_" + tag + ".csv"), [&](std::ostream &out) {
      write_provenance(out, prov);
      out.precision(12);
      out << "k_z,status,iterations,final_cost,S_target,S_predicted,abs_dS,"
             "fidelity\n";
      for (const auto &o : outcomes) {
        if (!o.found) {
          out << o.kz << ",no target state,,,,,,\n";
          continue;
        }
        out << o.kz << ',' << (o.run.converged ? "converged" : "failed") << ','
            << o.run.cost_trace.size() - 1 << ',' << o.run.cost_trace.back()
            << ',' << o.S_target << ',' << o.S_pred << ','
            << std::abs(o.S_pred - o.S_target) << ','
            << o.run.fidelity_to_target << '\n';
      }
    });
    const nlohmann::json doc = {{"version", std::string(version())},
                                {"config_hash", hex64(cfg.hash())},
                                {"seed", cfg.seed},
                                {"options",
                                 {{"n_k", opts.n_k},
                                  {"tol", opts.tol},
                                  {"lambda", opts.lambda_reg},
                                  {"max_iters", opts.max_iters},
                                  {"step", opts.step},
                                  {"measurements", std::string(mode_name(M.mode))}}},
                                {"runs", summary}};
    write_atomic(cfg.out / ("qpt_summary_" + tag + ".json"),
                 [&](std::ostream &out) { out << doc.dump(2) << '\n'; });
    if (succeeded == 0) {
      throw IterationError("no QPT run reached the tolerance");
    }
  });
}

int cmd_convergence(const RunConfig &cfg, std::ostream &log) {
  return guarded(log, [&] {
    cfg.validate();
    const auto rows =
        convergence_report(cfg.wire.params, cfg.wire.geom, cfg.conv_L,
                           cfg.conv_kz, cfg.conv_sizes, cfg.conv_label, cfg.margin);
    write_atomic(cfg.out / "convergence.csv", [&](std::ostream &out) {
      write_provenance(out, provenance(cfg, "convergence"));
      out.precision(15);
      out << "N,energy_eV,fidelity_to_next\n";
      for (const auto &r : rows) {
        out << r.N << ',' << r.energy << ',';
        if (r.fidelity_to_next) {
          out << *r.fidelity_to_next;
        }
        out << '\n';
      }
    });
  });
}

int cmd_cache(const RunConfig &cfg, std::string_view action, std::ostream &out) {
  return guarded(out, [&] {
    const auto cache = cache_for(cfg);
    if (action == "inspect") {
      const auto s = cache.inspect();
      out << "cache root: " << cache.root().string() << '\n'
          << "state files: " << s.files << '\n'
          << "bytes: " << s.bytes << '\n';
    } else if (action == "clear") {
      out << "removed " << cache.clear() << " state files from "
          << cache.root().string() << '\n';
    } else {
      throw ConfigError("cache action must be inspect or clear");
    }
  });
}

} // namespace kpwire
