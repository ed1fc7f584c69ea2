#include "kpwire/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <ostream>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "kpwire/entropy.hpp"
#include "kpwire/rdm.hpp"

namespace kpwire {

std::string_view label_name(StateLabel label) {
  switch (label) {
  case StateLabel::valence:
    return "valence";
  case StateLabel::conduction:
    return "conduction";
  case StateLabel::topological_lower:
    return "topological-lower";
  case StateLabel::topological_upper:
    return "topological-upper";
  }
  return "unknown";
}

StateLabel parse_label(std::string_view name) {
  for (auto label : {StateLabel::valence, StateLabel::conduction,
                     StateLabel::topological_lower,
                     StateLabel::topological_upper}) {
    if (label_name(label) == name) {
      return label;
    }
  }
  throw ConfigError("unknown state label '" + std::string(name) + "'");
}

namespace {

std::string point_context(int L, double kz) {
  std::ostringstream os;
  os << "(L = " << L << ", kz = " << kz << ")";
  return os.str();
}

} // namespace

std::vector<VariationalState> solve(const HamiltonianBlock &block) {
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(block.H);
  if (eig.info() != Eigen::Success) {
    throw IterationError("eigensolver failed to converge at " +
                         point_context(block.L, block.kz));
  }
  const Vector &values = eig.eigenvalues();
  const CMatrix &vectors = eig.eigenvectors();
  const double scale =
      std::max(std::abs(values[0]), std::abs(values[values.size() - 1]));
  const double residual =
      (block.H * vectors - vectors * values.asDiagonal()).colwise().norm().maxCoeff();
  if (!(residual <= 1e-8 * std::max(scale, 1e-300))) {
    throw IterationError("eigenpair residual too large at " +
                         point_context(block.L, block.kz));
  }

  std::vector<VariationalState> states;
  states.reserve(values.size());
  for (Eigen::Index j = 0; j < values.size(); ++j) {
    VariationalState s;
    s.L = block.L;
    s.kz = block.kz;
    s.N = block.N;
    s.energy = values[j];
    s.coeffs = vectors.col(j);
    s.label = s.energy < 0.0 ? StateLabel::valence : StateLabel::conduction;
    states.push_back(std::move(s));
  }
  return states;
}

std::vector<VariationalState> classify(std::vector<VariationalState> states,
                                       const GapWindow &window, double margin) {
  const double lo = window.lo + margin;
  const double hi = window.hi - margin;
  if (!(lo < hi)) {
    const double mid = window.mid();
    for (auto &s : states) {
      s.label = s.energy < mid ? StateLabel::valence : StateLabel::conduction;
    }
    return states;
  }
  std::vector<std::size_t> inside;
  for (std::size_t i = 0; i < states.size(); ++i) {
    auto &s = states[i];
    if (s.energy <= lo) {
      s.label = StateLabel::valence;
    } else if (s.energy >= hi) {
      s.label = StateLabel::conduction;
    } else {
      inside.push_back(i);
    }
  }
  std::sort(inside.begin(), inside.end(), [&](std::size_t a, std::size_t b) {
    return states[a].energy < states[b].energy;
  });
  if (inside.size() == 1) {
    auto &s = states[inside.front()];
    s.label = s.energy < window.mid() ? StateLabel::topological_lower
                                      : StateLabel::topological_upper;
  } else {
    const std::size_t half = inside.size() / 2;
    for (std::size_t k = 0; k < inside.size(); ++k) {
      states[inside[k]].label = k < half ? StateLabel::topological_lower
                                         : StateLabel::topological_upper;
    }
  }
  return states;
}

int count_topological(const std::vector<VariationalState> &states) {
  return static_cast<int>(std::count_if(
      states.begin(), states.end(),
      [](const VariationalState &s) { return is_topological(s.label); }));
}

std::vector<VariationalState> solve_point(const MaterialParams &params,
                                          const WireGeometry &geom, int L,
                                          double kz, int N, double margin) {
  const auto block = assemble(params, geom, L, kz, N);
  return classify(solve(block), gap_window_unchecked(params, kz), margin);
}

BandTable band_sweep(const MaterialParams &params, const WireGeometry &geom,
                     const std::vector<int> &L_list,
                     const std::vector<double> &kz_grid, int N, double margin,
                     int workers) {
  if (L_list.empty() || kz_grid.empty()) {
    throw ConfigError("band_sweep: empty grid");
  }
  BandTable table;
  table.N = N;
  table.R = geom.R;
  table.params_hash = params.hash();
  table.margin = margin;

  struct Task {
    int L;
    double kz;
    std::span<const double> roots_l;
    std::span<const double> roots_l1;
  };
  std::vector<std::vector<double>> root_cache;
  std::vector<Task> tasks;
  for (int L : L_list) {
    root_cache.push_back(bessel_roots(L, N));
    root_cache.push_back(bessel_roots(L + 1, N));
  }
  for (std::size_t li = 0; li < L_list.size(); ++li) {
    for (double kz : kz_grid) {
      tasks.push_back({L_list[li], kz, root_cache[2 * li], root_cache[2 * li + 1]});
    }
  }

  table.points.resize(tasks.size());
  auto run = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t i = begin; i < tasks.size(); i += stride) {
      const Task &t = tasks[i];
      BandPoint p;
      p.L = t.L;
      p.kz = t.kz;
      p.window = gap_window_unchecked(params, t.kz);
      try {
        const auto block = assemble(params, geom.R, t.L, t.kz, N, t.roots_l,
                                    t.roots_l1);
        const auto states = classify(solve(block), p.window, margin);
        for (const auto &s : states) {
          p.energies.push_back(s.energy);
          p.labels.push_back(s.label);
        }
        p.in_gap = count_topological(states);
      } catch (const Error &e) {
        throw IterationError(std::string(e.what()) + " [grid point " +
                             point_context(t.L, t.kz) + "]");
      }
      table.points[i] = std::move(p);
    }
  };

  const int n_workers = std::max(1, workers);
  if (n_workers == 1) {
    run(0, 1);
  } else {
    std::vector<std::future<void>> jobs;
    for (int w = 0; w < n_workers; ++w) {
      jobs.push_back(std::async(std::launch::async, run, w, n_workers));
    }
    for (auto &j : jobs) {
      j.get();
    }
  }
  return table;
}

void write_band_rows(std::ostream &out, const BandTable &table) {
  out.precision(12);
  for (const auto &p : table.points) {
    for (std::size_t i = 0; i < p.energies.size(); ++i) {
      out << p.L << ',' << p.kz << ',' << i << ',' << p.energies[i] << ','
          << label_name(p.labels[i]) << '\n';
    }
  }
}

void write_window_rows(std::ostream &out, const BandTable &table) {
  out.precision(12);
  for (const auto &p : table.points) {
    out << p.L << ',' << p.kz << ',' << p.window.lo << ',' << p.window.hi << ','
        << p.in_gap << '\n';
  }
}

std::vector<ConvergenceRow>
convergence_report(const MaterialParams &params, const WireGeometry &geom,
                   int L, double kz, const std::vector<int> &sizes,
                   StateLabel which, double margin) {
  if (sizes.size() < 2 || !std::is_sorted(sizes.begin(), sizes.end())) {
    throw ConfigError("convergence_report: need >= 2 ascending sizes");
  }
  if (!is_topological(which)) {
    throw ConfigError("convergence_report: target must be a topological label");
  }
  std::vector<ConvergenceRow> rows;
  std::vector<DensityMatrix> rhos;
  std::optional<double> tracked;
  for (int N : sizes) {
    const auto states = solve_point(params, geom, L, kz, N, margin);
    const VariationalState *pick = nullptr;
    for (const auto &s : states) {
      if (!is_topological(s.label)) {
        continue;
      }
      if (!tracked) {
        if (s.label == which) {
          pick = &s;
          break;
        }
      } else if (pick == nullptr || std::abs(s.energy - *tracked) <
                                        std::abs(pick->energy - *tracked)) {
        pick = &s;
      }
    }
    if (pick == nullptr) {
      std::ostringstream os;
      os << "convergence_report: no topological state to track at N = " << N;
      throw ClassificationError(os.str());
    }
    tracked = pick->energy;
    const SectorTables tables(L, N, geom);
    rhos.push_back(sector_rdm(*pick, Region::ABC, tables));
    rows.push_back({N, pick->energy, std::nullopt});
  }
  for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
    rows[i].fidelity_to_next =
        rhos[i].entries == rhos[i + 1].entries
            ? 1.0
            : fidelity(rhos[i], rhos[i + 1]);
  }
  return rows;
}

} // namespace kpwire
