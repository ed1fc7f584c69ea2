#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kpwire/hamiltonian.hpp"

namespace kpwire {

enum class StateLabel { valence, conduction, topological_lower, topological_upper };

std::string_view label_name(StateLabel label);
StateLabel parse_label(std::string_view name);
inline bool is_topological(StateLabel label) {
  return label == StateLabel::topological_lower ||
         label == StateLabel::topological_upper;
}

class ClassificationError : public Error {
public:
  using Error::Error;
};

/// One Rayleigh-Ritz eigenpair; `coeffs` is unit-norm and slot-major.
struct VariationalState {
  int L = 0;
  double kz = 0.0;
  int N = 0;
  double energy = 0.0; // eV
  CVector coeffs;
  StateLabel label = StateLabel::valence;
};

inline constexpr double kDefaultMargin = 0.002; // eV

/// All 4N eigenpairs in ascending energy. Labels are provisional until
/// `classify` runs. Throws IterationError naming (L, kz) on failure.
std::vector<VariationalState> solve(const HamiltonianBlock &block);

/// Labels states against the bulk gap window: strictly inside
/// (lo + margin, hi - margin) is topological (lower/upper by energy order),
/// below is valence, above conduction. A degenerate window falls back to the
/// sign of E - midpoint.
std::vector<VariationalState> classify(std::vector<VariationalState> states,
                                       const GapWindow &window, double margin);

int count_topological(const std::vector<VariationalState> &states);

struct BandPoint {
  int L = 0;
  double kz = 0.0;
  GapWindow window;
  std::vector<double> energies;
  std::vector<StateLabel> labels;
  int in_gap = 0;
};

struct BandTable {
  int N = 0;
  double R = 0.0;
  std::uint64_t params_hash = 0;
  double margin = kDefaultMargin;
  std::vector<BandPoint> points; // L-major, then kz in grid order
};

/// Solves and classifies every (L, kz). `workers` > 1 fans grid points out
/// over threads; the result does not depend on the worker count.
BandTable band_sweep(const MaterialParams &params, const WireGeometry &geom,
                     const std::vector<int> &L_list,
                     const std::vector<double> &kz_grid, int N,
                     double margin = kDefaultMargin, int workers = 1);

/// Convenience: assemble + solve + classify for one grid point.
std::vector<VariationalState> solve_point(const MaterialParams &params,
                                          const WireGeometry &geom, int L,
                                          double kz, int N,
                                          double margin = kDefaultMargin);

/// CSV rows `L,k_z,index,energy_eV,label` (no header).
void write_band_rows(std::ostream &out, const BandTable &table);
/// CSV rows `L,k_z,E_lo_eV,E_hi_eV,in_gap` (no header).
void write_window_rows(std::ostream &out, const BandTable &table);

struct ConvergenceRow {
  int N = 0;
  double energy = 0.0;
  /// Fidelity between this size's rho_ABC and the next size's; empty for the
  /// last size.
  std::optional<double> fidelity_to_next;
};

/// Tracks one topological state (`which` is topological_lower or
/// topological_upper at the first size, nearest in energy afterwards) across
/// ascending basis sizes. Throws ClassificationError when tracking fails.
std::vector<ConvergenceRow>
convergence_report(const MaterialParams &params, const WireGeometry &geom,
                   int L, double kz, const std::vector<int> &sizes,
                   StateLabel which = StateLabel::topological_upper,
                   double margin = kDefaultMargin);

} // namespace kpwire
