#pragma once

#include <iosfwd>
#include <vector>

#include "kpwire/basis.hpp"

namespace kpwire {

/// Rayleigh-Ritz matrix of the four-band Hamiltonian for one (L, k_z) in the
/// Bessel spinor basis. Rows/columns follow `modes` (slot-major).
struct HamiltonianBlock {
  int L = 0;
  double kz = 0.0; // 1/A
  int N = 0;
  double R = 0.0;
  CMatrix H; // eV, 4N x 4N
  std::vector<BasisMode> modes;
};

/// Same-order cross-family overlaps
///   X_{nm} = 2 pi A^L_n A^{L+1}_m  int_0^R J_L(a_n r) J_L(b_m r) r dr
/// with a_n = alpha^L_n / R, b_m = alpha^{L+1}_m / R, in closed (Lommel) form.
Matrix cross_family_overlap(int L, std::span<const double> roots_l,
                            std::span<const double> roots_l1, double R);

/// Builds <f_i|H|f_j>. k_par^2 is diagonal with eigenvalue (alpha/R)^2;
/// k_- maps A J_{L+1}(q r) e^{i(L+1)phi} to -i q A J_L(q r) e^{iL phi}.
HamiltonianBlock assemble(const MaterialParams &params,
                          const WireGeometry &geom, int L, double kz, int N);

/// Lower-level entry point taking precomputed root tables; throws
/// DimensionError when either table is shorter than N.
HamiltonianBlock assemble(const MaterialParams &params, double R, int L,
                          double kz, int N, std::span<const double> roots_l,
                          std::span<const double> roots_l1);

struct BulkBands {
  double minus = 0.0; // eV
  double plus = 0.0;  // eV
};

/// Doubly degenerate bulk eigenvalues at (k_z, k_par).
BulkBands bulk_dispersion(const MaterialParams &params, double kz,
                          double kpar);

struct GapWindow {
  double lo = 0.0; // max of the lower bulk band over k_par
  double hi = 0.0; // min of the upper bulk band over k_par
  double mid() const { return 0.5 * (lo + hi); }
};

inline constexpr double kGapScanMax = 0.2; // 1/A
inline constexpr int kGapScanSamples = 10000;

/// Bulk gap at fixed k_z from a uniform k_par scan on [0, kGapScanMax].
/// Throws GapError when the window is inverted.
GapWindow gap_window(const MaterialParams &params, double kz);

/// Same scan without the inversion check.
GapWindow gap_window_unchecked(const MaterialParams &params, double kz);

/// Debug dump: JSON header line {"L":..,"kz":..,"N":..,"R":..,"rows":..}
/// followed by row-major interleaved (re, im) little-endian doubles.
void write_block(std::ostream &out, const HamiltonianBlock &block);
HamiltonianBlock read_block(std::istream &in);

} // namespace kpwire
