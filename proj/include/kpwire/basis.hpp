#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kpwire/types.hpp"

namespace kpwire {

/// Four-band k.p coefficients for Bi2Se3. Energies in eV, lengths in Angstrom.
///
/// C1 and M1 multiply k_z^2 and A0 multiplies k_+-, so their units are
/// eV.A^2, eV.A^2 and eV.A respectively (the commonly quoted table lists
/// them as eV.A, eV.A and eV.A^2, which is dimensionally inconsistent).
struct MaterialParams {
  double C0 = -0.0068; // eV
  double C1 = 1.3;     // eV A^2
  double C2 = 19.6;    // eV A^2
  double M0 = 0.28;    // eV
  double M1 = -10.0;   // eV A^2
  double M2 = -56.6;   // eV A^2
  double A0 = 4.1;     // eV A
  double B0 = 2.2;     // eV A

  /// epsilon(k) = C0 + C1 kz^2 + C2 kpar^2
  double epsilon(double kz, double kpar2) const {
    return C0 + C1 * kz * kz + C2 * kpar2;
  }
  /// M(k) = M0 + M1 kz^2 + M2 kpar^2
  double mass(double kz, double kpar2) const {
    return M0 + M1 * kz * kz + M2 * kpar2;
  }

  bool band_inverted() const { return M0 * M2 < 0.0 && M0 * M1 < 0.0; }
  void validate() const;
  /// Stable 64-bit FNV-1a hash of the bit patterns, used as a cache key.
  std::uint64_t hash() const;

  bool operator==(const MaterialParams &) const = default;
};

struct WireGeometry {
  double R = 600.0;  // A, wire radius
  double Rc = 150.0; // A, radius of the three sectors

  void validate() const;
  bool operator==(const WireGeometry &) const = default;
};

/// One Dirichlet Bessel mode A J_{L_eff}(alpha r / R) e^{i L_eff phi}.
struct BasisMode {
  int slot = 1;  // spinor component 1..4
  int L_eff = 0; // L for slots 1-2, L+1 for slots 3-4
  int n = 1;     // root index, 1-based
  double alpha = 0.0;
  double A = 0.0; // 1/A
};

struct AngularSector {
  double phi_lo = 0.0;
  double phi_hi = 0.0;
  double r_lo = 0.0;
  double r_hi = 0.0;
};

/// The three inner sectors, each spanning 2 pi / 3 and r <= Rc.
AngularSector sector_a(const WireGeometry &geom);
AngularSector sector_b(const WireGeometry &geom);
AngularSector sector_c(const WireGeometry &geom);

// ---------------------------------------------------------------------------
// Bessel functions of the first kind, integer order.

/// J_0(x) .. J_{max_order}(x) written into `out` (size max_order + 1).
/// Normalized Miller backward recurrence; absolute error ~1e-16.
void bessel_j_orders(int max_order, double x, std::span<double> out);

double bessel_j(int order, double x);

/// n-th positive zero (n >= 1) of J_{L_eff}. Negative orders share the zeros
/// of |L_eff|. Throws IterationError if refinement does not converge.
double bessel_root(int L_eff, int n);

/// First `count` positive zeros of J_{L_eff}, ascending.
std::vector<double> bessel_roots(int L_eff, int count);

/// A = 1 / (sqrt(pi) R J_{L_eff+1}(alpha_n)).
double normalization(int L_eff, int n, double R);
double normalization_at_root(int L_eff, double alpha, double R);

/// Slot-major ordering: slot 1 modes n = 1..N, then slot 2, slot 3, slot 4.
std::vector<BasisMode> make_modes(int L, int N, double R);

inline int slot_order(int L, int slot) { return slot <= 2 ? L : L + 1; }

// ---------------------------------------------------------------------------
// Quadrature and overlaps.

/// Composite Gauss-Legendre rule with `panels` equal panels of `order` nodes.
struct RadialQuadrature {
  Vector nodes;
  Vector weights;

  static RadialQuadrature composite(double lo, double hi, int panels,
                                    int order = 20);
  /// Panel count resolving integrands oscillating with wavenumber up to
  /// `max_wavenumber` (1/A) on [lo, hi].
  static RadialQuadrature for_wavenumber(double lo, double hi,
                                         double max_wavenumber);
};

/// Gauss-Legendre nodes/weights on [-1, 1].
void gauss_legendre(int order, Vector &nodes, Vector &weights);

/// Integral over [r_lo, r_hi] of J_L(a r) J_L(b r) r dr by adaptive-checked
/// composite Gauss-Legendre. Throws QuadratureError when the two-resolution
/// estimate exceeds 1e-10 (r_hi - r_lo) max|integrand|.
double radial_overlap(int L, double a, double b, double r_lo, double r_hi);

/// Mixed-order variant, integral of J_L1(a r) J_L2(b r) r dr.
double radial_overlap(int L1, int L2, double a, double b, double r_lo,
                      double r_hi);

/// Closed-form (Lommel) value of the integral of J_L(a r) J_L(b r) r dr over
/// [0, x]. Valid for a != b and for a == b.
double lommel_integral(int L, double a, double b, double x);

/// Integral of e^{i dL phi} over [phi_lo, phi_hi].
Complex angular_overlap(int dL, double phi_lo, double phi_hi);

/// Values of the normalized radial factors A_n J_{L_eff}(alpha_n r / R) at the
/// quadrature nodes: rows are nodes, columns are modes.
Matrix mode_values(const RadialQuadrature &quad, int L_eff,
                   std::span<const double> roots, double R);

/// G_{nm} = sum_k w_k r_k F1(k, n) F2(k, m): radial Gram matrix of two tables
/// evaluated on the same rule.
Matrix radial_gram(const RadialQuadrature &quad, const Matrix &F1,
                   const Matrix &F2);

// ---------------------------------------------------------------------------
// Configuration

struct WireConfig {
  MaterialParams params;
  WireGeometry geom;
};

/// Sets the field named `key` (C0..B0, R, Rc). Returns false for unknown keys.
bool set_wire_field(WireConfig &cfg, std::string_view key, double value);

/// Parses `key = value` lines (# comments allowed) or a flat JSON object.
/// Unknown keys and malformed values raise ConfigError.
WireConfig parse_wire_config(std::string_view text);
WireConfig load_wire_config(const std::string &path);

} // namespace kpwire
