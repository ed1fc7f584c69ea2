#pragma once

#include <array>
#include <string_view>

#include "kpwire/spectrum.hpp"

namespace kpwire {

/// Hermitian PSD matrix; unit trace when `normalized`.
struct DensityMatrix {
  CMatrix entries;
  bool normalized = true;

  Eigen::Index dim() const { return entries.rows(); }
  Complex trace() const { return entries.trace(); }
  /// Throws DensityError when Hermiticity (1e-12), trace (trace_tol) or
  /// positivity (-1e-10) fails.
  void check(double trace_tol = 1e-10) const;
};

enum class Region { A, B, C, AB, BC, AC, ABC };

inline constexpr std::array<Region, 7> kAllRegions = {
    Region::A, Region::B, Region::C, Region::AB, Region::BC, Region::AC,
    Region::ABC};

std::string_view region_name(Region region);
/// Membership of sectors a, b, c in a region.
std::array<bool, 3> region_sectors(Region region);

/// Radial tables shared by every state of one (L, N, R, Rc): mode values on
/// [0, Rc] at Gauss-Legendre nodes and the annulus Gram matrices
/// 2 pi A_n A_m int_Rc^R J J r dr for both Bessel families. Immutable after
/// construction, safe to share across threads.
class SectorTables {
public:
  SectorTables(int L, int N, const WireGeometry &geom);

  int L() const { return L_; }
  int N() const { return N_; }
  const WireGeometry &geometry() const { return geom_; }
  const RadialQuadrature &inner_rule() const { return inner_; }
  /// Family 0: order L (slots 1, 2). Family 1: order L + 1 (slots 3, 4).
  const Matrix &inner_values(int family) const { return inner_values_[family]; }
  const Matrix &annulus_gram(int family) const { return annulus_gram_[family]; }

private:
  int L_;
  int N_;
  WireGeometry geom_;
  RadialQuadrature inner_;
  std::array<Matrix, 2> inner_values_;
  std::array<Matrix, 2> annulus_gram_;
};

/// Unnormalized 4x4 integrals of psi psi^dagger: over the full disk, the
/// three inner sectors, and the annulus Rc <= r <= R.
struct SectorIntegrals {
  CMatrix disk;
  std::array<CMatrix, 3> sectors; // a, b, c
  CMatrix annulus;

  /// Integral over the disk minus `region`, by inclusion-exclusion.
  CMatrix complement(Region region) const;
};

SectorIntegrals sector_integrals(const VariationalState &state,
                                 const SectorTables &tables);

/// 4x4 RDM from integrating psi psi^dagger over the disk minus `region`,
/// scaled to unit trace.
DensityMatrix sector_rdm(const VariationalState &state, Region region,
                         const SectorTables &tables);
DensityMatrix sector_rdm(const VariationalState &state, Region region,
                         const WireGeometry &geom);

/// |c><c| in the 4N-dimensional coefficient space.
DensityMatrix pure_density(const VariationalState &state);

/// Mode-dependent RDM: entries c_i c_j^* times the overlap of modes i and j on
/// the annulus outside the sectors, scaled to unit trace. Throws DensityError
/// when the state has no weight there.
DensityMatrix mode_rdm(const VariationalState &state, const SectorTables &tables);
DensityMatrix mode_rdm(const VariationalState &state, const WireGeometry &geom);

} // namespace kpwire
