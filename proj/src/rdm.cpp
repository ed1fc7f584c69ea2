#include "kpwire/rdm.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

namespace kpwire {

void DensityMatrix::check(double trace_tol) const {
  if (entries.rows() != entries.cols() || entries.rows() == 0) {
    throw DensityError("density matrix must be square and non-empty");
  }
  if ((entries - entries.adjoint()).cwiseAbs().maxCoeff() > 1e-12) {
    throw DensityError("density matrix is not Hermitian");
  }
  if (normalized && std::abs(entries.trace() - Complex(1.0)) > trace_tol) {
    throw DensityError("density matrix trace deviates from 1");
  }
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(entries, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -1e-10) {
    throw DensityError("density matrix has a negative eigenvalue");
  }
}

std::string_view region_name(Region region) {
  switch (region) {
  case Region::A: return "A";
  case Region::B: return "B";
  case Region::C: return "C";
  case Region::AB: return "AB";
  case Region::BC: return "BC";
  case Region::AC: return "AC";
  case Region::ABC: return "ABC";
  }
  return "?";
}

std::array<bool, 3> region_sectors(Region region) {
  switch (region) {
  case Region::A: return {true, false, false};
  case Region::B: return {false, true, false};
  case Region::C: return {false, false, true};
  case Region::AB: return {true, true, false};
  case Region::BC: return {false, true, true};
  case Region::AC: return {true, false, true};
  case Region::ABC: return {true, true, true};
  }
  return {false, false, false};
}

SectorTables::SectorTables(int L, int N, const WireGeometry &geom)
    : L_(L), N_(N), geom_(geom) {
  geom.validate();
  if (N < 1) {
    throw DimensionError("SectorTables: basis size must be >= 1");
  }
  const auto roots_l = bessel_roots(L, N);
  const auto roots_l1 = bessel_roots(L + 1, N);
  const double k_max = std::max(roots_l.back(), roots_l1.back()) / geom.R;

  inner_ = RadialQuadrature::for_wavenumber(0.0, geom.Rc, k_max);
  inner_values_[0] = mode_values(inner_, L, roots_l, geom.R);
  inner_values_[1] = mode_values(inner_, L + 1, roots_l1, geom.R);

  const auto outer = RadialQuadrature::for_wavenumber(geom.Rc, geom.R, k_max);
  const Matrix outer_l = mode_values(outer, L, roots_l, geom.R);
  const Matrix outer_l1 = mode_values(outer, L + 1, roots_l1, geom.R);
  annulus_gram_[0] = 2.0 * kPi * radial_gram(outer, outer_l, outer_l);
  annulus_gram_[1] = 2.0 * kPi * radial_gram(outer, outer_l1, outer_l1);
}

CMatrix SectorIntegrals::complement(Region region) const {
  CMatrix out = disk;
  const auto members = region_sectors(region);
  for (int k = 0; k < 3; ++k) {
    if (members[k]) {
      out -= sectors[k];
    }
  }
  return out;
}

namespace {

int family_of(int slot_index) { return slot_index < 2 ? 0 : 1; }

void require_shape(const VariationalState &state, const SectorTables &tables) {
  if (state.coeffs.size() != 4 * tables.N() || state.L != tables.L()) {
    throw DimensionError("state does not match the sector tables (L, N)");
  }
}

} // namespace

SectorIntegrals sector_integrals(const VariationalState &state,
                                 const SectorTables &tables) {
  require_shape(state, tables);
  const int N = tables.N();
  const int L = tables.L();
  const auto &rule = tables.inner_rule();
  const Vector wr = rule.weights.cwiseProduct(rule.nodes);

  std::array<CVector, 4> envelope; // radial envelope of each slot at the nodes
  for (int s = 0; s < 4; ++s) {
    envelope[s] = tables.inner_values(family_of(s)).cast<Complex>() *
                  state.coeffs.segment(s * N, N);
  }
  CMatrix radial(4, 4);
  for (int s = 0; s < 4; ++s) {
    for (int t = 0; t < 4; ++t) {
      Complex acc(0.0);
      for (Eigen::Index k = 0; k < wr.size(); ++k) {
        acc += wr[k] * envelope[s][k] * std::conj(envelope[t][k]);
      }
      radial(s, t) = acc;
    }
  }

  const WireGeometry &geom = tables.geometry();
  const std::array<AngularSector, 3> sectors = {
      sector_a(geom), sector_b(geom), sector_c(geom)};

  SectorIntegrals out;
  out.disk = CMatrix::Zero(4, 4);
  out.annulus = CMatrix::Zero(4, 4);
  for (int s = 0; s < 4; ++s) {
    for (int t = 0; t < 4; ++t) {
      if (family_of(s) != family_of(t)) {
        continue;
      }
      const auto cs = state.coeffs.segment(s * N, N);
      const auto ct = state.coeffs.segment(t * N, N);
      out.disk(s, t) = ct.dot(cs);
      const Matrix &gram = tables.annulus_gram(family_of(s));
      out.annulus(s, t) = cs.transpose() * gram.cast<Complex>() * ct.conjugate();
    }
  }
  for (int k = 0; k < 3; ++k) {
    CMatrix U(4, 4);
    for (int s = 0; s < 4; ++s) {
      for (int t = 0; t < 4; ++t) {
        const int dL = slot_order(L, s + 1) - slot_order(L, t + 1);
        U(s, t) = radial(s, t) *
                  angular_overlap(dL, sectors[k].phi_lo, sectors[k].phi_hi);
      }
    }
    out.sectors[k] = U;
  }
  return out;
}

DensityMatrix sector_rdm(const VariationalState &state, Region region,
                         const SectorTables &tables) {
  const CMatrix U = sector_integrals(state, tables).complement(region);
  const double z = U.trace().real();
  if (!(z > 1e-14)) {
    throw DensityError("sector_rdm: state has no weight outside region " +
                       std::string(region_name(region)));
  }
  DensityMatrix rho{U / z, true};
  // Exact Hermitian symmetrization removes quadrature round-off.
  rho.entries = 0.5 * (rho.entries + rho.entries.adjoint()).eval();
  return rho;
}

DensityMatrix sector_rdm(const VariationalState &state, Region region,
                         const WireGeometry &geom) {
  return sector_rdm(state, region, SectorTables(state.L, state.N, geom));
}

DensityMatrix pure_density(const VariationalState &state) {
  return {state.coeffs * state.coeffs.adjoint(), true};
}

DensityMatrix mode_rdm(const VariationalState &state,
                       const SectorTables &tables) {
  require_shape(state, tables);
  const int N = tables.N();
  CMatrix rho = CMatrix::Zero(4 * N, 4 * N);
  for (int s = 0; s < 4; ++s) {
    for (int t = 0; t < 4; ++t) {
      if (family_of(s) != family_of(t)) {
        continue;
      }
      const auto cs = state.coeffs.segment(s * N, N);
      const auto ct = state.coeffs.segment(t * N, N);
      rho.block(s * N, t * N, N, N) =
          (cs * ct.adjoint())
              .cwiseProduct(tables.annulus_gram(family_of(s)).cast<Complex>());
    }
  }
  const double weight = rho.trace().real();
  if (!(weight > 1e-14)) {
    throw DensityError("mode_rdm: state has no weight in the annulus");
  }
  rho /= weight;
  rho = 0.5 * (rho + rho.adjoint()).eval();
  return {rho, true};
}

DensityMatrix mode_rdm(const VariationalState &state, const WireGeometry &geom) {
  return mode_rdm(state, SectorTables(state.L, state.N, geom));
}

} // namespace kpwire
