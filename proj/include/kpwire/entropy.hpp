#pragma once

#include <array>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "kpwire/rdm.hpp"

namespace kpwire {

inline constexpr double kEigenCutoff = 1e-12;

/// Eigenvalues of a Hermitian matrix in descending order.
template <class Derived>
Vector hermitian_eigenvalues(const Eigen::MatrixBase<Derived> &m) {
  Eigen::SelfAdjointEigenSolver<typename Derived::PlainObject> eig(
      m, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().reverse();
}

/// -sum lambda ln lambda over eigenvalues above `cutoff`.
template <class Derived>
double entropy_of(const Eigen::MatrixBase<Derived> &m,
                  double cutoff = kEigenCutoff) {
  double s = 0.0;
  for (double lambda : hermitian_eigenvalues(m)) {
    if (lambda > cutoff) {
      s -= lambda * std::log(lambda);
    }
  }
  return s;
}

/// Principal square root of a Hermitian PSD matrix; negative noise is clipped.
template <class Derived>
typename Derived::PlainObject psd_sqrt(const Eigen::MatrixBase<Derived> &m) {
  Eigen::SelfAdjointEigenSolver<typename Derived::PlainObject> eig(m);
  const Vector roots = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * roots.asDiagonal() * eig.eigenvectors().adjoint();
}

/// Natural-log von Neumann entropy. Throws DensityError when the trace is off
/// by more than 1e-8.
double von_neumann(const DensityMatrix &rho);

/// Uhlmann fidelity (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2, clamped to [0, 1].
double fidelity(const DensityMatrix &rho, const DensityMatrix &sigma);

struct EntropyReport {
  int L = 0;
  double kz = 0.0;
  int N = 0;
  StateLabel label = StateLabel::valence;
  double energy = 0.0;
  double Rc = 0.0;
  std::array<double, 7> S{}; // indexed like kAllRegions
  double S_t = 0.0;
  double abs_S_t = 0.0;

  double entropy(Region region) const { return S[static_cast<int>(region)]; }
};

/// S_A + S_B + S_C - S_AB - S_BC - S_AC + S_ABC from the seven sector RDMs.
EntropyReport topological_entropy(const VariationalState &state,
                                  const SectorTables &tables);
EntropyReport topological_entropy(const VariationalState &state,
                                  const WireGeometry &geom);

struct LinearFit {
  double c = 0.0;
  double alpha = 0.0;
  double quality = 0.0; // coefficient of determination
  int length = 0;       // number of leading zeta values used
};

struct EntanglementSpectrum {
  Vector lambdas; // descending
  Vector zetas;   // -ln lambda for lambda > cutoff, k = 1, 2, ...
  LinearFit fit;
};

/// Least-squares zeta_k = c + alpha k for k = 1..zetas.size().
LinearFit fit_line(const Vector &zetas);

/// Spectrum of `rho`; the fit covers the longest prefix of zetas with
/// quality >= min_quality.
EntanglementSpectrum entanglement_spectrum(const DensityMatrix &rho,
                                           double cutoff = kEigenCutoff,
                                           double min_quality = 0.99);

} // namespace kpwire
