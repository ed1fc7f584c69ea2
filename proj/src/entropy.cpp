#include "kpwire/entropy.hpp"

#include <algorithm>
#include <vector>

namespace kpwire {

double von_neumann(const DensityMatrix &rho) {
  if (rho.entries.rows() != rho.entries.cols()) {
    throw DimensionError("von_neumann: matrix is not square");
  }
  if (std::abs(rho.trace() - Complex(1.0)) > 1e-8) {
    throw DensityError("von_neumann: trace deviates from 1 by more than 1e-8");
  }
  return entropy_of(rho.entries);
}

double fidelity(const DensityMatrix &rho, const DensityMatrix &sigma) {
  if (rho.dim() != sigma.dim() || rho.entries.cols() != sigma.entries.cols()) {
    throw DimensionError("fidelity: dimension mismatch");
  }
  // Work on the support of rho so rounding noise in its null space is not
  // square-rooted into the result.
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(rho.entries);
  const Vector &w = eig.eigenvalues();
  const double floor = 1e-14 * std::max(w.cwiseAbs().maxCoeff(), 1e-300);
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (w[i] > floor) {
      keep.push_back(i);
    }
  }
  CMatrix half(rho.dim(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) {
    half.col(k) = eig.eigenvectors().col(keep[k]) * std::sqrt(w[keep[k]]);
  }
  CMatrix inner = half.adjoint() * sigma.entries * half;
  inner = 0.5 * (inner + inner.adjoint()).eval();
  const Vector mu = hermitian_eigenvalues(inner);
  const double mu_floor = mu.size() > 0 ? 1e-14 * std::abs(mu[0]) : 0.0;
  double tr = 0.0;
  for (double lambda : mu) {
    if (lambda > mu_floor) {
      tr += std::sqrt(lambda);
    }
  }
  return std::clamp(tr * tr, 0.0, 1.0);
}

EntropyReport topological_entropy(const VariationalState &state,
                                  const SectorTables &tables) {
  EntropyReport report;
  report.L = state.L;
  report.kz = state.kz;
  report.N = state.N;
  report.label = state.label;
  report.energy = state.energy;
  report.Rc = tables.geometry().Rc;

  const auto integrals = sector_integrals(state, tables);
  for (std::size_t i = 0; i < kAllRegions.size(); ++i) {
    const CMatrix U = integrals.complement(kAllRegions[i]);
    const double z = U.trace().real();
    if (!(z > 1e-14)) {
      throw DensityError("topological_entropy: empty complement of region " +
                         std::string(region_name(kAllRegions[i])));
    }
    CMatrix rho = U / z;
    rho = 0.5 * (rho + rho.adjoint()).eval();
    report.S[i] = von_neumann({rho, true});
  }
  const auto &S = report.S;
  report.S_t = S[0] + S[1] + S[2] - S[3] - S[4] - S[5] + S[6];
  report.abs_S_t = std::abs(report.S_t);
  return report;
}

EntropyReport topological_entropy(const VariationalState &state,
                                  const WireGeometry &geom) {
  return topological_entropy(state, SectorTables(state.L, state.N, geom));
}

LinearFit fit_line(const Vector &zetas) {
  LinearFit fit;
  const auto n = zetas.size();
  fit.length = static_cast<int>(n);
  if (n == 0) {
    return fit;
  }
  if (n == 1) {
    fit.c = zetas[0];
    fit.quality = 1.0;
    return fit;
  }
  const Vector k = Vector::LinSpaced(n, 1.0, static_cast<double>(n));
  const double k_mean = k.mean();
  const double z_mean = zetas.mean();
  const double sxx = (k.array() - k_mean).square().sum();
  const double sxy = ((k.array() - k_mean) * (zetas.array() - z_mean)).sum();
  fit.alpha = sxy / sxx;
  fit.c = z_mean - fit.alpha * k_mean;
  const double ss_tot = (zetas.array() - z_mean).square().sum();
  const double ss_res =
      (zetas.array() - (fit.c + fit.alpha * k.array())).square().sum();
  fit.quality = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  return fit;
}

EntanglementSpectrum entanglement_spectrum(const DensityMatrix &rho,
                                           double cutoff, double min_quality) {
  EntanglementSpectrum es;
  es.lambdas = hermitian_eigenvalues(rho.entries);
  int kept = 0;
  while (kept < es.lambdas.size() && es.lambdas[kept] > cutoff) {
    ++kept;
  }
  es.zetas = -es.lambdas.head(kept).array().log();
  for (int len = kept; len >= 1; --len) {
    const LinearFit fit = fit_line(es.zetas.head(len));
    if (fit.quality >= min_quality) {
      es.fit = fit;
      break;
    }
  }
  return es;
}

} // namespace kpwire
