#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "kpwire/rdm.hpp"

namespace kpwire {

/// Kraus operators K_l (rows x cols). rows is the target dimension, cols the
/// source dimension.
struct KrausSet {
  std::vector<CMatrix> ops;
  double completeness_defect = 0.0; // max column sum of |sum K^dag K - I|

  int n_k() const { return static_cast<int>(ops.size()); }
  Eigen::Index rows() const { return ops.empty() ? 0 : ops.front().rows(); }
  Eigen::Index cols() const { return ops.empty() ? 0 : ops.front().cols(); }

  /// The (n_k rows) x cols matrix of operators stacked top to bottom.
  CMatrix stacked() const;
  static KrausSet from_stacked(const CMatrix &stack, int n_k);
  void update_defect();
};

/// Max column absolute sum.
template <class Derived>
double norm_l1(const Eigen::MatrixBase<Derived> &m) {
  return m.cwiseAbs().colwise().sum().maxCoeff();
}

/// Deviation of a stacked Kraus matrix from the nearest Stiefel condition:
/// |X^dag X - I|_1 when tall or square, |X X^dag - I|_1 when wide.
double stiefel_defect(const CMatrix &stack);

enum class MeasurementMode { full_pauli, x_string };

std::string_view mode_name(MeasurementMode mode);
MeasurementMode parse_mode(std::string_view name);

/// Rank-1 projectors v_j v_j^dag stored as the columns v_j of `vectors`.
struct MeasurementSet {
  MeasurementMode mode = MeasurementMode::full_pauli;
  int n_qubits = 0;
  CMatrix vectors; // 2^n_qubits x count

  Eigen::Index count() const { return vectors.cols(); }
  CMatrix projector(Eigen::Index j) const {
    return vectors.col(j) * vectors.col(j).adjoint();
  }
  /// d_j = Tr(M_j rho) = v_j^dag rho v_j.
  Vector frequencies(const CMatrix &rho) const;
};

/// full_pauli: eigenvectors of every product of x, y, z Pauli matrices,
/// 6^n_qubits projectors (n_qubits <= 8). x_string: the 2^n_qubits product
/// eigenvectors of sigma_x on every qubit.
MeasurementSet measurement_set(int n_qubits, MeasurementMode mode);

/// Haar-random unitary of size n.
CMatrix haar_unitary(int n, std::mt19937_64 &rng);

/// Square (rows == cols): K_l = U_l / sqrt(n_k). Wide (cols a multiple of
/// rows): K_l holds one random rows x rows unitary block at block column
/// l mod (cols / rows), scaled by 1 / sqrt(n_k). Deterministic in `seed`.
KrausSet init_kraus(int n_k, int rows, int cols, std::uint64_t seed);

/// sum_j (d_j - Tr(M_j sum_l K_l rho_p K_l^dag))^2 + lambda |stack(K)|_1.
double cost(const KrausSet &K, const DensityMatrix &rho_p, const Vector &d,
            const MeasurementSet &M, double lambda_reg);

/// Gradient of `cost` with respect to the real and imaginary parts of every
/// entry, packed as complex numbers (d/dRe + i d/dIm), one matrix per
/// operator.
std::vector<CMatrix> cost_gradient(const KrausSet &K, const DensityMatrix &rho_p,
                                   const Vector &d, const MeasurementSet &M,
                                   double lambda_reg);

/// Nearest matrix with orthonormal columns (tall/square) or rows (wide).
CMatrix polar_retract(const CMatrix &stack);

/// Polar retraction of X + P B^dag for X with orthonormal columns, exact in
/// O(rows cols rank) by restricting the inverse square root to
/// span{B, X^dag P}.
CMatrix polar_retract_update(const CMatrix &X, const CMatrix &P,
                             const CMatrix &B);

struct QptOptions {
  int n_k = 20;
  double tol = 0.01;
  double lambda_reg = 0.0;
  int max_iters = 2000;
  double step = 1.0;            // initial and maximum step length
  int max_halvings = 40;        // backtracking limit per iteration
  int full_retract_every = 100; // clears rounding drift of the cheap update
  std::uint64_t seed = 1;
};

struct QptRun {
  std::vector<double> cost_trace; // cost after each accepted iterate, [0] initial
  double tol = 0.0;
  double lambda_reg = 0.0;
  std::uint64_t seed = 0;
  int n_k = 0;
  KrausSet result;
  DensityMatrix predicted;
  double trace_factor = 1.0; // predicted trace before renormalization
  double fidelity_to_target = 0.0;
  bool converged = false;
  std::string status;
};

/// Gradient descent on the stacked Kraus matrix with a polar retraction after
/// every step and backtracking halving of the step. rho_p must be pure.
/// Non-convergence is reported in the run, not thrown.
QptRun learn_process(const DensityMatrix &rho_p, const DensityMatrix &rho_target,
                     const MeasurementSet &M, const QptOptions &opts);

struct ProcessOutput {
  DensityMatrix rho;
  double trace_factor = 1.0; // trace of sum K rho K^dag before rescaling
};

/// sum_l K_l rho K_l^dag, rescaled to unit trace.
ProcessOutput apply_process(const KrausSet &K, const DensityMatrix &rho);

} // namespace kpwire
