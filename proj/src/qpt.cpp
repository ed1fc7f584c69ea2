#include "kpwire/qpt.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "kpwire/entropy.hpp"

namespace kpwire {

CMatrix KrausSet::stacked() const {
  if (ops.empty()) {
    return {};
  }
  CMatrix out(rows() * n_k(), cols());
  for (int l = 0; l < n_k(); ++l) {
    out.middleRows(l * rows(), rows()) = ops[l];
  }
  return out;
}

KrausSet KrausSet::from_stacked(const CMatrix &stack, int n_k) {
  if (n_k < 1 || stack.rows() % n_k != 0) {
    throw DimensionError("from_stacked: row count is not a multiple of n_k");
  }
  const Eigen::Index rows = stack.rows() / n_k;
  KrausSet K;
  for (int l = 0; l < n_k; ++l) {
    K.ops.push_back(stack.middleRows(l * rows, rows));
  }
  K.update_defect();
  return K;
}

void KrausSet::update_defect() {
  if (ops.empty()) {
    completeness_defect = 0.0;
    return;
  }
  CMatrix S = -CMatrix::Identity(cols(), cols());
  for (const auto &k : ops) {
    S.noalias() += k.adjoint() * k;
  }
  completeness_defect = norm_l1(S);
}

double stiefel_defect(const CMatrix &stack) {
  if (stack.rows() >= stack.cols()) {
    return norm_l1(stack.adjoint() * stack -
                   CMatrix::Identity(stack.cols(), stack.cols()));
  }
  return norm_l1(stack * stack.adjoint() -
                 CMatrix::Identity(stack.rows(), stack.rows()));
}

std::string_view mode_name(MeasurementMode mode) {
  return mode == MeasurementMode::full_pauli ? "full-pauli" : "x-string";
}

MeasurementMode parse_mode(std::string_view name) {
  if (name == "full-pauli") {
    return MeasurementMode::full_pauli;
  }
  if (name == "x-string") {
    return MeasurementMode::x_string;
  }
  throw ConfigError("unknown measurement mode '" + std::string(name) + "'");
}

Vector MeasurementSet::frequencies(const CMatrix &rho) const {
  if (rho.rows() != vectors.rows()) {
    throw DimensionError("frequencies: density matrix does not match the "
                         "measurement space");
  }
  return (vectors.adjoint() * rho).cwiseProduct(vectors.transpose()).rowwise()
      .sum()
      .real();
}

MeasurementSet measurement_set(int n_qubits, MeasurementMode mode) {
  if (n_qubits < 1) {
    throw DimensionError("measurement_set: need at least one qubit");
  }
  if (mode == MeasurementMode::full_pauli && n_qubits > 8) {
    throw DimensionError("measurement_set: full-pauli limited to 8 qubits");
  }
  if (n_qubits > 16) {
    throw DimensionError("measurement_set: too many qubits");
  }
  const double h = 1.0 / std::sqrt(2.0);
  const Complex i(0.0, 1.0);
  // Eigenvectors of x, y, z; two per axis.
  const std::array<std::array<Eigen::Vector2cd, 2>, 3> axes = {{
      {Eigen::Vector2cd(h, h), Eigen::Vector2cd(h, -h)},
      {Eigen::Vector2cd(h, h * i), Eigen::Vector2cd(h, -h * i)},
      {Eigen::Vector2cd(1.0, 0.0), Eigen::Vector2cd(0.0, 1.0)},
  }};
  const int n_axes = mode == MeasurementMode::full_pauli ? 3 : 1;

  long n_strings = 1;
  for (int q = 0; q < n_qubits; ++q) {
    n_strings *= n_axes;
  }
  const long n_outcomes = 1L << n_qubits;
  const Eigen::Index dim = n_outcomes;

  MeasurementSet M;
  M.mode = mode;
  M.n_qubits = n_qubits;
  M.vectors.resize(dim, n_strings * n_outcomes);
  Eigen::Index col = 0;
  for (long s = 0; s < n_strings; ++s) {
    for (long b = 0; b < n_outcomes; ++b) {
      CVector v = CVector::Ones(1);
      long s_rest = s;
      for (int q = n_qubits - 1; q >= 0; --q) {
        const int axis = static_cast<int>(s_rest % n_axes);
        s_rest /= n_axes;
        const auto &e = axes[axis][(b >> q) & 1];
        // Qubit n-1 is the most significant factor.
        CVector w(v.size() * 2);
        w.head(v.size()) = e[0] * v;
        w.tail(v.size()) = e[1] * v;
        v = w;
      }
      M.vectors.col(col++) = v;
    }
  }
  return M;
}

CMatrix haar_unitary(int n, std::mt19937_64 &rng) {
  std::normal_distribution<double> normal;
  CMatrix G(n, n);
  for (int c = 0; c < n; ++c) {
    for (int r = 0; r < n; ++r) {
      const double re = normal(rng);
      const double im = normal(rng);
      G(r, c) = Complex(re, im) / std::sqrt(2.0);
    }
  }
  Eigen::HouseholderQR<CMatrix> qr(G);
  CMatrix Q = qr.householderQ();
  const CMatrix &R = qr.matrixQR();
  for (int c = 0; c < n; ++c) {
    const double mag = std::abs(R(c, c));
    Q.col(c) *= mag > 0.0 ? R(c, c) / mag : Complex(1.0);
  }
  return Q;
}

KrausSet init_kraus(int n_k, int rows, int cols, std::uint64_t seed) {
  if (n_k < 1 || rows < 1 || cols < rows || cols % rows != 0) {
    throw DimensionError("init_kraus: need n_k >= 1 and cols a multiple of rows");
  }
  std::mt19937_64 rng(seed);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n_k));
  const int blocks = cols / rows;
  KrausSet K;
  for (int l = 0; l < n_k; ++l) {
    CMatrix op = CMatrix::Zero(rows, cols);
    op.middleCols((l % blocks) * rows, rows) = scale * haar_unitary(rows, rng);
    K.ops.push_back(std::move(op));
  }
  K.update_defect();
  return K;
}

namespace {

/// Columns F with rho = F F^dag, dropping eigenvalues below 1e-14.
CMatrix density_factor(const CMatrix &rho) {
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(rho);
  const Vector &w = eig.eigenvalues();
  std::vector<Eigen::Index> keep;
  for (Eigen::Index j = 0; j < w.size(); ++j) {
    if (w[j] > 1e-14) {
      keep.push_back(j);
    }
  }
  CMatrix F(rho.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t q = 0; q < keep.size(); ++q) {
    F.col(q) = eig.eigenvectors().col(keep[q]) * std::sqrt(w[keep[q]]);
  }
  return F;
}

struct Problem {
  const CMatrix &V;
  const Vector &d;
  CMatrix F;
  Eigen::Index rows;
  int n_k;
  double lambda;
};

struct Evaluation {
  CMatrix Z; // V^dag K_l F, operators side by side
  Vector res;
  Eigen::Index l1_col = 0;
  double total = 0.0;
};

Evaluation evaluate(const Problem &pb, const CMatrix &X) {
  const Eigen::Index r = pb.F.cols();
  const CMatrix Y = X * pb.F;
  CMatrix side(pb.rows, pb.n_k * r);
  for (int l = 0; l < pb.n_k; ++l) {
    side.middleCols(l * r, r) = Y.middleRows(l * pb.rows, pb.rows);
  }
  Evaluation e;
  e.Z = pb.V.adjoint() * side;
  e.res = pb.d - e.Z.cwiseAbs2().rowwise().sum();
  e.total = e.res.squaredNorm();
  if (pb.lambda != 0.0) {
    const double l1 = X.cwiseAbs().colwise().sum().maxCoeff(&e.l1_col);
    e.total += pb.lambda * l1;
  }
  return e;
}

/// The gradient is -4 P F^dag plus the L1 term lambda s e_c^dag.
CMatrix gradient_factor(const Problem &pb, const Evaluation &e) {
  const Eigen::Index r = pb.F.cols();
  const CMatrix W = pb.V * (e.res.asDiagonal() * e.Z);
  CMatrix P(pb.rows * pb.n_k, r);
  for (int l = 0; l < pb.n_k; ++l) {
    P.middleRows(l * pb.rows, pb.rows) = W.middleCols(l * r, r);
  }
  return P;
}

CVector l1_direction(const CMatrix &X, Eigen::Index col) {
  CVector s = X.col(col);
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    const double mag = std::abs(s[i]);
    s[i] = mag > 0.0 ? s[i] / mag : Complex(0.0);
  }
  return s;
}

CMatrix full_gradient(const Problem &pb, const CMatrix &X, const Evaluation &e) {
  CMatrix grad = -4.0 * gradient_factor(pb, e) * pb.F.adjoint();
  if (pb.lambda != 0.0) {
    grad.col(e.l1_col) += pb.lambda * l1_direction(X, e.l1_col);
  }
  return grad;
}

void check_shapes(const KrausSet &K, const DensityMatrix &rho_p, const Vector &d,
                  const MeasurementSet &M) {
  if (K.ops.empty()) {
    throw DimensionError("empty Kraus set");
  }
  for (const auto &k : K.ops) {
    if (k.rows() != K.rows() || k.cols() != K.cols()) {
      throw DimensionError("Kraus operators differ in shape");
    }
  }
  if (K.cols() != rho_p.dim() || K.rows() != M.vectors.rows() ||
      d.size() != M.count()) {
    throw DimensionError("cost: inconsistent shapes between Kraus operators, "
                         "source state and measurements");
  }
}

CMatrix inverse_sqrt(const CMatrix &S) {
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(S);
  const Vector &w = eig.eigenvalues();
  if (!(w.minCoeff() > 1e-300)) {
    throw DimensionError("polar retraction of a rank-deficient matrix");
  }
  return eig.eigenvectors() * w.cwiseSqrt().cwiseInverse().asDiagonal() *
         eig.eigenvectors().adjoint();
}

} // namespace

double cost(const KrausSet &K, const DensityMatrix &rho_p, const Vector &d,
            const MeasurementSet &M, double lambda_reg) {
  check_shapes(K, rho_p, d, M);
  const Problem pb{M.vectors, d, density_factor(rho_p.entries), K.rows(),
                   K.n_k(), lambda_reg};
  return evaluate(pb, K.stacked()).total;
}

std::vector<CMatrix> cost_gradient(const KrausSet &K, const DensityMatrix &rho_p,
                                   const Vector &d, const MeasurementSet &M,
                                   double lambda_reg) {
  check_shapes(K, rho_p, d, M);
  const Problem pb{M.vectors, d, density_factor(rho_p.entries), K.rows(),
                   K.n_k(), lambda_reg};
  const CMatrix X = K.stacked();
  const CMatrix grad = full_gradient(pb, X, evaluate(pb, X));
  std::vector<CMatrix> out;
  for (int l = 0; l < K.n_k(); ++l) {
    out.push_back(grad.middleRows(l * K.rows(), K.rows()));
  }
  return out;
}

CMatrix polar_retract(const CMatrix &stack) {
  if (stack.rows() >= stack.cols()) {
    return stack * inverse_sqrt(stack.adjoint() * stack);
  }
  return inverse_sqrt(stack * stack.adjoint()) * stack;
}

CMatrix polar_retract_update(const CMatrix &X, const CMatrix &P,
                             const CMatrix &B) {
  const Eigen::Index n = X.cols();
  const Eigen::Index k = B.cols();
  CMatrix Xp = X;
  Xp.noalias() += P * B.adjoint();
  if (2 * k >= n) {
    return polar_retract(Xp);
  }
  CMatrix span(n, 2 * k);
  span << B, X.adjoint() * P;
  Eigen::HouseholderQR<CMatrix> qr(span);
  const CMatrix Q = qr.householderQ() * CMatrix::Identity(n, 2 * k);
  const CMatrix XpQ = Xp * Q;
  const CMatrix T = XpQ.adjoint() * XpQ;
  const CMatrix D = inverse_sqrt(T) - CMatrix::Identity(2 * k, 2 * k);
  Xp.noalias() += XpQ * (D * Q.adjoint());
  return Xp;
}

ProcessOutput apply_process(const KrausSet &K, const DensityMatrix &rho) {
  if (K.ops.empty() || K.cols() != rho.dim()) {
    throw DimensionError("apply_process: Kraus operators do not match the state");
  }
  CMatrix out = CMatrix::Zero(K.rows(), K.rows());
  for (const auto &k : K.ops) {
    out.noalias() += k * rho.entries * k.adjoint();
  }
  const double tr = out.trace().real();
  if (!(tr > 1e-300)) {
    throw DensityError("apply_process: output has zero trace");
  }
  out /= tr;
  out = 0.5 * (out + out.adjoint()).eval();
  return {{out, true}, tr};
}

QptRun learn_process(const DensityMatrix &rho_p, const DensityMatrix &rho_target,
                     const MeasurementSet &M, const QptOptions &opts) {
  if (std::abs((rho_p.entries * rho_p.entries).trace().real() - 1.0) > 1e-8) {
    throw DensityError("learn_process: source state is not pure");
  }
  if (rho_target.dim() != M.vectors.rows()) {
    throw DimensionError("learn_process: target does not match measurements");
  }
  if (opts.max_iters < 0 || !(opts.step > 0.0) || opts.n_k < 1) {
    throw ConfigError("learn_process: invalid options");
  }
  const auto rows = static_cast<int>(rho_target.dim());
  const auto cols = static_cast<int>(rho_p.dim());
  const Vector d = M.frequencies(rho_target.entries);

  // rho_p = F F^dag with F one column: the largest column rescaled.
  Eigen::Index pivot = 0;
  rho_p.entries.diagonal().real().maxCoeff(&pivot);
  const CVector F =
      rho_p.entries.col(pivot) / std::sqrt(rho_p.entries(pivot, pivot).real());

  const Problem pb{M.vectors, d, F, rows, opts.n_k, opts.lambda_reg};
  const bool tall = static_cast<Eigen::Index>(rows) * opts.n_k >= cols;

  CMatrix X = polar_retract(init_kraus(opts.n_k, rows, cols, opts.seed).stacked());
  Evaluation cur = evaluate(pb, X);

  QptRun run;
  run.tol = opts.tol;
  run.lambda_reg = opts.lambda_reg;
  run.seed = opts.seed;
  run.n_k = opts.n_k;
  run.cost_trace.push_back(cur.total);

  double step = opts.step;
  int iter = 0;
  bool stalled = false;
  while (cur.total > opts.tol && iter < opts.max_iters) {
    const CMatrix Pg = gradient_factor(pb, cur);
    CMatrix Bfac(cols, opts.lambda_reg != 0.0 ? 2 : 1);
    Bfac.col(0) = F;
    CVector s;
    if (opts.lambda_reg != 0.0) {
      Bfac.col(1) = CVector::Unit(cols, cur.l1_col);
      s = l1_direction(X, cur.l1_col);
    }
    step = std::min(opts.step, 2.0 * step);
    bool accepted = false;
    for (int h = 0; h <= opts.max_halvings; ++h, step *= 0.5) {
      CMatrix Pfac(X.rows(), Bfac.cols());
      Pfac.col(0) = 4.0 * step * Pg;
      if (opts.lambda_reg != 0.0) {
        Pfac.col(1) = -step * opts.lambda_reg * s;
      }
      CMatrix trial = tall ? polar_retract_update(X, Pfac, Bfac)
                           : polar_retract_update(X.adjoint(), Bfac, Pfac)
                                 .adjoint();
      Evaluation next = evaluate(pb, trial);
      if (next.total < cur.total) {
        X = std::move(trial);
        cur = std::move(next);
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      stalled = true;
      break;
    }
    ++iter;
    if (opts.full_retract_every > 0 && iter % opts.full_retract_every == 0) {
      X = polar_retract(X);
      cur = evaluate(pb, X);
    }
    run.cost_trace.push_back(cur.total);
  }
  if (stiefel_defect(X) > 1e-10) {
    X = polar_retract(X);
  }

  run.result = KrausSet::from_stacked(X, opts.n_k);
  auto applied = apply_process(run.result, rho_p);
  run.predicted = std::move(applied.rho);
  run.trace_factor = applied.trace_factor;
  run.fidelity_to_target = fidelity(run.predicted, rho_target);
  run.converged = cur.total <= opts.tol;
  std::ostringstream os;
  if (run.converged) {
    os << "converged after " << iter << " iterations";
  } else if (stalled) {
    os << "stalled after " << iter << " iterations (no descent step)";
  } else {
    os << "max_iters reached with cost " << cur.total;
  }
  run.status = os.str();
  return run;
}

} // namespace kpwire
