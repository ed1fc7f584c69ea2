#include <doctest.h>

#include <cmath>
#include <random>

#include "kpwire/entropy.hpp"
#include "kpwire/qpt.hpp"
#include "oracle.hpp"

using namespace kpwire;

namespace {

CMatrix random_matrix(int r, int c, std::mt19937_64 &rng) {
  std::normal_distribution<double> g;
  CMatrix m(r, c);
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < c; ++j) {
      m(i, j) = {g(rng), g(rng)};
    }
  }
  return m;
}

KrausSet make_set(std::vector<CMatrix> ops) {
  KrausSet k;
  k.ops = std::move(ops);
  k.update_defect();
  return k;
}

} // namespace

TEST_CASE("measurement sets") {
  const auto two = measurement_set(2, MeasurementMode::full_pauli);
  CHECK(two.count() == 36);
  for (Eigen::Index j = 0; j < two.count(); ++j) {
    const CMatrix P = two.projector(j);
    CHECK((P * P - P).norm() < 1e-12);
    CHECK(std::abs(P.trace() - 1.0) < 1e-12);
  }
  // Each of the 9 Pauli pairs contributes a complete basis.
  CMatrix sum = CMatrix::Zero(4, 4);
  for (Eigen::Index j = 0; j < 36; ++j) {
    sum += two.projector(j);
  }
  CHECK((sum - 9.0 * CMatrix::Identity(4, 4)).norm() < 1e-12);

  const auto xs = measurement_set(8, MeasurementMode::x_string);
  CHECK(xs.count() == 256);
  const CMatrix gram = xs.vectors.adjoint() * xs.vectors;
  CHECK((gram - CMatrix::Identity(256, 256)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((xs.vectors * xs.vectors.adjoint() - CMatrix::Identity(256, 256))
            .cwiseAbs()
            .maxCoeff() < 1e-12);

  const auto one = measurement_set(1, MeasurementMode::x_string);
  REQUIRE(one.count() == 2);
  const double h = 1.0 / std::sqrt(2.0);
  CHECK(std::abs(std::abs(one.vectors(0, 0)) - h) < 1e-15);
  CHECK(std::abs(one.vectors(0, 0) * std::conj(one.vectors(1, 0)) +
                 one.vectors(0, 1) * std::conj(one.vectors(1, 1))) < 1e-15);
  CHECK((one.projector(0) + one.projector(1) - CMatrix::Identity(2, 2)).norm() < 1e-15);

  CHECK_THROWS_AS(measurement_set(9, MeasurementMode::full_pauli), Error);
  CHECK_THROWS_AS(measurement_set(0, MeasurementMode::x_string), Error);
  CHECK(parse_mode(mode_name(MeasurementMode::x_string)) == MeasurementMode::x_string);

  std::mt19937_64 rng(2);
  const CMatrix rho = oracle::random_density(4, 2, rng);
  const Vector d = two.frequencies(rho);
  for (Eigen::Index j = 0; j < d.size(); ++j) {
    CHECK(std::abs(d[j] - (two.projector(j) * rho).trace().real()) < 1e-14);
  }
  const Vector flat = two.frequencies(CMatrix::Identity(4, 4) / 4.0);
  CHECK((flat.array() - 0.25).abs().maxCoeff() < 1e-15);
}

TEST_CASE("initial Kraus operators") {
  const auto single = init_kraus(1, 6, 6, 3);
  CHECK((single.ops[0].adjoint() * single.ops[0] - CMatrix::Identity(6, 6)).norm() < 1e-13);
  const auto many = init_kraus(20, 4, 4, 3);
  CHECK(many.n_k() == 20);
  CHECK(many.completeness_defect < 1e-12);

  const auto wide = init_kraus(20, 4, 160, 9);
  REQUIRE(wide.n_k() == 20);
  for (int l = 0; l < 20; ++l) {
    const CMatrix &K = wide.ops[l];
    CHECK(K.rows() == 4);
    CHECK(K.cols() == 160);
    int nonzero = 0;
    for (int b = 0; b < 40; ++b) {
      if (K.block(0, 4 * b, 4, 4).norm() > 0.0) {
        ++nonzero;
        CHECK(b == l % 40);
        const CMatrix U = std::sqrt(20.0) * K.block(0, 4 * b, 4, 4);
        CHECK((U.adjoint() * U - CMatrix::Identity(4, 4)).norm() < 1e-13);
      }
    }
    CHECK(nonzero == 1);
  }
  CHECK(init_kraus(5, 4, 8, 1).ops[2] == init_kraus(5, 4, 8, 1).ops[2]);
  CHECK(init_kraus(5, 4, 8, 1).ops[2] != init_kraus(5, 4, 8, 2).ops[2]);
  CHECK_THROWS_AS(init_kraus(3, 4, 10, 1), DimensionError);
}

TEST_CASE("cost examples") {
  const auto M = measurement_set(2, MeasurementMode::full_pauli);
  std::mt19937_64 rng(4);
  const DensityMatrix rho{oracle::random_density(4, 1, rng), true};
  const auto id = make_set({CMatrix::Identity(4, 4)});
  const Vector d = M.frequencies(rho.entries);
  CHECK(cost(id, rho, d, M, 0.0) < 1e-12);
  CHECK(cost(id, rho, d, M, 0.5) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(cost(id, rho, d, M, 0.0) >= 0.0);
  CHECK_THROWS_AS(cost(id, rho, Vector::Zero(3), M, 0.0), DimensionError);
}

TEST_CASE("gradient matches central differences") {
  std::mt19937_64 rng(8);
  const auto M = measurement_set(2, MeasurementMode::full_pauli);
  for (int n_k = 1; n_k <= 3; ++n_k) {
    for (double lambda : {0.0, 0.3}) {
      std::vector<CMatrix> ops;
      for (int l = 0; l < n_k; ++l) {
        ops.push_back(0.5 * random_matrix(4, 4, rng));
      }
      const auto K = make_set(ops);
      const DensityMatrix rho{oracle::random_density(4, 1, rng), true};
      const Vector d = M.frequencies(oracle::random_density(4, 2, rng));
      const auto grad = cost_gradient(K, rho, d, M, lambda);
      const double h = 1e-6;
      double worst = 0.0, scale = 0.0;
      for (int l = 0; l < n_k; ++l) {
        for (int i = 0; i < 4; ++i) {
          for (int j = 0; j < 4; ++j) {
            double fd[2];
            for (int part = 0; part < 2; ++part) {
              const Complex dir = part == 0 ? Complex(h, 0) : Complex(0, h);
              KrausSet up = K, down = K;
              up.ops[l](i, j) += dir;
              down.ops[l](i, j) -= dir;
              fd[part] = (cost(up, rho, d, M, lambda) - cost(down, rho, d, M, lambda)) / (2 * h);
            }
            worst = std::max(worst, std::abs(grad[l](i, j) - Complex(fd[0], fd[1])));
            scale = std::max(scale, std::abs(Complex(fd[0], fd[1])));
          }
        }
      }
      CHECK(worst <= 1e-5 * scale);
    }
  }
}

TEST_CASE("cost is invariant under per-operator phases") {
  std::mt19937_64 rng(12);
  const auto M = measurement_set(2, MeasurementMode::full_pauli);
  const auto K = init_kraus(3, 4, 4, 5);
  const DensityMatrix rho{oracle::random_density(4, 1, rng), true};
  const Vector d = M.frequencies(oracle::random_density(4, 3, rng));
  KrausSet phased = K;
  for (int l = 0; l < 3; ++l) {
    phased.ops[l] *= std::polar(1.0, 0.9 * l + 0.2);
  }
  CHECK(std::abs(cost(K, rho, d, M, 0.0) - cost(phased, rho, d, M, 0.0)) < 1e-12);
}

TEST_CASE("polar retractions") {
  std::mt19937_64 rng(21);
  const CMatrix A = random_matrix(12, 4, rng);
  const CMatrix X = polar_retract(A);
  CHECK((X.adjoint() * X - CMatrix::Identity(4, 4)).norm() < 1e-13);
  CHECK(stiefel_defect(X) < 1e-13);
  const CMatrix P = 0.3 * random_matrix(12, 2, rng);
  const CMatrix B = random_matrix(4, 2, rng);
  const CMatrix full = polar_retract(X + P * B.adjoint());
  CHECK((polar_retract_update(X, P, B) - full).norm() < 1e-12);

  const CMatrix W = polar_retract(random_matrix(4, 12, rng));
  CHECK((W * W.adjoint() - CMatrix::Identity(4, 4)).norm() < 1e-13);
  CHECK(stiefel_defect(W) < 1e-13);

  KrausSet K = init_kraus(3, 4, 4, 1);
  const auto back = KrausSet::from_stacked(K.stacked(), 3);
  for (int l = 0; l < 3; ++l) {
    CHECK(back.ops[l] == K.ops[l]);
  }
}

TEST_CASE("learning the identity channel") {
  std::mt19937_64 rng(31);
  const auto M = measurement_set(2, MeasurementMode::full_pauli);
  const DensityMatrix rho{oracle::random_density(4, 1, rng), true};
  QptOptions opts;
  opts.n_k = 4;
  opts.tol = 1e-4;
  opts.seed = 7;
  const auto run = learn_process(rho, rho, M, opts);
  CHECK(run.converged);
  CHECK(run.cost_trace.back() <= 1e-4);
  CHECK(run.fidelity_to_target > 0.99);
  CHECK(run.result.completeness_defect <= 1e-8);
  CHECK(std::abs(run.predicted.trace() - 1.0) < 1e-10);
  CHECK_NOTHROW(run.predicted.check());
  for (std::size_t i = 1; i < run.cost_trace.size(); ++i) {
    CHECK(run.cost_trace[i] <= run.cost_trace[i - 1] + 1e-15);
  }
  const auto again = learn_process(rho, rho, M, opts);
  CHECK(again.cost_trace == run.cost_trace);

  const DensityMatrix mixed{CMatrix::Identity(4, 4) / 4.0, true};
  CHECK_THROWS_AS(learn_process(mixed, rho, M, opts), DensityError);

  QptOptions tight = opts;
  tight.tol = 0.0;
  tight.max_iters = 3;
  const auto stopped = learn_process(rho, {oracle::random_density(4, 2, rng), true}, M, tight);
  CHECK_FALSE(stopped.converged);
  CHECK(stopped.cost_trace.size() <= 4);
}

TEST_CASE("apply_process") {
  std::mt19937_64 rng(40);
  const DensityMatrix rho{oracle::random_density(3, 2, rng), true};
  const auto id = apply_process(make_set({CMatrix::Identity(3, 3)}), rho);
  CHECK((id.rho.entries - rho.entries).norm() < 1e-15);
  CHECK(id.trace_factor == doctest::Approx(1.0));

  CMatrix sx(2, 2);
  sx << 0, 1, 1, 0;
  const auto flip = make_set({CMatrix::Identity(2, 2) / std::sqrt(2.0), sx / std::sqrt(2.0)});
  CHECK(flip.completeness_defect < 1e-15);
  CMatrix up = CMatrix::Zero(2, 2);
  up(0, 0) = 1.0;
  const auto out = apply_process(flip, {up, true});
  CHECK((out.rho.entries - CMatrix::Identity(2, 2) / 2.0).norm() < 1e-15);

  const auto K = init_kraus(5, 3, 3, 11);
  const auto traced = apply_process(K, rho);
  CHECK(std::abs(traced.trace_factor - 1.0) < 1e-10);

  CHECK_THROWS_AS(apply_process(K, {CMatrix::Identity(4, 4) / 4.0, true}), DimensionError);
}

TEST_CASE("identity channel reaches fidelity 0.9999 at tol 1e-4") {
  std::mt19937_64 rng(31);
  const auto M = measurement_set(2, MeasurementMode::full_pauli);
  const DensityMatrix rho{oracle::random_density(4, 1, rng), true};
  QptOptions opts;
  opts.n_k = 4;
  opts.tol = 1e-4;
  opts.seed = 7;
  const auto run = learn_process(rho, rho, M, opts);
  CHECK(run.converged);
  CHECK(run.fidelity_to_target > 0.9999);
}
