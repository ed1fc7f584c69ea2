#include "kpwire/hamiltonian.hpp"

#include <cmath>
#include <cstring>
#include <istream>
#include <limits>
#include <ostream>
#include <string>

#include <nlohmann/json.hpp>

namespace kpwire {

Matrix cross_family_overlap(int L, std::span<const double> roots_l,
                            std::span<const double> roots_l1, double R) {
  const auto n_rows = static_cast<Eigen::Index>(roots_l.size());
  const auto n_cols = static_cast<Eigen::Index>(roots_l1.size());
  Matrix X(n_rows, n_cols);
  for (Eigen::Index n = 0; n < n_rows; ++n) {
    const double a = roots_l[n] / R;
    const double norm_a = normalization_at_root(L, roots_l[n], R);
    for (Eigen::Index m = 0; m < n_cols; ++m) {
      const double b = roots_l1[m] / R;
      const double norm_b = normalization_at_root(L + 1, roots_l1[m], R);
      X(n, m) = 2.0 * kPi * norm_a * norm_b * lommel_integral(L, a, b, R);
    }
  }
  return X;
}

HamiltonianBlock assemble(const MaterialParams &params, double R, int L,
                          double kz, int N, std::span<const double> roots_l,
                          std::span<const double> roots_l1) {
  if (N < 1) {
    throw DimensionError("assemble: basis size must be >= 1");
  }
  if (roots_l.size() < static_cast<std::size_t>(N) ||
      roots_l1.size() < static_cast<std::size_t>(N)) {
    throw DimensionError("assemble: root tables shorter than N");
  }
  roots_l = roots_l.first(N);
  roots_l1 = roots_l1.first(N);

  HamiltonianBlock block;
  block.L = L;
  block.kz = kz;
  block.N = N;
  block.R = R;
  block.modes.reserve(4 * N);
  for (int slot = 1; slot <= 4; ++slot) {
    const int order = slot_order(L, slot);
    const auto roots = slot <= 2 ? roots_l : roots_l1;
    for (int n = 0; n < N; ++n) {
      block.modes.push_back({slot, order, n + 1, roots[n],
                             normalization_at_root(order, roots[n], R)});
    }
  }

  CMatrix &H = block.H;
  H.setZero(4 * N, 4 * N);
  const double bkz = params.B0 * kz;
  for (int n = 0; n < N; ++n) {
    const double p2 = std::pow(roots_l[n] / R, 2);
    const double q2 = std::pow(roots_l1[n] / R, 2);
    H(n, n) = params.epsilon(kz, p2) + params.mass(kz, p2);
    H(N + n, N + n) = params.epsilon(kz, p2) - params.mass(kz, p2);
    H(2 * N + n, 2 * N + n) = params.epsilon(kz, q2) + params.mass(kz, q2);
    H(3 * N + n, 3 * N + n) = params.epsilon(kz, q2) - params.mass(kz, q2);
    // Slots 1,2 (and 3,4) share the same scalar envelope.
    H(n, N + n) = bkz;
    H(N + n, n) = bkz;
    H(2 * N + n, 3 * N + n) = -bkz;
    H(3 * N + n, 2 * N + n) = -bkz;
  }

  const Matrix X = cross_family_overlap(L, roots_l, roots_l1, R);
  CMatrix coupling(N, N);
  for (int m = 0; m < N; ++m) {
    const Complex lower(0.0, -roots_l1[m] / R); // k_- eigen-factor -i q
    coupling.col(m) = params.A0 * lower * X.col(m).cast<Complex>();
  }
  // Slot 1 <- slot 4 and slot 2 <- slot 3 through A0 k_-; the k_+ entries are
  // their adjoints (the Dirichlet boundary term vanishes).
  H.block(0, 3 * N, N, N) = coupling;
  H.block(N, 2 * N, N, N) = coupling;
  H.block(3 * N, 0, N, N) = coupling.adjoint();
  H.block(2 * N, N, N, N) = coupling.adjoint();
  return block;
}

HamiltonianBlock assemble(const MaterialParams &params,
                          const WireGeometry &geom, int L, double kz, int N) {
  if (N < 1) {
    throw DimensionError("assemble: basis size must be >= 1");
  }
  const auto roots_l = bessel_roots(L, N);
  const auto roots_l1 = bessel_roots(L + 1, N);
  return assemble(params, geom.R, L, kz, N, roots_l, roots_l1);
}

BulkBands bulk_dispersion(const MaterialParams &params, double kz,
                          double kpar) {
  const double k2 = kpar * kpar;
  const double eps = params.epsilon(kz, k2);
  const double m = params.mass(kz, k2);
  const double split = std::sqrt(m * m + std::pow(params.B0 * kz, 2) +
                                 std::pow(params.A0 * kpar, 2));
  return {eps - split, eps + split};
}

GapWindow gap_window_unchecked(const MaterialParams &params, double kz) {
  GapWindow w{-std::numeric_limits<double>::infinity(),
              std::numeric_limits<double>::infinity()};
  for (int i = 0; i < kGapScanSamples; ++i) {
    const double kpar = kGapScanMax * i / (kGapScanSamples - 1);
    const auto bands = bulk_dispersion(params, kz, kpar);
    w.lo = std::max(w.lo, bands.minus);
    w.hi = std::min(w.hi, bands.plus);
  }
  return w;
}

GapWindow gap_window(const MaterialParams &params, double kz) {
  const auto w = gap_window_unchecked(params, kz);
  if (!(w.lo < w.hi)) {
    throw GapError("gap_window: inverted window at kz = " + std::to_string(kz));
  }
  return w;
}

void write_block(std::ostream &out, const HamiltonianBlock &block) {
  const nlohmann::json header = {{"L", block.L},
                                 {"kz", block.kz},
                                 {"N", block.N},
                                 {"R", block.R},
                                 {"rows", block.H.rows()},
                                 {"layout", "row-major interleaved re,im f64le"}};
  out << header.dump() << '\n';
  for (Eigen::Index i = 0; i < block.H.rows(); ++i) {
    for (Eigen::Index j = 0; j < block.H.cols(); ++j) {
      const double pair[2] = {block.H(i, j).real(), block.H(i, j).imag()};
      out.write(reinterpret_cast<const char *>(pair), sizeof(pair));
    }
  }
}

HamiltonianBlock read_block(std::istream &in) {
  std::string line;
  if (!std::getline(in, line)) {
    throw Error("read_block: missing header");
  }
  const auto header = nlohmann::json::parse(line);
  HamiltonianBlock block;
  block.L = header.at("L").get<int>();
  block.kz = header.at("kz").get<double>();
  block.N = header.at("N").get<int>();
  block.R = header.at("R").get<double>();
  const auto rows = header.at("rows").get<Eigen::Index>();
  block.H.resize(rows, rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < rows; ++j) {
      double pair[2];
      if (!in.read(reinterpret_cast<char *>(pair), sizeof(pair))) {
        throw Error("read_block: truncated payload");
      }
      block.H(i, j) = {pair[0], pair[1]};
    }
  }
  block.modes = make_modes(block.L, block.N, block.R);
  return block;
}

} // namespace kpwire
