#include "kpwire/basis.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace kpwire {

void MaterialParams::validate() const {
  for (double v : {C0, C1, C2, M0, M1, M2, A0, B0}) {
    if (!std::isfinite(v)) {
      throw ConfigError("material parameters must be finite");
    }
  }
}

std::uint64_t MaterialParams::hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (double v : {C0, C1, C2, M0, M1, M2, A0, B0}) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) {
      h ^= (bits >> (8 * i)) & 0xffU;
      h *= 1099511628211ULL;
    }
  }
  return h;
}

void WireGeometry::validate() const {
  if (!(std::isfinite(R) && R > 0.0)) {
    throw ConfigError("wire radius R must be positive");
  }
  if (!(Rc > 0.0 && Rc < R)) {
    throw ConfigError("sector radius must satisfy 0 < Rc < R");
  }
}

AngularSector sector_a(const WireGeometry &geom) {
  return {-kPi / 6.0, kPi / 2.0, 0.0, geom.Rc};
}
AngularSector sector_b(const WireGeometry &geom) {
  return {7.0 * kPi / 6.0, 11.0 * kPi / 6.0, 0.0, geom.Rc};
}
AngularSector sector_c(const WireGeometry &geom) {
  return {kPi / 2.0, 7.0 * kPi / 6.0, 0.0, geom.Rc};
}

// ---------------------------------------------------------------------------

void bessel_j_orders(int max_order, double x, std::span<double> out) {
  if (max_order < 0 || out.size() < static_cast<std::size_t>(max_order + 1)) {
    throw DimensionError("bessel_j_orders: output span too small");
  }
  std::fill(out.begin(), out.begin() + max_order + 1, 0.0);
  const double ax = std::abs(x);
  if (ax == 0.0) {
    out[0] = 1.0;
    return;
  }

  // Start far enough above the turning point that J_start is negligible.
  const double top = std::max<double>(max_order, ax);
  int start = static_cast<int>(top + 12.0 * std::cbrt(top) + 30.0);
  start += start % 2;

  constexpr double kBig = 1e200;
  constexpr double kRescale = 1e-200;
  double j_next = 0.0;
  double j_cur = 1e-30;
  double even_sum = 0.0;
  for (int k = start; k > 0; --k) {
    const double j_prev = (2.0 * k / ax) * j_cur - j_next;
    j_next = j_cur;
    j_cur = j_prev; // now holds J_{k-1}
    const int order = k - 1;
    if (order <= max_order) {
      out[order] = j_cur;
    }
    if (order > 0 && order % 2 == 0) {
      even_sum += j_cur;
    }
    if (std::abs(j_cur) > kBig) {
      j_cur *= kRescale;
      j_next *= kRescale;
      even_sum *= kRescale;
      for (int i = order; i <= max_order; ++i) {
        out[i] *= kRescale;
      }
    }
  }
  const double norm = j_cur + 2.0 * even_sum;
  for (int i = 0; i <= max_order; ++i) {
    out[i] /= norm;
    if (x < 0.0 && (i % 2) == 1) {
      out[i] = -out[i];
    }
  }
}

double bessel_j(int order, double x) {
  const int n = std::abs(order);
  double small[16];
  std::vector<double> big;
  std::span<double> buf;
  if (n < 16) {
    buf = std::span<double>(small, 16);
  } else {
    big.resize(n + 1);
    buf = big;
  }
  bessel_j_orders(n, x, buf);
  double v = buf[n];
  if (order < 0 && (n % 2) == 1) {
    v = -v;
  }
  return v;
}

namespace {

double refine_root(int nu, double lo, double hi) {
  double f_lo = bessel_j(nu, lo);
  double f_hi = bessel_j(nu, hi);
  if (f_lo * f_hi > 0.0) {
    throw IterationError("bessel_root: bracket has no sign change");
  }
  for (int it = 0; it < 40 && hi - lo > 1e-9 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double f_mid = bessel_j(nu, mid);
    if (f_mid == 0.0) {
      return mid;
    }
    if ((f_mid < 0.0) == (f_lo < 0.0)) {
      lo = mid;
      f_lo = f_mid;
    } else {
      hi = mid;
    }
  }
  double x = 0.5 * (lo + hi);
  for (int it = 0; it < 50; ++it) {
    // J'_nu = J_{nu-1} - (nu / x) J_nu
    const double f = bessel_j(nu, x);
    if (f == 0.0) {
      break;
    }
    if ((f < 0.0) == (f_lo < 0.0)) {
      lo = x;
    } else {
      hi = x;
    }
    const double df = bessel_j(nu - 1, x) - nu / x * f;
    double next = x - f / df;
    if (!(next > lo && next < hi)) {
      next = 0.5 * (lo + hi);
    }
    const bool done = std::abs(next - x) <= 4e-16 * x;
    x = next;
    if (done) {
      break;
    }
  }
  if (std::abs(bessel_j(nu, x)) >= 1e-12) {
    throw IterationError("bessel_root: refinement did not converge");
  }
  return x;
}

} // namespace

std::vector<double> bessel_roots(int L_eff, int count) {
  const int nu = std::abs(L_eff);
  std::vector<double> roots;
  if (count <= 0) {
    return roots;
  }
  roots.reserve(count);
  if (nu == 0) {
    for (int n = 1; n <= count; ++n) {
      // (n - 1/4) pi < j_{0,n} < (n - 1/8) pi
      const double lo = (n - 0.25) * kPi - 1e-3;
      const double hi = (n - 0.125) * kPi;
      roots.push_back(refine_root(0, lo, hi));
    }
    return roots;
  }
  // Interlacing: j_{nu-1,n} < j_{nu,n} < j_{nu-1,n+1}.
  const std::vector<double> lower = bessel_roots(nu - 1, count + 1);
  for (int n = 0; n < count; ++n) {
    roots.push_back(refine_root(nu, lower[n], lower[n + 1]));
  }
  return roots;
}

double bessel_root(int L_eff, int n) {
  if (n < 1) {
    throw DimensionError("bessel_root: root index must be >= 1");
  }
  return bessel_roots(L_eff, n).back();
}

double normalization_at_root(int L_eff, double alpha, double R) {
  return 1.0 / (std::sqrt(kPi) * R * bessel_j(L_eff + 1, alpha));
}

double normalization(int L_eff, int n, double R) {
  return normalization_at_root(L_eff, bessel_root(L_eff, n), R);
}

std::vector<BasisMode> make_modes(int L, int N, double R) {
  std::vector<BasisMode> modes;
  modes.reserve(4 * N);
  const std::vector<double> roots_l = bessel_roots(L, N);
  const std::vector<double> roots_l1 = bessel_roots(L + 1, N);
  for (int slot = 1; slot <= 4; ++slot) {
    const int order = slot_order(L, slot);
    const auto &roots = slot <= 2 ? roots_l : roots_l1;
    for (int n = 1; n <= N; ++n) {
      const double alpha = roots[n - 1];
      modes.push_back({slot, order, n, alpha,
                       normalization_at_root(order, alpha, R)});
    }
  }
  return modes;
}

// ---------------------------------------------------------------------------

void gauss_legendre(int order, Vector &nodes, Vector &weights) {
  nodes.resize(order);
  weights.resize(order);
  for (int i = 0; i < (order + 1) / 2; ++i) {
    double z = std::cos(kPi * (i + 0.75) / (order + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0;
      double p1 = 0.0;
      for (int k = 1; k <= order; ++k) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
      }
      dp = order * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) {
        break;
      }
    }
    nodes[i] = -z;
    nodes[order - 1 - i] = z;
    weights[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    weights[order - 1 - i] = weights[i];
  }
}

RadialQuadrature RadialQuadrature::composite(double lo, double hi, int panels,
                                             int order) {
  Vector x;
  Vector w;
  gauss_legendre(order, x, w);
  RadialQuadrature q;
  q.nodes.resize(static_cast<Eigen::Index>(panels) * order);
  q.weights.resize(q.nodes.size());
  const double h = (hi - lo) / panels;
  for (int p = 0; p < panels; ++p) {
    const double mid = lo + (p + 0.5) * h;
    for (int k = 0; k < order; ++k) {
      q.nodes[p * order + k] = mid + 0.5 * h * x[k];
      q.weights[p * order + k] = 0.5 * h * w[k];
    }
  }
  return q;
}

RadialQuadrature RadialQuadrature::for_wavenumber(double lo, double hi,
                                                  double max_wavenumber) {
  const int panels = std::max(
      4, static_cast<int>(std::ceil((hi - lo) * max_wavenumber / kPi)) + 2);
  return composite(lo, hi, panels);
}

namespace {

double quad_mixed(int L1, int L2, double a, double b, double lo, double hi,
                  int panels, double *max_abs) {
  const auto q = RadialQuadrature::composite(lo, hi, panels);
  double sum = 0.0;
  double peak = 0.0;
  for (Eigen::Index k = 0; k < q.nodes.size(); ++k) {
    const double r = q.nodes[k];
    const double f = bessel_j(L1, a * r) * bessel_j(L2, b * r) * r;
    peak = std::max(peak, std::abs(f));
    sum += q.weights[k] * f;
  }
  if (max_abs != nullptr) {
    *max_abs = peak;
  }
  return sum;
}

} // namespace

double radial_overlap(int L1, int L2, double a, double b, double r_lo,
                      double r_hi) {
  if (!(r_hi > r_lo) || r_lo < 0.0) {
    throw DimensionError("radial_overlap: need 0 <= r_lo < r_hi");
  }
  const double k = std::max(std::abs(a), std::abs(b));
  const int panels = std::max(
      4, static_cast<int>(std::ceil((r_hi - r_lo) * k / kPi)) + 2);
  double peak = 0.0;
  const double coarse = quad_mixed(L1, L2, a, b, r_lo, r_hi, panels, nullptr);
  const double fine = quad_mixed(L1, L2, a, b, r_lo, r_hi, 2 * panels, &peak);
  if (std::abs(fine - coarse) > 1e-10 * (r_hi - r_lo) * peak) {
    throw QuadratureError("radial_overlap: quadrature error estimate too large");
  }
  return fine;
}

double radial_overlap(int L, double a, double b, double r_lo, double r_hi) {
  return radial_overlap(L, L, a, b, r_lo, r_hi);
}

double lommel_integral(int L, double a, double b, double x) {
  const int nu = std::abs(L);
  const double ja = bessel_j(nu, a * x);
  if (a == b) {
    return 0.5 * x * x *
           (ja * ja - bessel_j(nu - 1, a * x) * bessel_j(nu + 1, a * x));
  }
  const double jb = bessel_j(nu, b * x);
  return x *
         (b * ja * bessel_j(nu - 1, b * x) - a * bessel_j(nu - 1, a * x) * jb) /
         (a * a - b * b);
}

Complex angular_overlap(int dL, double phi_lo, double phi_hi) {
  if (dL == 0) {
    return {phi_hi - phi_lo, 0.0};
  }
  const double m = dL;
  // (e^{i m hi} - e^{i m lo}) / (i m)
  const double re = (std::sin(m * phi_hi) - std::sin(m * phi_lo)) / m;
  const double im = -(std::cos(m * phi_hi) - std::cos(m * phi_lo)) / m;
  return {re, im};
}

Matrix mode_values(const RadialQuadrature &quad, int L_eff,
                   std::span<const double> roots, double R) {
  const int nu = std::abs(L_eff);
  const auto count = static_cast<Eigen::Index>(roots.size());
  Matrix F(quad.nodes.size(), count);
  Vector norms(count);
  for (Eigen::Index n = 0; n < count; ++n) {
    norms[n] = normalization_at_root(L_eff, roots[n], R);
  }
  std::vector<double> buf(nu + 1);
  for (Eigen::Index k = 0; k < quad.nodes.size(); ++k) {
    for (Eigen::Index n = 0; n < count; ++n) {
      bessel_j_orders(nu, roots[n] * quad.nodes[k] / R, buf);
      double v = buf[nu];
      if (L_eff < 0 && (nu % 2) == 1) {
        v = -v;
      }
      F(k, n) = norms[n] * v;
    }
  }
  return F;
}

Matrix radial_gram(const RadialQuadrature &quad, const Matrix &F1,
                   const Matrix &F2) {
  const Vector wr = quad.weights.cwiseProduct(quad.nodes);
  return F1.transpose() * wr.asDiagonal() * F2;
}

// ---------------------------------------------------------------------------

bool set_wire_field(WireConfig &cfg, std::string_view key, double value) {
  auto &p = cfg.params;
  if (key == "C0") p.C0 = value;
  else if (key == "C1") p.C1 = value;
  else if (key == "C2") p.C2 = value;
  else if (key == "M0") p.M0 = value;
  else if (key == "M1") p.M1 = value;
  else if (key == "M2") p.M2 = value;
  else if (key == "A0") p.A0 = value;
  else if (key == "B0") p.B0 = value;
  else if (key == "R") cfg.geom.R = value;
  else if (key == "Rc") cfg.geom.Rc = value;
  else return false;
  return true;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
    s.remove_prefix(1);
  }
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
    s.remove_suffix(1);
  }
  return s;
}

double parse_number(std::string_view key, std::string_view text) {
  const std::string s(text);
  char *end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v)) {
    throw ConfigError("invalid numeric value for '" + std::string(key) +
                      "': '" + s + "'");
  }
  return v;
}

} // namespace

WireConfig parse_wire_config(std::string_view text) {
  WireConfig cfg;
  const std::string_view body = trim(text);
  if (!body.empty() && body.front() == '{') {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::parse_error &e) {
      throw ConfigError(std::string("malformed JSON config: ") + e.what());
    }
    for (const auto &[key, value] : j.items()) {
      if (!value.is_number()) {
        throw ConfigError("config key '" + key + "' must be numeric");
      }
      if (!set_wire_field(cfg, key, value.get<double>())) {
        throw ConfigError("unknown config key '" + key + "'");
      }
    }
  } else {
    std::istringstream in{std::string(body)};
    std::string line;
    while (std::getline(in, line)) {
      std::string_view view = line;
      if (auto hash = view.find('#'); hash != std::string_view::npos) {
        view = view.substr(0, hash);
      }
      view = trim(view);
      if (view.empty()) {
        continue;
      }
      const auto eq = view.find('=');
      if (eq == std::string_view::npos) {
        throw ConfigError("malformed config line: '" + std::string(view) + "'");
      }
      const auto key = trim(view.substr(0, eq));
      const double value = parse_number(key, trim(view.substr(eq + 1)));
      if (!set_wire_field(cfg, key, value)) {
        throw ConfigError("unknown config key '" + std::string(key) + "'");
      }
    }
  }
  cfg.params.validate();
  cfg.geom.validate();
  return cfg;
}

WireConfig load_wire_config(const std::string &path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file '" + path + "'");
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_wire_config(ss.str());
}

} // namespace kpwire
