#include "optomech/linearized.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <vector>

#include "optomech/errors.hpp"
#include "optomech/quadrature.hpp"

namespace optomech {

namespace {

constexpr cdouble I(0.0, 1.0);

// Everything below works in units of omega_m: nu = omega / omega_m.
struct Scaled {
  Eigen::Matrix4d K;
  double kappa;
  double gamma;
  double x;  // hbar omega_m / k_B T
  std::vector<double> breakpoints;
};

Scaled scaled(const OptomechParams& p) {
  require_stable(p);
  Scaled s;
  s.K = drift_matrix(p) / p.omega_m;
  s.kappa = p.kappa / p.omega_m;
  s.gamma = p.gamma_m / p.omega_m;
  s.x = p.temperature > 0.0 ? constants::hbar * p.omega_m / (constants::k_B * p.temperature) : INFINITY;
  Eigen::EigenSolver<Eigen::Matrix4d> es(s.K, false);
  for (int i = 0; i < 4; ++i) {
    const double w = es.eigenvalues()[i].imag();
    for (double b : {w, -w, 2.0 - w, 2.0 + w}) s.breakpoints.push_back(b);
  }
  s.breakpoints.push_back(0.0);
  s.breakpoints.push_back(2.0);
  return s;
}

struct Response {
  Eigen::Vector4cd a, b, e;
};

Response response(const Scaled& s, double nu) {
  const Eigen::Matrix4cd m = (-I * nu * Eigen::Matrix4cd::Identity() - s.K.cast<cdouble>()).inverse();
  const double sk = std::sqrt(s.kappa);
  return {sk * (m.col(2) - I * m.col(3)), sk * (m.col(2) + I * m.col(3)), m.col(1)};
}

// S(nu) + S(-nu) in scaled units.
double bath_symmetrized(const Scaled& s, double nu, BathModel bath, double drude_ratio) {
  if (s.gamma == 0.0) return 0.0;
  double value;
  if (bath == BathModel::Markovian) {
    value = 4.0 * s.gamma / s.x;
  } else {
    const double y = 0.5 * s.x * nu;
    if (std::isinf(s.x)) {
      value = 2.0 * s.gamma * std::abs(nu);
    } else if (std::abs(y) < 1e-8) {
      value = 4.0 * s.gamma / s.x;
    } else {
      value = 2.0 * s.gamma * nu / std::tanh(y);
    }
    if (drude_ratio > 0.0) value /= 1.0 + (nu / drude_ratio) * (nu / drude_ratio);
  }
  return value;
}

// Integrates f over the real line: a core window holding all resonances, then
// tail slabs doubling outwards until they stop contributing. The rest of the
// line is added at the end in a compactified variable.
// Each component stops against its own scale, so small entries next to large
// ones are not truncated early.
using ScaleFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

Eigen::VectorXd componentwise_scale(const Eigen::VectorXd& total) {
  const double floor = 1e-10 * std::max(total.cwiseAbs().maxCoeff(), 1e-300);
  return total.cwiseAbs().cwiseMax(floor);
}

Eigen::VectorXd integrate_line(const VectorIntegrand& f, const std::vector<double>& breakpoints, double tail_tol,
                               double rel_tol, const char* context, const ScaleFn& scale_of = componentwise_scale) {
  double reach = 4.0;
  for (double b : breakpoints) reach = std::max(reach, 2.0 * std::abs(b) + 2.0);
  AdaptiveOptions opts;
  opts.rel_tol = rel_tol;
  opts.abs_tol = 1e-14;
  opts.max_intervals = 40000;
  auto run = [&](double a, double b, std::vector<double> pts) {
    auto r = integrate_adaptive(f, a, b, std::move(pts), opts);
    if (!r.converged) {
      std::ostringstream os;
      os << context << ": frequency integral on [" << a << ", " << b << "] did not converge (error "
         << r.error_estimate << ")";
      throw ConvergenceError(os.str());
    }
    return r.value;
  };
  auto run_mapped = [&](const VectorIntegrand& g) {
    auto r = integrate_adaptive(g, 0.0, 1.0, {}, opts);
    if (!r.converged) throw ConvergenceError(std::string(context) + ": frequency tail is not integrable");
    return r.value;
  };
  Eigen::VectorXd total = run(-reach, reach, breakpoints);
  double lo = reach;
  for (int k = 0; k < 60; ++k) {
    const double hi = 2.0 * lo;
    Eigen::VectorXd slab = run(lo, hi, {}) + run(-hi, -lo, {});
    total += slab;
    const Eigen::VectorXd scale = scale_of(total);
    if ((slab.cwiseAbs().array() <= tail_tol * scale.array()).all()) {
      // what lies beyond |nu| = hi, through nu = hi / s on (0, 1]
      VectorIntegrand mapped = [&](double s) -> Eigen::VectorXd {
        const double nu = hi / s;
        return (f(nu) + f(-nu)) * (hi / (s * s));
      };
      return total + run_mapped(mapped);
    }
    lo = hi;
  }
  throw ConvergenceError(std::string(context) + ": frequency tail did not decay");
}

}  // namespace

OptomechParams reference_device(double chi_over_wm) {
  OptomechParams p;
  p.omega_m = 2.0 * M_PI * 947e3;
  p.gamma_m = 1.5e-4 * p.omega_m;
  p.kappa = 0.23 * p.omega_m;
  p.delta_tilde = p.omega_m;
  p.chi = chi_over_wm * p.omega_m;
  p.temperature = 1e-4;
  p.pump = PumpSettings{};
  return p;
}

double intracavity_amplitude(const OptomechParams& p) {
  if (!p.pump) return p.c_s;
  const double omega_l = 2.0 * M_PI * constants::c / p.pump->wavelength;
  const double eps = std::sqrt(p.pump->coupling_factor * p.kappa * p.pump->power / (constants::hbar * omega_l));
  return std::abs(eps / cdouble(p.kappa, p.delta_tilde));
}

void check(const OptomechParams& p) {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0)) throw StructuralError(std::string("optomechanical parameters: ") + name + " must be positive");
  };
  positive(p.omega_m, "omega_m");
  positive(p.gamma_m, "gamma_m");
  positive(p.kappa, "kappa");
  positive(p.temperature, "temperature");
  if (!(p.chi >= 0.0)) throw StructuralError("optomechanical parameters: chi must be non-negative");
  if (!(p.r >= 0.0)) throw StructuralError("optomechanical parameters: r must be non-negative");
  if (p.pump) {
    positive(p.pump->power, "pump power");
    positive(p.pump->wavelength, "pump wavelength");
    positive(p.pump->coupling_factor, "pump coupling factor");
    const double cs = intracavity_amplitude(p);
    if (cs < 1e3) {
      std::ostringstream os;
      os << "optomechanical parameters: |c_s| = " << cs << " is too small for the linearized model (need >= 1e3)";
      throw StructuralError(os.str());
    }
  } else if (!(p.c_s >= 0.0)) {
    throw StructuralError("optomechanical parameters: c_s must be non-negative");
  }
}

double thermal_occupation(const OptomechParams& p) {
  return 1.0 / std::expm1(constants::hbar * p.omega_m / (constants::k_B * p.temperature));
}

Eigen::Matrix4d drift_matrix(const OptomechParams& p) {
  const double g = 2.0 * p.chi * intracavity_amplitude(p);
  Eigen::Matrix4d k;
  k << 0.0, p.omega_m, 0.0, 0.0,
       -p.omega_m, -p.gamma_m, g, 0.0,
       0.0, 0.0, -p.kappa, p.delta_tilde,
       g, 0.0, -p.delta_tilde, -p.kappa;
  return k;
}

void require_stable(const OptomechParams& p) {
  Eigen::EigenSolver<Eigen::Matrix4d> es(drift_matrix(p), false);
  const double re = es.eigenvalues().real().maxCoeff();
  if (re >= 0.0) {
    std::ostringstream os;
    os << "drift matrix is unstable (max Re eigenvalue " << re / p.omega_m << " omega_m)";
    throw DomainError(os.str());
  }
}

TransferCoefficients transfer_coefficients(double w, const OptomechParams& p) {
  const double cs = intracavity_amplitude(p);
  const double chi = p.chi, wm = p.omega_m, g = p.gamma_m, k = p.kappa, D = p.delta_tilde;
  const double sk = std::sqrt(k);
  const cdouble mech = I * g * w + w * w - wm * wm;
  const cdouble kw = k - I * w;
  TransferCoefficients t;
  t.d = 4.0 * cs * cs * chi * chi * D * wm + (D * D + kw * kw) * mech;

  const cdouble u = k + I * (D - w);   // [kappa + i(Delta - omega)]
  const cdouble v = -k + I * (D + w);  // [-kappa + i(Delta + omega)]
  const cdouble z = I * k + D + w;     // (i kappa + Delta + omega)
  t.A[0] = 2.0 * cs * chi * sk * v * wm;
  t.B[0] = -2.0 * cs * chi * sk * u * wm;
  t.C[0] = u * v * wm;

  t.A[1] = 2.0 * cs * chi * sk * z * w;
  t.B[1] = 2.0 * I * cs * chi * sk * u * w;
  t.C[1] = u * z * w;

  const cdouble damp = g * w - I * (w * w - wm * wm);
  t.A[2] = sk * z * damp;
  t.B[2] = sk * (I * k - D + w) * damp;
  t.C[2] = -2.0 * cs * chi * D * wm;

  t.A[3] = -4.0 * cs * cs * chi * chi * sk * wm + sk * (-I * k - D - w) * mech;
  t.B[3] = -4.0 * cs * cs * chi * chi * sk * wm + sk * (I * k - D + w) * mech;
  t.C[3] = -2.0 * cs * chi * kw * wm;
  return t;
}

Eigen::Matrix<cdouble, 4, 3> transfer_matrix_oracle(double omega, const OptomechParams& p) {
  const Eigen::Matrix4cd m = (-I * omega * Eigen::Matrix4cd::Identity() - drift_matrix(p).cast<cdouble>()).inverse();
  const double sk = std::sqrt(p.kappa);
  Eigen::Matrix<cdouble, 4, 3> input = Eigen::Matrix<cdouble, 4, 3>::Zero();
  input(1, 2) = 1.0;
  input(2, 0) = sk;
  input(2, 1) = sk;
  input(3, 0) = -I * sk;
  input(3, 1) = I * sk;
  return m * input;
}

NoiseSpectra noise_spectra(double omega, const OptomechParams& p, BathModel bath) {
  NoiseSpectra n;
  const double y = constants::hbar * omega / (2.0 * constants::k_B * p.temperature);
  const double gm = p.gamma_m / p.omega_m;
  if (bath == BathModel::Markovian) {
    // coth(y) -> 1/y
    const double classical = 2.0 * gm * constants::k_B * p.temperature / constants::hbar;
    n.brownian = gm * omega + classical;
    n.brownian_symmetrized = 2.0 * classical;
  } else if (std::abs(y) < 1e-8) {
    const double classical = 2.0 * gm * constants::k_B * p.temperature / constants::hbar;
    n.brownian = gm * omega + classical;
    n.brownian_symmetrized = 2.0 * classical;
  } else {
    n.brownian = gm * omega * (1.0 + 1.0 / std::tanh(y));
    n.brownian_symmetrized = 2.0 * gm * omega / std::tanh(y);
  }
  n.N = std::sinh(p.r) * std::sinh(p.r);
  n.M = std::sinh(p.r) * std::cosh(p.r) * std::polar(1.0, p.phi);
  return n;
}

Eigen::Matrix4d stationary_covariance(const OptomechParams& p, double occupation, const CovarianceOptions& opts) {
  check(p);
  const Scaled s = scaled(p);
  const double n2 = 2.0 * occupation + 1.0;
  VectorIntegrand f = [&](double nu) -> Eigen::VectorXd {
    const Response r = response(s, nu);
    const double bath = bath_symmetrized(s, nu, opts.bath, opts.drude_ratio);
    const Eigen::Matrix4cd m = 0.5 * (n2 * (r.a * r.a.adjoint() + r.b * r.b.adjoint()) + bath * r.e * r.e.adjoint());
    Eigen::VectorXd out(16);
    Eigen::Map<Eigen::Matrix4d>(out.data()) = m.real();
    return out;
  };
  // entry (i, j) is measured against sqrt(V_ii V_jj)
  ScaleFn cm_scale = [](const Eigen::VectorXd& t) {
    Eigen::VectorXd out(16);
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) out[i + 4 * j] = std::sqrt(std::abs(t[5 * i] * t[5 * j])) + 1e-300;
    }
    return out;
  };
  Eigen::VectorXd total =
      integrate_line(f, s.breakpoints, opts.tail_tol, opts.rel_tol, "stationary_covariance", cm_scale);
  Eigen::Matrix4d v = Eigen::Map<Eigen::Matrix4d>(total.data()) / (2.0 * M_PI);
  return 0.5 * (v + v.transpose());
}

Eigen::Matrix4cd squeezing_kernel(const OptomechParams& p1, const OptomechParams& p2, const CovarianceOptions& opts) {
  check(p1);
  check(p2);
  if (std::abs(p1.omega_m - p2.omega_m) > 1e-12 * p1.omega_m) {
    throw StructuralError("squeezing_kernel: mechanical frequencies must match");
  }
  const Scaled s1 = scaled(p1), s2 = scaled(p2);
  std::vector<double> pts = s1.breakpoints;
  for (double b : s2.breakpoints) pts.push_back(2.0 - b);
  VectorIntegrand f = [&](double nu) -> Eigen::VectorXd {
    const Eigen::Vector4cd a1 = response(s1, nu).a;
    const Eigen::Vector4cd a2 = response(s2, 2.0 - nu).a;
    const Eigen::Matrix4cd m = a1 * a2.transpose();
    Eigen::VectorXd out(32);
    Eigen::Map<Eigen::Matrix4d>(out.data()) = m.real();
    Eigen::Map<Eigen::Matrix4d>(out.data() + 16) = m.imag();
    return out;
  };
  Eigen::VectorXd total = integrate_line(f, pts, opts.tail_tol, opts.rel_tol, "squeezing_kernel");
  Eigen::Matrix4cd k;
  k.real() = Eigen::Map<Eigen::Matrix4d>(total.data());
  k.imag() = Eigen::Map<Eigen::Matrix4d>(total.data() + 16);
  return k / (2.0 * M_PI);
}

CovarianceMatrix covariance_matrix(const OptomechParams& p, double t, const CovarianceOptions& opts) {
  check(p);
  require_stable(p);
  const auto noise = noise_spectra(p.omega_m, p, opts.bath);
  Eigen::Matrix4d v = stationary_covariance(p, noise.N, opts);
  if (!opts.rwa && std::abs(noise.M) > 0.0) {
    const Eigen::Matrix4cd k = squeezing_kernel(p, p, opts);
    const cdouble phase = noise.M * std::polar(1.0, -2.0 * p.omega_m * t);
    Eigen::Matrix4d osc = 2.0 * (phase * k).real();
    v += 0.5 * (osc + osc.transpose());
  }
  return CovarianceMatrix(v);
}

CovarianceMatrix lyapunov_cm_oracle(const OptomechParams& p, BathModel bath) {
  check(p);
  if (p.r != 0.0) throw StructuralError("lyapunov_cm_oracle: only white (r = 0) input is supported");
  require_stable(p);
  const Eigen::Matrix4d k = drift_matrix(p) / p.omega_m;
  const double gm = p.gamma_m / p.omega_m;
  const double x = constants::hbar * p.omega_m / (constants::k_B * p.temperature);
  Eigen::Matrix4d d = Eigen::Matrix4d::Zero();
  d(1, 1) = bath == BathModel::Markovian ? 2.0 * gm / x : gm / std::tanh(0.5 * x);
  d(2, 2) = d(3, 3) = p.kappa / p.omega_m;
  // (I (x) K + K (x) I) vec(V) = -vec(D)
  Eigen::Matrix<double, 16, 16> big = Eigen::Matrix<double, 16, 16>::Zero();
  const Eigen::Matrix4d id = Eigen::Matrix4d::Identity();
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      big.block<4, 4>(4 * i, 4 * j) += id(i, j) * k + k(i, j) * id;
    }
  }
  Eigen::Matrix<double, 16, 1> rhs = -Eigen::Map<const Eigen::Matrix<double, 16, 1>>(d.data());
  Eigen::Matrix<double, 16, 1> sol = big.fullPivLu().solve(rhs);
  Eigen::Matrix4d v = Eigen::Map<Eigen::Matrix4d>(sol.data());
  return CovarianceMatrix(0.5 * (v + v.transpose()));
}

}  // namespace optomech
