#include <cmath>
#include <random>

#include <doctest.h>

#include "optomech/errors.hpp"
#include "optomech/linearized.hpp"

using namespace optomech;

namespace {

OptomechParams decoupled(double temperature = 1e-3) {
  OptomechParams p;
  p.omega_m = 2 * M_PI * 947e3;
  p.gamma_m = 1.5e-4 * p.omega_m;
  p.kappa = 0.23 * p.omega_m;
  p.delta_tilde = p.omega_m;
  p.chi = 0.0;
  p.c_s = 1e4;
  p.temperature = temperature;
  return p;
}

// Entry scale sqrt(V_ii V_jj) bounds |V_ij| for any CM.
double scaled_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  double worst = 0.0;
  for (int i = 0; i < a.rows(); ++i) {
    for (int j = 0; j < a.cols(); ++j) {
      const double scale = std::sqrt(std::abs(b(i, i) * b(j, j)));
      worst = std::max(worst, std::abs(a(i, j) - b(i, j)) / scale);
    }
  }
  return worst;
}

}  // namespace

TEST_SUITE("linearized") {
  TEST_CASE("reference device is stable and strongly driven") {
    const auto p = reference_device(6.2e-6);
    CHECK_NOTHROW(check(p));
    CHECK_NOTHROW(require_stable(p));
    CHECK(intracavity_amplitude(p) >= 1e3);
    const Eigen::EigenSolver<Eigen::Matrix4d> es(drift_matrix(p));
    CHECK(es.eigenvalues().real().maxCoeff() < 0.0);
  }

  TEST_CASE("drift matrix limits") {
    auto p = decoupled();
    const Eigen::Matrix4d k = drift_matrix(p);
    CHECK(k.block<2, 2>(0, 2).cwiseAbs().maxCoeff() == 0.0);
    CHECK(k.block<2, 2>(2, 0).cwiseAbs().maxCoeff() == 0.0);

    p.gamma_m = 0.0;
    p.kappa = 0.0;
    p.delta_tilde = 0.4 * p.omega_m;
    const Eigen::EigenSolver<Eigen::Matrix4d> es(drift_matrix(p));
    std::vector<double> im;
    for (int i = 0; i < 4; ++i) {
      CHECK(std::abs(es.eigenvalues()[i].real()) < 1e-9 * p.omega_m);
      im.push_back(es.eigenvalues()[i].imag() / p.omega_m);
    }
    std::sort(im.begin(), im.end());
    CHECK(im[0] == doctest::Approx(-1.0));
    CHECK(im[1] == doctest::Approx(-0.4));
    CHECK(im[2] == doctest::Approx(0.4));
    CHECK(im[3] == doctest::Approx(1.0));
  }

  TEST_CASE("unstable coupling is a domain error") {
    auto p = reference_device(6.2e-6);
    p.pump.reset();
    p.c_s = 1e8;
    CHECK_THROWS_AS(require_stable(p), DomainError);
    CHECK_THROWS_AS(stationary_covariance(p, 0.0), DomainError);
  }

  TEST_CASE("transfer coefficients match the matrix inverse") {
    std::mt19937 rng(2024);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int accepted = 0;
    double worst = 0.0;
    while (accepted < 100) {
      OptomechParams p;
      p.omega_m = 2 * M_PI * (1e5 + 1e7 * u(rng));
      p.gamma_m = std::pow(10.0, -4 + 3 * u(rng)) * p.omega_m;
      p.kappa = (0.05 + 2 * u(rng)) * p.omega_m;
      p.delta_tilde = (0.1 + 2 * u(rng)) * p.omega_m;
      p.c_s = 1e3 + 1e5 * u(rng);
      p.chi = (0.6 * u(rng)) * p.omega_m / p.c_s;
      p.temperature = 1e-3;
      try {
        require_stable(p);
      } catch (const DomainError&) {
        continue;
      }
      ++accepted;
      const double omega = (-3 + 6 * u(rng)) * p.omega_m;
      const auto tc = transfer_coefficients(omega, p);
      const auto oracle = transfer_matrix_oracle(omega, p);
      for (int j = 0; j < 4; ++j) {
        const cdouble got[3] = {tc.A[j] / tc.d, tc.B[j] / tc.d, tc.C[j] / tc.d};
        const double row = oracle.row(j).cwiseAbs().maxCoeff();
        for (int c = 0; c < 3; ++c) worst = std::max(worst, std::abs(got[c] - oracle(j, c)) / row);
      }
    }
    CHECK(worst < 1e-10);
  }

  TEST_CASE("static mechanical susceptibility") {
    const auto p = decoupled();
    const auto tc = transfer_coefficients(0.0, p);
    CHECK(std::abs(tc.C[0] / tc.d - 1.0 / p.omega_m) < 1e-12 / p.omega_m);
    for (const auto& v : {tc.A[1], tc.B[1], tc.C[1]}) CHECK(std::abs(v) == 0.0);
  }

  TEST_CASE("denominator is smallest near mechanical resonance") {
    auto argmin_d = [](const OptomechParams& p, double lo, double hi, double step) {
      double best = 1e300, where = 0.0;
      for (double w = lo; w <= hi; w += step) {
        const double d = std::abs(transfer_coefficients(w * p.omega_m, p).d);
        if (d < best) {
          best = d;
          where = w;
        }
      }
      return where;
    };
    // weak coupling: the minimum sits within a mechanical linewidth of omega_m
    auto weak = reference_device(6.2e-6);
    weak.pump.reset();
    weak.c_s = 100.0;
    CHECK(std::abs(argmin_d(weak, 0.99, 1.01, 1e-6) - 1.0) < weak.gamma_m / weak.omega_m);

    // the reference device is normal-mode split; the minimum tracks the lower
    // hybrid mode within its linewidth
    const auto p = reference_device(6.2e-6);
    const double where = argmin_d(p, 0.0, 3.0, 1e-5);
    const Eigen::EigenSolver<Eigen::Matrix4d> es(drift_matrix(p));
    double lower = 1e300, width = 0.0;
    for (int i = 0; i < 4; ++i) {
      const double im = std::abs(es.eigenvalues()[i].imag()) / p.omega_m;
      if (im < lower) {
        lower = im;
        width = -es.eigenvalues()[i].real() / p.omega_m;
      }
    }
    CHECK(std::abs(where - lower) < width);
  }

  TEST_CASE("noise spectra") {
    auto p = decoupled();
    auto n = noise_spectra(p.omega_m, p);
    CHECK(n.N == 0.0);
    CHECK(std::abs(n.M) == 0.0);
    p.r = 1.0;
    n = noise_spectra(p.omega_m, p);
    CHECK(n.N == doctest::Approx(1.3811).epsilon(1e-4));
    CHECK(n.M.real() == doctest::Approx(1.8134).epsilon(1e-4));
    CHECK(n.M.imag() == 0.0);

    p.temperature = 1e3;
    const double classical = 4.0 * p.gamma_m / p.omega_m * constants::k_B * p.temperature / constants::hbar;
    for (double w : {0.1, 1.0, 3.0}) {
      CHECK(noise_spectra(w * p.omega_m, p).brownian_symmetrized == doctest::Approx(classical).epsilon(1e-6));
    }
    CHECK(noise_spectra(p.omega_m, p, BathModel::Markovian).brownian_symmetrized == doctest::Approx(classical));
    // detailed balance: emission and absorption differ by the zero-point part
    p.temperature = 1e-5;
    const auto hi = noise_spectra(p.omega_m, p), lo = noise_spectra(-p.omega_m, p);
    CHECK(hi.brownian - lo.brownian == doctest::Approx(2.0 * p.gamma_m));
  }

  TEST_CASE("decoupled cavity and thermal mirror") {
    for (double temp : {1e-4, 1e-3, 1e-2}) {
      const auto p = decoupled(temp);
      const auto v = covariance_matrix(p, 0.0).matrix();
      const double expected = thermal_occupation(p) + 0.5;
      CHECK(v(0, 0) == doctest::Approx(expected).epsilon(1e-2));
      CHECK(v(1, 1) == doctest::Approx(expected).epsilon(1e-2));
      CHECK(std::abs(v(0, 1)) < 1e-2 * expected);
      CHECK((v.block<2, 2>(2, 2) - 0.5 * Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() < 1e-6);
      CHECK(v.block<2, 2>(0, 2).cwiseAbs().maxCoeff() < 1e-9);

      const auto o = lyapunov_cm_oracle(p).matrix();
      CHECK(o(0, 0) == doctest::Approx(constants::k_B * temp / (constants::hbar * p.omega_m)).epsilon(1e-9));
      CHECK((o.block<2, 2>(2, 2) - 0.5 * Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() < 1e-12);
      CHECK(o.block<2, 2>(0, 2).cwiseAbs().maxCoeff() < 1e-12);
    }
  }

  TEST_CASE("frequency integral agrees with the Lyapunov oracle") {
    const auto p = reference_device(6.2e-6);
    CovarianceOptions opts;
    opts.bath = BathModel::Markovian;
    const auto v = covariance_matrix(p, 0.0, opts);
    const auto o = lyapunov_cm_oracle(p, BathModel::Markovian);
    CHECK(validate(v).ok);
    CHECK(validate(o).ok);
    for (double nu : symplectic_eigenvalues(o)) CHECK(nu >= 0.5 - 1e-9);
    CHECK(scaled_diff(v.matrix(), o.matrix()) < 0.05);

    // the quantum bath oracle uses a flat D_pp too, so only near-agreement
    const auto vq = covariance_matrix(p, 0.0);
    CHECK(validate(vq).ok);
    CHECK(scaled_diff(vq.matrix(), lyapunov_cm_oracle(p, BathModel::Quantum).matrix()) < 0.05);
  }

  TEST_CASE("squeezed input adds an oscillating part") {
    auto p = reference_device(6.2e-6);
    p.r = 0.5;
    const double quarter = M_PI / (2.0 * p.omega_m);
    const double t = 0.37 / p.omega_m;
    CovarianceOptions rwa;
    rwa.rwa = true;
    const Eigen::MatrixXd stat = covariance_matrix(p, t, rwa).matrix();
    CHECK((covariance_matrix(p, 3.0 / p.omega_m, rwa).matrix() - stat).cwiseAbs().maxCoeff() == 0.0);
    const Eigen::MatrixXd a = covariance_matrix(p, t).matrix();
    const Eigen::MatrixXd b = covariance_matrix(p, t + quarter).matrix();
    const Eigen::MatrixXd c = covariance_matrix(p, t + 2 * quarter).matrix();
    CHECK((a - stat).cwiseAbs().maxCoeff() > 1e-3 * stat.cwiseAbs().maxCoeff());
    CHECK(scaled_diff(0.5 * (a + b), stat) < 1e-9);
    CHECK(scaled_diff(c, a) < 1e-9);
    CHECK(validate(CovarianceMatrix(a)).ok);
  }

  TEST_CASE("larger frequency window changes nothing") {
    const auto p = reference_device(6.2e-6);
    CovarianceOptions loose, tight;
    tight.tail_tol = 1e-9;
    const auto a = covariance_matrix(p, 0.0, loose).matrix();
    const auto b = covariance_matrix(p, 0.0, tight).matrix();
    CHECK(scaled_diff(a, b) < 1e-6);
  }

  TEST_CASE("squeezing kernel vanishes without coupling to the input") {
    auto p = decoupled();
    const auto k = squeezing_kernel(p, p);
    // the mechanical rows see no optical input when chi = 0
    CHECK(k.block<2, 4>(0, 0).cwiseAbs().maxCoeff() < 1e-12);
  }

  TEST_CASE("Lyapunov oracle rejects squeezing") {
    auto p = reference_device(6.2e-6);
    p.r = 0.3;
    CHECK_THROWS(lyapunov_cm_oracle(p));
  }
}
