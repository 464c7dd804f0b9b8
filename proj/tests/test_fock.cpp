#include <cmath>
#include <random>

#include <doctest.h>

#include "optomech/errors.hpp"
#include "optomech/fock.hpp"
#include "optomech/linearized.hpp"

using namespace optomech;

namespace {

// beam splitter mixing of a squeezed and a thermal mode: correlated, mixed,
// with no symmetry that would hide index mistakes
CovarianceMatrix mixed_correlated() {
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(4, 4);
  v.block<2, 2>(0, 0) = CovarianceMatrix::squeezed(0.3).matrix();
  v.block<2, 2>(2, 2) = CovarianceMatrix::thermal(1, 0.2).matrix();
  const double t = 0.6;
  Eigen::MatrixXd bs = Eigen::MatrixXd::Identity(4, 4);
  bs.block<2, 2>(0, 0) *= std::cos(t);
  bs.block<2, 2>(2, 2) *= std::cos(t);
  bs.block<2, 2>(0, 2) = std::sin(t) * Eigen::Matrix2d::Identity();
  bs.block<2, 2>(2, 0) = -std::sin(t) * Eigen::Matrix2d::Identity();
  Eigen::MatrixXd rot = Eigen::MatrixXd::Identity(4, 4);
  rot.block<2, 2>(2, 2) << std::cos(0.9), std::sin(0.9), -std::sin(0.9), std::cos(0.9);
  return CovarianceMatrix(rot * bs * v * bs.transpose() * rot.transpose());
}

double max_abs(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_SUITE("fock") {
  TEST_CASE("characteristic function") {
    const cdouble l[] = {{0.3, -0.7}};
    CHECK(std::abs(characteristic_function(CovarianceMatrix::vacuum(1), l) - std::exp(-0.5 * std::norm(l[0]))) < 1e-15);
    const double nbar = 1.3;
    CHECK(std::abs(characteristic_function(CovarianceMatrix::thermal(1, nbar), l) -
                   std::exp(-(nbar + 0.5) * std::norm(l[0]))) < 1e-15);
    const cdouble l2[] = {{0.3, -0.7}, {0.1, 0.2}};
    CHECK(std::abs(characteristic_function(CovarianceMatrix::vacuum(2), l2) -
                   std::exp(-0.5 * (std::norm(l2[0]) + std::norm(l2[1])))) < 1e-15);
  }

  TEST_CASE("single-mode reconstruction") {
    const auto vac = dm_from_cm(CovarianceMatrix::vacuum(1), 6);
    CHECK(std::abs(vac.entries(0, 0) - 1.0) < 1e-12);
    CHECK(vac.entries.cwiseAbs().sum() == doctest::Approx(1.0).epsilon(1e-12));

    const auto th = dm_from_cm(CovarianceMatrix::thermal(1, 1.0), 40);
    for (int n = 0; n <= 40; ++n) CHECK(std::abs(th.entries(n, n) - std::pow(0.5, n + 1)) < 1e-12);
    CHECK(max_abs((th.entries - Eigen::MatrixXcd(th.entries.diagonal().asDiagonal())).cwiseAbs()) < 1e-12);
    CHECK(th.trace_deficit == doctest::Approx(std::pow(0.5, 41)).epsilon(1e-6));

    const auto sq = dm_from_cm(CovarianceMatrix::squeezed(0.5), 30, ReconstructionOptions{5e-3, true, 1e-9});
    for (int n = 1; n <= 30; n += 2) CHECK(std::abs(sq.entries(n, n)) < 1e-8);
    CHECK(sq.hermiticity_error() < 1e-12);
    CHECK(sq.min_eigenvalue() > -1e-8);
    // pure squeezed vacuum: p_2 / p_0 = tanh^2 r / 2
    CHECK(sq.entries(2, 2).real() / sq.entries(0, 0).real() == doctest::Approx(0.5 * std::pow(std::tanh(0.5), 2)));
    CHECK((fock_populations(CovarianceMatrix::squeezed(0.5), 30) - sq.populations()).cwiseAbs().maxCoeff() < 1e-12);
  }

  TEST_CASE("too small a cutoff is reported") {
    CHECK_THROWS_AS(dm_from_cm(CovarianceMatrix::thermal(1, 3.0), 4), ConvergenceError);
    const int n = adequate_cutoff(CovarianceMatrix::thermal(1, 3.0));
    CHECK(std::pow(0.75, n + 1) < 1e-8);
    CHECK(std::pow(0.75, n) >= 1e-8);
    CHECK_NOTHROW(dm_from_cm(CovarianceMatrix::thermal(1, 3.0), n));
  }

  TEST_CASE("two-mode reconstruction of the squeezed vacuum") {
    const double r = 0.4, lam = std::tanh(r);
    const auto rho = dm_from_cm(CovarianceMatrix::two_mode_squeezed(r), 20, 20);
    for (int n = 0; n <= 5; ++n) {
      for (int m = 0; m <= 5; ++m) {
        const cdouble expected = (1 - lam * lam) * std::pow(lam, n + m);
        CHECK(std::abs(rho.entries(rho.index(n, n), rho.index(m, m)) - expected) < 1e-10);
      }
    }
    CHECK(std::abs(rho.entries(rho.index(1, 0), rho.index(1, 0))) < 1e-12);

    // product state: entries factorize in (mode 1, mode 2) order
    const auto prod = dm_from_cm(CovarianceMatrix::thermal(1, 0.5).direct_sum(CovarianceMatrix::vacuum(1)), 20, 4);
    CHECK(prod.n_max == 20);
    CHECK(prod.n_max_2 == 4);
    CHECK(std::abs(prod.entries(prod.index(2, 0), prod.index(2, 0)) - std::pow(0.5, 2) / std::pow(1.5, 3)) < 1e-10);
    CHECK(std::abs(prod.entries(prod.index(0, 1), prod.index(0, 1))) < 1e-12);

    const auto asym = dm_from_cm(mixed_correlated(), 12, 25, ReconstructionOptions{5e-3, true, 1e-8});
    CHECK(asym.hermiticity_error() < 1e-12);
    CHECK(asym.min_eigenvalue() > -1e-8);
    CHECK((fock_populations(mixed_correlated().marginal({0}), 12) - [&] {
            Eigen::VectorXd p = Eigen::VectorXd::Zero(13);
            for (int a = 0; a <= 12; ++a)
              for (int b = 0; b <= 25; ++b) p[a] += asym.entries(asym.index(a, b), asym.index(a, b)).real();
            return p;
          }()).cwiseAbs().maxCoeff() < 1e-8);
  }

  TEST_CASE("photon counting on the squeezed vacuum heralds a Fock state") {
    for (double r : {0.05, 0.4}) {
      const double lam = std::tanh(r);
      const auto rho = dm_from_cm(CovarianceMatrix::two_mode_squeezed(r), 20, 20);
      const auto c = condition_fock(rho, 1);
      CHECK(c.probability == doctest::Approx((1 - lam * lam) * lam * lam).epsilon(1e-9));
      CHECK(std::abs(c.rho.entries(1, 1) - 1.0) < 1e-9);
      CHECK(c.rho.mode_count == 1);
    }
    const auto prod = dm_from_cm(CovarianceMatrix::thermal(1, 0.5).direct_sum(CovarianceMatrix::thermal(1, 0.2)), 25, 15);
    const auto c = condition_fock(prod, 2);
    const auto marginal = dm_from_cm(CovarianceMatrix::thermal(1, 0.5), 25);
    CHECK(max_abs((c.rho.entries - marginal.entries / marginal.trace()).cwiseAbs()) < 1e-10);
    CHECK(c.probability == doctest::Approx(0.04 / std::pow(1.2, 3)).epsilon(1e-9));
    CHECK_THROWS_AS(condition_fock(dm_from_cm(CovarianceMatrix::vacuum(2), 3, 3), 2), DegenerateOutcomeError);
  }

  TEST_CASE("outcome probabilities sum to one") {
    const auto rho = dm_from_cm(mixed_correlated(), 20, 20);
    double total = 0.0;
    for (int n = 0; n <= 20; ++n) {
      try {
        total += condition_fock(rho, n).probability;
      } catch (const DegenerateOutcomeError&) {
      }
    }
    CHECK(total == doctest::Approx(rho.trace()).epsilon(1e-12));
  }

  TEST_CASE("Geiger click by difference equals the Fock sum") {
    GridSpec g;
    g.resolution = 61;
    for (const auto& cm : {CovarianceMatrix::two_mode_squeezed(0.4), mixed_correlated()}) {
      const auto diff = condition_geiger(cm, g);
      const auto rho = dm_from_cm(cm, adequate_cutoff(cm.marginal({0})), adequate_cutoff(cm.marginal({1})));
      const auto sum = condition_geiger_fock_sum(rho);
      const auto w = wigner_from_fock_dm(sum.rho.normalized(), diff.grid.spec);
      CHECK(max_abs(diff.grid.values - w.values) < 1e-5);
      CHECK(diff.probability == doctest::Approx(sum.probability).epsilon(1e-6));
    }
    const double n_cav = std::pow(std::sinh(0.4), 2);
    CHECK(condition_geiger(CovarianceMatrix::two_mode_squeezed(0.4), g).probability ==
          doctest::Approx(1.0 - 1.0 / (1.0 + n_cav)).epsilon(1e-12));
    CHECK_THROWS_AS(condition_geiger(CovarianceMatrix::vacuum(2), g), DegenerateOutcomeError);
  }

  TEST_CASE("phase-space and Fock routes agree") {
    GridSpec g;
    g.resolution = 61;
    auto cm4 = reference_device(6.2e-6);
    cm4.temperature = 1e-5;
    // mechanics and cavity field of the linearized model as modes 1 and 2
    const auto lin = covariance_matrix(cm4, 0.0);
    const CovarianceMatrix states[] = {CovarianceMatrix::two_mode_squeezed(0.5), mixed_correlated(), lin};
    for (const auto& s : states) {
      for (int n : {1, 2}) {
        const auto direct = conditional_wigner_fock_direct(s, n, g);
        const auto via_dm = conditional_wigner_fock_dm(s, n, g);
        CHECK(max_abs(direct.grid.values - via_dm.grid.values) < 1e-5);
        CHECK(direct.probability == doctest::Approx(via_dm.probability).epsilon(1e-6));
      }
    }
    const auto one = conditional_wigner_fock_direct(CovarianceMatrix::two_mode_squeezed(0.5), 1);
    CHECK(std::abs(negativity_volume(one.grid).value - (2 * std::exp(-0.5) - 1)) < 1e-3);
  }

  TEST_CASE("Gaussian measurements keep the Wigner function positive") {
    const auto lin = covariance_matrix(reference_device(6.2e-6), 0.0);
    for (MeasurementSpec spec : {MeasurementSpec(Homodyne{}), MeasurementSpec(Homodyne{1.0}), MeasurementSpec(Heterodyne{})}) {
      const auto w = wigner_gaussian(condition_gaussian(lin, 1, spec));
      CHECK(negativity_volume(w).value == 0.0);
    }
  }
}
