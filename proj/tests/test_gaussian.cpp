#include <cmath>
#include <random>

#include <doctest.h>

#include "optomech/errors.hpp"
#include "optomech/gaussian.hpp"

using namespace optomech;

namespace {

// Random symplectic matrix from products of single-mode squeezers,
// rotations and two-mode beam splitters.
Eigen::MatrixXd random_symplectic(int n, std::mt19937& rng) {
  std::uniform_real_distribution<double> angle(0.0, 2.0 * M_PI);
  std::uniform_real_distribution<double> squeeze(-0.6, 0.6);
  Eigen::MatrixXd s = Eigen::MatrixXd::Identity(2 * n, 2 * n);
  for (int layer = 0; layer < 3; ++layer) {
    for (int k = 0; k < n; ++k) {
      Eigen::MatrixXd local = Eigen::MatrixXd::Identity(2 * n, 2 * n);
      const double a = angle(rng), r = squeeze(rng);
      Eigen::Matrix2d rot;
      rot << std::cos(a), std::sin(a), -std::sin(a), std::cos(a);
      Eigen::Matrix2d sq = Eigen::Vector2d(std::exp(-r), std::exp(r)).asDiagonal();
      local.block<2, 2>(2 * k, 2 * k) = sq * rot;
      s = local * s;
    }
    for (int k = 0; k + 1 < n; ++k) {
      const double t = angle(rng);
      Eigen::MatrixXd bs = Eigen::MatrixXd::Identity(2 * n, 2 * n);
      const double c = std::cos(t), si = std::sin(t);
      bs.block<2, 2>(2 * k, 2 * k) = c * Eigen::Matrix2d::Identity();
      bs.block<2, 2>(2 * k + 2, 2 * k + 2) = c * Eigen::Matrix2d::Identity();
      bs.block<2, 2>(2 * k, 2 * k + 2) = si * Eigen::Matrix2d::Identity();
      bs.block<2, 2>(2 * k + 2, 2 * k) = -si * Eigen::Matrix2d::Identity();
      s = bs * s;
    }
  }
  return s;
}

// Physical CM: symplectic transform of a thermal product state.
CovarianceMatrix random_state(int n, std::mt19937& rng) {
  std::uniform_real_distribution<double> occ(0.0, 1.5);
  Eigen::VectorXd nu(2 * n);
  for (int k = 0; k < n; ++k) nu[2 * k] = nu[2 * k + 1] = 0.5 + occ(rng);
  const Eigen::MatrixXd s = random_symplectic(n, rng);
  return CovarianceMatrix(s * nu.asDiagonal() * s.transpose());
}

double max_diff(const CovarianceMatrix& a, const CovarianceMatrix& b) {
  return (a.matrix() - b.matrix()).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_SUITE("gaussian") {
  TEST_CASE("validation") {
    CHECK(validate(CovarianceMatrix::vacuum(1)).ok);
    CHECK(validate(CovarianceMatrix::vacuum(3)).ok);
    CHECK(validate(CovarianceMatrix::thermal(2, 2.0)).ok);
    const auto bad = validate(CovarianceMatrix(0.25 * Eigen::MatrixXd::Identity(2, 2)));
    CHECK_FALSE(bad.ok);
    CHECK_FALSE(bad.diagnostic.empty());
    Eigen::MatrixXd asym = 0.5 * Eigen::MatrixXd::Identity(2, 2);
    asym(0, 1) = 0.1;
    CHECK_FALSE(validate(CovarianceMatrix(asym)).ok);
    CHECK_THROWS_AS(CovarianceMatrix(Eigen::MatrixXd::Identity(3, 3)), StructuralError);
    CHECK_THROWS_AS(CovarianceMatrix(Eigen::MatrixXd::Identity(2, 4)), StructuralError);
  }

  TEST_CASE("symplectic eigenvalues and purity") {
    for (double v : symplectic_eigenvalues(CovarianceMatrix::vacuum(2))) CHECK(v == doctest::Approx(0.5));
    CHECK(purity(CovarianceMatrix::vacuum(2)) == doctest::Approx(1.0));
    const auto th = CovarianceMatrix::thermal(1, 1.7);
    CHECK(symplectic_eigenvalues(th)[0] == doctest::Approx(2.2));
    CHECK(purity(th) == doctest::Approx(1.0 / (2 * 1.7 + 1)));
    for (double v : symplectic_eigenvalues(CovarianceMatrix::two_mode_squeezed(0.8))) {
      CHECK(v == doctest::Approx(0.5).epsilon(1e-12));
    }
    CHECK_THROWS_AS(purity(CovarianceMatrix(0.2 * Eigen::MatrixXd::Identity(2, 2))), ValidationError);
  }

  TEST_CASE("TMSV conditional closed forms") {
    for (double r : {0.1, 0.5, 1.3}) {
      const auto tmsv = CovarianceMatrix::two_mode_squeezed(r);
      const auto het = condition_gaussian(tmsv, 1, Heterodyne{});
      CHECK((het.matrix() - 0.5 * Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-9);
      const auto hom = condition_gaussian(tmsv, 1, Homodyne{0.0});
      Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(2, 2);
      expected(0, 0) = 1.0 / (2.0 * std::cosh(2 * r));
      expected(1, 1) = std::cosh(2 * r) / 2.0;
      CHECK((hom.matrix() - expected).cwiseAbs().maxCoeff() < 1e-9);
      CHECK(hom.matrix().determinant() == doctest::Approx(0.25).epsilon(1e-12));
      CHECK(log_negativity(tmsv) == doctest::Approx(2 * r).epsilon(1e-10));
    }
  }

  TEST_CASE("uncorrelated modes are not updated") {
    const auto prod = CovarianceMatrix::thermal(1, 0.3).direct_sum(CovarianceMatrix::squeezed(0.4));
    for (MeasurementSpec spec : {MeasurementSpec(Homodyne{0.4}), MeasurementSpec(Heterodyne{}),
                                 general_gaussian(Eigen::Vector2d(0.25, 1.0).asDiagonal())}) {
      CHECK(max_diff(condition_gaussian(prod, 1, spec), CovarianceMatrix::thermal(1, 0.3)) < 1e-14);
    }
    const auto four = prod.direct_sum(CovarianceMatrix::vacuum(2));
    const ModeMeasurement both[] = {{2, Homodyne{}}, {3, Heterodyne{}}};
    CHECK(max_diff(condition_gaussian_multi(four, both), prod) < 1e-14);
  }

  TEST_CASE("joint conditioning equals sequential conditioning") {
    std::mt19937 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
      const auto s = random_state(4, rng);
      for (auto [a, b] : {std::pair<MeasurementSpec, MeasurementSpec>{Homodyne{0.3}, Heterodyne{}},
                          {Homodyne{0.0}, Homodyne{1.2}},
                          {Heterodyne{}, Heterodyne{}}}) {
        const ModeMeasurement joint[] = {{2, a}, {3, b}};
        const auto together = condition_gaussian_multi(s, joint);
        const auto one_then_two = condition_gaussian(condition_gaussian(s, 2, a), 2, b);
        const auto two_then_one = condition_gaussian(condition_gaussian(s, 3, b), 2, a);
        CHECK(max_diff(together, one_then_two) < 1e-10);
        CHECK(max_diff(together, two_then_one) < 1e-10);
      }
    }
  }

  TEST_CASE("conditioning keeps states physical and never lowers purity") {
    std::mt19937 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
      const auto s = random_state(2, rng);
      const double marginal_purity = purity(s.marginal({0}));
      for (MeasurementSpec spec : {MeasurementSpec(Homodyne{0.7 * trial}), MeasurementSpec(Heterodyne{})}) {
        const auto c = condition_gaussian(s, 1, spec);
        CHECK(validate(c).ok);
        CHECK(purity(c) >= marginal_purity - 1e-12);
      }
    }
  }

  TEST_CASE("homodyne is the infinitely squeezed limit") {
    std::mt19937 rng(3);
    const double s = 15.0;
    for (int trial = 0; trial < 10; ++trial) {
      const auto st = random_state(2, rng);
      const auto limit = condition_gaussian(st, 1, general_gaussian(CovarianceMatrix::squeezed(s).matrix()));
      CHECK(max_diff(limit, condition_gaussian(st, 1, Homodyne{0.0})) < 1e-6);
    }
  }

  TEST_CASE("rotated homodyne measures the rotated quadrature") {
    const auto tmsv = CovarianceMatrix::two_mode_squeezed(0.6);
    // p on mode 2 of a TMSV carries the anticorrelated momentum
    const auto cp = condition_gaussian(tmsv, 1, Homodyne{M_PI / 2});
    CHECK(cp.matrix()(1, 1) == doctest::Approx(1.0 / (2.0 * std::cosh(1.2))));
    CHECK(cp.matrix()(0, 0) == doctest::Approx(std::cosh(1.2) / 2.0));
  }

  TEST_CASE("measurement specs reject mixed projectors") {
    CHECK_THROWS_AS(general_gaussian(Eigen::Matrix2d::Identity()), ValidationError);
    CHECK_THROWS_AS(general_gaussian(-0.5 * Eigen::Matrix2d::Identity()), ValidationError);
    CHECK_NOTHROW(general_gaussian(0.5 * Eigen::Matrix2d::Identity()));
  }

  TEST_CASE("conditioning errors") {
    const auto tmsv = CovarianceMatrix::two_mode_squeezed(0.3);
    CHECK_THROWS_AS(condition_gaussian(tmsv, 2, Heterodyne{}), StructuralError);
    const ModeMeasurement dup[] = {{0, Heterodyne{}}, {0, Heterodyne{}}};
    CHECK_THROWS_AS(condition_gaussian_multi(CovarianceMatrix::vacuum(3), dup), StructuralError);
    const ModeMeasurement all[] = {{0, Heterodyne{}}, {1, Heterodyne{}}};
    CHECK_THROWS_AS(condition_gaussian_multi(tmsv, all), StructuralError);
    CHECK_THROWS_AS(condition_gaussian(CovarianceMatrix(0.1 * Eigen::MatrixXd::Identity(4, 4)), 1, Heterodyne{}),
                    ValidationError);
  }

  TEST_CASE("log-negativity") {
    CHECK(log_negativity(CovarianceMatrix::vacuum(2)) == 0.0);
    CHECK(log_negativity(CovarianceMatrix::thermal(2, 3.0)) == 0.0);
    std::mt19937 rng(5);
    const auto tmsv = CovarianceMatrix::two_mode_squeezed(0.9);
    for (int trial = 0; trial < 20; ++trial) {
      Eigen::MatrixXd local = Eigen::MatrixXd::Zero(4, 4);
      local.block<2, 2>(0, 0) = random_symplectic(1, rng);
      local.block<2, 2>(2, 2) = random_symplectic(1, rng);
      const CovarianceMatrix moved(local * tmsv.matrix() * local.transpose());
      CHECK(std::abs(log_negativity(moved) - 1.8) < 1e-9);
    }
    CHECK_THROWS_AS(log_negativity(CovarianceMatrix::vacuum(3)), StructuralError);
  }

  TEST_CASE("pseudo-inverse drops null directions") {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(2, 2);
    m(0, 0) = 4.0;
    const Eigen::MatrixXd p = pseudo_inverse(m);
    CHECK(p(0, 0) == doctest::Approx(0.25));
    CHECK(p(1, 1) == 0.0);
  }
}
