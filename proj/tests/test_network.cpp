#include <cmath>

#include <doctest.h>

#include "optomech/errors.hpp"
#include "optomech/network.hpp"

using namespace optomech;

TEST_SUITE("network") {
  TEST_CASE("strategy names round-trip") {
    CHECK(all_strategies().size() == 5);
    for (Strategy s : all_strategies()) CHECK(strategy_from_string(to_string(s)) == s);
    CHECK_THROWS_AS(strategy_from_string("triple_homodyne"), StructuralError);
  }

  TEST_CASE("no shared squeezing means no entanglement") {
    const auto v8 = two_cavity_cm(reference_network(6.2e-6, 0.0));
    CHECK(validate(v8).ok);
    // nothing links the two cavities
    for (int i : {0, 1, 4, 5}) {
      for (int j : {2, 3, 6, 7}) CHECK(v8.matrix()(i, j) == 0.0);
    }
    for (Strategy s : all_strategies()) CHECK(mechanical_entanglement(v8, s) == 0.0);
  }

  TEST_CASE("uncoupled mirrors stay uncorrelated with the light") {
    auto p = reference_network(6.2e-6, 0.8);
    p.cavity_1.chi = p.cavity_2.chi = 0.0;
    p.cavity_1.pump.reset();
    p.cavity_2.pump.reset();
    p.cavity_1.c_s = p.cavity_2.c_s = 1e4;
    const auto v = two_cavity_cm(p).matrix();
    CHECK(v.block<4, 4>(0, 4).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(std::abs(v(0, 2)) < 1e-12);
    // the light itself is two-mode squeezed
    CHECK(v.block<4, 4>(4, 4).cwiseAbs().maxCoeff() > 0.5);
    for (Strategy s : all_strategies()) CHECK(mechanical_entanglement(CovarianceMatrix(v), s) == 0.0);
  }

  TEST_CASE("identical cavities are interchangeable") {
    const auto v8 = two_cavity_cm(reference_network(6.2e-6, 0.7));
    CHECK(validate(v8).ok);
    const Eigen::MatrixXd& m = v8.matrix();
    for (auto [a, b] : {std::pair{0, 2}, {1, 3}, {4, 6}, {5, 7}}) CHECK(m(a, a) == doctest::Approx(m(b, b)).epsilon(1e-9));
    for (Strategy s : {Strategy::SingleHomodyne, Strategy::SingleHeterodyne}) {
      CHECK(std::abs(mechanical_entanglement(v8, s, 1) - mechanical_entanglement(v8, s, 2)) < 1e-9);
    }
    CHECK_THROWS_AS(mechanical_state(v8, Strategy::SingleHomodyne, 3), StructuralError);
  }

  TEST_CASE("entanglement is non-negative and grows from zero") {
    double previous = 0.0;
    for (double r : {0.02, 0.05, 0.1, 0.2}) {
      const auto v8 = two_cavity_cm(reference_network(3e-6, r));
      for (Strategy s : all_strategies()) CHECK(mechanical_entanglement(v8, s) >= 0.0);
      const double e = mechanical_entanglement(v8, Strategy::DoubleHomodyne);
      CHECK(e >= previous);
      previous = e;
    }
    CHECK(previous > 0.0);
  }

  TEST_CASE("measuring the light does not disturb a valid mechanical state") {
    const auto v8 = two_cavity_cm(reference_network(6.2e-6, 1.0));
    for (Strategy s : all_strategies()) {
      const auto m = mechanical_state(v8, s);
      CHECK(m.modes() == 2);
      CHECK(validate(m).ok);
    }
    CHECK((mechanical_state(v8, Strategy::NoDetection).matrix() - v8.marginal({0, 1}).matrix()).cwiseAbs().maxCoeff() ==
          0.0);
  }

  TEST_CASE("rotating-wave option drops the cross-cavity squeezing") {
    CovarianceOptions rwa;
    rwa.rwa = true;
    const auto v = two_cavity_cm(reference_network(6.2e-6, 0.8), rwa).matrix();
    CHECK(std::abs(v(0, 2)) == 0.0);
    CHECK(v.block<2, 2>(4, 6).cwiseAbs().maxCoeff() == 0.0);
  }

  TEST_CASE("sweep layout, threading and failures") {
    const auto base = reference_network(6.2e-6, 0.0);
    const std::vector<double> rs{0.2, 0.6};
    const std::vector<double> ts{1e-4, 1.8e-2};
    const std::vector<Strategy> ss{Strategy::NoDetection, Strategy::DoubleHomodyne};
    const auto rows = sweep_entanglement(base, rs, ss, ts, {}, 1);
    REQUIRE(rows.size() == 8);
    CHECK(rows[0].temperature == 1e-4);
    CHECK(rows[0].r == 0.2);
    CHECK(rows[1].strategy == Strategy::DoubleHomodyne);
    CHECK(rows[2].r == 0.6);
    CHECK(rows[4].temperature == 1.8e-2);
    for (const auto& row : rows) CHECK(row.valid);
    const auto threaded = sweep_entanglement(base, rs, ss, ts, {}, 3);
    for (size_t i = 0; i < rows.size(); ++i) CHECK(threaded[i].log_negativity == rows[i].log_negativity);

    const auto bad = sweep_entanglement(base, {0.3}, ss, {1e-4, -1.0});
    CHECK(bad[0].valid);
    CHECK_FALSE(bad[2].valid);
    CHECK_FALSE(bad[2].error.empty());

    CHECK_THROWS_AS(sweep_entanglement(base, {}, ss, ts), StructuralError);
    CHECK_THROWS_AS(sweep_entanglement(base, rs, {}, ts), StructuralError);
  }
}
