#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace optomech {

/// Gauss-Hermite rule for weight exp(-x^2): exact for polynomials of degree
/// up to 2*order - 1.
struct GaussHermiteRule {
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;
};

/// Rules are cached per order; the returned reference stays valid for the
/// lifetime of the program.
const GaussHermiteRule& gauss_hermite(int order);

struct AdaptiveResult {
  Eigen::VectorXd value;
  double error_estimate = 0.0;
  int evaluations = 0;
  bool converged = false;
};

struct AdaptiveOptions {
  double abs_tol = 1e-10;
  double rel_tol = 1e-10;
  int max_intervals = 20000;
};

using VectorIntegrand = std::function<Eigen::VectorXd(double)>;

/// Globally adaptive 15-point Gauss-Kronrod integration of a vector-valued
/// function over [a, b], with the interval initially split at `breakpoints`
/// (those outside (a, b) are ignored). Error is measured in the max norm.
AdaptiveResult integrate_adaptive(const VectorIntegrand& f, double a, double b,
                                  std::vector<double> breakpoints = {},
                                  const AdaptiveOptions& opts = {});

}  // namespace optomech
