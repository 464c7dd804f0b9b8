#include "optomech/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <queue>

#include "optomech/errors.hpp"

namespace optomech {

const GaussHermiteRule& gauss_hermite(int order) {
  if (order < 1) throw StructuralError("gauss_hermite: order must be positive");
  static std::mutex mutex;
  static std::map<int, GaussHermiteRule> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(order);
  if (it != cache.end()) return it->second;

  // Golub-Welsch on the symmetric Jacobi matrix of the Hermite recurrence.
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(order, order);
  for (int i = 1; i < order; ++i) {
    jacobi(i, i - 1) = jacobi(i - 1, i) = std::sqrt(0.5 * i);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi);
  GaussHermiteRule rule;
  rule.nodes = solver.eigenvalues();
  rule.weights.resize(order);
  // Eigenvector weights lose relative accuracy at the outer nodes. Polish the
  // nodes with Newton on the Hermite function psi_n and take Christoffel weights.
  for (int i = 0; i < order; ++i) {
    double x = rule.nodes[i];
    double sum = 0.0;
    for (int iter = 0; iter < 3; ++iter) {
      double prev = 0.0, cur = std::pow(M_PI, -0.25) * std::exp(-0.5 * x * x);
      sum = cur * cur;
      for (int k = 0; k < order; ++k) {
        const double next = std::sqrt(2.0 / (k + 1)) * x * cur - std::sqrt(double(k) / (k + 1)) * prev;
        prev = cur;
        cur = next;
        if (k + 1 < order) sum += cur * cur;
      }
      // cur = psi_order(x), prev = psi_{order-1}(x)
      const double deriv = std::sqrt(2.0 * order) * prev - x * cur;
      if (deriv != 0.0 && iter < 2) x -= cur / deriv;
    }
    rule.nodes[i] = x;
    rule.weights[i] = sum > 0.0 ? std::exp(-x * x) / sum : 0.0;
  }
  // Symmetrize: the exact rule is symmetric about zero.
  for (int i = 0; i < order / 2; ++i) {
    const int j = order - 1 - i;
    const double x = 0.5 * (rule.nodes[j] - rule.nodes[i]);
    const double w = 0.5 * (rule.weights[i] + rule.weights[j]);
    rule.nodes[i] = -x;
    rule.nodes[j] = x;
    rule.weights[i] = rule.weights[j] = w;
  }
  if (order % 2 == 1) rule.nodes[order / 2] = 0.0;
  return cache.emplace(order, std::move(rule)).first->second;
}

namespace {

constexpr double kKronrodNodes[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr double kKronrodWeights[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr double kGaussWeights[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Segment {
  double a, b;
  Eigen::VectorXd value;
  double error;
  bool operator<(const Segment& other) const { return error < other.error; }
};

Segment gauss_kronrod(const VectorIntegrand& f, double a, double b, int& evals) {
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  Eigen::VectorXd fc = f(center);
  Eigen::VectorXd kronrod = kKronrodWeights[7] * fc;
  Eigen::VectorXd gauss = kGaussWeights[3] * fc;
  for (int j = 0; j < 7; ++j) {
    const double dx = half * kKronrodNodes[j];
    Eigen::VectorXd sum = f(center - dx) + f(center + dx);
    kronrod += kKronrodWeights[j] * sum;
    if (j % 2 == 1) gauss += kGaussWeights[j / 2] * sum;
  }
  evals += 15;
  Segment s{a, b, kronrod * half, 0.0};
  s.error = ((kronrod - gauss) * half).cwiseAbs().maxCoeff();
  return s;
}

}  // namespace

AdaptiveResult integrate_adaptive(const VectorIntegrand& f, double a, double b,
                                  std::vector<double> breakpoints, const AdaptiveOptions& opts) {
  if (!(b > a)) throw StructuralError("integrate_adaptive: empty interval");
  std::vector<double> edges{a};
  std::sort(breakpoints.begin(), breakpoints.end());
  for (double p : breakpoints) {
    if (p > edges.back() && p < b) edges.push_back(p);
  }
  edges.push_back(b);

  AdaptiveResult result;
  std::priority_queue<Segment> queue;
  for (size_t i = 0; i + 1 < edges.size(); ++i) {
    queue.push(gauss_kronrod(f, edges[i], edges[i + 1], result.evaluations));
  }

  auto totals = [&]() {
    auto copy = queue;
    Eigen::VectorXd value = Eigen::VectorXd::Zero(copy.top().value.size());
    double error = 0.0;
    while (!copy.empty()) {
      value += copy.top().value;
      error += copy.top().error;
      copy.pop();
    }
    return std::pair{value, error};
  };

  auto [value, error] = totals();
  // Running sums avoid an O(n) pass per refinement; refreshed at the end.
  while (true) {
    const double scale = value.cwiseAbs().maxCoeff();
    if (error <= std::max(opts.abs_tol, opts.rel_tol * scale)) {
      result.converged = true;
      break;
    }
    if (static_cast<int>(queue.size()) >= opts.max_intervals) break;
    Segment worst = queue.top();
    queue.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    if (mid <= worst.a || mid >= worst.b) {
      queue.push(worst);
      break;
    }
    Segment left = gauss_kronrod(f, worst.a, mid, result.evaluations);
    Segment right = gauss_kronrod(f, mid, worst.b, result.evaluations);
    value += left.value + right.value - worst.value;
    error += left.error + right.error - worst.error;
    queue.push(std::move(left));
    queue.push(std::move(right));
  }
  std::tie(result.value, result.error_estimate) = totals();
  return result;
}

}  // namespace optomech
