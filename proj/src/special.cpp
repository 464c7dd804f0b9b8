#include "optomech/special.hpp"

#include <cmath>

#include "optomech/errors.hpp"

namespace optomech {

namespace {

// f_j = sqrt(j!/(j+k)!) r^k L_j^{(k)}(r^2) [* exp(-r^2/2)], j = 0..count-1.
void normalized_laguerre_column(int k, int count, double r, bool include_gaussian,
                                std::vector<double>& out) {
  out.assign(count, 0.0);
  if (count == 0) return;
  const double x = r * r;
  double log_f0 = -0.5 * std::lgamma(k + 1.0);
  if (include_gaussian) log_f0 -= 0.5 * x;
  double f0;
  if (k == 0) {
    f0 = std::exp(log_f0);
  } else if (r == 0.0) {
    f0 = 0.0;
  } else {
    f0 = std::exp(log_f0 + k * std::log(r));
  }
  out[0] = f0;
  if (count == 1) return;
  out[1] = (1.0 + k - x) * f0 / std::sqrt(1.0 + k);
  for (int j = 1; j + 1 < count; ++j) {
    out[j + 1] = ((2.0 * j + 1.0 + k - x) * out[j] - std::sqrt(double(j) * (j + k)) * out[j - 1]) /
                 std::sqrt((j + 1.0) * (j + k + 1.0));
  }
}

}  // namespace

Eigen::MatrixXcd displacement_matrix(cdouble mu, int n_max, bool include_gaussian) {
  if (n_max < 0) throw StructuralError("displacement_matrix: negative cutoff");
  const int dim = n_max + 1;
  Eigen::MatrixXcd d(dim, dim);
  const double r = std::abs(mu);
  const cdouble phase = r > 0.0 ? mu / r : cdouble(1.0, 0.0);
  std::vector<double> column;
  for (int k = 0; k < dim; ++k) {
    normalized_laguerre_column(k, dim - k, r, include_gaussian, column);
    // <n+k|D|n> = f_n e^{ik arg mu};  <n|D|n+k> = f_n (-e^{-i arg mu})^k
    const cdouble lower = std::pow(phase, k);
    const cdouble upper = std::pow(-std::conj(phase), k);
    for (int n = 0; n + k < dim; ++n) {
      d(n + k, n) = column[n] * lower;
      if (k > 0) d(n, n + k) = column[n] * upper;
    }
  }
  return d;
}

cdouble displacement_matrix_element(int m, int n, cdouble mu) {
  if (m < 0 || n < 0) throw StructuralError("displacement_matrix_element: negative index");
  const int k = std::abs(m - n);
  const int lo = std::min(m, n);
  const double r = std::abs(mu);
  const cdouble phase = r > 0.0 ? mu / r : cdouble(1.0, 0.0);
  std::vector<double> column;
  normalized_laguerre_column(k, lo + 1, r, true, column);
  if (m >= n) return column[lo] * std::pow(phase, k);
  return column[lo] * std::pow(-std::conj(phase), k);
}

Eigen::VectorXd displacement_diagonal(cdouble mu, int n_max, bool include_gaussian) {
  std::vector<double> column;
  normalized_laguerre_column(0, n_max + 1, std::abs(mu), include_gaussian, column);
  return Eigen::Map<Eigen::VectorXd>(column.data(), n_max + 1);
}

Eigen::VectorXd hermite_functions(int n_max, double x) {
  Eigen::VectorXd psi(n_max + 1);
  psi[0] = std::pow(M_PI, -0.25) * std::exp(-0.5 * x * x);
  if (n_max >= 1) psi[1] = std::sqrt(2.0) * x * psi[0];
  for (int n = 2; n <= n_max; ++n) {
    psi[n] = std::sqrt(2.0 / n) * x * psi[n - 1] - std::sqrt((n - 1.0) / n) * psi[n - 2];
  }
  return psi;
}

Eigen::VectorXd laguerre(int n_max, double x) {
  Eigen::VectorXd l(n_max + 1);
  l[0] = 1.0;
  if (n_max >= 1) l[1] = 1.0 - x;
  for (int n = 1; n < n_max; ++n) {
    l[n + 1] = ((2.0 * n + 1.0 - x) * l[n] - n * l[n - 1]) / (n + 1.0);
  }
  return l;
}

Eigen::VectorXcd coherent_amplitudes(cdouble alpha, int n_max) {
  Eigen::VectorXcd a(n_max + 1);
  a[0] = std::exp(-0.5 * std::norm(alpha));
  for (int n = 1; n <= n_max; ++n) a[n] = a[n - 1] * alpha / std::sqrt(double(n));
  return a;
}

}  // namespace optomech
