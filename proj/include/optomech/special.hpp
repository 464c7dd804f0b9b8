#pragma once

#include <complex>
#include <vector>

#include <Eigen/Dense>

namespace optomech {

using cdouble = std::complex<double>;

/// Fock-basis matrix of the displacement operator D(mu) = exp(mu b^dag - mu* b),
/// entries <m|D(mu)|n> for 0 <= m, n <= n_max.
///
/// Evaluated with the associated-Laguerre closed form through a normalized
/// three-term recurrence, so no factorials are formed. With
/// `include_gaussian = false` the common factor exp(-|mu|^2/2) is omitted,
/// leaving a polynomial in (Re mu, Im mu); the quadrature code relies on that.
Eigen::MatrixXcd displacement_matrix(cdouble mu, int n_max, bool include_gaussian = true);

/// Single element <m|D(mu)|n>.
cdouble displacement_matrix_element(int m, int n, cdouble mu);

/// Diagonal <n|D(mu)|n> = exp(-|mu|^2/2) L_n(|mu|^2) for n = 0..n_max.
Eigen::VectorXd displacement_diagonal(cdouble mu, int n_max, bool include_gaussian = true);

/// Normalized Hermite functions psi_n(x) = <x|n> for n = 0..n_max, with
/// <x|(b + b^dag)/sqrt2|x> = x.
Eigen::VectorXd hermite_functions(int n_max, double x);

/// Laguerre polynomials L_n(x), n = 0..n_max.
Eigen::VectorXd laguerre(int n_max, double x);

/// Coherent-state Fock amplitudes <n|alpha>, n = 0..n_max.
Eigen::VectorXcd coherent_amplitudes(cdouble alpha, int n_max);

}  // namespace optomech
