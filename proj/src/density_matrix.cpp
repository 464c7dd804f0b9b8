#include "optomech/density_matrix.hpp"

#include "optomech/errors.hpp"

namespace optomech {

TruncatedDensityMatrix::TruncatedDensityMatrix(int cutoff, Eigen::MatrixXcd rho)
    : mode_count(1), n_max(cutoff), entries(std::move(rho)) {
  if (cutoff < 0) throw StructuralError("density matrix: negative cutoff");
  if (entries.rows() != cutoff + 1 || entries.cols() != cutoff + 1) {
    throw StructuralError("density matrix: entries do not match the cutoff");
  }
  trace_deficit = std::abs(1.0 - trace());
}

TruncatedDensityMatrix::TruncatedDensityMatrix(int cutoff_1, int cutoff_2, Eigen::MatrixXcd rho)
    : mode_count(2), n_max(cutoff_1), n_max_2(cutoff_2), entries(std::move(rho)) {
  if (cutoff_1 < 0 || cutoff_2 < 0) throw StructuralError("density matrix: negative cutoff");
  const long expected = long(cutoff_1 + 1) * (cutoff_2 + 1);
  if (entries.rows() != expected || entries.cols() != expected) {
    throw StructuralError("density matrix: entries do not match the cutoffs");
  }
  trace_deficit = std::abs(1.0 - trace());
}

TruncatedDensityMatrix TruncatedDensityMatrix::fock(int n, int n_max) {
  if (n < 0 || n > n_max) throw StructuralError("fock: photon number outside cutoff");
  Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(n_max + 1, n_max + 1);
  rho(n, n) = 1.0;
  return TruncatedDensityMatrix(n_max, rho);
}

double TruncatedDensityMatrix::hermiticity_error() const {
  return (entries - entries.adjoint()).cwiseAbs().maxCoeff();
}

double TruncatedDensityMatrix::min_eigenvalue() const {
  Eigen::MatrixXcd h = 0.5 * (entries + entries.adjoint());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

Eigen::VectorXd TruncatedDensityMatrix::populations() const {
  return entries.diagonal().real();
}

TruncatedDensityMatrix TruncatedDensityMatrix::normalized() const {
  TruncatedDensityMatrix out = *this;
  const double tr = trace();
  if (!(tr > 0.0)) throw DegenerateOutcomeError("density matrix has non-positive trace");
  out.entries /= tr;
  return out;
}

}  // namespace optomech
