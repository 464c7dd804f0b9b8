#pragma once

#include <Eigen/Dense>

namespace optomech {

/// Fock-basis density matrix of one or two modes. Two-mode entries use the
/// product index n1 * (n_max_2 + 1) + n2, with mode 1 cut at n_max and mode 2
/// at n_max_2.
struct TruncatedDensityMatrix {
  int mode_count = 1;
  int n_max = 0;
  int n_max_2 = -1;
  Eigen::MatrixXcd entries;
  /// |1 - trace| before any normalization.
  double trace_deficit = 0.0;

  TruncatedDensityMatrix() = default;
  TruncatedDensityMatrix(int cutoff, Eigen::MatrixXcd rho);
  TruncatedDensityMatrix(int cutoff_1, int cutoff_2, Eigen::MatrixXcd rho);

  static TruncatedDensityMatrix fock(int n, int n_max);

  int dim() const { return n_max + 1; }
  int dim_2() const { return n_max_2 + 1; }
  int index(int n1, int n2) const { return n1 * (n_max_2 + 1) + n2; }
  double trace() const { return entries.trace().real(); }
  double hermiticity_error() const;
  double min_eigenvalue() const;
  /// Diagonal of the matrix.
  Eigen::VectorXd populations() const;
  /// Copy with unit trace; trace_deficit keeps the pre-normalization value.
  TruncatedDensityMatrix normalized() const;
};

}  // namespace optomech
