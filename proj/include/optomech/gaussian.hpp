#pragma once

#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace optomech {

/// Symmetric second-moment matrix of zero-mean quadrature fluctuations for n
/// modes, ordered (q1, p1, ..., qn, pn), with [q, p] = i so that the vacuum
/// is I/2.
///
/// Construction only checks shape. Physicality is a separate question
/// answered by validate(), so that unphysical candidates can be inspected.
class CovarianceMatrix {
 public:
  explicit CovarianceMatrix(Eigen::MatrixXd entries);

  static CovarianceMatrix vacuum(int n_modes);
  static CovarianceMatrix thermal(int n_modes, double nbar);
  /// Two-mode squeezed vacuum, blocks cosh(2r)/2 I and sinh(2r)/2 diag(1, -1).
  static CovarianceMatrix two_mode_squeezed(double r);
  /// Single-mode squeezed vacuum diag(e^{-2s}, e^{2s})/2.
  static CovarianceMatrix squeezed(double s);

  int modes() const { return static_cast<int>(entries_.rows() / 2); }
  const Eigen::MatrixXd& matrix() const { return entries_; }
  Eigen::Matrix2d block(int i, int j) const { return entries_.block<2, 2>(2 * i, 2 * j); }

  /// Reduced state on the given modes, in the given order.
  CovarianceMatrix marginal(std::span<const int> modes) const;
  CovarianceMatrix marginal(std::initializer_list<int> modes) const {
    return marginal(std::span<const int>(modes.begin(), modes.size()));
  }

  /// Direct sum with another state (this state's modes first).
  CovarianceMatrix direct_sum(const CovarianceMatrix& other) const;

 private:
  Eigen::MatrixXd entries_;
};

struct Validation {
  bool ok = true;
  std::string diagnostic;
};

/// Symmetry, uncertainty principle and symplectic-spectrum checks.
Validation validate(const Eigen::MatrixXd& sigma);
Validation validate(const CovarianceMatrix& sigma);

/// Throws ValidationError with the diagnostic when validate() fails.
void require_physical(const CovarianceMatrix& sigma, const char* context);

/// Block-diagonal symplectic form, Omega = (+) [[0, 1], [-1, 0]].
Eigen::MatrixXd symplectic_form(int n_modes);

/// Symplectic eigenvalues, ascending, one per mode.
std::vector<double> symplectic_eigenvalues(const CovarianceMatrix& sigma);

/// 1 / (2^n sqrt(det sigma)).
double purity(const CovarianceMatrix& sigma);

// Measurement descriptors ---------------------------------------------------

/// Projection onto eigenstates of cos(angle) q + sin(angle) p.
struct Homodyne {
  double angle = 0.0;
};
/// Projection onto coherent states (d = I/2 in this convention).
struct Heterodyne {};
/// Projection onto a pure Gaussian state with CM `d` (det d = 1/4).
struct GeneralGaussian {
  Eigen::Matrix2d d;
};

using MeasurementSpec = std::variant<Homodyne, Heterodyne, GeneralGaussian>;

/// Builds a GeneralGaussian spec, rejecting non-pure or non-positive d.
MeasurementSpec general_gaussian(const Eigen::Matrix2d& d);

struct ModeMeasurement {
  int mode;
  MeasurementSpec spec;
};

/// Conditional CM of the unmeasured modes (in their original order) after a
/// Gaussian projective measurement of `measured_mode`.
///
/// The update m' = m - c (f + d)^+ c^T does not depend on the measurement
/// outcome, so no outcome parameter exists: post-selecting any outcome
/// yields the same covariance matrix (only the mean shifts).
CovarianceMatrix condition_gaussian(const CovarianceMatrix& sigma, int measured_mode,
                                    const MeasurementSpec& spec);

/// Joint conditioning on several distinct modes with a single block update.
CovarianceMatrix condition_gaussian_multi(const CovarianceMatrix& sigma,
                                          std::span<const ModeMeasurement> measurements);

/// Moore-Penrose pseudo-inverse; singular values below 1e-12 times the
/// largest are treated as zero.
Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& m);

/// max[0, -ln(2 nu_min)] for the partial transpose (p of mode 2 flipped).
double log_negativity(const CovarianceMatrix& sigma);

/// Overlap Tr[rho_1 rho_2] of two zero-mean single-mode Gaussian states.
double gaussian_overlap(const Eigen::Matrix2d& sigma1, const Eigen::Matrix2d& sigma2);

}  // namespace optomech
