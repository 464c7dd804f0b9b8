#include "optomech/gaussian.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <sstream>

#include "optomech/errors.hpp"

namespace optomech {

namespace {

constexpr double kSymmetryTol = 1e-12;
constexpr double kPhysicalTol = 1e-9;
constexpr double kPinvCutoff = 1e-12;

Eigen::Matrix2d rotation(double angle) {
  Eigen::Matrix2d r;
  r << std::cos(angle), std::sin(angle), -std::sin(angle), std::cos(angle);
  return r;
}

std::vector<double> symplectic_spectrum(const Eigen::MatrixXd& sigma) {
  // nu are the moduli of the eigenvalues of i Omega sigma; via the congruent
  // Hermitian form i sigma^{1/2} Omega sigma^{1/2}.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma);
  Eigen::MatrixXd root = es.operatorSqrt();
  const int n = static_cast<int>(sigma.rows() / 2);
  Eigen::MatrixXd antisym = root * symplectic_form(n) * root;
  Eigen::MatrixXcd herm = std::complex<double>(0.0, 1.0) * antisym.cast<std::complex<double>>();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> hs(herm, Eigen::EigenvaluesOnly);
  std::vector<double> nu;
  for (int i = n; i < 2 * n; ++i) nu.push_back(hs.eigenvalues()[i]);
  std::sort(nu.begin(), nu.end());
  return nu;
}

}  // namespace

CovarianceMatrix::CovarianceMatrix(Eigen::MatrixXd entries) : entries_(std::move(entries)) {
  if (entries_.rows() != entries_.cols() || entries_.rows() == 0 || entries_.rows() % 2 != 0) {
    std::ostringstream os;
    os << "covariance matrix must be 2n x 2n, got " << entries_.rows() << " x " << entries_.cols();
    throw StructuralError(os.str());
  }
}

CovarianceMatrix CovarianceMatrix::vacuum(int n_modes) {
  return CovarianceMatrix(0.5 * Eigen::MatrixXd::Identity(2 * n_modes, 2 * n_modes));
}

CovarianceMatrix CovarianceMatrix::thermal(int n_modes, double nbar) {
  return CovarianceMatrix((nbar + 0.5) * Eigen::MatrixXd::Identity(2 * n_modes, 2 * n_modes));
}

CovarianceMatrix CovarianceMatrix::two_mode_squeezed(double r) {
  const double ch = 0.5 * std::cosh(2 * r);
  const double sh = 0.5 * std::sinh(2 * r);
  Eigen::MatrixXd v(4, 4);
  v << ch, 0, sh, 0,
       0, ch, 0, -sh,
       sh, 0, ch, 0,
       0, -sh, 0, ch;
  return CovarianceMatrix(v);
}

CovarianceMatrix CovarianceMatrix::squeezed(double s) {
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(2, 2);
  v(0, 0) = 0.5 * std::exp(-2 * s);
  v(1, 1) = 0.5 * std::exp(2 * s);
  return CovarianceMatrix(v);
}

CovarianceMatrix CovarianceMatrix::marginal(std::span<const int> modes) const {
  const int k = static_cast<int>(modes.size());
  Eigen::MatrixXd out(2 * k, 2 * k);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      if (modes[i] < 0 || modes[i] >= this->modes() || modes[j] < 0 || modes[j] >= this->modes()) {
        throw StructuralError("marginal: mode index out of range");
      }
      out.block<2, 2>(2 * i, 2 * j) = block(modes[i], modes[j]);
    }
  }
  return CovarianceMatrix(out);
}

CovarianceMatrix CovarianceMatrix::direct_sum(const CovarianceMatrix& other) const {
  const auto a = entries_.rows(), b = other.entries_.rows();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(a + b, a + b);
  out.topLeftCorner(a, a) = entries_;
  out.bottomRightCorner(b, b) = other.entries_;
  return CovarianceMatrix(out);
}

Eigen::MatrixXd symplectic_form(int n_modes) {
  Eigen::MatrixXd omega = Eigen::MatrixXd::Zero(2 * n_modes, 2 * n_modes);
  for (int i = 0; i < n_modes; ++i) {
    omega(2 * i, 2 * i + 1) = 1.0;
    omega(2 * i + 1, 2 * i) = -1.0;
  }
  return omega;
}

Validation validate(const Eigen::MatrixXd& sigma) {
  if (sigma.rows() != sigma.cols() || sigma.rows() == 0 || sigma.rows() % 2 != 0) {
    throw StructuralError("validate: covariance matrix must be 2n x 2n");
  }
  Validation v;
  const double scale = std::max(sigma.cwiseAbs().maxCoeff(), 1e-300);
  const double asym = (sigma - sigma.transpose()).cwiseAbs().maxCoeff();
  if (asym > kSymmetryTol * scale) {
    std::ostringstream os;
    os << "not symmetric (max asymmetry " << asym << ")";
    return {false, os.str()};
  }
  const int n = static_cast<int>(sigma.rows() / 2);
  Eigen::MatrixXcd uncertainty = sigma.cast<std::complex<double>>() +
                                 std::complex<double>(0.0, 0.5) * symplectic_form(n).cast<std::complex<double>>();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(uncertainty, Eigen::EigenvaluesOnly);
  const double lowest = es.eigenvalues().minCoeff();
  if (lowest < -kPhysicalTol) {
    std::ostringstream os;
    os << "violates sigma + i Omega/2 >= 0 (min eigenvalue " << lowest << ")";
    return {false, os.str()};
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> pos(sigma, Eigen::EigenvaluesOnly);
  if (pos.eigenvalues().minCoeff() <= 0.0) {
    return {false, "not positive definite"};
  }
  const auto nu = symplectic_spectrum(sigma);
  if (nu.front() < 0.5 - kPhysicalTol) {
    std::ostringstream os;
    os << "symplectic eigenvalue " << nu.front() << " below 1/2";
    return {false, os.str()};
  }
  return v;
}

Validation validate(const CovarianceMatrix& sigma) { return validate(sigma.matrix()); }

void require_physical(const CovarianceMatrix& sigma, const char* context) {
  auto v = validate(sigma);
  if (!v.ok) throw ValidationError(std::string(context) + ": unphysical covariance matrix: " + v.diagnostic);
}

std::vector<double> symplectic_eigenvalues(const CovarianceMatrix& sigma) {
  require_physical(sigma, "symplectic_eigenvalues");
  return symplectic_spectrum(sigma.matrix());
}

double purity(const CovarianceMatrix& sigma) {
  require_physical(sigma, "purity");
  return 1.0 / (std::pow(2.0, sigma.modes()) * std::sqrt(sigma.matrix().determinant()));
}

MeasurementSpec general_gaussian(const Eigen::Matrix2d& d) {
  if (std::abs(d(0, 1) - d(1, 0)) > kSymmetryTol * d.cwiseAbs().maxCoeff()) {
    throw ValidationError("general_gaussian: d must be symmetric");
  }
  if (d(0, 0) <= 0.0 || d.determinant() <= 0.0) {
    throw ValidationError("general_gaussian: d must be positive definite");
  }
  if (std::abs(d.determinant() - 0.25) > 1e-9) {
    throw ValidationError("general_gaussian: d must be pure (det d = 1/4)");
  }
  return GeneralGaussian{d};
}

Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& m) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  const double cutoff = s.size() > 0 ? kPinvCutoff * s[0] : 0.0;
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(s.size());
  for (int i = 0; i < s.size(); ++i) {
    if (s[i] > cutoff) inv[i] = 1.0 / s[i];
  }
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

CovarianceMatrix condition_gaussian(const CovarianceMatrix& sigma, int measured_mode,
                                    const MeasurementSpec& spec) {
  const ModeMeasurement m{measured_mode, spec};
  return condition_gaussian_multi(sigma, std::span<const ModeMeasurement>(&m, 1));
}

CovarianceMatrix condition_gaussian_multi(const CovarianceMatrix& sigma,
                                          std::span<const ModeMeasurement> measurements) {
  const int n = sigma.modes();
  const int k = static_cast<int>(measurements.size());
  if (k == 0) throw StructuralError("condition_gaussian: no measurements given");
  std::vector<bool> measured(n, false);
  for (const auto& m : measurements) {
    if (m.mode < 0 || m.mode >= n) throw StructuralError("condition_gaussian: mode index out of range");
    if (measured[m.mode]) throw StructuralError("condition_gaussian: duplicate mode index");
    measured[m.mode] = true;
  }
  if (k >= n) throw StructuralError("condition_gaussian: no unmeasured mode would remain");
  require_physical(sigma, "condition_gaussian");

  std::vector<int> kept;
  for (int i = 0; i < n; ++i) {
    if (!measured[i]) kept.push_back(i);
  }
  const int r = static_cast<int>(kept.size());
  Eigen::MatrixXd a(2 * r, 2 * r), c(2 * r, 2 * k), f(2 * k, 2 * k);
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < r; ++j) a.block<2, 2>(2 * i, 2 * j) = sigma.block(kept[i], kept[j]);
    for (int j = 0; j < k; ++j) c.block<2, 2>(2 * i, 2 * j) = sigma.block(kept[i], measurements[j].mode);
  }
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) f.block<2, 2>(2 * i, 2 * j) = sigma.block(measurements[i].mode, measurements[j].mode);
  }

  // Each homodyne is rotated so the measured quadrature sits first; its
  // conjugate quadrature then carries the infinitely squeezed (d -> inf)
  // direction and is projected out before the pseudo-inverse.
  Eigen::MatrixXd rot = Eigen::MatrixXd::Identity(2 * k, 2 * k);
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(2 * k, 2 * k);
  Eigen::VectorXd keep_index = Eigen::VectorXd::Ones(2 * k);
  for (int j = 0; j < k; ++j) {
    std::visit(
        [&](const auto& s) {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, Homodyne>) {
            rot.block<2, 2>(2 * j, 2 * j) = rotation(s.angle);
            keep_index[2 * j + 1] = 0.0;
          } else if constexpr (std::is_same_v<T, Heterodyne>) {
            d.block<2, 2>(2 * j, 2 * j) = 0.5 * Eigen::Matrix2d::Identity();
          } else {
            d.block<2, 2>(2 * j, 2 * j) = s.d;
          }
        },
        measurements[j].spec);
  }
  Eigen::MatrixXd cr = c * rot.transpose();
  Eigen::MatrixXd fr = rot * f * rot.transpose() + d;
  // drop the projected rows, then invert what is left. Cholesky first since a
  // relative pinv cutoff would discard finite directions next to huge d.
  std::vector<int> live;
  for (int i = 0; i < 2 * k; ++i) {
    if (keep_index[i] != 0.0) live.push_back(i);
  }
  const int m = static_cast<int>(live.size());
  Eigen::MatrixXd fl(m, m), cl(2 * r, m);
  for (int i = 0; i < m; ++i) {
    cl.col(i) = cr.col(live[i]);
    for (int j = 0; j < m; ++j) fl(i, j) = fr(live[i], live[j]);
  }
  Eigen::LLT<Eigen::MatrixXd> llt(fl);
  Eigen::MatrixXd gain;
  if (llt.info() == Eigen::Success && llt.matrixL().toDenseMatrix().diagonal().minCoeff() > 1e-150) {
    gain = llt.solve(cl.transpose());
  } else {
    gain = pseudo_inverse(fl) * cl.transpose();
  }
  Eigen::MatrixXd updated = a - cl * gain;
  updated = 0.5 * (updated + updated.transpose());
  return CovarianceMatrix(updated);
}

double log_negativity(const CovarianceMatrix& sigma) {
  if (sigma.modes() != 2) throw StructuralError("log_negativity: expects a two-mode CM");
  require_physical(sigma, "log_negativity");
  Eigen::Vector4d flip(1, 1, 1, -1);
  Eigen::MatrixXd transposed = flip.asDiagonal() * sigma.matrix() * flip.asDiagonal();
  const double nu_min = symplectic_spectrum(transposed).front();
  return std::max(0.0, -std::log(2.0 * nu_min));
}

double gaussian_overlap(const Eigen::Matrix2d& sigma1, const Eigen::Matrix2d& sigma2) {
  return 1.0 / std::sqrt((sigma1 + sigma2).determinant());
}

}  // namespace optomech
