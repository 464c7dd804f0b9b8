#include "optomech/phase_space.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>

#include "optomech/errors.hpp"
#include "optomech/special.hpp"

namespace optomech {

void GridSpec::check() const {
  if (!(axis_max > axis_min)) throw StructuralError("grid: axis_max must exceed axis_min");
  if (resolution < 3) throw StructuralError("grid: need at least 3 points per axis");
}

double WignerGrid::boundary_max() const {
  const auto n = values.rows() - 1;
  double m = 0.0;
  m = std::max(m, values.row(0).cwiseAbs().maxCoeff());
  m = std::max(m, values.row(n).cwiseAbs().maxCoeff());
  m = std::max(m, values.col(0).cwiseAbs().maxCoeff());
  m = std::max(m, values.col(n).cwiseAbs().maxCoeff());
  return m;
}

void WignerGrid::write_csv(std::ostream& os) const {
  os << "delta_r,delta_i,W\n";
  char line[96];
  for (int i = 0; i < spec.resolution; ++i) {
    for (int j = 0; j < spec.resolution; ++j) {
      std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g\n", spec.coordinate(i), spec.coordinate(j), values(i, j));
      os << line;
    }
  }
}

void WignerGrid::write_csv(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw StructuralError("cannot open " + path + " for writing");
  write_csv(os);
}

namespace {
constexpr char kMagic[8] = {'O', 'M', 'W', 'G', 'R', 'I', 'D', '1'};
}

void WignerGrid::write_binary(std::ostream& os) const {
  os.write(kMagic, sizeof kMagic);
  const std::int32_t res = spec.resolution;
  const std::uint8_t expanded = window_expanded ? 1 : 0;
  os.write(reinterpret_cast<const char*>(&spec.axis_min), sizeof(double));
  os.write(reinterpret_cast<const char*>(&spec.axis_max), sizeof(double));
  os.write(reinterpret_cast<const char*>(&res), sizeof res);
  os.write(reinterpret_cast<const char*>(&expanded), sizeof expanded);
  os.write(reinterpret_cast<const char*>(values.data()), sizeof(double) * values.size());
}

WignerGrid WignerGrid::read_binary(std::istream& is) {
  char magic[8];
  is.read(magic, sizeof magic);
  if (!is || !std::equal(magic, magic + 8, kMagic)) throw StructuralError("not a Wigner grid record");
  WignerGrid g;
  std::int32_t res = 0;
  std::uint8_t expanded = 0;
  is.read(reinterpret_cast<char*>(&g.spec.axis_min), sizeof(double));
  is.read(reinterpret_cast<char*>(&g.spec.axis_max), sizeof(double));
  is.read(reinterpret_cast<char*>(&res), sizeof res);
  is.read(reinterpret_cast<char*>(&expanded), sizeof expanded);
  if (!is || res < 3 || res > 100000) throw StructuralError("truncated Wigner grid record");
  g.spec.resolution = res;
  g.window_expanded = expanded != 0;
  g.values.resize(res, res);
  is.read(reinterpret_cast<char*>(g.values.data()), sizeof(double) * g.values.size());
  if (!is) throw StructuralError("truncated Wigner grid record");
  return g;
}

WignerGrid evaluate_on_window(const GridSpec& spec, const std::function<Eigen::MatrixXd(const GridSpec&)>& fill) {
  spec.check();
  WignerGrid grid{spec, fill(spec), false};
  if (grid.boundary_max() > kBoundaryTolerance) {
    GridSpec wide = spec;
    const double center = 0.5 * (spec.axis_min + spec.axis_max);
    const double half = 0.75 * (spec.axis_max - spec.axis_min);
    wide.axis_min = center - half;
    wide.axis_max = center + half;
    // keep the spacing; an odd count keeps the center on a grid point
    wide.resolution = static_cast<int>(std::lround((spec.resolution - 1) * 1.5)) + 1;
    if (wide.resolution % 2 == 0) ++wide.resolution;
    wide.axis_max = wide.axis_min + (wide.resolution - 1) * spec.spacing();
    grid = WignerGrid{wide, fill(wide), true};
  }
  return grid;
}

Eigen::MatrixXd wigner_gaussian_values(const Eigen::Matrix2d& sigma, const Eigen::Vector2d& mean, const GridSpec& spec) {
  const double det = sigma.determinant();
  if (!(det > 0.0)) throw DomainError("wigner_gaussian: singular covariance matrix");
  const Eigen::Matrix2d inv = sigma.inverse();
  // W(delta) = 2 W_X(sqrt2 delta)
  const double norm = 2.0 / (2.0 * M_PI * std::sqrt(det));
  const int n = spec.resolution;
  Eigen::MatrixXd w(n, n);
  for (int i = 0; i < n; ++i) {
    const double q = std::sqrt(2.0) * spec.coordinate(i) - mean[0];
    for (int j = 0; j < n; ++j) {
      const double p = std::sqrt(2.0) * spec.coordinate(j) - mean[1];
      const double e = inv(0, 0) * q * q + 2.0 * inv(0, 1) * q * p + inv(1, 1) * p * p;
      w(i, j) = norm * std::exp(-0.5 * e);
    }
  }
  return w;
}

WignerGrid wigner_gaussian(const CovarianceMatrix& sigma, const Eigen::Vector2d& mean, const GridSpec& spec) {
  if (sigma.modes() != 1) throw StructuralError("wigner_gaussian: single-mode CM expected");
  require_physical(sigma, "wigner_gaussian");
  const Eigen::Matrix2d s = sigma.block(0, 0);
  return evaluate_on_window(spec, [&](const GridSpec& g) { return wigner_gaussian_values(s, mean, g); });
}

Eigen::MatrixXd wigner_from_fock_values(const Eigen::MatrixXcd& rho, const GridSpec& spec) {
  const int dim = static_cast<int>(rho.rows());
  const int n = spec.resolution;
  // W(delta) = (2/pi) sum_{mn} rho_nm (-1)^n <m|D(2 delta)|n>
  Eigen::MatrixXcd signed_rho = rho;
  for (int k = 1; k < dim; k += 2) signed_rho.row(k) *= -1.0;
  Eigen::MatrixXd w(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const cdouble mu(2.0 * spec.coordinate(i), 2.0 * spec.coordinate(j));
      const Eigen::MatrixXcd d = displacement_matrix(mu, dim - 1);
      // sum_{n,m} signed_rho(n, m) d(m, n) = trace(signed_rho * d)
      w(i, j) = (2.0 / M_PI) * (signed_rho.cwiseProduct(d.transpose())).sum().real();
    }
  }
  return w;
}

WignerGrid wigner_from_fock_dm(const TruncatedDensityMatrix& rho, const GridSpec& spec, double trace_tol) {
  if (rho.mode_count != 1) throw StructuralError("wigner_from_fock_dm: single-mode density matrix expected");
  const double deficit = std::abs(1.0 - rho.trace());
  if (deficit > trace_tol) {
    throw ConvergenceError("wigner_from_fock_dm: trace deficit " + std::to_string(deficit) +
                           " exceeds tolerance; raise the Fock cutoff");
  }
  if (rho.hermiticity_error() > 1e-10) throw ValidationError("wigner_from_fock_dm: density matrix is not Hermitian");
  return evaluate_on_window(spec, [&](const GridSpec& g) { return wigner_from_fock_values(rho.entries, g); });
}

namespace {

double negative_sum(const Eigen::MatrixXd& v, int stride) {
  double s = 0.0;
  for (int i = 0; i < v.rows(); i += stride) {
    for (int j = 0; j < v.cols(); j += stride) {
      if (v(i, j) < 0.0) s += v(i, j);
    }
  }
  return s < 0.0 ? -s : 0.0;
}

}  // namespace

NegativityVolume negativity_volume(const WignerGrid& grid, double tol_norm) {
  NegativityVolume out;
  const double area = grid.cell_area();
  out.normalization = grid.integral();
  out.normalized = std::abs(out.normalization - 1.0) <= tol_norm;
  out.value = negative_sum(grid.values, 1) * area;
  const double half = negative_sum(grid.values, 2) * 4.0 * area;
  out.error_estimate = std::abs(out.value - half);
  return out;
}

}  // namespace optomech
