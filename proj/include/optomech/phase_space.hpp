#pragma once

#include <functional>
#include <iosfwd>
#include <string>

#include <Eigen/Dense>

#include "optomech/density_matrix.hpp"
#include "optomech/gaussian.hpp"

namespace optomech {

/// Square sampling window in delta = delta_r + i delta_i, with delta = (q + i p)/sqrt(2).
struct GridSpec {
  double axis_min = -6.0;
  double axis_max = 6.0;
  int resolution = 241;

  double spacing() const { return (axis_max - axis_min) / (resolution - 1); }
  double coordinate(int i) const { return axis_min + i * spacing(); }
  void check() const;
};

/// W(delta) sampled at the grid points. values(i, j) sits at
/// (delta_r, delta_i) = (coordinate(i), coordinate(j)). Normalized per unit
/// d^2 delta so that the sum times cell_area is 1 for a whole state.
struct WignerGrid {
  GridSpec spec;
  Eigen::MatrixXd values;
  bool window_expanded = false;

  double cell_area() const { return spec.spacing() * spec.spacing(); }
  double integral() const { return values.sum() * cell_area(); }
  double min_value() const { return values.minCoeff(); }
  /// Largest |W| on the outer ring of grid points.
  double boundary_max() const;

  void write_csv(std::ostream& os) const;
  void write_csv(const std::string& path) const;
  void write_binary(std::ostream& os) const;
  static WignerGrid read_binary(std::istream& is);
};

constexpr double kWignerBound = 2.0 / M_PI;
constexpr double kBoundaryTolerance = 1e-8;

/// Evaluates `fill` on `spec`; if the result does not vanish at the window
/// edge, evaluates once more on a window 1.5 times wider at equal spacing.
WignerGrid evaluate_on_window(const GridSpec& spec, const std::function<Eigen::MatrixXd(const GridSpec&)>& fill);

/// Gaussian Wigner function of a single-mode state with quadrature mean
/// `mean` = (<q>, <p>).
WignerGrid wigner_gaussian(const CovarianceMatrix& sigma, const Eigen::Vector2d& mean = Eigen::Vector2d::Zero(),
                           const GridSpec& spec = {});

/// Same, but evaluated point by point on the given spec without window checks.
Eigen::MatrixXd wigner_gaussian_values(const Eigen::Matrix2d& sigma, const Eigen::Vector2d& mean, const GridSpec& spec);

/// Wigner function of a single-mode Fock-basis density matrix, by displaced
/// parity. Throws ConvergenceError if the trace deficit exceeds `trace_tol`.
WignerGrid wigner_from_fock_dm(const TruncatedDensityMatrix& rho, const GridSpec& spec = {}, double trace_tol = 5e-3);

Eigen::MatrixXd wigner_from_fock_values(const Eigen::MatrixXcd& rho, const GridSpec& spec);

struct NegativityVolume {
  double value = 0.0;
  /// |N - N_half| with N_half from the same grid at twice the spacing.
  double error_estimate = 0.0;
  double normalization = 1.0;
  bool normalized = true;
};

/// A conditional state on a grid together with the weight of its outcome.
struct ConditionalWigner {
  WignerGrid grid;
  /// Unnormalized trace: a density for homodyne/heterodyne outcomes, a
  /// probability for photon counting.
  double probability = 0.0;
  /// Gauss-Hermite order per axis used for the thermal average (0 if exact).
  int quadrature_order = 0;
  /// Change in negativity volume at the last order doubling.
  double quadrature_change = 0.0;
};

/// Riemann sum of |W| over the cells where W < 0.
NegativityVolume negativity_volume(const WignerGrid& grid, double tol_norm = 1e-3);

}  // namespace optomech
