#pragma once

#include <Eigen/Dense>

#include "optomech/phase_space.hpp"
#include "optomech/special.hpp"

namespace optomech {

/// Lossless single-cavity model H = omega_m b^dag b - chi n (b + b^dag),
/// cavity in a coherent state of real amplitude alpha, mirror thermal.
struct UnitaryParams {
  double chi_over_wm = 1.0;
  double alpha = 1.0;
  double nbar = 0.0;
  double time_wm = M_PI;
  /// Photon-number cutoff; negative means "smallest adequate value".
  int n_max = -1;
};

/// Smallest cutoff whose Poisson(alpha^2) tail beyond it is below 1e-10.
int required_photon_cutoff(double alpha);

/// Throws StructuralError if the cutoff is too small or nbar < 0.
void check(const UnitaryParams& p);

/// Branch table of U(t)|alpha, beta>: photon number n carries weight c_n,
/// phase phi_n and moves the mirror to beta e^{-i t} + s_n.
struct BranchDecomposition {
  int n_max = 0;
  double time_wm = 0.0;
  Eigen::VectorXd weight;   // c_n
  Eigen::VectorXd phase;    // phi_n
  Eigen::VectorXcd shift;   // s_n

  cdouble rotation() const { return std::polar(1.0, -time_wm); }
  /// Mechanical amplitude of branch n for initial amplitude beta.
  cdouble amplitude(int n, cdouble beta) const { return beta * rotation() + shift[n]; }
  /// Total phase of branch n, including the beta-dependent part left over
  /// from composing displacements.
  double total_phase(int n, cdouble beta) const {
    return phase[n] + std::imag(shift[n] * std::conj(beta * rotation()));
  }
  /// Sum of |c_n|^2 up to the cutoff.
  double norm() const { return weight.squaredNorm(); }
};

BranchDecomposition decompose(const UnitaryParams& p);

/// Conditional mechanical state after projecting the cavity on |x> (theta = 0),
/// with <x|(a + a^dag)/sqrt2|x> = x.
ConditionalWigner conditional_wigner_homodyne(const UnitaryParams& p, double x, const GridSpec& grid = {});

/// Conditional mechanical state after projecting the cavity on |sigma>.
ConditionalWigner conditional_wigner_heterodyne(const UnitaryParams& p, cdouble sigma, const GridSpec& grid = {});

/// Conditional mechanical state after detecting n photons: a displaced thermal
/// state, so never negative.
ConditionalWigner conditional_photon_counting_unitary(const UnitaryParams& p, int n, const GridSpec& grid = {});

}  // namespace optomech
