#pragma once

#include <array>
#include <optional>

#include <Eigen/Dense>

#include "optomech/gaussian.hpp"
#include "optomech/special.hpp"

namespace optomech {

namespace constants {
constexpr double hbar = 1.054571817e-34;
constexpr double k_B = 1.380649e-23;
constexpr double c = 299792458.0;
}  // namespace constants

/// Classical pump from which the drive rate and intracavity amplitude follow:
/// eps = sqrt(coupling_factor * kappa * P / (hbar omega_L)), c_s = |eps / (kappa + i Delta)|.
struct PumpSettings {
  double power = 0.02;          // W
  double wavelength = 1064e-9;  // m
  double coupling_factor = 1.0;
};

/// One optomechanical cavity. Rates in rad/s, temperature in K.
struct OptomechParams {
  double omega_m = 0.0;
  double gamma_m = 0.0;
  double kappa = 0.0;
  double delta_tilde = 0.0;
  double chi = 0.0;
  /// Used only when no pump is given.
  double c_s = 0.0;
  double temperature = 0.0;
  double r = 0.0;
  double phi = 0.0;
  std::optional<PumpSettings> pump;
};

/// The reference device: omega_m = 2 pi 947 kHz, gamma/omega_m = 1.5e-4,
/// kappa/omega_m = 0.23, Delta = omega_m, 20 mW at 1064 nm, T = 0.1 mK.
OptomechParams reference_device(double chi_over_wm);

/// Real, positive intracavity amplitude (from the pump when given).
double intracavity_amplitude(const OptomechParams& p);

/// Positivity of the rates and, for pumped cavities, |c_s| >= 1e3.
void check(const OptomechParams& p);

/// Mean thermal phonon number at the bath temperature.
double thermal_occupation(const OptomechParams& p);

/// Drift matrix of d/dt (q, p, x, y) in rad/s.
Eigen::Matrix4d drift_matrix(const OptomechParams& p);

/// Throws DomainError if any eigenvalue of the drift matrix has Re >= 0.
void require_stable(const OptomechParams& p);

/// delta O_j(omega) = [A_j c_in(omega) + B_j c_in^dag(omega) + C_j zeta(omega)] / d,
/// with the transform f(omega) = int dt e^{i omega t} f(t). Index j runs over q, p, x, y.
struct TransferCoefficients {
  std::array<cdouble, 4> A, B, C;
  cdouble d;
};

TransferCoefficients transfer_coefficients(double omega, const OptomechParams& p);

/// Columns (c_in, c_in^dag, zeta) of (-i omega I - K)^{-1} times the noise
/// input matrix; an independent route to the same coefficients divided by d.
Eigen::Matrix<cdouble, 4, 3> transfer_matrix_oracle(double omega, const OptomechParams& p);

enum class BathModel { Quantum, Markovian };

struct NoiseSpectra {
  /// S_zeta(omega) = (gamma omega / omega_m)[1 + coth(hbar omega / 2 k_B T)].
  double brownian = 0.0;
  /// S_zeta(omega) + S_zeta(-omega), the part entering symmetrized moments.
  double brownian_symmetrized = 0.0;
  double N = 0.0;
  cdouble M;
};

NoiseSpectra noise_spectra(double omega, const OptomechParams& p, BathModel bath = BathModel::Quantum);

struct CovarianceOptions {
  /// Drop the e^{-+2 i omega_m t} parts of the squeezed-input correlations.
  bool rwa = false;
  BathModel bath = BathModel::Quantum;
  /// Drude cutoff of the quantum bath spectrum, in units of omega_m (<= 0: none).
  /// Without it <p^2> diverges logarithmically.
  double drude_ratio = 1e3;
  /// The frequency window grows until the added tail is below this, relative.
  double tail_tol = 1e-6;
  double rel_tol = 1e-9;
};

/// Stationary part of the CM (white input with occupation `occupation`, no
/// squeezing correlations).
Eigen::Matrix4d stationary_covariance(const OptomechParams& p, double occupation, const CovarianceOptions& opts = {});

/// K_jk = (1/2pi) int a1_j(nu) a2_k(2 - nu) dnu in units of omega_m, with a_j
/// the c_in coefficients of each cavity. The squeezed-input contribution to
/// V_jk(t) is 2 Re[M e^{-2 i omega_m t} K_jk].
Eigen::Matrix4cd squeezing_kernel(const OptomechParams& p1, const OptomechParams& p2, const CovarianceOptions& opts = {});

/// 4x4 CM of (q, p, x, y) at time t (seconds).
CovarianceMatrix covariance_matrix(const OptomechParams& p, double t, const CovarianceOptions& opts = {});

/// Steady state of K V + V K^T = -D with white noise. The Markovian bath uses
/// D_pp = 2 gamma k_B T / (hbar omega_m); the quantum one gamma coth(hbar omega_m / 2 k_B T).
CovarianceMatrix lyapunov_cm_oracle(const OptomechParams& p, BathModel bath = BathModel::Markovian);

}  // namespace optomech
