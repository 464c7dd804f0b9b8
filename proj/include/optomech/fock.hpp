#pragma once

#include <span>

#include "optomech/density_matrix.hpp"
#include "optomech/gaussian.hpp"
#include "optomech/phase_space.hpp"
#include "optomech/special.hpp"

namespace optomech {

/// Symmetric-ordered characteristic function Tr[rho D(lambda_1) (x) ...] of a
/// zero-mean Gaussian state, exp(-Lambda^T Omega^T sigma Omega Lambda) with
/// Lambda = (Re lambda_1, Im lambda_1, ...). Vacuum gives exp(-|lambda|^2 / 2).
cdouble characteristic_function(const CovarianceMatrix& sigma, std::span<const cdouble> lambda);

struct ReconstructionOptions {
  double trace_tol = 5e-3;
  /// Recompute with more quadrature nodes and require entrywise agreement.
  bool verify = false;
  double verify_tol = 1e-6;
};

/// Fock-basis density matrix of a 1-mode state cut at n_max.
TruncatedDensityMatrix dm_from_cm(const CovarianceMatrix& sigma, int n_max, const ReconstructionOptions& opts = {});

/// Fock-basis density matrix of a 2-mode state, mode 1 cut at n_max_1 and
/// mode 2 at n_max_2.
TruncatedDensityMatrix dm_from_cm(const CovarianceMatrix& sigma, int n_max_1, int n_max_2,
                                  const ReconstructionOptions& opts = {});

/// Photon-number distribution p_0..p_n_max of a single-mode Gaussian state.
Eigen::VectorXd fock_populations(const CovarianceMatrix& sigma, int n_max);

/// Smallest cutoff whose population tail is below `tail` for a single mode.
int adequate_cutoff(const CovarianceMatrix& sigma, double tail = 1e-8, int limit = 400);

struct ConditionalState {
  TruncatedDensityMatrix rho;
  double probability = 0.0;
};

/// Projects mode 2 of a two-mode matrix on |n> and traces it out.
ConditionalState condition_fock(const TruncatedDensityMatrix& rho_cm, int n);

/// Click (n >= 1) on mode 2 by truncated summation of Fock projections.
ConditionalState condition_geiger_fock_sum(const TruncatedDensityMatrix& rho_cm);

/// Click (n >= 1) on mode 2 of a Gaussian two-mode state, built from the
/// mode-1 marginal minus the vacuum-projected Gaussian state.
ConditionalWigner condition_geiger(const CovarianceMatrix& sigma, const GridSpec& grid = {});

/// n-photon conditioning on mode 2 evaluated in phase space: overlap of the
/// joint Wigner function with the Fock-state Wigner function.
ConditionalWigner conditional_wigner_fock_direct(const CovarianceMatrix& sigma, int n, const GridSpec& grid = {});

/// The same conditioning through the density matrix: reconstruct, project,
/// evaluate the Wigner function. Default cutoffs: the mechanical tail of the
/// conditional state below 1e-12, the cavity as adequate_cutoff (at least n).
ConditionalWigner conditional_wigner_fock_dm(const CovarianceMatrix& sigma, int n, const GridSpec& grid = {},
                                             int n_max_mech = -1, int n_max_cav = -1);

}  // namespace optomech
