#include "optomech/fock.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "optomech/errors.hpp"
#include "optomech/quadrature.hpp"

namespace optomech {

namespace {

// Gaussian envelope exp(-1/2 L^T Q L) of the integrand, Q = 2 Omega^T sigma Omega + I.
Eigen::MatrixXd envelope(const CovarianceMatrix& sigma) {
  const Eigen::MatrixXd omega = symplectic_form(sigma.modes());
  Eigen::MatrixXd q = 2.0 * omega.transpose() * sigma.matrix() * omega;
  q += Eigen::MatrixXd::Identity(q.rows(), q.cols());
  return 0.5 * (q + q.transpose());
}

// Lower factor L with L L^T = inverse of the 2x2 precision `q`.
Eigen::Matrix2d inverse_factor(const Eigen::Matrix2d& q) {
  Eigen::LLT<Eigen::Matrix2d> llt(q.inverse());
  if (llt.info() != Eigen::Success) throw ValidationError("dm_from_cm: characteristic function envelope is not positive");
  return llt.matrixL();
}

struct Node2 {
  Eigen::Vector2d z;
  double w;
};

std::vector<Node2> product_rule(int order) {
  const auto& gh = gauss_hermite(order);
  std::vector<Node2> nodes;
  nodes.reserve(order * order);
  for (int i = 0; i < order; ++i) {
    for (int j = 0; j < order; ++j) {
      nodes.push_back({Eigen::Vector2d(gh.nodes[i], gh.nodes[j]), gh.weights[i] * gh.weights[j]});
    }
  }
  return nodes;
}

Eigen::MatrixXcd single_mode(const CovarianceMatrix& sigma, int n_max, int order) {
  const Eigen::Matrix2d q = envelope(sigma);
  const Eigen::Matrix2d l = inverse_factor(q);
  const double jac = 2.0 * l.determinant();
  Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(n_max + 1, n_max + 1);
  for (const auto& node : product_rule(order)) {
    const Eigen::Vector2d lam = std::sqrt(2.0) * l * node.z;
    rho += node.w * displacement_matrix(cdouble(-lam[0], -lam[1]), n_max, false);
  }
  return rho * (jac / M_PI);
}

// Nested rule: the inner mode is integrated at fixed outer variables around
// its conditional center, the outer one against the Schur complement.
Eigen::MatrixXcd two_mode(const CovarianceMatrix& sigma, int n1, int n2, int extra) {
  const Eigen::Matrix4d q = envelope(sigma);
  // outer = the mode with the larger cutoff keeps the inner rule small
  const bool outer_first = n1 >= n2;
  const int no = outer_first ? n1 : n2;
  const int ni = outer_first ? n2 : n1;
  const int oo = outer_first ? 0 : 2;
  const int io = outer_first ? 2 : 0;
  const Eigen::Matrix2d qo = q.block<2, 2>(oo, oo);
  const Eigen::Matrix2d qi = q.block<2, 2>(io, io);
  const Eigen::Matrix2d qio = q.block<2, 2>(io, oo);
  const Eigen::Matrix2d qi_inv = qi.inverse();
  const Eigen::Matrix2d schur = qo - qio.transpose() * qi_inv * qio;
  const Eigen::Matrix2d lo = inverse_factor(schur);
  const Eigen::Matrix2d li = inverse_factor(qi);
  const Eigen::Matrix2d shift = -qi_inv * qio;
  const double jac = 2.0 * lo.determinant() * 2.0 * li.determinant();

  const auto outer_nodes = product_rule(no + ni + 1 + extra);
  const auto inner_nodes = product_rule(ni + 1 + extra);
  const int d1 = n1 + 1, d2 = n2 + 1;
  const int di = ni + 1;
  // sum_o a_o (x) b_o as one GEMM over flattened factors, in node chunks
  constexpr int kChunk = 256;
  Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(d1 * d1, d2 * d2);
  Eigen::MatrixXcd fa(d1 * d1, kChunk), fb(d2 * d2, kChunk);
  Eigen::MatrixXcd inner(di, di);
  int filled = 0;
  auto flush = [&]() {
    if (filled == 0) return;
    acc.noalias() += fa.leftCols(filled) * fb.leftCols(filled).transpose();
    filled = 0;
  };
  for (const auto& on : outer_nodes) {
    const Eigen::Vector2d lam_o = std::sqrt(2.0) * lo * on.z;
    const Eigen::Vector2d center = shift * lam_o;
    inner.setZero();
    for (const auto& in : inner_nodes) {
      const Eigen::Vector2d lam_i = center + std::sqrt(2.0) * li * in.z;
      inner += in.w * displacement_matrix(cdouble(-lam_i[0], -lam_i[1]), ni, false);
    }
    const Eigen::MatrixXcd outer = on.w * displacement_matrix(cdouble(-lam_o[0], -lam_o[1]), no, false);
    const Eigen::MatrixXcd& a = outer_first ? outer : inner;
    const Eigen::MatrixXcd& b = outer_first ? inner : outer;
    fa.col(filled) = Eigen::Map<const Eigen::VectorXcd>(a.data(), d1 * d1);
    fb.col(filled) = Eigen::Map<const Eigen::VectorXcd>(b.data(), d2 * d2);
    if (++filled == kChunk) flush();
  }
  flush();
  // column-major flattening: a(r1, c1) sits at r1 + d1 c1
  Eigen::MatrixXcd rho(d1 * d2, d1 * d2);
  for (int c1 = 0; c1 < d1; ++c1) {
    for (int r1 = 0; r1 < d1; ++r1) {
      for (int c2 = 0; c2 < d2; ++c2) {
        for (int r2 = 0; r2 < d2; ++r2) rho(r1 * d2 + r2, c1 * d2 + c2) = acc(r1 + d1 * c1, r2 + d2 * c2);
      }
    }
  }
  return rho * (jac / (M_PI * M_PI));
}

void check_trace(const TruncatedDensityMatrix& rho, const CovarianceMatrix& sigma, const ReconstructionOptions& opts) {
  if (rho.trace_deficit <= opts.trace_tol) return;
  std::ostringstream os;
  os << "dm_from_cm: trace deficit " << rho.trace_deficit << " exceeds " << opts.trace_tol << "; adequate cutoffs:";
  for (int m = 0; m < sigma.modes(); ++m) os << " mode " << m + 1 << " n_max >= " << adequate_cutoff(sigma.marginal({m}));
  throw ConvergenceError(os.str());
}

}  // namespace

cdouble characteristic_function(const CovarianceMatrix& sigma, std::span<const cdouble> lambda) {
  if (static_cast<int>(lambda.size()) != sigma.modes()) {
    throw StructuralError("characteristic_function: one argument per mode expected");
  }
  Eigen::VectorXd v(2 * lambda.size());
  for (size_t i = 0; i < lambda.size(); ++i) {
    v[2 * i] = lambda[i].real();
    v[2 * i + 1] = lambda[i].imag();
  }
  const Eigen::VectorXd w = symplectic_form(sigma.modes()) * v;
  return std::exp(-w.dot(sigma.matrix() * w));
}

TruncatedDensityMatrix dm_from_cm(const CovarianceMatrix& sigma, int n_max, const ReconstructionOptions& opts) {
  if (sigma.modes() != 1) throw StructuralError("dm_from_cm: expected a single-mode CM");
  if (n_max < 0) throw StructuralError("dm_from_cm: negative cutoff");
  require_physical(sigma, "dm_from_cm");
  TruncatedDensityMatrix rho(n_max, single_mode(sigma, n_max, n_max + 1));
  if (opts.verify) {
    const Eigen::MatrixXcd again = single_mode(sigma, n_max, n_max + 5);
    if ((again - rho.entries).cwiseAbs().maxCoeff() > opts.verify_tol) {
      throw ConvergenceError("dm_from_cm: quadrature not converged");
    }
  }
  check_trace(rho, sigma, opts);
  return rho;
}

TruncatedDensityMatrix dm_from_cm(const CovarianceMatrix& sigma, int n_max_1, int n_max_2,
                                  const ReconstructionOptions& opts) {
  if (sigma.modes() != 2) throw StructuralError("dm_from_cm: expected a two-mode CM");
  if (n_max_1 < 0 || n_max_2 < 0) throw StructuralError("dm_from_cm: negative cutoff");
  require_physical(sigma, "dm_from_cm");
  TruncatedDensityMatrix rho(n_max_1, n_max_2, two_mode(sigma, n_max_1, n_max_2, 0));
  if (opts.verify) {
    const Eigen::MatrixXcd again = two_mode(sigma, n_max_1, n_max_2, 3);
    if ((again - rho.entries).cwiseAbs().maxCoeff() > opts.verify_tol) {
      throw ConvergenceError("dm_from_cm: quadrature not converged");
    }
  }
  check_trace(rho, sigma, opts);
  return rho;
}

Eigen::VectorXd fock_populations(const CovarianceMatrix& sigma, int n_max) {
  if (sigma.modes() != 1) throw StructuralError("fock_populations: expected a single-mode CM");
  require_physical(sigma, "fock_populations");
  return single_mode(sigma, n_max, n_max + 1).diagonal().real();
}

int adequate_cutoff(const CovarianceMatrix& sigma, double tail, int limit) {
  for (int n = 16; n <= limit; n *= 2) {
    const Eigen::VectorXd p = fock_populations(sigma, std::min(n, limit));
    if (1.0 - p.sum() >= tail) continue;
    double cumulative = 0.0;
    for (int k = 0; k < p.size(); ++k) {
      cumulative += p[k];
      if (1.0 - cumulative < tail) return k;
    }
    return static_cast<int>(p.size()) - 1;
  }
  std::ostringstream os;
  os << "adequate_cutoff: population tail stays above " << tail << " up to n = " << limit;
  throw ConvergenceError(os.str());
}

ConditionalState condition_fock(const TruncatedDensityMatrix& rho_cm, int n) {
  if (rho_cm.mode_count != 2) throw StructuralError("condition_fock: expected a two-mode density matrix");
  if (n < 0 || n > rho_cm.n_max_2) throw StructuralError("condition_fock: photon number outside the cutoff");
  const int d1 = rho_cm.dim();
  Eigen::MatrixXcd rho(d1, d1);
  for (int i = 0; i < d1; ++i) {
    for (int j = 0; j < d1; ++j) rho(i, j) = rho_cm.entries(rho_cm.index(i, n), rho_cm.index(j, n));
  }
  const double prob = rho.trace().real();
  if (prob < 1e-12) {
    std::ostringstream os;
    os << "condition_fock: outcome n = " << n << " has probability " << prob;
    throw DegenerateOutcomeError(os.str());
  }
  TruncatedDensityMatrix out(rho_cm.n_max, rho / prob);
  out.trace_deficit = rho_cm.trace_deficit;
  return {out, prob};
}

ConditionalState condition_geiger_fock_sum(const TruncatedDensityMatrix& rho_cm) {
  if (rho_cm.mode_count != 2) throw StructuralError("condition_geiger_fock_sum: expected a two-mode density matrix");
  const int d1 = rho_cm.dim();
  Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(d1, d1);
  for (int n = 1; n <= rho_cm.n_max_2; ++n) {
    for (int i = 0; i < d1; ++i) {
      for (int j = 0; j < d1; ++j) rho(i, j) += rho_cm.entries(rho_cm.index(i, n), rho_cm.index(j, n));
    }
  }
  const double prob = rho.trace().real();
  if (prob < 1e-12) throw DegenerateOutcomeError("condition_geiger_fock_sum: click probability vanishes");
  TruncatedDensityMatrix out(rho_cm.n_max, rho / prob);
  out.trace_deficit = rho_cm.trace_deficit;
  return {out, prob};
}

ConditionalWigner condition_geiger(const CovarianceMatrix& sigma, const GridSpec& grid) {
  if (sigma.modes() != 2) throw StructuralError("condition_geiger: expected a two-mode CM");
  require_physical(sigma, "condition_geiger");
  const Eigen::Matrix2d m = sigma.block(0, 0);
  const Eigen::Matrix2d f = sigma.block(1, 1);
  const double p0 = gaussian_overlap(f, 0.5 * Eigen::Matrix2d::Identity());
  if (p0 >= 1.0 - 1e-12) throw DegenerateOutcomeError("condition_geiger: the detector never clicks (p0 = 1)");
  const Eigen::Matrix2d m0 = condition_gaussian(sigma, 1, Heterodyne{}).matrix();
  ConditionalWigner out;
  out.probability = 1.0 - p0;
  out.grid = evaluate_on_window(grid, [&](const GridSpec& g) -> Eigen::MatrixXd {
    const Eigen::Vector2d zero = Eigen::Vector2d::Zero();
    return (wigner_gaussian_values(m, zero, g) - p0 * wigner_gaussian_values(m0, zero, g)) / (1.0 - p0);
  });
  return out;
}

ConditionalWigner conditional_wigner_fock_direct(const CovarianceMatrix& sigma, int n, const GridSpec& grid) {
  if (sigma.modes() != 2) throw StructuralError("conditional_wigner_fock_direct: expected a two-mode CM");
  if (n < 0) throw StructuralError("conditional_wigner_fock_direct: negative photon number");
  require_physical(sigma, "conditional_wigner_fock_direct");
  const Eigen::Matrix4d v = sigma.matrix();
  const Eigen::Matrix4d prec = v.inverse();
  const Eigen::Matrix2d pxx = prec.block<2, 2>(0, 0);
  const Eigen::Matrix2d pyx = prec.block<2, 2>(2, 0);
  const Eigen::Matrix2d a = prec.block<2, 2>(2, 2) + 2.0 * Eigen::Matrix2d::Identity();
  const Eigen::Matrix2d a_inv = a.inverse();
  const Eigen::Matrix2d l = inverse_factor(a);
  const auto nodes = product_rule(n + 1);
  const double sign = n % 2 == 0 ? 1.0 : -1.0;

  // Fock-state Wigner in (q, p) units: ((-1)^n / pi) e^{-|Y|^2} L_n(2|Y|^2).
  auto overlap_sum = [&](const Eigen::Vector2d& center, const Eigen::Matrix2d& factor) {
    double s = 0.0;
    for (const auto& node : nodes) {
      const Eigen::Vector2d y = center + std::sqrt(2.0) * factor * node.z;
      s += node.w * laguerre(n, 2.0 * y.squaredNorm())[n];
    }
    return s * 2.0 * factor.determinant();
  };

  // Outcome probability from the cavity marginal.
  const Eigen::Matrix2d f = sigma.block(1, 1);
  const Eigen::Matrix2d lf = inverse_factor(f.inverse() + 2.0 * Eigen::Matrix2d::Identity());
  const double prob = 2.0 * M_PI * (sign / M_PI) / (2.0 * M_PI * std::sqrt(f.determinant())) *
                      overlap_sum(Eigen::Vector2d::Zero(), lf);
  if (prob < 1e-12) {
    std::ostringstream os;
    os << "conditional_wigner_fock_direct: outcome n = " << n << " has probability " << prob;
    throw DegenerateOutcomeError(os.str());
  }

  const double norm = 2.0 * M_PI * (sign / M_PI) / (4.0 * M_PI * M_PI * std::sqrt(v.determinant()));
  ConditionalWigner out;
  out.probability = prob;
  out.grid = evaluate_on_window(grid, [&](const GridSpec& g) -> Eigen::MatrixXd {
    Eigen::MatrixXd w(g.resolution, g.resolution);
    for (int i = 0; i < g.resolution; ++i) {
      for (int j = 0; j < g.resolution; ++j) {
        const Eigen::Vector2d x(std::sqrt(2.0) * g.coordinate(i), std::sqrt(2.0) * g.coordinate(j));
        const Eigen::Vector2d y0 = -a_inv * pyx * x;
        const double expo = -0.5 * x.dot(pxx * x) + 0.5 * y0.dot(a * y0);
        // factor 2 converts the density per dq dp into one per d^2 delta
        w(i, j) = 2.0 * norm * std::exp(expo) * overlap_sum(y0, l) / prob;
      }
    }
    return w;
  });
  return out;
}

ConditionalWigner conditional_wigner_fock_dm(const CovarianceMatrix& sigma, int n, const GridSpec& grid,
                                             int n_max_mech, int n_max_cav) {
  if (sigma.modes() != 2) throw StructuralError("conditional_wigner_fock_dm: expected a two-mode CM");
  if (n_max_mech < 0) {
    // the conditional tail is at most the marginal tail over p_n, and dropped
    // coherences move W by about sqrt(tail): aim for 1e-6 on the grid
    const double p_n = fock_populations(sigma.marginal({1}), n)[n];
    n_max_mech = adequate_cutoff(sigma.marginal({0}), 1e-12 * std::min(1.0, p_n));
  }
  if (n_max_cav < 0) n_max_cav = std::max(adequate_cutoff(sigma.marginal({1})), n);
  const auto rho = dm_from_cm(sigma, n_max_mech, n_max_cav);
  const auto cond = condition_fock(rho, n);
  ConditionalWigner out;
  out.probability = cond.probability;
  out.grid = wigner_from_fock_dm(cond.rho, grid);
  return out;
}

}  // namespace optomech
