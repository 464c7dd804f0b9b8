#include "optomech/unitary_model.hpp"

#include <cmath>
#include <sstream>
#include <vector>

#include "optomech/errors.hpp"
#include "optomech/quadrature.hpp"

namespace optomech {

namespace {

constexpr double kPoissonTail = 1e-10;
constexpr double kPruneRelative = 1e-14;
constexpr double kOrderTolerance = 1e-4;
constexpr int kFirstOrder = 10;
constexpr int kMaxOrder = 80;
constexpr int kChunkRows = 384;

struct ThermalNode {
  cdouble beta;
  double weight;
};

std::vector<ThermalNode> thermal_nodes(double nbar, int order) {
  if (nbar == 0.0) return {{cdouble(0.0, 0.0), 1.0}};
  const auto& gh = gauss_hermite(order);
  const double scale = std::sqrt(nbar);
  std::vector<ThermalNode> nodes;
  nodes.reserve(order * order);
  for (int i = 0; i < order; ++i) {
    for (int j = 0; j < order; ++j) {
      nodes.push_back({scale * cdouble(gh.nodes[i], gh.nodes[j]), gh.weights[i] * gh.weights[j] / M_PI});
    }
  }
  return nodes;
}

// Accumulates Re sum_k C_k X_k(x_i) Y_k(y_j) in row blocks.
class DyadAccumulator {
 public:
  explicit DyadAccumulator(const GridSpec& g)
      : spec_(g), n_(g.resolution), x_(kChunkRows, n_), y_(kChunkRows, n_), w_(Eigen::MatrixXd::Zero(n_, n_)) {}

  // Adds C * W_{|mu><nu|}(delta).
  void add(cdouble c, cdouble mu, cdouble nu) {
    const cdouble a = mu + std::conj(nu);
    const cdouble b = cdouble(0.0, 1.0) * (std::conj(nu) - mu);
    const cdouble pref = c * (2.0 / M_PI) * std::polar(1.0, std::imag(mu * std::conj(nu)));
    const double ax = 0.5 * a.imag() * a.imag();
    const double by = 0.5 * b.imag() * b.imag();
    for (int i = 0; i < n_; ++i) {
      const double t = spec_.coordinate(i);
      const cdouble u = t - 0.5 * a;
      const cdouble v = t - 0.5 * b;
      x_(rows_, i) = pref * std::exp(-2.0 * u * u - ax);
      y_(rows_, i) = std::exp(-2.0 * v * v - by);
    }
    if (++rows_ == kChunkRows) flush();
  }

  Eigen::MatrixXd result() {
    flush();
    return w_;
  }

 private:
  void flush() {
    if (rows_ == 0) return;
    w_.noalias() += (x_.topRows(rows_).transpose() * y_.topRows(rows_)).real();
    rows_ = 0;
  }

  GridSpec spec_;
  int n_;
  Eigen::MatrixXcd x_, y_;
  Eigen::MatrixXd w_;
  int rows_ = 0;
};

struct Accumulated {
  Eigen::MatrixXd values;
  double trace = 0.0;
};

// Unnormalized conditional Wigner for cavity-side overlaps `proj` (<Pi|n>).
Accumulated accumulate(const BranchDecomposition& br, const Eigen::VectorXcd& proj, double nbar, int order,
                       const GridSpec& g) {
  const int dim = br.n_max + 1;
  double scale = 0.0;
  for (int n = 0; n < dim; ++n) scale += std::norm(br.weight[n] * proj[n]);
  const double cutoff = kPruneRelative * scale;

  DyadAccumulator acc(g);
  Accumulated out;
  Eigen::VectorXcd amp(dim), mu(dim);
  for (const auto& node : thermal_nodes(nbar, order)) {
    for (int n = 0; n < dim; ++n) {
      mu[n] = br.amplitude(n, node.beta);
      amp[n] = br.weight[n] * std::polar(1.0, br.total_phase(n, node.beta)) * proj[n];
    }
    for (int n = 0; n < dim; ++n) {
      for (int m = n; m < dim; ++m) {
        const cdouble c = node.weight * amp[n] * std::conj(amp[m]);
        if (std::abs(c) < cutoff) continue;
        // <mu_m|mu_n>
        const cdouble overlap = std::exp(-0.5 * std::norm(mu[n]) - 0.5 * std::norm(mu[m]) + std::conj(mu[m]) * mu[n]);
        if (m == n) {
          out.trace += (c * overlap).real();
          acc.add(c, mu[n], mu[m]);
        } else {
          out.trace += 2.0 * (c * overlap).real();
          acc.add(2.0 * c, mu[n], mu[m]);
        }
      }
    }
  }
  out.values = acc.result();
  return out;
}

double negative_part(const Eigen::MatrixXd& w, double area) {
  return -w.cwiseMin(0.0).sum() * area;
}

ConditionalWigner conditional_from_projection(const UnitaryParams& p, const Eigen::VectorXcd& proj, const GridSpec& spec,
                                              const char* context) {
  check(p);
  const auto br = decompose(p);
  ConditionalWigner out;
  auto fill = [&](const GridSpec& g) -> Eigen::MatrixXd {
    if (p.nbar == 0.0) {
      auto a = accumulate(br, proj, 0.0, 1, g);
      if (!(a.trace > 1e-300)) throw DegenerateOutcomeError(std::string(context) + ": outcome has zero density");
      out.probability = a.trace;
      out.quadrature_order = 0;
      out.quadrature_change = 0.0;
      return a.values / a.trace;
    }
    // Order doubles until the negativity volume settles.
    Eigen::MatrixXd previous;
    double previous_nw = -1.0;
    for (int order = kFirstOrder; order <= kMaxOrder; order *= 2) {
      auto a = accumulate(br, proj, p.nbar, order, g);
      if (!(a.trace > 1e-300)) throw DegenerateOutcomeError(std::string(context) + ": outcome has zero density");
      Eigen::MatrixXd w = a.values / a.trace;
      const double nw = negative_part(w, g.spacing() * g.spacing());
      if (previous_nw >= 0.0 && std::abs(nw - previous_nw) < kOrderTolerance) {
        out.probability = a.trace;
        out.quadrature_order = order;
        out.quadrature_change = std::abs(nw - previous_nw);
        return w;
      }
      previous_nw = nw;
      previous = std::move(w);
    }
    std::ostringstream os;
    os << context << ": thermal quadrature did not settle by order " << kMaxOrder << " (nbar = " << p.nbar << ")";
    throw ConvergenceError(os.str());
  };
  out.grid = evaluate_on_window(spec, fill);
  return out;
}

}  // namespace

int required_photon_cutoff(double alpha) {
  const double mean = alpha * alpha;
  double term = std::exp(-mean);
  double cumulative = term;
  int n = 0;
  while (1.0 - cumulative >= kPoissonTail && n < 10000) {
    ++n;
    term *= mean / n;
    cumulative += term;
  }
  // The cumulative sum loses precision near 1; add a small margin.
  return n + 2;
}

void check(const UnitaryParams& p) {
  if (!(p.nbar >= 0.0)) throw StructuralError("unitary model: nbar must be non-negative");
  if (p.n_max >= 0) {
    const int needed = required_photon_cutoff(p.alpha);
    if (p.n_max < needed) {
      std::ostringstream os;
      os << "unitary model: photon cutoff " << p.n_max << " leaves a Poisson tail above 1e-10; need n_max >= " << needed;
      throw StructuralError(os.str());
    }
  }
}

BranchDecomposition decompose(const UnitaryParams& p) {
  check(p);
  BranchDecomposition br;
  br.n_max = p.n_max >= 0 ? p.n_max : required_photon_cutoff(p.alpha);
  br.time_wm = p.time_wm;
  const int dim = br.n_max + 1;
  br.weight.resize(dim);
  br.phase.resize(dim);
  br.shift.resize(dim);
  const Eigen::VectorXcd c = coherent_amplitudes(cdouble(p.alpha, 0.0), br.n_max);
  const double k = p.chi_over_wm;
  const cdouble one_minus = 1.0 - std::polar(1.0, -p.time_wm);
  for (int n = 0; n < dim; ++n) {
    br.weight[n] = c[n].real();
    br.phase[n] = k * k * n * n * (p.time_wm - std::sin(p.time_wm));
    br.shift[n] = k * n * one_minus;
  }
  return br;
}

ConditionalWigner conditional_wigner_homodyne(const UnitaryParams& p, double x, const GridSpec& grid) {
  check(p);
  const int n_max = p.n_max >= 0 ? p.n_max : required_photon_cutoff(p.alpha);
  const Eigen::VectorXcd proj = hermite_functions(n_max, x).cast<cdouble>();
  return conditional_from_projection(p, proj, grid, "conditional_wigner_homodyne");
}

ConditionalWigner conditional_wigner_heterodyne(const UnitaryParams& p, cdouble sigma, const GridSpec& grid) {
  check(p);
  const int n_max = p.n_max >= 0 ? p.n_max : required_photon_cutoff(p.alpha);
  // <sigma|n> = conj(<n|sigma>)
  const Eigen::VectorXcd proj = coherent_amplitudes(sigma, n_max).conjugate();
  auto out = conditional_from_projection(p, proj, grid, "conditional_wigner_heterodyne");
  out.probability /= M_PI;  // density per d^2 sigma
  return out;
}

ConditionalWigner conditional_photon_counting_unitary(const UnitaryParams& p, int n, const GridSpec& grid) {
  const auto br = decompose(p);
  if (n < 0 || n > br.n_max) throw StructuralError("conditional_photon_counting_unitary: n outside the cutoff");
  ConditionalWigner out;
  out.probability = br.weight[n] * br.weight[n];
  // Thermal state rotated and displaced by s_n stays a displaced thermal state.
  const Eigen::Vector2d mean(std::sqrt(2.0) * br.shift[n].real(), std::sqrt(2.0) * br.shift[n].imag());
  out.grid = wigner_gaussian(CovarianceMatrix::thermal(1, p.nbar), mean, grid);
  return out;
}

}  // namespace optomech
