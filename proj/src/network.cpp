#include "optomech/network.hpp"

#include <atomic>
#include <cmath>
#include <thread>

#include "optomech/errors.hpp"

namespace optomech {

NetworkParams reference_network(double chi_over_wm, double shared_r, double temperature) {
  NetworkParams p;
  p.cavity_1 = reference_device(chi_over_wm);
  p.cavity_1.temperature = temperature;
  p.cavity_2 = p.cavity_1;
  p.shared_r = shared_r;
  return p;
}

CovarianceMatrix two_cavity_cm(const NetworkParams& p, const CovarianceOptions& opts) {
  if (!(p.shared_r >= 0.0)) throw StructuralError("two_cavity_cm: shared_r must be non-negative");
  OptomechParams c1 = p.cavity_1, c2 = p.cavity_2;
  c1.r = c2.r = 0.0;
  c1.phi = c2.phi = 0.0;
  if (std::abs(c1.omega_m - c2.omega_m) > 1e-12 * c1.omega_m) {
    throw StructuralError("two_cavity_cm: mechanical frequencies must be equal");
  }
  const double z = std::sinh(p.shared_r) * std::sinh(p.shared_r);
  const double w = std::sinh(p.shared_r) * std::cosh(p.shared_r);
  const Eigen::Matrix4d s1 = stationary_covariance(c1, z, opts);
  const Eigen::Matrix4d s2 = stationary_covariance(c2, z, opts);
  Eigen::Matrix4d cross = Eigen::Matrix4d::Zero();
  if (!opts.rwa && w > 0.0) {
    const Eigen::Matrix4cd k = squeezing_kernel(c1, c2, opts);
    cross = 2.0 * (w * std::polar(1.0, -2.0 * c1.omega_m * p.time) * k).real();
  }
  // (q, p, x, y) of cavity 1 -> indices 0, 1, 4, 5; of cavity 2 -> 2, 3, 6, 7
  const int i1[4] = {0, 1, 4, 5};
  const int i2[4] = {2, 3, 6, 7};
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(8, 8);
  for (int a = 0; a < 4; ++a) {
    for (int b = 0; b < 4; ++b) {
      v(i1[a], i1[b]) = s1(a, b);
      v(i2[a], i2[b]) = s2(a, b);
      v(i1[a], i2[b]) = cross(a, b);
      v(i2[b], i1[a]) = cross(a, b);
    }
  }
  return CovarianceMatrix(0.5 * (v + v.transpose()));
}

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::NoDetection: return "no_detection";
    case Strategy::SingleHomodyne: return "single_homodyne";
    case Strategy::DoubleHomodyne: return "double_homodyne";
    case Strategy::SingleHeterodyne: return "single_heterodyne";
    case Strategy::DoubleHeterodyne: return "double_heterodyne";
  }
  return "unknown";
}

Strategy strategy_from_string(std::string_view name) {
  for (Strategy s : all_strategies()) {
    if (to_string(s) == name) return s;
  }
  throw StructuralError("unknown strategy '" + std::string(name) + "'");
}

const std::vector<Strategy>& all_strategies() {
  static const std::vector<Strategy> all{Strategy::NoDetection, Strategy::DoubleHeterodyne, Strategy::SingleHomodyne,
                                         Strategy::SingleHeterodyne, Strategy::DoubleHomodyne};
  return all;
}

CovarianceMatrix mechanical_state(const CovarianceMatrix& v8, Strategy s, int measured_cavity) {
  if (v8.modes() != 4) throw StructuralError("mechanical_state: expected the 8x8 network CM");
  if (measured_cavity != 1 && measured_cavity != 2) throw StructuralError("mechanical_state: cavity must be 1 or 2");
  const int single = measured_cavity == 1 ? 2 : 3;
  std::vector<ModeMeasurement> meas;
  switch (s) {
    case Strategy::NoDetection: {
      require_physical(v8, "mechanical_state");
      return v8.marginal({0, 1});
    }
    case Strategy::SingleHomodyne: meas = {{single, Homodyne{}}}; break;
    case Strategy::SingleHeterodyne: meas = {{single, Heterodyne{}}}; break;
    case Strategy::DoubleHomodyne: meas = {{2, Homodyne{}}, {3, Homodyne{}}}; break;
    case Strategy::DoubleHeterodyne: meas = {{2, Heterodyne{}}, {3, Heterodyne{}}}; break;
  }
  const CovarianceMatrix rest = condition_gaussian_multi(v8, meas);
  // the remaining modes keep their order: mechanics first
  return rest.marginal({0, 1});
}

double mechanical_entanglement(const CovarianceMatrix& v8, Strategy s, int measured_cavity) {
  return log_negativity(mechanical_state(v8, s, measured_cavity));
}

std::vector<SweepRow> sweep_entanglement(const NetworkParams& base, const std::vector<double>& r_grid,
                                         const std::vector<Strategy>& strategies,
                                         const std::vector<double>& temperatures, const CovarianceOptions& opts,
                                         int threads, int measured_cavity) {
  if (r_grid.empty() || strategies.empty() || temperatures.empty()) {
    throw StructuralError("sweep_entanglement: r grid, strategies and temperatures must be nonempty");
  }
  const size_t points = r_grid.size() * temperatures.size();
  const size_t ns = strategies.size();
  std::vector<SweepRow> rows(points * ns);
  std::atomic<size_t> next{0};
  auto worker = [&]() {
    for (size_t k = next++; k < points; k = next++) {
      const double temp = temperatures[k / r_grid.size()];
      const double r = r_grid[k % r_grid.size()];
      for (size_t j = 0; j < ns; ++j) {
        auto& row = rows[k * ns + j];
        row.r = r;
        row.temperature = temp;
        row.strategy = strategies[j];
      }
      try {
        NetworkParams p = base;
        p.shared_r = r;
        p.cavity_1.temperature = temp;
        p.cavity_2.temperature = temp;
        const CovarianceMatrix v8 = two_cavity_cm(p, opts);
        for (size_t j = 0; j < ns; ++j) {
          auto& row = rows[k * ns + j];
          try {
            row.log_negativity = mechanical_entanglement(v8, strategies[j], measured_cavity);
            row.valid = true;
          } catch (const std::exception& e) {
            row.error = e.what();
          }
        }
      } catch (const std::exception& e) {
        for (size_t j = 0; j < ns; ++j) rows[k * ns + j].error = e.what();
      }
    }
  };
  const int n = std::max(1, std::min<int>(threads, static_cast<int>(points)));
  std::vector<std::thread> pool;
  for (int i = 1; i < n; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return rows;
}

}  // namespace optomech
