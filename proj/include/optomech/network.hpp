#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "optomech/gaussian.hpp"
#include "optomech/linearized.hpp"

namespace optomech {

/// Two cavities fed by the two arms of a two-mode squeezed input of strength
/// shared_r. Per-cavity squeezing fields (r, phi) are ignored.
struct NetworkParams {
  OptomechParams cavity_1;
  OptomechParams cavity_2;
  double shared_r = 0.0;
  /// Evaluation time in seconds.
  double time = 0.0;
};

NetworkParams reference_network(double chi_over_wm, double shared_r, double temperature = 1e-4);

/// 8x8 CM ordered (q1, p1, q2, p2, x1, y1, x2, y2): modes 0, 1 mechanical,
/// modes 2, 3 optical.
CovarianceMatrix two_cavity_cm(const NetworkParams& p, const CovarianceOptions& opts = {});

enum class Strategy { NoDetection, SingleHomodyne, DoubleHomodyne, SingleHeterodyne, DoubleHeterodyne };

std::string_view to_string(Strategy s);
Strategy strategy_from_string(std::string_view name);
const std::vector<Strategy>& all_strategies();

/// Conditional 4x4 mechanical CM after the strategy's measurements. Single
/// strategies measure cavity `measured_cavity` (1 or 2).
CovarianceMatrix mechanical_state(const CovarianceMatrix& v8, Strategy s, int measured_cavity = 1);

/// Logarithmic negativity between the two mechanical modes.
double mechanical_entanglement(const CovarianceMatrix& v8, Strategy s, int measured_cavity = 1);

struct SweepRow {
  double r = 0.0;
  double temperature = 0.0;
  Strategy strategy = Strategy::NoDetection;
  double log_negativity = 0.0;
  bool valid = false;
  std::string error;
};

/// Rows ordered by temperature, then r, then strategy as given. A failing
/// (r, T) point marks its rows invalid instead of aborting the sweep.
std::vector<SweepRow> sweep_entanglement(const NetworkParams& base, const std::vector<double>& r_grid,
                                         const std::vector<Strategy>& strategies,
                                         const std::vector<double>& temperatures, const CovarianceOptions& opts = {},
                                         int threads = 1, int measured_cavity = 1);

}  // namespace optomech
