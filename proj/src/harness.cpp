#include "optomech/harness.hpp"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <openssl/evp.h>

#include "optomech/errors.hpp"
#include "optomech/fock.hpp"
#include "optomech/gaussian.hpp"
#include "optomech/linearized.hpp"
#include "optomech/network.hpp"
#include "optomech/phase_space.hpp"
#include "optomech/unitary_model.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace optomech::harness {

namespace {

constexpr const char* kFormatVersion = "optomech-harness 1";

const char* const U = "unitary-wigner";
const char* const L = "linearized-cm";
const char* const C = "conditional-wigner";
const char* const N = "negativity-sweep";
const char* const E = "entanglement-sweep";

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, sep)) out.push_back(trim(item));
  if (!s.empty() && s.back() == sep) out.push_back("");
  return out;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

const char* dimension_name(Dimension d) {
  switch (d) {
    case Dimension::None: return "dimensionless";
    case Dimension::Frequency: return "frequency";
    case Dimension::Temperature: return "temperature";
    case Dimension::Power: return "power";
    case Dimension::Length: return "length";
  }
  return "?";
}

struct Unit {
  const char* name;
  Dimension dim;
  double factor;
};

// Hz-type units are cyclic and get the 2 pi; rad/s is taken as is.
const Unit kUnits[] = {
    {"Hz", Dimension::Frequency, 2 * M_PI},        {"kHz", Dimension::Frequency, 2 * M_PI * 1e3},
    {"MHz", Dimension::Frequency, 2 * M_PI * 1e6}, {"GHz", Dimension::Frequency, 2 * M_PI * 1e9},
    {"rad/s", Dimension::Frequency, 1.0},          {"K", Dimension::Temperature, 1.0},
    {"mK", Dimension::Temperature, 1e-3},          {"uK", Dimension::Temperature, 1e-6},
    {"nK", Dimension::Temperature, 1e-9},          {"W", Dimension::Power, 1.0},
    {"mW", Dimension::Power, 1e-3},                {"uW", Dimension::Power, 1e-6},
    {"m", Dimension::Length, 1.0},                 {"mm", Dimension::Length, 1e-3},
    {"um", Dimension::Length, 1e-6},               {"nm", Dimension::Length, 1e-9},
};

[[noreturn]] void fail(const std::string& source, int line, const std::string& key, const std::string& what) {
  std::string msg = "config " + source;
  if (line > 0) msg += ":" + std::to_string(line);
  if (!key.empty()) msg += ": key '" + key + "'";
  throw ConfigError(msg + ": " + what);
}

// "<number>[*]pi" or "<number>" followed by an optional unit
double parse_quantity(const std::string& text, Dimension& dim_out, const std::string& where_src, int line,
                      const std::string& key) {
  std::string s = trim(text);
  if (s.empty()) fail(where_src, line, key, "empty value");
  size_t pos = 0;
  double value = 1.0;
  bool have_number = false;
  try {
    value = std::stod(s, &pos);
    have_number = true;
  } catch (const std::exception&) {
    pos = 0;
  }
  std::string rest = trim(s.substr(pos));
  if (rest.rfind("*pi", 0) == 0 && have_number) rest = trim(rest.substr(1));
  if (rest.rfind("pi", 0) == 0 && (rest.size() == 2 || rest[2] == ' ')) {
    value *= M_PI;
    have_number = true;
    rest = trim(rest.substr(2));
  }
  if (!have_number) fail(where_src, line, key, "'" + text + "' is not a number");
  dim_out = Dimension::None;
  if (rest.empty()) return value;
  for (const Unit& u : kUnits) {
    if (rest == u.name) {
      dim_out = u.dim;
      return value * u.factor;
    }
  }
  fail(where_src, line, key, "unknown unit '" + rest + "'");
}

bool contains(const std::vector<std::string>& v, const std::string& s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

const KeySpec* find_key(const std::string& name) {
  for (const auto& k : known_keys()) {
    if (k.name == name) return &k;
  }
  return nullptr;
}

Dimension sweep_dimension(const std::string& parameter) {
  return parameter == "temperature" ? Dimension::Temperature : Dimension::None;
}

const std::vector<std::string>& sweepable() {
  static const std::vector<std::string> v{"chi_over_wm",   "squeeze_r",        "temperature", "gamma_over_wm",
                                          "kappa_over_wm", "detuning_over_wm", "time_wm"};
  return v;
}

void require(const RunConfig& cfg, const std::string& key, const std::string& why) {
  if (!cfg.has(key)) fail(cfg.source, 0, key, "required " + why);
}

void one_of(const RunConfig& cfg, const std::string& key, const std::vector<std::string>& allowed) {
  if (!cfg.has(key)) return;
  for (const auto& w : cfg.values.at(key).words) {
    if (!contains(allowed, w)) {
      std::string list;
      for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
      fail(cfg.source, cfg.values.at(key).line, key, "'" + w + "' is not one of: " + list);
    }
  }
}

void check_detection(const RunConfig& cfg, const std::string& d) {
  if (d == "geiger") return;
  if (d.rfind("fock", 0) == 0 && d.size() > 4 && std::all_of(d.begin() + 4, d.end(), ::isdigit)) return;
  fail(cfg.source, cfg.values.at("detections").line, "detections", "'" + d + "' is not geiger or fock<n>");
}

// subcommand-level requirements, after per-key parsing
void validate_config(const RunConfig& cfg) {
  const std::string& sc = cfg.subcommand;
  one_of(cfg, "bath", {"quantum", "markovian"});
  one_of(cfg, "route", {"fock_dm", "direct"});
  if (sc == U) {
    require(cfg, "chi_over_wm", "by unitary-wigner");
    require(cfg, "alpha", "by unitary-wigner");
    require(cfg, "measurement", "by unitary-wigner");
    one_of(cfg, "measurement", {"homodyne", "heterodyne", "photon_counting"});
    const std::string m = cfg.word("measurement", "");
    if (m == "homodyne") require(cfg, "outcome_x", "for homodyne");
    if (m == "heterodyne") {
      require(cfg, "sigma_re", "for heterodyne");
      require(cfg, "sigma_im", "for heterodyne");
    }
    if (m == "photon_counting") require(cfg, "outcome_n", "for photon_counting");
  } else if (sc == L) {
    require(cfg, "chi_over_wm", "by linearized-cm");
  } else if (sc == C) {
    require(cfg, "chi_over_wm", "by conditional-wigner");
    require(cfg, "measurement", "by conditional-wigner");
    one_of(cfg, "measurement", {"fock", "geiger", "homodyne", "heterodyne"});
    if (cfg.word("measurement", "") == "fock") require(cfg, "outcome_n", "for fock");
  } else if (sc == N) {
    require(cfg, "sweep_parameter", "by negativity-sweep");
    require(cfg, "sweep_values", "by negativity-sweep");
    require(cfg, "detections", "by negativity-sweep");
    one_of(cfg, "sweep_parameter", sweepable());
    const std::string param = cfg.word("sweep_parameter", "");
    if (param != "chi_over_wm") require(cfg, "chi_over_wm", "unless it is swept");
    if (cfg.has(param)) fail(cfg.source, cfg.values.at(param).line, param, "is swept and cannot also be fixed");
    const auto& sv = cfg.values.at("sweep_values");
    for (const auto& item : split(sv.raw, ',')) {
      Dimension d;
      parse_quantity(item, d, cfg.source, sv.line, "sweep_values");
      if (d != Dimension::None && d != sweep_dimension(param)) {
        fail(cfg.source, sv.line, "sweep_values",
             std::string("unit is a ") + dimension_name(d) + ", " + param + " is " +
                 dimension_name(sweep_dimension(param)));
      }
    }
    for (const auto& d : cfg.words("detections")) check_detection(cfg, d);
  } else if (sc == E) {
    require(cfg, "chi_over_wm", "by entanglement-sweep");
    require(cfg, "r_values", "by entanglement-sweep");
    require(cfg, "temperatures", "by entanglement-sweep");
    if (cfg.has("strategies")) {
      for (const auto& s : cfg.words("strategies")) {
        try {
          strategy_from_string(s);
        } catch (const StructuralError&) {
          fail(cfg.source, cfg.values.at("strategies").line, "strategies", "unknown strategy '" + s + "'");
        }
      }
    }
    const int mc = cfg.integer("measured_cavity", 1);
    if (mc != 1 && mc != 2) fail(cfg.source, cfg.values.at("measured_cavity").line, "measured_cavity", "must be 1 or 2");
  }
  if (cfg.has("grid_points") && cfg.integer("grid_points", 0) < 3) {
    fail(cfg.source, cfg.values.at("grid_points").line, "grid_points", "must be at least 3");
  }
  if (cfg.has("grid_min") || cfg.has("grid_max")) {
    if (!(cfg.number("grid_min", -6.0) < cfg.number("grid_max", 6.0))) {
      fail(cfg.source, 0, "grid_max", "must exceed grid_min");
    }
  }
  if (cfg.has("threads")) fail(cfg.source, cfg.values.at("threads").line, "threads", "is a command-line option, use --threads");
}

// Output files and scalar summaries ------------------------------------------

void write_text(const fs::path& path, const std::string& body) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << body;
  if (!os) throw std::runtime_error("write failed for " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw StructuralError("cannot read " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

struct Produced {
  std::map<std::string, std::string> files;  // name -> bytes
  json scalars = json::object();
  json convergence = json::object();
};

GridSpec grid_of(const RunConfig& cfg) {
  GridSpec g;
  g.axis_min = cfg.number("grid_min", g.axis_min);
  g.axis_max = cfg.number("grid_max", g.axis_max);
  g.resolution = cfg.integer("grid_points", g.resolution);
  return g;
}

void describe_wigner(const ConditionalWigner& cw, Produced& out, bool probability_known = true) {
  std::ostringstream csv;
  cw.grid.write_csv(csv);
  out.files["wigner.csv"] = csv.str();
  const auto nv = negativity_volume(cw.grid);
  out.scalars["negativity_volume"] = nv.value;
  out.scalars["min_wigner"] = cw.grid.min_value();
  out.scalars["probability"] = probability_known ? json(cw.probability) : json(nullptr);
  out.convergence["negativity_error_estimate"] = nv.error_estimate;
  out.convergence["normalization"] = nv.normalization;
  out.convergence["normalized"] = nv.normalized;
  out.convergence["window_expanded"] = cw.grid.window_expanded;
  out.convergence["grid"] = {{"min", cw.grid.spec.axis_min},
                             {"max", cw.grid.spec.axis_max},
                             {"points", cw.grid.spec.resolution}};
  out.convergence["quadrature_order"] = cw.quadrature_order;
  out.convergence["quadrature_change"] = cw.quadrature_change;
}

OptomechParams device_of(const RunConfig& cfg) {
  OptomechParams p;
  p.omega_m = cfg.number("mech_frequency", 2 * M_PI * 947e3);
  p.gamma_m = cfg.number("gamma_over_wm", 1.5e-4) * p.omega_m;
  p.kappa = cfg.number("kappa_over_wm", 0.23) * p.omega_m;
  p.delta_tilde = cfg.number("detuning_over_wm", 1.0) * p.omega_m;
  p.chi = cfg.number("chi_over_wm", 0.0) * p.omega_m;
  p.temperature = cfg.number("temperature", 1e-4);
  p.r = cfg.number("squeeze_r", 0.0);
  p.phi = cfg.number("squeeze_phi", 0.0);
  if (cfg.has("intracavity_amplitude")) {
    p.c_s = cfg.number("intracavity_amplitude");
  } else {
    PumpSettings pump;
    pump.power = cfg.number("pump_power", pump.power);
    pump.wavelength = cfg.number("pump_wavelength", pump.wavelength);
    pump.coupling_factor = cfg.number("pump_coupling", pump.coupling_factor);
    p.pump = pump;
  }
  return p;
}

CovarianceOptions numerics_of(const RunConfig& cfg, bool rwa) {
  CovarianceOptions o;
  o.rwa = rwa;
  o.bath = cfg.word("bath", "quantum") == "markovian" ? BathModel::Markovian : BathModel::Quantum;
  o.drude_ratio = cfg.number("drude_ratio", o.drude_ratio);
  o.tail_tol = cfg.number("tail_tol", o.tail_tol);
  o.rel_tol = cfg.number("rel_tol", o.rel_tol);
  return o;
}

void run_unitary(const RunConfig& cfg, Produced& out) {
  UnitaryParams p;
  p.chi_over_wm = cfg.number("chi_over_wm");
  p.alpha = cfg.number("alpha");
  p.nbar = cfg.number("nbar", 0.0);
  p.time_wm = cfg.number("time_wm", M_PI);
  p.n_max = cfg.integer("photon_cutoff", -1);
  const GridSpec g = grid_of(cfg);
  const std::string m = cfg.word("measurement", "");
  ConditionalWigner cw;
  if (m == "homodyne") {
    cw = conditional_wigner_homodyne(p, cfg.number("outcome_x"), g);
  } else if (m == "heterodyne") {
    cw = conditional_wigner_heterodyne(p, {cfg.number("sigma_re"), cfg.number("sigma_im")}, g);
  } else {
    cw = conditional_photon_counting_unitary(p, cfg.integer("outcome_n", 0), g);
  }
  describe_wigner(cw, out);
  out.convergence["photon_cutoff"] = p.n_max >= 0 ? p.n_max : required_photon_cutoff(p.alpha);
}

void run_linearized(const RunConfig& cfg, bool rwa, Produced& out) {
  const OptomechParams p = device_of(cfg);
  const auto cm = covariance_matrix(p, cfg.number("time_wm", 0.0) / p.omega_m, numerics_of(cfg, rwa));
  std::ostringstream csv;
  const char* labels[] = {"q_m", "p_m", "x_c", "y_c"};
  csv << "row,q_m,p_m,x_c,y_c\n";
  for (int i = 0; i < 4; ++i) {
    csv << labels[i];
    for (int j = 0; j < 4; ++j) csv << ',' << fmt(cm.matrix()(i, j));
    csv << '\n';
  }
  out.files["covariance.csv"] = csv.str();
  const auto v = validate(cm);
  out.scalars["physical"] = v.ok;
  out.scalars["symplectic_eigenvalues"] = symplectic_eigenvalues(cm);
  out.scalars["log_negativity"] = log_negativity(cm);
  out.scalars["mechanical_occupation"] = 0.5 * (cm.matrix()(0, 0) + cm.matrix()(1, 1)) - 0.5;
  out.scalars["intracavity_amplitude"] = intracavity_amplitude(p);
  if (!v.ok) out.convergence["diagnostic"] = v.diagnostic;
}

struct Detection {
  std::string name;
  ConditionalWigner result;
};

ConditionalWigner condition(const CovarianceMatrix& cm, const std::string& detection, const RunConfig& cfg,
                            const GridSpec& g) {
  if (detection == "geiger") return condition_geiger(cm, g);
  const int n = std::stoi(detection.substr(4));
  if (cfg.word("route", "fock_dm") == "direct") return conditional_wigner_fock_direct(cm, n, g);
  return conditional_wigner_fock_dm(cm, n, g, cfg.integer("mech_cutoff", -1), cfg.integer("cavity_cutoff", -1));
}

void run_conditional(const RunConfig& cfg, bool rwa, Produced& out) {
  const OptomechParams p = device_of(cfg);
  const auto cm = covariance_matrix(p, cfg.number("time_wm", 0.0) / p.omega_m, numerics_of(cfg, rwa));
  const GridSpec g = grid_of(cfg);
  const std::string m = cfg.word("measurement", "");
  if (m == "homodyne" || m == "heterodyne") {
    // the conditional CM is outcome independent; the grid is centred on the
    // conditional mean, whose offset carries no information about negativity
    const MeasurementSpec spec = m == "homodyne" ? MeasurementSpec(Homodyne{cfg.number("homodyne_angle", 0.0)})
                                                 : MeasurementSpec(Heterodyne{});
    ConditionalWigner cw;
    cw.grid = wigner_gaussian(condition_gaussian(cm, 1, spec), Eigen::Vector2d::Zero(), g);
    describe_wigner(cw, out, false);
    return;
  }
  describe_wigner(condition(cm, m == "geiger" ? "geiger" : "fock" + std::to_string(cfg.integer("outcome_n", 1)), cfg, g),
                  out);
}

OptomechParams with_parameter(OptomechParams p, const std::string& name, double v, double& time_wm) {
  if (name == "chi_over_wm") p.chi = v * p.omega_m;
  else if (name == "squeeze_r") p.r = v;
  else if (name == "temperature") p.temperature = v;
  else if (name == "gamma_over_wm") p.gamma_m = v * p.omega_m;
  else if (name == "kappa_over_wm") p.kappa = v * p.omega_m;
  else if (name == "detuning_over_wm") p.delta_tilde = v * p.omega_m;
  else if (name == "time_wm") time_wm = v;
  return p;
}

// Runs f(i) for i in [0, count) on up to `threads` workers. Results are stored
// per index by f, so the merge order never depends on scheduling.
void parallel_for(int count, int threads, const std::function<void(int)>& f) {
  threads = std::max(1, std::min(threads, count));
  if (threads == 1) {
    for (int i = 0; i < count; ++i) f(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) f(i);
    });
  }
  for (auto& th : pool) th.join();
}

void run_negativity_sweep(const RunConfig& cfg, bool rwa, int threads, Produced& out) {
  const OptomechParams base = device_of(cfg);
  const CovarianceOptions num = numerics_of(cfg, rwa);
  const std::string param = cfg.word("sweep_parameter", "");
  const std::vector<double> values = cfg.numbers("sweep_values");
  const std::vector<std::string> detections = cfg.words("detections");
  const GridSpec g = grid_of(cfg);

  struct Cell {
    double nw = NAN, err = NAN, prob = NAN, minw = NAN;
    bool valid = false;
    std::string error;
  };
  std::vector<Cell> cells(values.size() * detections.size());
  parallel_for(static_cast<int>(values.size()), threads, [&](int i) {
    double time_wm = cfg.number("time_wm", 0.0);
    const OptomechParams p = with_parameter(base, param, values[i], time_wm);
    std::optional<CovarianceMatrix> cm;
    std::string cm_error;
    try {
      cm = covariance_matrix(p, time_wm / p.omega_m, num);
    } catch (const std::exception& e) {
      cm_error = std::string("linearized: ") + e.what();
    }
    for (size_t d = 0; d < detections.size(); ++d) {
      Cell& c = cells[i * detections.size() + d];
      if (!cm) {
        c.error = cm_error;
        continue;
      }
      try {
        const auto cw = condition(*cm, detections[d], cfg, g);
        const auto nv = negativity_volume(cw.grid);
        c = Cell{nv.value, nv.error_estimate, cw.probability, cw.grid.min_value(), true, ""};
      } catch (const std::exception& e) {
        c.error = std::string("fock: ") + e.what();
      }
    }
  });

  std::ostringstream csv;
  csv << param << ",detection,negativity_volume,error_estimate,probability,min_wigner,valid\n";
  json failures = json::array();
  double best = 0.0;
  for (size_t i = 0; i < values.size(); ++i) {
    for (size_t d = 0; d < detections.size(); ++d) {
      const Cell& c = cells[i * detections.size() + d];
      csv << fmt(values[i]) << ',' << detections[d] << ',' << fmt(c.nw) << ',' << fmt(c.err) << ',' << fmt(c.prob)
          << ',' << fmt(c.minw) << ',' << (c.valid ? 1 : 0) << '\n';
      if (!c.valid) failures.push_back({{param, values[i]}, {"detection", detections[d]}, {"error", c.error}});
      if (c.valid) best = std::max(best, c.nw);
    }
  }
  out.files["sweep.csv"] = csv.str();
  out.scalars["points"] = values.size();
  out.scalars["max_negativity_volume"] = best;
  out.convergence["failures"] = failures;
}

void run_entanglement_sweep(const RunConfig& cfg, bool rwa, int threads, Produced& out) {
  NetworkParams np;
  np.cavity_1 = device_of(cfg);
  np.cavity_1.r = np.cavity_1.phi = 0.0;
  np.cavity_2 = np.cavity_1;
  np.time = cfg.number("time_wm", 0.0) / np.cavity_1.omega_m;
  std::vector<Strategy> strategies;
  if (cfg.has("strategies")) {
    for (const auto& s : cfg.words("strategies")) strategies.push_back(strategy_from_string(s));
  } else {
    strategies = all_strategies();
  }
  const auto rows = sweep_entanglement(np, cfg.numbers("r_values"), strategies, cfg.numbers("temperatures"),
                                       numerics_of(cfg, rwa), threads, cfg.integer("measured_cavity", 1));
  std::ostringstream csv;
  csv << "r,temperature_K,strategy,log_negativity,valid\n";
  json failures = json::array();
  json best = json::object();
  for (const auto& row : rows) {
    csv << fmt(row.r) << ',' << fmt(row.temperature) << ',' << to_string(row.strategy) << ','
        << fmt(row.valid ? row.log_negativity : NAN) << ',' << (row.valid ? 1 : 0) << '\n';
    const std::string name(to_string(row.strategy));
    if (row.valid) {
      best[name] = std::max(best.value(name, 0.0), row.log_negativity);
    } else {
      failures.push_back({{"r", row.r}, {"temperature_K", row.temperature}, {"strategy", name}, {"error", row.error}});
    }
  }
  out.files["entanglement.csv"] = csv.str();
  out.scalars["rows"] = rows.size();
  out.scalars["max_log_negativity"] = best;
  out.convergence["failures"] = failures;
}

// Keeps the exception type, adds which subcommand was running.
template <class F>
void with_context(const std::string& where, F&& f) {
  auto tag = [&](const std::exception& e) { return where + ": " + e.what(); };
  try {
    f();
  } catch (const ConfigError&) {
    throw;
  } catch (const StructuralError& e) {
    throw StructuralError(tag(e));
  } catch (const ValidationError& e) {
    throw ValidationError(tag(e));
  } catch (const DomainError& e) {
    throw DomainError(tag(e));
  } catch (const ConvergenceError& e) {
    throw ConvergenceError(tag(e));
  } catch (const DegenerateOutcomeError& e) {
    throw DegenerateOutcomeError(tag(e));
  }
}

// Cache ------------------------------------------------------------------------

std::string file_digest(const fs::path& p) { return sha256_hex(read_text(p)); }

std::optional<ResultRecord> cache_lookup(const fs::path& entry, const std::string& hash) {
  const fs::path manifest = entry / "manifest.json";
  if (!fs::exists(manifest)) return std::nullopt;
  try {
    const json m = json::parse(read_text(manifest));
    if (m.at("version") != kFormatVersion || m.at("config_hash") != hash) return std::nullopt;
    for (const auto& [name, digest] : m.at("files").items()) {
      const fs::path f = entry / name;
      if (!fs::exists(f) || file_digest(f) != digest.get<std::string>()) return std::nullopt;
    }
    return ResultRecord::from_json(m.at("record"));
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

void cache_store(const fs::path& root, const std::string& hash, const Produced& produced, const ResultRecord& rec) {
  static std::atomic<int> counter{0};
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) return;
  const fs::path tmp = root / ("tmp." + hash.substr(0, 16) + "." + std::to_string(::getpid()) + "." +
                               std::to_string(counter++));
  try {
    fs::create_directories(tmp);
    json files = json::object();
    for (const auto& [name, bytes] : produced.files) {
      write_text(tmp / name, bytes);
      files[name] = sha256_hex(bytes);
    }
    json m = {{"version", kFormatVersion}, {"config_hash", hash}, {"files", files}, {"record", rec.to_json()}};
    write_text(tmp / "manifest.json", m.dump(2) + "\n");
    const fs::path entry = root / hash;
    if (fs::exists(entry)) fs::remove_all(entry, ec);
    fs::rename(tmp, entry, ec);
    // losing a race to another writer of the same entry is fine
    if (ec) fs::remove_all(tmp, ec);
  } catch (const std::exception&) {
    fs::remove_all(tmp, ec);
  }
}

}  // namespace

// Keys -------------------------------------------------------------------------

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> v{U, L, C, N, E};
  return v;
}

const std::vector<KeySpec>& known_keys() {
  using K = ValueKind;
  using D = Dimension;
  static const std::vector<std::string> all{U, L, C, N, E}, dev{L, C, N, E}, grid{U, C, N}, single{L, C, N};
  static const std::vector<KeySpec> keys{
      {"subcommand", K::Word, D::None, {}, "one of the subcommands"},
      {"out_dir", K::Word, D::None, {}, "output directory (the --out flag wins)"},
      {"grid_min", K::Number, D::None, grid, "lower window edge for both axes, in units of the displacement delta"},
      {"grid_max", K::Number, D::None, grid, "upper window edge"},
      {"grid_points", K::Integer, D::None, grid, "points per axis"},
      {"chi_over_wm", K::Number, D::None, all, "single-photon coupling over mechanical frequency"},
      {"time_wm", K::Number, D::None, all, "evaluation time times omega_m; 'pi' allowed (unitary default pi, else 0)"},
      {"alpha", K::Number, D::None, {U}, "real coherent amplitude of the cavity"},
      {"nbar", K::Number, D::None, {U}, "initial thermal occupation of the mirror"},
      {"photon_cutoff", K::Integer, D::None, {U}, "photon-number truncation (default from alpha)"},
      {"measurement", K::Word, D::None, {U, C}, "homodyne | heterodyne | photon_counting (unitary); fock | geiger | homodyne | heterodyne"},
      {"outcome_x", K::Number, D::None, {U}, "homodyne outcome"},
      {"sigma_re", K::Number, D::None, {U}, "heterodyne outcome, real part"},
      {"sigma_im", K::Number, D::None, {U}, "heterodyne outcome, imaginary part"},
      {"outcome_n", K::Integer, D::None, {U, C}, "photon number for counting or fock conditioning"},
      {"homodyne_angle", K::Number, D::None, {C}, "measured quadrature angle in rad"},
      {"route", K::Word, D::None, {C, N}, "fock_dm (default) | direct"},
      {"mech_cutoff", K::Integer, D::None, {C, N}, "mechanical Fock cutoff for the fock_dm route"},
      {"cavity_cutoff", K::Integer, D::None, {C, N}, "cavity Fock cutoff for the fock_dm route"},
      {"mech_frequency", K::Number, D::Frequency, dev, "mechanical frequency (Hz units are cyclic)"},
      {"gamma_over_wm", K::Number, D::None, dev, "mechanical damping over omega_m"},
      {"kappa_over_wm", K::Number, D::None, dev, "cavity linewidth over omega_m"},
      {"detuning_over_wm", K::Number, D::None, dev, "effective detuning over omega_m"},
      {"temperature", K::Number, D::Temperature, single, "bath temperature"},
      {"squeeze_r", K::Number, D::None, single, "input squeezing parameter"},
      {"squeeze_phi", K::Number, D::None, single, "input squeezing phase in rad"},
      {"pump_power", K::Number, D::Power, dev, "pump power"},
      {"pump_wavelength", K::Number, D::Length, dev, "pump wavelength"},
      {"pump_coupling", K::Number, D::None, dev, "fraction of pump power coupled into the cavity"},
      {"intracavity_amplitude", K::Number, D::None, dev, "sets |c_s| directly instead of the pump"},
      {"bath", K::Word, D::None, dev, "quantum (default) | markovian"},
      {"drude_ratio", K::Number, D::None, dev, "bath cutoff over omega_m"},
      {"tail_tol", K::Number, D::None, dev, "frequency-integral tail tolerance"},
      {"rel_tol", K::Number, D::None, dev, "frequency-integral relative tolerance"},
      {"rwa", K::Bool, D::None, dev, "drop the oscillating squeezing terms"},
      {"sweep_parameter", K::Word, D::None, {N}, "parameter swept by negativity-sweep"},
      {"sweep_values", K::NumberList, D::None, {N}, "values of the swept parameter"},
      {"detections", K::WordList, D::None, {N}, "fock<n> and/or geiger"},
      {"r_values", K::NumberList, D::None, {E}, "shared two-mode squeezing values"},
      {"temperatures", K::NumberList, D::Temperature, {E}, "bath temperatures"},
      {"strategies", K::WordList, D::None, {E}, "detection strategies (default all five)"},
      {"measured_cavity", K::Integer, D::None, {E}, "cavity read out by single-cavity strategies"},
      {"threads", K::Integer, D::None, {}, "rejected: use --threads"},
  };
  return keys;
}

// RunConfig --------------------------------------------------------------------

double RunConfig::number(const std::string& key, double fallback) const {
  const auto it = values.find(key);
  return it == values.end() ? fallback : it->second.numbers.at(0);
}

double RunConfig::number(const std::string& key) const {
  const auto it = values.find(key);
  if (it == values.end()) fail(source, 0, key, "missing");
  return it->second.numbers.at(0);
}

int RunConfig::integer(const std::string& key, int fallback) const {
  const auto it = values.find(key);
  return it == values.end() ? fallback : static_cast<int>(it->second.numbers.at(0));
}

bool RunConfig::flag(const std::string& key, bool fallback) const {
  const auto it = values.find(key);
  return it == values.end() ? fallback : it->second.numbers.at(0) != 0.0;
}

std::string RunConfig::word(const std::string& key, const std::string& fallback) const {
  const auto it = values.find(key);
  return it == values.end() ? fallback : it->second.words.at(0);
}

std::vector<double> RunConfig::numbers(const std::string& key) const {
  const auto it = values.find(key);
  return it == values.end() ? std::vector<double>{} : it->second.numbers;
}

std::vector<std::string> RunConfig::words(const std::string& key) const {
  const auto it = values.find(key);
  return it == values.end() ? std::vector<std::string>{} : it->second.words;
}

RunConfig parse_config(const std::string& text, const std::string& source) {
  RunConfig cfg;
  cfg.source = source;
  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  std::map<std::string, ConfigValue> raw;
  while (std::getline(is, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(source, line_no, "", "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) fail(source, line_no, "", "missing key");
    if (!find_key(key)) fail(source, line_no, key, "unknown key");
    if (raw.count(key)) fail(source, line_no, key, "given twice (first on line " + std::to_string(raw[key].line) + ")");
    if (value.empty()) fail(source, line_no, key, "empty value");
    raw[key] = ConfigValue{value, {}, {}, line_no};
  }
  if (!raw.count("subcommand")) fail(source, 0, "subcommand", "required");
  cfg.subcommand = raw["subcommand"].raw;
  if (!contains(subcommands(), cfg.subcommand)) {
    fail(source, raw["subcommand"].line, "subcommand", "unknown subcommand '" + cfg.subcommand + "'");
  }
  if (raw.count("out_dir")) cfg.out_dir = raw["out_dir"].raw;
  raw.erase("subcommand");
  raw.erase("out_dir");

  for (auto& [key, v] : raw) {
    const KeySpec& spec = *find_key(key);
    if (!spec.subcommands.empty() && !contains(spec.subcommands, cfg.subcommand)) {
      fail(source, v.line, key, "not used by " + cfg.subcommand);
    }
    const bool list = spec.kind == ValueKind::NumberList || spec.kind == ValueKind::WordList;
    const std::vector<std::string> items = list ? split(v.raw, ',') : std::vector<std::string>{v.raw};
    for (const auto& item : items) {
      if (item.empty()) fail(source, v.line, key, "empty list item");
      switch (spec.kind) {
        case ValueKind::Word:
        case ValueKind::WordList:
          v.words.push_back(item);
          break;
        case ValueKind::Bool: {
          std::string b = item;
          std::transform(b.begin(), b.end(), b.begin(), ::tolower);
          if (b == "true" || b == "yes" || b == "on" || b == "1") v.numbers.push_back(1.0);
          else if (b == "false" || b == "no" || b == "off" || b == "0") v.numbers.push_back(0.0);
          else fail(source, v.line, key, "'" + item + "' is not a boolean");
          break;
        }
        case ValueKind::Integer: {
          size_t pos = 0;
          long n = 0;
          try {
            n = std::stol(item, &pos);
          } catch (const std::exception&) {
            pos = 0;
          }
          if (pos == 0 || pos != item.size()) fail(source, v.line, key, "'" + item + "' is not an integer");
          v.numbers.push_back(static_cast<double>(n));
          break;
        }
        case ValueKind::Number:
        case ValueKind::NumberList: {
          Dimension d;
          const double x = parse_quantity(item, d, source, v.line, key);
          // sweep_values is checked against the swept parameter later
          if (d != Dimension::None && d != spec.dimension && key != "sweep_values") {
            fail(source, v.line, key,
                 std::string("unit is a ") + dimension_name(d) + ", expected " + dimension_name(spec.dimension));
          }
          if (!std::isfinite(x)) fail(source, v.line, key, "must be finite");
          v.numbers.push_back(x);
          break;
        }
      }
    }
  }
  cfg.values = std::move(raw);
  validate_config(cfg);
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("config " + path + ": cannot open");
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str(), path);
}

std::string canonical_form(const RunConfig& cfg, bool rwa) {
  std::ostringstream os;
  os << kFormatVersion << '\n' << "subcommand=" << cfg.subcommand << '\n';
  for (const auto& [key, v] : cfg.values) {
    if (key == "rwa") continue;
    os << key << '=';
    const KeySpec& spec = *find_key(key);
    const bool words = spec.kind == ValueKind::Word || spec.kind == ValueKind::WordList;
    const size_t n = words ? v.words.size() : v.numbers.size();
    for (size_t i = 0; i < n; ++i) os << (i ? "," : "") << (words ? v.words[i] : fmt(v.numbers[i]));
    os << '\n';
  }
  os << "rwa=" << (rwa ? 1 : 0) << '\n';
  return os.str();
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

std::string default_cache_root() {
  if (const char* env = std::getenv("OPTOMECH_CACHE"); env && *env) return env;
  if (const char* xdg = std::getenv("XDG_CACHE_HOME"); xdg && *xdg) return std::string(xdg) + "/optomech";
  if (const char* home = std::getenv("HOME"); home && *home) return std::string(home) + "/.cache/optomech";
  return "";
}

// ResultRecord -----------------------------------------------------------------

json ResultRecord::to_json() const {
  return {{"config_hash", config_hash}, {"subcommand", subcommand}, {"outputs", outputs},
          {"scalars", scalars},         {"convergence", convergence}, {"wall_time_s", wall_time_s},
          {"cache_hit", cache_hit}};
}

ResultRecord ResultRecord::from_json(const json& j) {
  ResultRecord r;
  r.config_hash = j.at("config_hash");
  r.subcommand = j.at("subcommand");
  r.outputs = j.at("outputs").get<std::vector<std::string>>();
  r.scalars = j.at("scalars");
  r.convergence = j.at("convergence");
  r.wall_time_s = j.at("wall_time_s");
  r.cache_hit = j.value("cache_hit", false);
  return r;
}

// run --------------------------------------------------------------------------

ResultRecord run(const RunConfig& cfg, const RunOptions& opts) {
  const auto start = std::chrono::steady_clock::now();
  const bool rwa = opts.rwa || cfg.flag("rwa", false);
  const std::string hash = sha256_hex(canonical_form(cfg, rwa));
  const fs::path out_dir = !opts.out_dir.empty() ? opts.out_dir : !cfg.out_dir.empty() ? cfg.out_dir : "out";
  fs::create_directories(out_dir);

  const std::string root = opts.cache_root.empty() ? default_cache_root() : opts.cache_root;
  const bool caching = opts.use_cache && !root.empty();
  const fs::path entry = caching ? fs::path(root) / hash : fs::path();

  ResultRecord rec;
  if (caching) {
    if (auto hit = cache_lookup(entry, hash)) {
      for (const auto& name : hit->outputs) fs::copy_file(entry / name, out_dir / name, fs::copy_options::overwrite_existing);
      rec = *hit;
      rec.cache_hit = true;
      rec.out_dir = out_dir.string();
      write_text(out_dir / "summary.json", rec.to_json().dump(2) + "\n");
      return rec;
    }
  }

  Produced produced;
  with_context(cfg.subcommand, [&] {
    if (cfg.subcommand == U) run_unitary(cfg, produced);
    else if (cfg.subcommand == L) run_linearized(cfg, rwa, produced);
    else if (cfg.subcommand == C) run_conditional(cfg, rwa, produced);
    else if (cfg.subcommand == N) run_negativity_sweep(cfg, rwa, opts.threads, produced);
    else if (cfg.subcommand == E) run_entanglement_sweep(cfg, rwa, opts.threads, produced);
    else throw ConfigError("unknown subcommand " + cfg.subcommand);
  });

  rec.config_hash = hash;
  rec.subcommand = cfg.subcommand;
  rec.out_dir = out_dir.string();
  for (const auto& [name, bytes] : produced.files) {
    write_text(out_dir / name, bytes);
    rec.outputs.push_back(name);
  }
  rec.scalars = produced.scalars;
  rec.convergence = produced.convergence;
  rec.convergence["rwa"] = rwa;
  rec.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_text(out_dir / "summary.json", rec.to_json().dump(2) + "\n");
  if (caching) cache_store(root, hash, produced, rec);
  return rec;
}

// Plot data --------------------------------------------------------------------

namespace {

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream is(read_text(path));
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty()) rows.push_back(split(line, ','));
  }
  return rows;
}

std::string record_name(const ResultRecord& r) {
  return r.subcommand + " record " + r.config_hash.substr(0, std::min<size_t>(12, r.config_hash.size()));
}

// Wide table: first column the row key, then one column per series.
std::string wide_table(const std::vector<std::vector<std::string>>& rows, size_t key_col, size_t series_col,
                       size_t value_col, std::vector<std::string>& series) {
  std::vector<std::string> keys;
  std::map<std::pair<std::string, std::string>, std::string> cell;
  for (size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (!contains(keys, r[key_col])) keys.push_back(r[key_col]);
    if (!contains(series, r[series_col])) series.push_back(r[series_col]);
    cell[{r[key_col], r[series_col]}] = r[value_col];
  }
  std::ostringstream os;
  os << "# " << rows[0][key_col];
  for (const auto& s : series) os << ' ' << s;
  os << '\n';
  for (const auto& k : keys) {
    os << k;
    for (const auto& s : series) {
      const auto it = cell.find({k, s});
      os << ' ' << (it == cell.end() ? "nan" : it->second);
    }
    os << '\n';
  }
  return os.str();
}

std::string series_script(const std::string& dat, const std::string& xlabel, const std::string& ylabel,
                          const std::vector<std::string>& series, int blocks) {
  std::ostringstream gp;
  gp << "set xlabel '" << xlabel << "'\nset ylabel '" << ylabel << "'\nset key left top\nplot ";
  bool first = true;
  for (int b = 0; b < blocks; ++b) {
    for (size_t s = 0; s < series.size(); ++s) {
      gp << (first ? "" : ", \\\n     ") << "'" << dat << "' index " << b << " using 1:" << s + 2
         << " with linespoints title '" << series[s] << (blocks > 1 ? " (block " + std::to_string(b) + ")" : "")
         << "'";
      first = false;
    }
  }
  gp << '\n';
  return gp.str();
}

}  // namespace

std::vector<std::string> emit_plot_data(const ResultRecord& record) {
  const fs::path dir = record.out_dir;
  if (record.outputs.empty()) throw StructuralError("emit_plot_data: " + record_name(record) + " has no outputs");
  for (const auto& name : record.outputs) {
    if (!fs::exists(dir / name)) {
      throw StructuralError("emit_plot_data: " + record_name(record) + " is missing " + (dir / name).string());
    }
  }
  const fs::path csv = dir / record.outputs.front();
  const auto rows = read_csv(csv);
  if (rows.size() < 2) throw StructuralError("emit_plot_data: " + record_name(record) + " has an empty sweep");

  std::vector<std::string> written;
  auto emit = [&](const std::string& name, const std::string& body) {
    write_text(dir / name, body);
    written.push_back((dir / name).string());
  };

  if (record.subcommand == U || record.subcommand == C) {
    std::ostringstream dat;
    dat << "# delta_r delta_i W\n";
    std::string previous;
    for (size_t i = 1; i < rows.size(); ++i) {
      if (i > 1 && rows[i][0] != previous) dat << '\n';  // gnuplot scan separator
      previous = rows[i][0];
      dat << rows[i][0] << ' ' << rows[i][1] << ' ' << rows[i][2] << '\n';
    }
    emit("wigner.dat", dat.str());
    emit("wigner.gp",
         "set pm3d map\nset size square\nset xlabel 'Re delta'\nset ylabel 'Im delta'\n"
         "splot 'wigner.dat' using 1:2:3 with pm3d notitle\n");
  } else if (record.subcommand == L) {
    std::ostringstream dat;
    dat << "# covariance matrix, rows q_m p_m x_c y_c\n";
    for (size_t i = 1; i < rows.size(); ++i) {
      for (size_t j = 1; j < rows[i].size(); ++j) dat << (j > 1 ? " " : "") << rows[i][j];
      dat << '\n';
    }
    emit("covariance.dat", dat.str());
    emit("covariance.gp", "set size square\nplot 'covariance.dat' matrix with image notitle\n");
  } else if (record.subcommand == N) {
    std::vector<std::string> series;
    emit("sweep.dat", wide_table(rows, 0, 1, 2, series));
    emit("sweep.gp", series_script("sweep.dat", rows[0][0], "N_W", series, 1));
  } else if (record.subcommand == E) {
    // one gnuplot block per temperature, one column per strategy
    std::vector<std::string> temps;
    for (size_t i = 1; i < rows.size(); ++i) {
      if (!contains(temps, rows[i][1])) temps.push_back(rows[i][1]);
    }
    std::string body;
    std::vector<std::string> series;
    for (size_t t = 0; t < temps.size(); ++t) {
      std::vector<std::vector<std::string>> block{{rows[0][0], rows[0][2], rows[0][3]}};
      for (size_t i = 1; i < rows.size(); ++i) {
        if (rows[i][1] == temps[t]) block.push_back({rows[i][0], rows[i][2], rows[i][3]});
      }
      body += (t ? "\n\n" : "") + std::string("# temperature_K ") + temps[t] + "\n";
      series.clear();
      body += wide_table(block, 0, 1, 2, series);
    }
    emit("entanglement.dat", body);
    emit("entanglement.gp", series_script("entanglement.dat", "r", "E_N", series, static_cast<int>(temps.size())));
  } else {
    throw StructuralError("emit_plot_data: " + record_name(record) + " has an unknown subcommand");
  }
  return written;
}

}  // namespace optomech::harness
