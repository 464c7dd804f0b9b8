#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace optomech::harness {

// Physical dimension a key's value is checked against. Bare numbers are read
// in SI base units (rad/s, K, W, m).
enum class Dimension { None, Frequency, Temperature, Power, Length };

enum class ValueKind { Number, Integer, Word, Bool, NumberList, WordList };

struct KeySpec {
  std::string name;
  ValueKind kind = ValueKind::Number;
  Dimension dimension = Dimension::None;
  std::vector<std::string> subcommands;  // empty: valid for all
  std::string doc;
};

const std::vector<KeySpec>& known_keys();
const std::vector<std::string>& subcommands();

struct ConfigValue {
  std::string raw;
  std::vector<double> numbers;  // SI after unit conversion
  std::vector<std::string> words;
  int line = 0;
};

struct RunConfig {
  std::string subcommand;
  std::map<std::string, ConfigValue> values;  // everything except subcommand/out_dir
  std::string out_dir;
  std::string source = "<string>";

  bool has(const std::string& key) const { return values.count(key) != 0; }
  double number(const std::string& key, double fallback) const;
  double number(const std::string& key) const;
  int integer(const std::string& key, int fallback) const;
  bool flag(const std::string& key, bool fallback) const;
  std::string word(const std::string& key, const std::string& fallback) const;
  std::vector<double> numbers(const std::string& key) const;
  std::vector<std::string> words(const std::string& key) const;
};

// Throws ConfigError with the offending line and key.
RunConfig parse_config(const std::string& text, const std::string& source = "<string>");
RunConfig load_config(const std::string& path);

// Stable text form of the effective config; hashed for the cache key.
std::string canonical_form(const RunConfig& cfg, bool rwa);
std::string sha256_hex(const std::string& bytes);

struct RunOptions {
  std::string out_dir;       // overrides cfg.out_dir when set
  bool rwa = false;          // forces the rotating-wave approximation on
  int threads = 1;
  bool use_cache = true;
  std::string cache_root;    // empty: environment, then ~/.cache/optomech
};

std::string default_cache_root();

struct ResultRecord {
  std::string config_hash;
  std::string subcommand;
  std::string out_dir;
  std::vector<std::string> outputs;  // CSV file names inside out_dir
  nlohmann::json scalars;
  nlohmann::json convergence;
  double wall_time_s = 0.0;
  bool cache_hit = false;

  nlohmann::json to_json() const;
  static ResultRecord from_json(const nlohmann::json& j);
};

// Dispatches on cfg.subcommand, writes CSVs plus summary.json into the output
// directory and returns the record. Consults the cache first.
ResultRecord run(const RunConfig& cfg, const RunOptions& opts = {});

// gnuplot data (.dat) plus a script stub (.gp) next to the record's CSVs.
// Returns the written paths.
std::vector<std::string> emit_plot_data(const ResultRecord& record);

}  // namespace optomech::harness
