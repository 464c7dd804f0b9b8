#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "optomech/errors.hpp"
#include "optomech/harness.hpp"

namespace h = optomech::harness;

int main(int argc, char** argv) {
  CLI::App app{"Optomechanical conditional-state toolkit: runs one config and writes CSV + summary.json"};
  std::string config, out;
  h::RunOptions opts;
  bool no_cache = false, plot = false, list_keys = false;
  app.add_option("--config", config, "flat key = value config file");
  app.add_option("--out", out, "output directory (overrides out_dir)");
  app.add_flag("--rwa", opts.rwa, "rotating-wave approximation for the squeezing terms");
  app.add_option("--threads", opts.threads, "worker threads for sweeps")->check(CLI::PositiveNumber);
  app.add_flag("--no-cache", no_cache, "skip the result cache (cache root: $OPTOMECH_CACHE)");
  app.add_flag("--plot", plot, "also write gnuplot .dat/.gp files");
  app.add_flag("--list-keys", list_keys, "print the accepted config keys and exit");
  CLI11_PARSE(app, argc, argv);

  if (list_keys) {
    for (const auto& k : h::known_keys()) {
      std::string where;
      for (const auto& s : k.subcommands) where += (where.empty() ? "" : ",") + s;
      std::printf("%-22s %-20s %s\n", k.name.c_str(), where.empty() ? "all" : where.c_str(), k.doc.c_str());
    }
    return 0;
  }
  if (config.empty()) {
    std::cerr << "--config is required\n";
    return 2;
  }
  opts.out_dir = out;
  opts.use_cache = !no_cache;
  try {
    const auto cfg = h::load_config(config);
    const auto rec = h::run(cfg, opts);
    if (plot) h::emit_plot_data(rec);
    std::cout << rec.subcommand << " " << rec.config_hash.substr(0, 12) << (rec.cache_hit ? " (cached)" : "") << "\n"
              << rec.scalars.dump() << "\n"
              << "wrote " << rec.out_dir << "/summary.json\n";
  } catch (const optomech::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
