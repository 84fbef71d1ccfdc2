// sdhom: homogenized densities for first-order structured deformations.

#include <chrono>
#include <ctime>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "sdhom/experiment.hpp"
#include "sdhom/kernels.hpp"

namespace {

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::vector<int> parse_k_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    std::size_t used = 0;
    const int k = std::stoi(item, &used);
    if (used != item.size() || k < 1) throw std::invalid_argument("bad --k-list entry '" + item + "'");
    out.push_back(k);
  }
  if (out.empty()) throw std::invalid_argument("--k-list is empty");
  return out;
}

struct Common {
  std::string config;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  std::optional<std::string> k_list;
  std::optional<int> resolution;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", c.out, "output directory (overrides the config)");
  cmd->add_option("--seed", c.seed, "random seed (overrides the config)");
  cmd->add_option("--jobs", c.jobs, "worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--k-list", c.k_list, "comma-separated cube multipliers, e.g. 1,2,4");
  cmd->add_option("--resolution", c.resolution, "subcells per unit length m")->check(CLI::PositiveNumber);
}

int run(const std::string& kind, const Common& c) {
  sdh::ExperimentConfig cfg = sdh::load_config(c.config);
  if (cfg.kind != kind)
    throw sdh::ConfigError("/kind", "config kind '" + cfg.kind + "' does not match this subcommand ('" + kind + "')");
  nlohmann::json j = sdh::serialize_config(cfg);
  if (c.out) j["out"] = *c.out;
  if (c.seed) j["seed"] = *c.seed;
  if (c.k_list) j["k_list"] = parse_k_list(*c.k_list);
  if (c.resolution) j["m"] = *c.resolution;
  cfg = sdh::parse_config(j);

  const sdh::RunSummary sum = sdh::run_experiment(cfg, {c.jobs, utc_timestamp()});
  std::cout << sum.table << ".csv: " << sum.rows << " rows, config " << sum.hash << ", kernels "
            << sdh::kernels::active_isa() << "\n";
  for (const auto& msg : sum.messages) std::cerr << "warning: " << msg << "\n";
  return sum.exit_code();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Homogenized bulk and surface densities for first-order structured deformations"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(sdh::kToolVersion));

  struct Sub {
    const char* name;
    const char* kind;
    const char* help;
  };
  const Sub subs[] = {
      {"validate-density", "validate", "check the standing assumptions on the configured densities"},
      {"bulk", "bulk", "estimate the homogenized bulk density over a sweep of (A, B)"},
      {"surface", "surface", "estimate the homogenized surface density over a sweep of (lambda, nu)"},
      {"approx-demo", "approx", "energies and L1 distances along the sawtooth approximating sequence"},
      {"oracle", "oracle", "brute-force reference values in the solver table layouts"},
  };
  std::vector<Common> commons(std::size(subs));
  std::vector<CLI::App*> cmds;
  for (std::size_t i = 0; i < std::size(subs); ++i) {
    cmds.push_back(app.add_subcommand(subs[i].name, subs[i].help));
    add_common(cmds.back(), commons[i]);
  }
  std::string plot_out = "results";
  std::string plot_kind;
  CLI::App* plot = app.add_subcommand("plot-data", "write a tidy (x, y, series) table for one result kind");
  plot->add_option("--out", plot_out, "result directory");
  plot->add_option("--kind", plot_kind, "bulk, surface, approx, oracle_bulk or oracle_surface")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (plot->parsed()) {
      std::cout << sdh::emit_plot_data(plot_out, plot_kind).string() << "\n";
      return 0;
    }
    for (std::size_t i = 0; i < cmds.size(); ++i)
      if (cmds[i]->parsed()) return run(subs[i].kind, commons[i]);
  } catch (const sdh::ConfigError& e) {
    std::cerr << "config error at " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 2;
}
