#pragma once

// Experiment configuration, orchestration and result persistence.
//
// A run reads one JSON config, sweeps the requested problem over its
// parameter lists, and writes into an output directory:
//   manifest.json            one entry per config hash (version, timestamp)
//   <kind>.csv               result rows, each tagged with the config hash
//   fields/<hash>-<i>.json   minimiser snapshots
// Re-running a config replaces exactly the rows carrying its hash.

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sdhom/bulk_cell.hpp"
#include "sdhom/density.hpp"

namespace sdh {

inline constexpr const char* kToolVersion = "0.3.0";

/// Schema violation; `pointer` is the JSON pointer of the offending value.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string pointer, const std::string& message)
      : std::runtime_error((pointer.empty() ? "/" : pointer) + ": " + message), pointer_(std::move(pointer)) {}
  const std::string& pointer() const { return pointer_; }

 private:
  std::string pointer_;
};

struct ApproxSettings {
  Mat A = Mat::scalar(0.0);
  Mat G = Mat::scalar(1.0);
  std::vector<int> n_list{4, 8, 16, 32};
  int per_tooth = 8;

  friend bool operator==(const ApproxSettings&, const ApproxSettings&) = default;
};

struct OracleSettings {
  std::string target = "surface";  // "surface" or "bulk"
  int max_cells = 20;
  int max_dofs = 8;
  int lattice_points = 9;

  friend bool operator==(const OracleSettings&, const OracleSettings&) = default;
};

struct ExperimentConfig {
  std::string kind;  // bulk | surface | approx | validate | oracle
  nlohmann::json density;
  int N = 1;
  int d = 1;
  std::vector<Mat> A;
  std::vector<Mat> B;
  std::vector<Vec> lambda;
  std::vector<Vec> nu;
  std::vector<Vec> tau;
  std::vector<int> k_list{1, 2, 4};
  int m = 8;
  SolverParams solver;
  std::uint64_t seed = 0;
  std::int64_t budget = 10000;
  ApproxSettings approx;
  OracleSettings oracle;
  std::string out = "results";

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Strict parse: unknown keys, wrong types and out-of-range values throw ConfigError.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Complete serialisation; parse_config(serialize_config(c)) == c.
nlohmann::json serialize_config(const ExperimentConfig& c);
/// FNV-1a 64 of the canonical serialisation without "out", as 16 hex digits.
std::string config_hash(const ExperimentConfig& c);

struct Densities {
  BulkDensity bulk;
  SurfaceDensity surface;
};
/// Builds the densities from a density block; throws ConfigError.
Densities build_densities(const nlohmann::json& density, const std::string& pointer = "/density");

struct RunOptions {
  int jobs = 1;
  std::string timestamp;  // written to the manifest only
};

struct RunSummary {
  std::string hash;
  std::string table;  // CSV file name written
  int rows = 0;
  bool all_converged = true;
  bool invariants_ok = true;
  std::vector<std::string> messages;
  int exit_code() const { return all_converged && invariants_ok ? 0 : 1; }
};

RunSummary run_experiment(const ExperimentConfig& config, const RunOptions& options);

/// Column layouts of the result tables.
const std::vector<std::string>& table_columns(const std::string& table);

/// Tidy (x, y, series) table for a stored kind; throws std::runtime_error when
/// the store has no rows of that kind (nothing is written in that case).
std::filesystem::path emit_plot_data(const std::filesystem::path& out_dir, const std::string& kind);

}  // namespace sdh
