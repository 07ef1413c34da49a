// Experiment harness behind the command-line tool: configuration, presets,
// instance generation, solver runs with cached references, and the Monte
// Carlo bound check.

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "adapd/graph.hpp"
#include "adapd/metrics.hpp"
#include "adapd/problem.hpp"
#include "adapd/reference.hpp"
#include "adapd/solver.hpp"

namespace adapd {

inline constexpr const char* kSoftwareVersion = "0.1.0";

enum class RunMode { kAsync, kSync, kBoth };
std::string to_string(RunMode mode);
RunMode run_mode_from_string(const std::string& s);

struct RunConfig {
  std::string preset = "full";

  // instance
  std::size_t dim = 100;
  std::size_t num_agents = 50;
  std::size_t rows_per_agent = 50;
  double noise_std = 0.1;
  std::uint64_t instance_seed = 1;
  std::string instance_file;  ///< overrides the generator parameters when set

  // graph
  std::size_t extra_edges = 25;
  std::uint64_t graph_seed = 2;
  double alpha = 1.0;
  MixingRule mixing = MixingRule::kMetropolis;
  std::string graph_file;  ///< overrides the generator parameters when set

  // solver
  std::int64_t iterations = 10000;  ///< asynchronous ticks K
  std::int64_t rounds = 0;          ///< synchronous rounds; 0 means iterations / N
  double safety_factor = 1.0;
  double dual_bound = 1.0;
  bool dual_bound_auto = false;  ///< double B until ||y_bar|| <= B / 2
  std::uint64_t solver_seed = 3;
  std::int64_t record_every = 100;
  RunMode mode = RunMode::kBoth;
  Activation activation = Activation::kUniform;
  PreviousIterate previous = PreviousIterate::kLastBroadcast;
  double step_cap = kDefaultStepCap;

  // reference oracle
  double reference_tol = 1e-9;
  std::int64_t reference_max_iters = 500;

  bool measure_wallclock = false;
  std::string output_dir = "out";
};

/// "full", "small" or "bound"; throws std::invalid_argument otherwise.
RunConfig preset_config(const std::string& name);
std::vector<std::string> preset_names();

/// Rejects inconsistent or out-of-range values with std::invalid_argument.
void validate(const RunConfig& config);

/// Instance, graph and consensus matrix described by a config.
struct Setup {
  ProblemInstance instance;
  NetworkGraph graph;
  MixingMatrix mixing;
  ConsensusMatrix consensus;
};
Setup build_setup(const RunConfig& config);

/// Writes instance.adapd and graph.txt into the output directory and prints
/// the per-agent constants table to `log`.
struct GenerateResult {
  std::filesystem::path instance_path;
  std::filesystem::path graph_path;
  std::size_t num_edges = 0;
};
GenerateResult cmd_generate(const RunConfig& config, std::ostream& log);

/// Loads `<dir>/<key>.ref` when present and matching, otherwise solves and stores it.
ReferenceSolution cached_reference(const Setup& setup, const RunConfig& config,
                                   const std::filesystem::path& cache_dir, std::ostream& log,
                                   bool* cache_hit = nullptr);

struct RunOutput {
  std::filesystem::path async_csv;
  std::filesystem::path sync_csv;
  std::filesystem::path metadata;
  double dual_bound = 0.0;
  bool cache_hit = false;
  std::vector<MetricsRow> async_rows;
  std::vector<MetricsRow> sync_rows;
};

/// Runs the configured solver(s); writes async.csv / sync.csv and metadata.json.
RunOutput cmd_run(const RunConfig& config, std::ostream& log);

/// Metadata JSON text for a run (config, constants, step sizes, reference).
std::string run_metadata_json(const RunConfig& config, const Setup& setup,
                              const ReferenceSolution& reference, const StepSizes& steps);
/// Reads the "config" object of a metadata file back into a RunConfig.
RunConfig config_from_metadata(const std::string& json_text);

enum class Comparison { kOracle, kInitial };
std::string to_string(Comparison c);
Comparison comparison_from_string(const std::string& s);

struct BoundCheckOptions {
  std::size_t seeds = 200;
  std::vector<std::int64_t> horizons{50, 200, 800};
  double slack = 0.1;
  std::uint64_t first_seed = 1000;
  std::size_t threads = 1;
  Comparison comparison = Comparison::kOracle;
};

struct BoundCheckRow {
  std::int64_t horizon = 0;
  double mean_gap = 0.0;
  double rhs = 0.0;
  bool pass = false;
};

struct BoundCheckReport {
  std::vector<BoundCheckRow> rows;
  double dual_bound = 0.0;
  bool all_pass() const;
};

/// Monte Carlo check of E[gap at the ergodic point] <= (1 + slack) * bound.
/// Requires seeds >= 30 and the oracle comparison point.
BoundCheckReport cmd_check_bound(const RunConfig& config, const BoundCheckOptions& options,
                                 std::ostream& log);

}  // namespace adapd
