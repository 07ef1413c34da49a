// adapd: generate instances, run the asynchronous solver and the synchronous
// baseline, check the expected-gap bound, and plot metric CSVs.
//
// Exit status: 0 success, 1 invalid input or failed solve, 2 bound violation.

#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "adapd/baseline.hpp"
#include "adapd/experiment.hpp"
#include "adapd/io_util.hpp"
#include "adapd/plot.hpp"

namespace {

using namespace adapd;

// Flags mirror RunConfig; unset flags keep the preset's value.
struct ConfigFlags {
  std::string preset;
  std::optional<std::size_t> dim, agents, rows, extra_edges;
  std::optional<double> noise_std, alpha, safety, step_cap, reference_tol;
  std::optional<std::uint64_t> instance_seed, graph_seed, solver_seed;
  std::optional<std::string> instance_file, graph_file, mixing, mode, activation, previous,
      dual_bound, out;
  std::optional<std::int64_t> iterations, rounds, record_every, reference_max_iters;
  bool wallclock = false;

  void attach(CLI::App& app, const std::string& default_preset) {
    preset = default_preset;
    app.add_option("--preset", preset, "full, small or bound")->capture_default_str();
    app.add_option("--dim", dim, "primal dimension n");
    app.add_option("--agents", agents, "number of agents N");
    app.add_option("--rows", rows, "measurement rows per agent p");
    app.add_option("--noise-std", noise_std, "measurement noise standard deviation");
    app.add_option("--instance-seed", instance_seed);
    app.add_option("--instance", instance_file, "instance file (overrides generator flags)");
    app.add_option("--extra-edges", extra_edges, "random edges added to the cycle");
    app.add_option("--graph-seed", graph_seed);
    app.add_option("--graph", graph_file, "edge-list file (overrides generator flags)");
    app.add_option("--alpha", alpha, "consensus scale alpha > 0");
    app.add_option("--mixing", mixing, "metropolis or laplacian");
    app.add_option("--iterations", iterations, "asynchronous ticks K");
    app.add_option("--rounds", rounds, "synchronous rounds (0: iterations / N)");
    app.add_option("--safety", safety, "step-size safety factor in (0, 1]");
    app.add_option("--dual-bound", dual_bound, "dual bound B, or 'auto'");
    app.add_option("--solver-seed", solver_seed);
    app.add_option("--record-every", record_every, "metrics row every this many ticks");
    app.add_option("--mode", mode, "async, sync or both");
    app.add_option("--activation", activation, "uniform or exponential");
    app.add_option("--previous", previous, "last-broadcast or global");
    app.add_option("--step-cap", step_cap, "cap for steps with a zero denominator");
    app.add_option("--reference-tol", reference_tol);
    app.add_option("--reference-max-iters", reference_max_iters);
    app.add_flag("--wallclock", wallclock, "record elapsed seconds (output no longer reproducible)");
    app.add_option("--out", out, "output directory");
  }

  RunConfig resolve() const {
    RunConfig c = preset_config(preset);
    if (dim) c.dim = *dim;
    if (agents) c.num_agents = *agents;
    if (rows) c.rows_per_agent = *rows;
    if (noise_std) c.noise_std = *noise_std;
    if (instance_seed) c.instance_seed = *instance_seed;
    if (instance_file) c.instance_file = *instance_file;
    if (extra_edges) c.extra_edges = *extra_edges;
    if (graph_seed) c.graph_seed = *graph_seed;
    if (graph_file) c.graph_file = *graph_file;
    if (alpha) c.alpha = *alpha;
    if (mixing) c.mixing = mixing_rule_from_string(*mixing);
    if (iterations) c.iterations = *iterations;
    if (rounds) c.rounds = *rounds;
    if (safety) c.safety_factor = *safety;
    if (dual_bound) {
      if (*dual_bound == "auto") {
        c.dual_bound_auto = true;
      } else {
        c.dual_bound = parse_double(*dual_bound);
      }
    }
    if (solver_seed) c.solver_seed = *solver_seed;
    if (record_every) c.record_every = *record_every;
    if (mode) c.mode = run_mode_from_string(*mode);
    if (activation) c.activation = activation_from_string(*activation);
    if (previous) c.previous = previous_iterate_from_string(*previous);
    if (step_cap) c.step_cap = *step_cap;
    if (reference_tol) c.reference_tol = *reference_tol;
    if (reference_max_iters) c.reference_max_iters = *reference_max_iters;
    if (wallclock) c.measure_wallclock = true;
    if (out) c.output_dir = *out;
    validate(c);
    return c;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Asynchronous distributed accelerated primal-dual simulator"};
  app.set_config("--config", "", "TOML/INI file; keys go under [generate], [run], ...");
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(adapd::kSoftwareVersion));

  auto* generate = app.add_subcommand("generate", "write instance and graph files");
  ConfigFlags generate_flags;
  generate_flags.attach(*generate, "full");

  auto* run = app.add_subcommand("run", "run solvers and write metrics CSVs");
  ConfigFlags run_flags;
  run_flags.attach(*run, "small");
  std::string replay;
  run->add_option("--replay", replay, "rerun exactly from a metadata.json (only --out applies)");

  auto* check = app.add_subcommand("check-bound", "Monte Carlo check of the expected-gap bound");
  ConfigFlags check_flags;
  check_flags.attach(*check, "bound");
  adapd::BoundCheckOptions bound_options;
  std::string comparison = "oracle";
  check->add_option("--seeds", bound_options.seeds, "number of solver seeds (>= 30)")
      ->capture_default_str();
  check->add_option("--horizons", bound_options.horizons, "values of K")->capture_default_str();
  check->add_option("--slack", bound_options.slack, "relative Monte Carlo slack")
      ->capture_default_str();
  check->add_option("--first-seed", bound_options.first_seed)->capture_default_str();
  check->add_option("--threads", bound_options.threads, "worker threads")->capture_default_str();
  check->add_option("--comparison", comparison, "oracle (required) or initial")
      ->capture_default_str();

  auto* plot = app.add_subcommand("plot", "render log-log SVG charts from metrics CSVs");
  std::vector<std::string> csv_files;
  std::string plot_out = "plots";
  plot->add_option("csv", csv_files, "metrics CSV files")->required();
  plot->add_option("--out", plot_out, "output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*generate) {
      const auto result = adapd::cmd_generate(generate_flags.resolve(), std::cout);
      std::cout << "|E|=" << result.num_edges << '\n';
    } else if (*run) {
      adapd::RunConfig config;
      if (!replay.empty()) {
        config = adapd::config_from_metadata(adapd::read_file(replay));
        if (run_flags.out) config.output_dir = *run_flags.out;
        adapd::validate(config);
        std::cout << "replaying " << replay << '\n';
      } else {
        config = run_flags.resolve();
      }
      adapd::cmd_run(config, std::cout);
    } else if (*check) {
      bound_options.comparison = adapd::comparison_from_string(comparison);
      const auto report = adapd::cmd_check_bound(check_flags.resolve(), bound_options, std::cout);
      if (!report.all_pass()) {
        std::cerr << "bound violated for at least one K\n";
        return 2;
      }
    } else if (*plot) {
      std::vector<std::filesystem::path> paths(csv_files.begin(), csv_files.end());
      for (const auto& p : adapd::cmd_plot(paths, plot_out)) std::cout << "wrote " << p.string() << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
