#include "adapd/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "adapd/baseline.hpp"
#include "adapd/io_util.hpp"

namespace adapd {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(RunMode mode) {
  switch (mode) {
    case RunMode::kAsync:
      return "async";
    case RunMode::kSync:
      return "sync";
    case RunMode::kBoth:
      return "both";
  }
  return "unknown";
}

RunMode run_mode_from_string(const std::string& s) {
  if (s == "async") return RunMode::kAsync;
  if (s == "sync") return RunMode::kSync;
  if (s == "both") return RunMode::kBoth;
  throw std::invalid_argument("unknown mode '" + s + "' (expected async, sync or both)");
}

std::string to_string(Comparison c) { return c == Comparison::kOracle ? "oracle" : "initial"; }

Comparison comparison_from_string(const std::string& s) {
  if (s == "oracle") return Comparison::kOracle;
  if (s == "initial") return Comparison::kInitial;
  throw std::invalid_argument("unknown comparison point '" + s + "'");
}

std::vector<std::string> preset_names() { return {"full", "small", "bound"}; }

RunConfig preset_config(const std::string& name) {
  RunConfig c;
  c.preset = name;
  if (name == "full") return c;
  if (name == "small") {
    c.dim = 20;
    c.num_agents = 10;
    c.rows_per_agent = 10;
    c.extra_edges = 5;
    c.iterations = 100000;
    c.record_every = 1000;
    return c;
  }
  if (name == "bound") {
    c.dim = 2;
    c.num_agents = 5;
    c.rows_per_agent = 2;
    c.extra_edges = 2;
    c.instance_seed = 1;
    c.graph_seed = 1;
    c.iterations = 800;
    c.record_every = 50;
    c.reference_tol = 1e-10;
    return c;
  }
  throw std::invalid_argument("unknown preset '" + name + "' (expected full, small or bound)");
}

void validate(const RunConfig& c) {
  const auto fail = [](const std::string& m) { throw std::invalid_argument(m); };
  if (c.instance_file.empty()) {
    if (c.dim < 1) fail("dim must be >= 1");
    if (c.num_agents < 1) fail("num_agents must be >= 1");
    if (c.rows_per_agent < 1) fail("rows_per_agent must be >= 1");
    if (!(c.noise_std >= 0.0) || !std::isfinite(c.noise_std)) fail("noise_std must be >= 0");
  }
  if (c.graph_file.empty()) {
    const std::size_t n = c.num_agents;
    if (c.instance_file.empty() && n >= 3 && c.extra_edges > n * (n - 1) / 2 - n) {
      fail("extra_edges exceeds the " + std::to_string(n * (n - 1) / 2 - n) +
           " available non-cycle pairs");
    }
  }
  if (!(c.alpha > 0.0) || !std::isfinite(c.alpha)) fail("alpha must be positive");
  if (c.iterations < 1) fail("iterations must be >= 1");
  if (c.rounds < 0) fail("rounds must be >= 0");
  if (!(c.safety_factor > 0.0 && c.safety_factor <= 1.0)) fail("safety_factor must be in (0, 1]");
  if (!(c.dual_bound >= 0.0) || !std::isfinite(c.dual_bound)) fail("dual_bound must be >= 0");
  if (c.dual_bound_auto && !(c.dual_bound > 0.0)) fail("auto dual bound needs a positive start");
  if (c.record_every < 1) fail("record_every must be >= 1");
  if (!(c.step_cap > 0.0)) fail("step_cap must be positive");
  if (!(c.reference_tol > 0.0)) fail("reference_tol must be positive");
  if (c.reference_max_iters < 1) fail("reference_max_iters must be >= 1");
  if (c.output_dir.empty()) fail("output directory must not be empty");
}

namespace {

NetworkGraph build_graph(const RunConfig& c, std::size_t num_agents) {
  if (!c.graph_file.empty()) {
    std::istringstream in(read_file(c.graph_file));
    NetworkGraph g = NetworkGraph::from_edge_list(in);
    if (g.num_agents() != num_agents) {
      throw std::invalid_argument("graph file " + c.graph_file + " has " +
                                  std::to_string(g.num_agents()) + " agents, instance has " +
                                  std::to_string(num_agents));
    }
    return g;
  }
  if (num_agents == 1) return NetworkGraph(1, {});
  if (num_agents == 2) return NetworkGraph(2, {{0, 1}});
  return generate_small_world(num_agents, c.extra_edges, c.graph_seed);
}

ProblemInstance build_instance(const RunConfig& c) {
  if (!c.instance_file.empty()) {
    std::istringstream in(read_file(c.instance_file));
    return ProblemInstance::deserialize(in);
  }
  return make_localization_instance(c.dim, c.num_agents, c.rows_per_agent, c.noise_std,
                                    c.instance_seed);
}

}  // namespace

Setup build_setup(const RunConfig& config) {
  validate(config);
  ProblemInstance instance = build_instance(config);
  NetworkGraph graph = build_graph(config, instance.num_agents());
  MixingMatrix mixing = mixing_weights(graph, config.mixing);
  validate_mixing_matrix(mixing, graph);
  ConsensusMatrix consensus(mixing, config.alpha);
  return Setup{std::move(instance), std::move(graph), std::move(mixing), std::move(consensus)};
}

GenerateResult cmd_generate(const RunConfig& config, std::ostream& log) {
  const Setup setup = build_setup(config);
  const fs::path dir(config.output_dir);
  fs::create_directories(dir);
  GenerateResult out;
  out.instance_path = dir / "instance.adapd";
  out.graph_path = dir / "graph.txt";
  out.num_edges = setup.graph.edges().size();
  write_file(out.instance_path, setup.instance.serialize());
  write_file(out.graph_path, setup.graph.to_edge_list());

  const ProblemInstance& inst = setup.instance;
  log << "instance: n=" << inst.dim() << " N=" << inst.num_agents()
      << " m=" << inst.constraint_dim() << " hash=" << hex64(inst.hash()) << '\n';
  log << "graph: |E|=" << out.num_edges << " mixing=" << to_string(config.mixing)
      << " alpha=" << format_double(config.alpha) << '\n';
  log << std::left << std::setw(7) << "agent" << std::setw(14) << "C_i" << std::setw(14)
      << "L^g_i" << std::setw(10) << "L^f_i" << std::setw(14) << "delta_i" << "degree\n";
  for (std::size_t i = 0; i < inst.num_agents(); ++i) {
    const LocalProblem& a = inst.agent(i);
    log << std::setw(7) << i << std::setw(14) << std::setprecision(6)
        << a.constraint.lipschitz_value() << std::setw(14) << a.constraint.lipschitz_jacobian()
        << std::setw(10) << a.objective.lipschitz_grad() << std::setw(14)
        << setup.consensus.delta(i) << setup.graph.degree(i) << '\n';
  }
  log << std::right << "wrote " << out.instance_path.string() << " and " << out.graph_path.string()
      << '\n';
  return out;
}

ReferenceSolution cached_reference(const Setup& setup, const RunConfig& config,
                                   const fs::path& cache_dir, std::ostream& log, bool* cache_hit) {
  const std::uint64_t key = reference_key(setup.instance, setup.consensus);
  const fs::path path = cache_dir / (hex64(key) + ".ref");
  if (fs::exists(path)) {
    std::istringstream in(read_file(path));
    ReferenceSolution ref = ReferenceSolution::deserialize(in);
    if (ref.key == key && ref.tolerance <= config.reference_tol) {
      log << "reference: cache hit " << path.string() << " (oracle solve skipped)\n";
      if (cache_hit) *cache_hit = true;
      return ref;
    }
    log << "reference: cached file " << path.string() << " does not match; re-solving\n";
  }
  ReferenceSolution ref = solve_centralized(setup.instance, setup.consensus, config.reference_tol,
                                            config.reference_max_iters);
  fs::create_directories(cache_dir);
  write_file(path, ref.serialize());
  log << "reference: solved with " << ref.method << " in " << ref.iterations
      << " Newton steps, phi*=" << format_double(ref.phi_star) << ", cached at " << path.string()
      << '\n';
  if (cache_hit) *cache_hit = false;
  return ref;
}

namespace {

json config_to_json(const RunConfig& c) {
  return json{{"preset", c.preset},
              {"dim", c.dim},
              {"num_agents", c.num_agents},
              {"rows_per_agent", c.rows_per_agent},
              {"noise_std", c.noise_std},
              {"instance_seed", c.instance_seed},
              {"instance_file", c.instance_file},
              {"extra_edges", c.extra_edges},
              {"graph_seed", c.graph_seed},
              {"alpha", c.alpha},
              {"mixing", to_string(c.mixing)},
              {"graph_file", c.graph_file},
              {"iterations", c.iterations},
              {"rounds", c.rounds},
              {"safety_factor", c.safety_factor},
              {"dual_bound", c.dual_bound},
              {"dual_bound_auto", c.dual_bound_auto},
              {"solver_seed", c.solver_seed},
              {"record_every", c.record_every},
              {"mode", to_string(c.mode)},
              {"activation", to_string(c.activation)},
              {"previous", to_string(c.previous)},
              {"step_cap", c.step_cap},
              {"reference_tol", c.reference_tol},
              {"reference_max_iters", c.reference_max_iters},
              {"measure_wallclock", c.measure_wallclock},
              {"output_dir", c.output_dir}};
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

std::int64_t sync_rounds(const RunConfig& c, std::size_t num_agents) {
  if (c.rounds > 0) return c.rounds;
  return std::max<std::int64_t>(1, c.iterations / static_cast<std::int64_t>(num_agents));
}

}  // namespace

std::string run_metadata_json(const RunConfig& config, const Setup& setup,
                              const ReferenceSolution& reference, const StepSizes& steps) {
  const ProblemInstance& inst = setup.instance;
  json constants = json::object();
  const StepConstants& k = steps.constants();
  constants["C"] = to_std(k.lipschitz_value);
  constants["L_g"] = to_std(k.lipschitz_jacobian);
  constants["L_f"] = to_std(k.lipschitz_grad);
  constants["delta"] = to_std(k.delta);
  json meta{
      {"software", {{"name", "adapd"}, {"version", kSoftwareVersion}}},
      {"config", config_to_json(config)},
      {"instance",
       {{"hash", hex64(inst.hash())},
        {"dim", inst.dim()},
        {"num_agents", inst.num_agents()},
        {"constraint_dim", inst.constraint_dim()},
        {"generator", inst.metadata().generator}}},
      {"graph", {{"num_edges", setup.graph.edges().size()}, {"edges", setup.graph.edges()}}},
      {"constants", constants},
      {"step_sizes",
       {{"dual_bound", steps.dual_bound()},
        {"safety_factor", steps.safety_factor()},
        {"tau", to_std(steps.tau())},
        {"sigma", to_std(steps.sigma())},
        {"gamma", to_std(steps.gamma())}}},
      {"reference",
       {{"key", hex64(reference.key)},
        {"method", reference.method},
        {"phi_star", reference.phi_star},
        {"tolerance", reference.tolerance},
        {"primal_feasibility", reference.primal_feasibility},
        {"stationarity", reference.stationarity},
        {"complementarity", reference.complementarity},
        {"consensus_residual", reference.consensus_residual},
        {"y_star_norm", reference.y_star.norm()}}},
      {"sync_rounds", sync_rounds(config, inst.num_agents())},
      {"baseline_label", "DPDA-S-like synchronous primal-dual"}};
  return meta.dump(2) + "\n";
}

RunConfig config_from_metadata(const std::string& json_text) {
  json meta;
  try {
    meta = json::parse(json_text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("metadata is not valid JSON: ") + e.what());
  }
  if (!meta.contains("config")) throw std::invalid_argument("metadata has no 'config' object");
  const json& j = meta.at("config");
  RunConfig c;
  try {
    c.preset = j.at("preset").get<std::string>();
    c.dim = j.at("dim").get<std::size_t>();
    c.num_agents = j.at("num_agents").get<std::size_t>();
    c.rows_per_agent = j.at("rows_per_agent").get<std::size_t>();
    c.noise_std = j.at("noise_std").get<double>();
    c.instance_seed = j.at("instance_seed").get<std::uint64_t>();
    c.instance_file = j.at("instance_file").get<std::string>();
    c.extra_edges = j.at("extra_edges").get<std::size_t>();
    c.graph_seed = j.at("graph_seed").get<std::uint64_t>();
    c.alpha = j.at("alpha").get<double>();
    c.mixing = mixing_rule_from_string(j.at("mixing").get<std::string>());
    c.graph_file = j.at("graph_file").get<std::string>();
    c.iterations = j.at("iterations").get<std::int64_t>();
    c.rounds = j.at("rounds").get<std::int64_t>();
    c.safety_factor = j.at("safety_factor").get<double>();
    c.dual_bound = j.at("dual_bound").get<double>();
    c.dual_bound_auto = j.at("dual_bound_auto").get<bool>();
    c.solver_seed = j.at("solver_seed").get<std::uint64_t>();
    c.record_every = j.at("record_every").get<std::int64_t>();
    c.mode = run_mode_from_string(j.at("mode").get<std::string>());
    c.activation = activation_from_string(j.at("activation").get<std::string>());
    c.previous = previous_iterate_from_string(j.at("previous").get<std::string>());
    c.step_cap = j.at("step_cap").get<double>();
    c.reference_tol = j.at("reference_tol").get<double>();
    c.reference_max_iters = j.at("reference_max_iters").get<std::int64_t>();
    c.measure_wallclock = j.at("measure_wallclock").get<bool>();
    c.output_dir = j.at("output_dir").get<std::string>();
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("metadata config incomplete: ") + e.what());
  }
  return c;
}

RunOutput cmd_run(const RunConfig& config, std::ostream& log) {
  const Setup setup = build_setup(config);
  const ProblemInstance& inst = setup.instance;
  const fs::path dir(config.output_dir);
  fs::create_directories(dir);

  RunOutput out;
  const ReferenceSolution ref = cached_reference(setup, config, dir / "cache", log, &out.cache_hit);
  const PrimalDualPoint initial = default_initial_point(inst);

  RunOptions options;
  options.record_every = config.record_every;
  options.reference = &ref;
  options.measure_wallclock = config.measure_wallclock;
  options.activation = config.activation;
  options.previous = config.previous;

  const std::int64_t rounds = sync_rounds(config, inst.num_agents());
  RunOptions sync_options = options;
  sync_options.record_every =
      std::max<std::int64_t>(1, config.record_every / static_cast<std::int64_t>(inst.num_agents()));

  const bool run_async_mode = config.mode != RunMode::kSync;
  const bool run_sync_mode = config.mode != RunMode::kAsync;

  double bound = config.dual_bound;
  std::optional<RunResult> async_result;
  std::optional<RunResult> sync_result;
  constexpr int kMaxDoublings = 40;
  for (int attempt = 0;; ++attempt) {
    const StepSizes steps =
        compute_step_sizes(inst, setup.consensus, bound, config.safety_factor, config.step_cap);
    if (run_async_mode) {
      async_result = run_async(inst, setup.consensus, config.iterations, steps, initial,
                               config.solver_seed, options);
    } else {
      sync_result = run_sync_baseline(inst, setup.consensus, rounds, steps, initial, sync_options);
    }
    const double ybar = (async_result ? async_result->ergodic : sync_result->ergodic).point.y.norm();
    if (!config.dual_bound_auto || ybar <= bound / 2.0) break;
    if (attempt == kMaxDoublings) {
      throw std::runtime_error("auto dual bound did not settle after doubling B " +
                               std::to_string(kMaxDoublings) + " times");
    }
    log << "dual bound: ||y_bar||=" << format_double(ybar) << " > B/2 with B="
        << format_double(bound) << "; doubling\n";
    bound *= 2.0;
  }
  if (bound < ref.y_star.norm()) {
    log << "warning: dual bound B=" << format_double(bound) << " is below ||y*||="
        << format_double(ref.y_star.norm()) << "; the step-size rule assumes B >= ||y*||\n";
  }
  const StepSizes steps =
      compute_step_sizes(inst, setup.consensus, bound, config.safety_factor, config.step_cap);
  if (run_async_mode && run_sync_mode) {
    sync_result = run_sync_baseline(inst, setup.consensus, rounds, steps, initial, sync_options);
  }
  out.dual_bound = bound;

  if (async_result) {
    out.async_rows = async_result->record.rows;
    out.async_csv = dir / "async.csv";
    write_file(out.async_csv, metrics_csv(out.async_rows));
    log << "async: " << config.iterations << " ticks, " << async_result->state.communications
        << " communications -> " << out.async_csv.string() << '\n';
  }
  if (sync_result) {
    out.sync_rows = sync_result->record.rows;
    out.sync_csv = dir / "sync.csv";
    write_file(out.sync_csv, metrics_csv(out.sync_rows));
    log << "sync: " << rounds << " rounds, " << sync_result->state.communications
        << " communications -> " << out.sync_csv.string() << '\n';
  }
  RunConfig recorded = config;
  recorded.dual_bound = bound;
  recorded.dual_bound_auto = false;
  out.metadata = dir / "metadata.json";
  write_file(out.metadata, run_metadata_json(recorded, setup, ref, steps));
  log << "metadata -> " << out.metadata.string() << '\n';
  return out;
}

bool BoundCheckReport::all_pass() const {
  return std::all_of(rows.begin(), rows.end(), [](const BoundCheckRow& r) { return r.pass; });
}

BoundCheckReport cmd_check_bound(const RunConfig& config, const BoundCheckOptions& options,
                                 std::ostream& log) {
  if (options.seeds < 30) {
    throw std::invalid_argument("check-bound needs at least 30 seeds, got " +
                                std::to_string(options.seeds));
  }
  if (options.horizons.empty()) throw std::invalid_argument("check-bound needs at least one K");
  for (auto k : options.horizons) {
    if (k < 1) throw std::invalid_argument("every horizon K must be >= 1");
  }
  if (!(options.slack >= 0.0)) throw std::invalid_argument("slack must be >= 0");
  if (options.comparison == Comparison::kInitial) {
    log << "warning: comparing against the initial point makes the bound's right-hand side "
           "collapse toward 0 and the check meaningless; use the oracle saddle point\n";
    throw std::invalid_argument("check-bound requires the oracle comparison point");
  }

  const Setup setup = build_setup(config);
  const ProblemInstance& inst = setup.instance;
  const ReferenceSolution ref =
      cached_reference(setup, config, fs::path(config.output_dir) / "cache", log);
  const StepSizes steps = compute_step_sizes(inst, setup.consensus, config.dual_bound,
                                             config.safety_factor, config.step_cap);
  if (config.dual_bound < ref.y_star.norm()) {
    log << "warning: dual bound B=" << format_double(config.dual_bound) << " is below ||y*||="
        << format_double(ref.y_star.norm()) << '\n';
  }
  const PrimalDualPoint initial = default_initial_point(inst);
  const PrimalDualPoint comparison = ref.saddle_point();

  BoundCheckReport report;
  report.dual_bound = config.dual_bound;
  for (const std::int64_t horizon : options.horizons) {
    std::vector<double> gaps(options.seeds);
    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
      RunOptions run_options;
      run_options.activation = config.activation;
      run_options.previous = config.previous;
      for (std::size_t s = next++; s < options.seeds; s = next++) {
        const RunResult r = run_async(inst, setup.consensus, horizon, steps, initial,
                                      options.first_seed + s, run_options);
        gaps[s] = lagrangian_gap(inst, setup.consensus, r.ergodic.point, comparison);
      }
    };
    const std::size_t threads = std::clamp<std::size_t>(options.threads, 1, options.seeds);
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    double sum = 0.0;
    for (double g : gaps) sum += g;  // seed order, independent of scheduling
    BoundCheckRow row;
    row.horizon = horizon;
    row.mean_gap = sum / static_cast<double>(options.seeds);
    row.rhs = expected_gap_bound(GapBoundInputs::from(steps, initial, comparison, horizon), inst,
                           setup.consensus);
    row.pass = row.mean_gap <= row.rhs * (1.0 + options.slack);
    report.rows.push_back(row);
  }

  log << std::left << std::setw(8) << "K" << std::setw(24) << "mean_gap" << std::setw(24)
      << "bound" << std::setw(24) << "bound*(1+s)" << "result\n";
  for (const auto& r : report.rows) {
    log << std::setw(8) << r.horizon << std::setw(24) << format_double(r.mean_gap)
        << std::setw(24) << format_double(r.rhs) << std::setw(24)
        << format_double(r.rhs * (1.0 + options.slack)) << (r.pass ? "pass" : "FAIL") << '\n';
  }
  log << std::right;
  return report;
}

}  // namespace adapd
