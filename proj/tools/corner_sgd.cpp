// corner-sgd: command-line front end.
//
//   corner-sgd theory   --algo corner --theta 1.8 --memory 5 --steps 10000 --out out/theory
//   corner-sgd train    --problem indicator --algo corner --seeds 5 --out out/train
//   corner-sgd phase    --grid 101 --out out/phase
//   corner-sgd contour  --algo heavy-ball --points 512 --out out/contour
//   corner-sgd fit      --input out/train/trajectory.csv --t-min 100
//
// Exit codes: 0 success, 2 bad configuration, 3 numerical failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "corner_sgd/corner_sgd.hpp"

namespace fs = std::filesystem;
using namespace corner_sgd;

namespace {

struct RunConfig {
  std::string command;
  std::string problem = "power-law";  // power-law | indicator | path to problem json
  double nu = 4.0;
  double zeta = 0.25;
  double lambda_scale = 1.0;
  double q_src = 1.0;
  std::size_t modes = 1000;
  std::string algo = "plain";  // plain | heavy-ball | corner | corner-ideal
  double alpha = 0.0;          // 0: derived from the top eigenvalue
  double beta = 0.5;
  double theta = 1.8;
  double scale = 0.0;  // corner A; 0: top eigenvalue / 1.9
  int memory = 5;
  double spacing = 0.0;  // corner node spacing l/sqrt(M); 0: l = 5
  double tau1 = 1.0;
  std::size_t batch = 100;
  std::size_t steps = 1000;
  std::uint64_t seed = 0;
  std::size_t seeds = 1;
  std::size_t features = 2000;
  bool exact_gradient = false;
  std::string out = "out";
  std::string input;
  double t_min = 100.0;
  double t_max = 0.0;  // 0: end of the series
  double tail_fraction = 0.9;
  std::size_t grid = 101;
  std::size_t points = 512;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(RunConfig, command, problem, nu, zeta, lambda_scale, q_src, modes,
                                                algo, alpha, beta, theta, scale, memory, spacing, tau1, batch, steps,
                                                seed, seeds, features, exact_gradient, out, input, t_min, t_max,
                                                tail_fraction, grid, points)

SpectralProblem load_problem(const RunConfig& c) {
  if (c.problem == "power-law") return power_law_problem(c.nu, c.zeta, c.lambda_scale, c.q_src, c.modes);
  if (c.problem == "indicator") {
    double xi = cantilever_root(c.modes - 1);
    auto nodes = static_cast<std::size_t>(20.0 * std::max(1.0, xi / (2.0 * std::numbers::pi)));
    return indicator_problem(c.modes, nodes);
  }
  std::ifstream in(c.problem);
  if (!in) throw config_error("unknown problem '" + c.problem + "' (power-law, indicator or a json file)");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw config_error(std::string("problem file: ") + e.what());
  }
  return problem_from_json(j);
}

CornerSpec corner_spec(const RunConfig& c, double top) {
  CornerSpec s;
  s.theta = c.theta;
  s.a = c.scale > 0.0 ? c.scale : top / 1.9;
  s.m = c.memory;
  s.l = c.spacing > 0.0 ? c.spacing * std::sqrt(static_cast<double>(c.memory)) : 5.0;
  s.validate();
  return s;
}

// Memory algorithm for the requested name; top is the largest curvature.
MemoryAlgorithm make_algorithm(const RunConfig& c, double top) {
  if (c.algo == "plain") return plain_gd(c.alpha > 0.0 ? c.alpha : 1.9 / top);
  if (c.algo == "heavy-ball") return heavy_ball(c.alpha > 0.0 ? c.alpha : 1.0 / top, c.beta);
  if (c.algo == "corner") return algorithm_from_corner(corner_spec(c, top));
  if (c.algo == "corner-ideal") {
    auto s = corner_spec(c, top);
    return algorithm_from_corner(ideal_corner_surrogate(s.theta, s.a));
  }
  throw config_error("unknown algorithm '" + c.algo + "' (plain, heavy-ball, corner, corner-ideal)");
}

void write_metadata(const RunConfig& c, const json& results) {
  json cfg = c;
  json meta{{"command", c.command}, {"config", cfg}, {"fingerprint", fingerprint(cfg)}, {"results", results}};
  write_atomic(fs::path(c.out) / "metadata.json", meta.dump(2) + "\n");
}

double window_end(const RunConfig& c, double last) { return c.t_max > 0.0 ? c.t_max : last; }

int cmd_theory(const RunConfig& c) {
  auto pb = load_problem(c);
  auto alg = make_algorithm(c, pb.eigenvalues[0]);
  require(c.steps >= 1, "theory: steps must be positive");
  auto series = aggregate(pb, alg, c.steps, c.tau1, c.batch);
  auto loss = loss_from_propagators(series, c.steps);
  json cfg = c;
  loss.fingerprint = fingerprint(cfg);
  fs::path out(c.out);
  write_atomic(out / "propagators.csv", series_csv(series));
  write_atomic(out / "loss.csv", trajectory_csv(loss, true));

  json results{{"algorithm", to_json(alg)}, {"top_eigenvalue", pb.eigenvalues[0]}};
  if (c.steps >= 100) {
    auto rep = classify_regime(series);
    write_atomic(out / "regime.json", to_json(rep).dump(2) + "\n");
    results["regime"] = std::string(to_string(rep.regime));
  }
  double hi = window_end(c, static_cast<double>(c.steps - 1));
  try {
    auto fit = fit_loss_exponent(loss, c.t_min, hi);
    if (std::isfinite(fit.exponent)) results["loss_exponent"] = fit.exponent;
  } catch (const config_error&) {
    // window too short for a fit; nothing to report
  }
  write_metadata(c, results);
  return 0;
}

int cmd_train(const RunConfig& c) {
  TrainConfig tc;
  tc.steps = c.steps;
  tc.batch = c.batch;
  tc.seed = c.seed;
  tc.exact_gradient = c.exact_gradient;
  LossTrajectory traj;
  json results;
  if (c.problem == "indicator") {
    IndicatorModel proto(c.features);
    double top = proto.hessian_top_eigenvalue();
    tc.algorithm = make_algorithm(c, top);
    results["top_eigenvalue"] = top;
    traj = sgd_run_averaged(tc, [&] { return IndicatorModel(c.features); }, c.seeds);
  } else {
    auto pb = load_problem(c);
    tc.algorithm = make_algorithm(c, pb.eigenvalues[0]);
    results["top_eigenvalue"] = pb.eigenvalues[0];
    traj = sgd_run_averaged(tc, [&] { return GaussianSpectralModel(pb); }, c.seeds);
  }
  json cfg = c;
  traj.fingerprint = fingerprint(cfg);
  write_atomic(fs::path(c.out) / "trajectory.csv", trajectory_csv(traj, false));
  results["algorithm"] = to_json(tc.algorithm);
  results["diverged_at"] = traj.diverged_at ? json(*traj.diverged_at) : json(nullptr);
  try {
    auto fit = fit_loss_exponent(traj, c.t_min, window_end(c, static_cast<double>(traj.steps.back())));
    results["loss_exponent"] = fit.exponent;
    results["loss_exponent_stderr"] = fit.stderr_;
  } catch (const config_error&) {
    results["loss_exponent"] = nullptr;
  }
  write_metadata(c, results);
  return 0;
}

int cmd_phase(const RunConfig& c) {
  require(c.grid >= 2, "phase: grid must have at least two points");
  std::vector<double> zg(c.grid), ng(c.grid);
  for (std::size_t i = 0; i < c.grid; ++i) {
    zg[i] = 2.0 * static_cast<double>(i) / static_cast<double>(c.grid - 1);
    ng[i] = static_cast<double>(i) / static_cast<double>(c.grid - 1);
  }
  auto cells = phase_sweep(zg, ng);
  CsvTable t({"zeta", "inv_nu", "theta_max", "region"});
  for (const auto& cell : cells) t.row(cell.zeta, cell.inv_nu, cell.theta_max, to_string(cell.region));
  write_atomic(fs::path(c.out) / "phase.csv", t.str());
  write_metadata(c, json{{"cells", cells.size()}});
  return 0;
}

int cmd_contour(const RunConfig& c) {
  ContourPolyline poly;
  json results;
  if (c.algo == "corner-ideal") {
    CornerSpec s;
    s.theta = c.theta;
    s.a = c.scale > 0.0 ? c.scale : 1.0;
    poly = contour_points(MapSource{s}, c.points);
    results["map"] = to_json(s);
  } else {
    MemoryAlgorithm alg;
    if (c.algo == "corner") {
      auto s = corner_spec(c, 1.9 * (c.scale > 0.0 ? c.scale : 1.0));
      alg = algorithm_from_corner(s);
      results["corner"] = to_json(s);
    } else {
      alg = make_algorithm(c, 1.0);
    }
    poly = contour_points(MapSource{alg}, c.points);
    results["algorithm"] = to_json(alg);
  }
  CsvTable t({"phi", "re", "im"});
  for (std::size_t i = 0; i < poly.points.size(); ++i) t.row(poly.phi[i], poly.points[i].real(), poly.points[i].imag());
  write_atomic(fs::path(c.out) / "contour.csv", t.str());
  results["external_angle_over_pi"] = poly.external_angle() / std::numbers::pi;
  write_metadata(c, results);
  return 0;
}

int cmd_fit(const RunConfig& c) {
  json results;
  if (!c.input.empty()) {
    std::vector<double> t, l;
    read_two_columns(c.input, t, l);
    require(!t.empty(), "fit: input has no rows");
    PowerFit f = smoothed_power_fit(t, l, c.t_min, window_end(c, t.back()), 20);
    results = {{"exponent", f.exponent}, {"stderr", f.stderr_}, {"prefactor", f.prefactor}, {"points", f.points}};
  } else {
    auto pb = load_problem(c);
    auto f = fit_exponents(pb, c.tail_fraction);
    results = {{"nu", f.nu_fit}, {"zeta", f.zeta_fit}, {"index_shift", f.index_shift},
               {"q", f.q_fit},   {"power_law", f.power_law}};
  }
  write_atomic(fs::path(c.out) / "fit.json", results.dump(2) + "\n");
  write_metadata(c, results);
  return 0;
}

json read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw config_error(std::string("config: ") + e.what());
  }
  if (j.contains("config") && j["config"].is_object()) j = j["config"];  // metadata files round-trip
  if (!j.is_object()) throw config_error("config must be a json object");
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Memory-M SGD propagators, corner algorithms and training experiments"};
  app.require_subcommand(1);
  app.fallthrough();

  RunConfig flags;
  std::string config_path;
  std::map<std::string, CLI::Option*> opts;
  app.add_option("--config", config_path, "JSON config (or metadata.json of an earlier run)");
  opts["out"] = app.add_option("--out", flags.out, "output directory");
  opts["seed"] = app.add_option("--seed", flags.seed, "base seed");
  opts["seeds"] = app.add_option("--seeds", flags.seeds, "independent runs to average");
  opts["problem"] = app.add_option("--problem", flags.problem, "power-law | indicator | problem json");
  opts["nu"] = app.add_option("--nu", flags.nu, "capacity exponent (power-law problem)");
  opts["zeta"] = app.add_option("--zeta", flags.zeta, "source exponent (power-law problem)");
  opts["lambda_scale"] = app.add_option("--lambda-scale", flags.lambda_scale, "eigenvalue scale");
  opts["q_src"] = app.add_option("--q-src", flags.q_src, "source scale");
  opts["modes"] = app.add_option("--modes", flags.modes, "number of eigenmodes");
  opts["algo"] = app.add_option("--algo", flags.algo, "plain | heavy-ball | corner | corner-ideal");
  opts["alpha"] = app.add_option("--alpha", flags.alpha, "learning rate (plain, heavy-ball)");
  opts["beta"] = app.add_option("--beta", flags.beta, "momentum (heavy-ball)");
  opts["theta"] = app.add_option("--theta", flags.theta, "corner angle factor in (1, 2)");
  opts["scale"] = app.add_option("--scale", flags.scale, "corner scale A");
  opts["memory"] = app.add_option("--memory", flags.memory, "corner memory size M");
  opts["spacing"] = app.add_option("--spacing", flags.spacing, "corner node spacing l/sqrt(M)");
  opts["tau1"] = app.add_option("--tau1", flags.tau1, "noise constant tau1");
  opts["batch"] = app.add_option("--batch", flags.batch, "batch size");
  opts["steps"] = app.add_option("--steps", flags.steps, "horizon / training steps");
  opts["features"] = app.add_option("--features", flags.features, "indicator model size N");
  opts["exact_gradient"] = app.add_flag("--exact-gradient", flags.exact_gradient, "use exact gradients");
  opts["input"] = app.add_option("--input", flags.input, "CSV to fit (fit)");
  opts["t_min"] = app.add_option("--t-min", flags.t_min, "fit window start");
  opts["t_max"] = app.add_option("--t-max", flags.t_max, "fit window end (0: last point)");
  opts["tail_fraction"] = app.add_option("--tail-fraction", flags.tail_fraction, "spectrum fit tail fraction");
  opts["grid"] = app.add_option("--grid", flags.grid, "phase grid points per axis");
  opts["points"] = app.add_option("--points", flags.points, "contour points");

  std::map<std::string, int (*)(const RunConfig&)> commands{
      {"theory", cmd_theory}, {"train", cmd_train}, {"phase", cmd_phase}, {"contour", cmd_contour}, {"fit", cmd_fit}};
  const std::map<std::string, std::string> about{
      {"theory", "propagators, loss curve and regime for a spectral problem"},
      {"train", "SGD runs on the indicator or a Gaussian model"},
      {"phase", "largest useful theta over a (zeta, 1/nu) grid"},
      {"contour", "image of the unit circle under the algorithm's map"},
      {"fit", "power-law fit of a loss CSV or a spectrum"}};
  for (const auto& [name, fn] : commands) app.add_subcommand(name, about.at(name));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    json resolved = RunConfig{};
    if (!config_path.empty()) {
      json file = read_config_file(config_path);
      for (auto& [k, v] : file.items())
        if (resolved.contains(k)) resolved[k] = v;
    }
    json given = flags;
    for (const auto& [key, opt] : opts)
      if (opt->count() > 0) resolved[key] = given[key];
    resolved["command"] = app.get_subcommands().front()->get_name();
    RunConfig cfg = resolved.get<RunConfig>();
    return commands.at(cfg.command)(cfg);
  } catch (const config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const numerical_error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << "\n";
    return 3;
  }
}
