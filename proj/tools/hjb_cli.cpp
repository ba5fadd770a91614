// Command-line runner for the convergence and adaptivity studies.
//
//   hjb solve --problem square-hjb --degree 2 --mode uniform --levels 4 --out runs/sq_p2
//   hjb solve --problem disk-hjb --degree 2 --mode adaptive --levels 8 --beta 0.3 --out runs/disk_ad

#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "hjb/bench.hpp"

namespace {

// Keys in a --config file override the defaults; explicit flags override both.
void apply_config_file(const std::string& path, hjb::RunConfig& cfg) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config file " + path);
  const nlohmann::json j = nlohmann::json::parse(is);
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("problem", cfg.problem);
  get("degree", cfg.degree);
  if (j.contains("mode")) cfg.mode = hjb::parse_mode(j.at("mode").get<std::string>());
  get("levels", cfg.levels);
  if (j.contains("theta")) cfg.theta = j.at("theta").get<double>();
  get("tol", cfg.tol);
  get("max_iter", cfg.max_iter);
  get("beta", cfg.beta);
  get("tol_a", cfg.tol_a);
  get("solver_tol", cfg.solver_tol);
  get("direct", cfg.direct);
  get("warm_start", cfg.warm_start);
  get("n0", cfg.n0);
  get("flip_bump", cfg.flip_bump);
  get("seed", cfg.seed);
  get("cordes_nx", cfg.cordes_nx);
  get("cordes_nalpha", cfg.cordes_nalpha);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Least-squares gradient-recovery FEM solver for HJB equations"};
  app.require_subcommand(1);
  CLI::App* solve = app.add_subcommand("solve", "run a uniform or adaptive refinement study");

  hjb::RunConfig cfg;
  std::string config_file, mode = "uniform";
  double theta = 0.5;
  solve->add_option("--config", config_file, "JSON file with run settings")->check(CLI::ExistingFile);
  solve->add_option("--problem", cfg.problem, "square-hjb | disk-hjb | poisson")
      ->check(CLI::IsMember({"square-hjb", "disk-hjb", "poisson"}));
  solve->add_option("--degree", cfg.degree, "polynomial degree")->check(CLI::IsMember({1, 2}));
  auto* mode_opt = solve->add_option("--mode", mode, "uniform | adaptive")->check(CLI::IsMember({"uniform", "adaptive"}));
  solve->add_option("--levels", cfg.levels, "number of refinement levels")->check(CLI::PositiveNumber);
  auto* theta_opt = solve->add_option("--theta", theta, "blending parameter in [0, 1]")->check(CLI::Range(0.0, 1.0));
  solve->add_option("--tol", cfg.tol, "Howard stopping tolerance")->check(CLI::PositiveNumber);
  solve->add_option("--max-iter", cfg.max_iter, "maximum Howard iterations")->check(CLI::PositiveNumber);
  solve->add_option("--beta", cfg.beta, "marked fraction (adaptive)")->check(CLI::Range(0.0, 1.0));
  solve->add_option("--tol-a", cfg.tol_a, "adaptive stop: eta <= tol-a");
  solve->add_option("--solver-tol", cfg.solver_tol, "relative residual tolerance of CG")->check(CLI::PositiveNumber);
  solve->add_flag("--direct", cfg.direct, "use sparse Cholesky instead of CG");
  solve->add_flag("--warm-start", cfg.warm_start, "start each adaptive level from the previous solution");
  solve->add_option("--n0", cfg.n0, "initial mesh: cells per side (square) or boundary vertices (disk)");
  solve->add_option("--out", cfg.out, "output directory")->required();
  solve->add_flag("--flip-bump", cfg.flip_bump, "manufactured forcing with the alternative sign of the bump");
  solve->add_flag("--export-mesh", cfg.export_mesh, "write mesh_<level>.txt per level");
  solve->add_option("--seed", cfg.seed, "random seed");
  solve->add_flag("-v,--verbose", cfg.verbose, "per-level progress on stderr");

  // Parse twice so a config file supplies defaults that flags can override.
  try {
    app.parse(argc, argv);
    if (!config_file.empty()) {
      const hjb::RunConfig flags = cfg;
      hjb::RunConfig merged;
      apply_config_file(config_file, merged);
      cfg = merged;
      app.parse(argc, argv);
      cfg.out = flags.out;
    }
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  if (*mode_opt) cfg.mode = hjb::parse_mode(mode);
  if (*theta_opt) cfg.theta = theta;

  try {
    const hjb::RunResult res = hjb::run(cfg);
    hjb::write_csv(res.rows, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
