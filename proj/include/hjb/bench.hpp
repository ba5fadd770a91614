#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hjb/adapt.hpp"
#include "hjb/howard.hpp"
#include "hjb/problem.hpp"

namespace hjb {

enum class RunMode { uniform, adaptive };

struct RunConfig {
  std::string problem = "square-hjb";
  int degree = 2;
  RunMode mode = RunMode::uniform;
  int levels = 4;
  std::optional<double> theta;  // problem default (0.5) when unset
  double tol = 1e-7;            // Howard
  int max_iter = 8;             // Howard
  double beta = 0.3;
  double tol_a = 0.0;
  double solver_tol = 1e-11;
  bool direct = false;
  bool warm_start = false;
  int n0 = 0;  // initial mesh parameter; 0 picks 8 (square) or 16 (disk)
  std::string out;
  bool flip_bump = false;
  bool export_mesh = false;
  unsigned seed = 1;
  int cordes_nx = 128;
  int cordes_nalpha = 256;
  bool verbose = false;
};

inline const char* to_string(RunMode m) { return m == RunMode::uniform ? "uniform" : "adaptive"; }

inline RunMode parse_mode(const std::string& s) {
  if (s == "uniform") return RunMode::uniform;
  if (s == "adaptive") return RunMode::adaptive;
  throw std::invalid_argument("unknown mode '" + s + "' (expected uniform or adaptive)");
}

inline HjbProblem make_problem(const std::string& name, bool flip_bump = false) {
  if (name == "square-hjb") return make_square_hjb(flip_bump);
  if (name == "disk-hjb") return make_disk_hjb(flip_bump);
  if (name == "poisson") return make_poisson();
  throw std::invalid_argument("unknown problem '" + name + "' (expected square-hjb, disk-hjb or poisson)");
}

inline TriMesh initial_mesh(const HjbProblem& p, int n0) {
  if (p.domain.kind == DomainKind::disk) return unit_disk_mesh(n0 > 0 ? n0 : 16);
  return unit_square_mesh(n0 > 0 ? n0 : 8);
}

/// Experimental orders of convergence between consecutive entries:
/// log(e_i / e_{i+1}) / log(h_i / h_{i+1}).
inline std::vector<double> eoc(const std::vector<double>& errors, const std::vector<double>& hs) {
  if (errors.size() != hs.size()) throw std::invalid_argument("eoc: size mismatch");
  for (std::size_t i = 0; i < errors.size(); ++i)
    if (!(errors[i] > 0.0) || !(hs[i] > 0.0)) throw std::invalid_argument("eoc: entries must be positive");
  std::vector<double> r;
  for (std::size_t i = 0; i + 1 < errors.size(); ++i)
    r.push_back(std::log(errors[i] / errors[i + 1]) / std::log(hs[i] / hs[i + 1]));
  return r;
}

struct ErrorRow {
  int level = 0;
  double h = 0.0;
  int ndof = 0;
  double err_u_l2 = std::numeric_limits<double>::quiet_NaN();
  double err_u_h1 = std::numeric_limits<double>::quiet_NaN();
  double err_g_h1 = std::numeric_limits<double>::quiet_NaN();
  double err_pair_h1 = std::numeric_limits<double>::quiet_NaN();
  double eta = 0.0;
  int howard_iters = 0;
  std::optional<double> eoc_u_h1, eoc_g_h1, eoc_pair_h1;
};

struct LevelInfo {
  HowardHistory history;
  int cells = 0;
  double functional = 0.0;  // residual_functional at the solution
  double seconds = 0.0;
};

struct RunResult {
  HjbProblem problem;
  CordesCertificate cordes;
  std::vector<ErrorRow> rows;
  std::vector<LevelInfo> levels;
};

struct PairErrors {
  Norms u, g;
  double pair = 0.0;
};

/// Errors of (u_h, g_h) against (u, grad u) of the exact solution.
inline PairErrors pair_errors(const HjbProblem& p, const PairField& pair) {
  if (!p.exact) throw std::invalid_argument("pair_errors: problem has no exact solution");
  NormOptions opt;
  opt.singular_point = p.singular_point;
  PairErrors e;
  e.u = error_norms(pair.u, p.exact->u, p.exact->grad, opt);
  e.g = error_norms(pair.g, p.exact->grad, p.exact->hessian, opt);
  e.pair = pair_norm(e.u, e.g);
  return e;
}

/// Fills the EOC columns: against h (uniform) or ndof^{-1/2} (adaptive).
/// Left empty where either error is below 10 machine epsilons.
inline void fill_eoc(std::vector<ErrorRow>& rows, RunMode mode) {
  const double floor = 10.0 * std::numeric_limits<double>::epsilon();
  auto x = [&](const ErrorRow& r) { return mode == RunMode::uniform ? r.h : 1.0 / std::sqrt(double(r.ndof)); };
  auto rate = [&](double e0, double e1, double x0, double x1) -> std::optional<double> {
    if (!(e0 > floor && e1 > floor)) return std::nullopt;
    return eoc({e0, e1}, {x0, x1})[0];
  };
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const ErrorRow& a = rows[i - 1];
    ErrorRow& b = rows[i];
    b.eoc_u_h1 = rate(a.err_u_h1, b.err_u_h1, x(a), x(b));
    b.eoc_g_h1 = rate(a.err_g_h1, b.err_g_h1, x(a), x(b));
    b.eoc_pair_h1 = rate(a.err_pair_h1, b.err_pair_h1, x(a), x(b));
  }
}

inline std::string format_number(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10e", v);
  return buf;
}

inline void write_csv(const std::vector<ErrorRow>& rows, std::ostream& os) {
  os << "level,h,ndof,err_u_L2,err_u_H1,err_g_H1,err_pair_H1,eta,howard_iters,eoc_u_H1,eoc_g_H1,eoc_pair_H1\n";
  auto opt = [](const std::optional<double>& v) { return v ? format_number(*v) : std::string(); };
  for (const ErrorRow& r : rows) {
    os << r.level << ',' << format_number(r.h) << ',' << r.ndof << ',' << format_number(r.err_u_l2) << ','
       << format_number(r.err_u_h1) << ',' << format_number(r.err_g_h1) << ',' << format_number(r.err_pair_h1)
       << ',' << format_number(r.eta) << ',' << r.howard_iters << ',' << opt(r.eoc_u_h1) << ',' << opt(r.eoc_g_h1)
       << ',' << opt(r.eoc_pair_h1) << '\n';
  }
}

inline nlohmann::json to_json(const HowardHistory& h) {
  nlohmann::json j;
  j["converged"] = h.converged;
  j["steps"] = nlohmann::json::array();
  for (const HowardStep& s : h.steps)
    j["steps"].push_back({{"res", s.res},
                          {"control_change", s.control_change},
                          {"inner_iterations", s.solve.iterations},
                          {"inner_relative_residual", s.solve.relative_residual},
                          {"inner_seconds", s.solve.seconds}});
  return j;
}

inline nlohmann::json to_json(const CordesCertificate& c) {
  return {{"lambda", c.lambda},      {"max_ratio", c.max_ratio}, {"certified_eps", c.certified_eps},
          {"nx", c.nx},              {"nalpha", c.nalpha},       {"success", c.success},
          {"worst_x", {c.worst_x.x, c.worst_x.y}}, {"worst_alpha", c.worst_alpha}};
}

/// Runs one convergence study. `on_level` sees every solved level. Writes
/// report.csv, manifest.json (and mesh_<l>.txt with export_mesh) when
/// config.out is set. Throws on certification or solver failure.
inline RunResult run(const RunConfig& cfg,
                     const std::function<void(const LevelRecord&, int)>& on_level = nullptr) {
  const auto t0 = std::chrono::steady_clock::now();
  RunResult res{make_problem(cfg.problem, cfg.flip_bump), {}, {}, {}};
  HjbProblem& p = res.problem;
  if (cfg.theta) p.theta = *cfg.theta;
  if (cfg.degree != 1 && cfg.degree != 2) throw std::invalid_argument("degree must be 1 or 2");
  if (cfg.levels < 1) throw std::invalid_argument("levels must be >= 1");
  res.cordes = verify_cordes(p, cfg.cordes_nx, cfg.cordes_nalpha);
  if (!res.cordes.success)
    throw std::runtime_error("Cordes condition not certified for " + p.name + " (max ratio " +
                             std::to_string(res.cordes.max_ratio) + ")");

  HowardOptions hopt;
  hopt.tol = cfg.tol;
  hopt.max_iter = cfg.max_iter;
  hopt.solver.tol = cfg.solver_tol;
  hopt.direct = cfg.direct;

  if (!cfg.out.empty()) std::filesystem::create_directories(cfg.out);
  auto level_start = std::chrono::steady_clock::now();
  auto record = [&](const LevelRecord& rec, int l) {
    ErrorRow row;
    row.level = l;
    row.h = rec.mesh->max_diameter();
    row.ndof = rec.spaces.size();
    row.eta = rec.indicators.eta();
    row.howard_iters = rec.solution.history.iterations();
    if (p.exact) {
      const PairErrors e = pair_errors(p, rec.solution.pair);
      row.err_u_l2 = e.u.l2;
      row.err_u_h1 = e.u.h1;
      row.err_g_h1 = e.g.h1;
      row.err_pair_h1 = e.pair;
    }
    res.rows.push_back(row);
    LevelInfo info;
    info.history = rec.solution.history;
    info.cells = static_cast<int>(rec.mesh->n_cells());
    info.functional = rec.indicators.total;
    const auto now = std::chrono::steady_clock::now();
    info.seconds = std::chrono::duration<double>(now - level_start).count();
    level_start = now;
    res.levels.push_back(info);
    if (cfg.export_mesh && !cfg.out.empty())
      write_mesh(*rec.mesh, (std::filesystem::path(cfg.out) / ("mesh_" + std::to_string(l) + ".txt")).string());
    if (cfg.verbose)
      std::fprintf(stderr, "level %d: cells %zu ndof %d eta %.3e pair err %.3e howard %d (%.1fs)\n", l,
                   rec.mesh->n_cells(), row.ndof, row.eta, row.err_pair_h1, row.howard_iters, info.seconds);
    if (on_level) on_level(rec, l);
  };

  const TriMesh start = initial_mesh(p, cfg.n0);
  if (cfg.mode == RunMode::adaptive) {
    AdaptiveOptions aopt;
    aopt.beta = cfg.beta;
    aopt.tol_a = cfg.tol_a;
    aopt.levels = cfg.levels;
    aopt.warm_start = cfg.warm_start;
    aopt.howard = hopt;
    adaptive_solve(p, start, cfg.degree, aopt, record);
  } else {
    auto mesh = std::make_shared<const TriMesh>(start);
    for (int l = 0; l < cfg.levels; ++l) {
      if (l > 0) mesh = std::make_shared<const TriMesh>(refine_uniform(*mesh));
      LevelRecord rec{mesh, make_pair_spaces(mesh, cfg.degree), {}, {}};
      try {
        rec.solution = howard_solve(p, rec.spaces, hopt);
      } catch (const HowardError& e) {
        throw HowardError(std::string(e.what()) + " at level " + std::to_string(l), e.iteration);
      }
      rec.indicators = compute_indicators(p, rec.spaces, rec.solution.pair, rec.solution.control);
      record(rec, l);
    }
  }
  fill_eoc(res.rows, cfg.mode);

  if (!cfg.out.empty()) {
    const std::filesystem::path dir(cfg.out);
    {
      std::ofstream csv(dir / "report.csv");
      if (!csv) throw std::runtime_error("cannot write " + (dir / "report.csv").string());
      write_csv(res.rows, csv);
    }
    nlohmann::json m;
    m["config"] = {{"problem", cfg.problem},
                   {"degree", cfg.degree},
                   {"mode", to_string(cfg.mode)},
                   {"levels", cfg.levels},
                   {"theta", p.theta},
                   {"tol", cfg.tol},
                   {"max_iter", cfg.max_iter},
                   {"beta", cfg.beta},
                   {"tol_a", cfg.tol_a},
                   {"solver_tol", cfg.solver_tol},
                   {"direct", cfg.direct},
                   {"warm_start", cfg.warm_start},
                   {"n0", cfg.n0},
                   {"flip_bump", cfg.flip_bump},
                   {"seed", cfg.seed}};
    m["problem"] = {{"name", p.name}, {"lambda", p.lambda}, {"eps", p.eps}, {"homogeneous", p.homogeneous}};
    m["cordes"] = to_json(res.cordes);
    m["levels"] = nlohmann::json::array();
    for (std::size_t l = 0; l < res.levels.size(); ++l) {
      const LevelInfo& info = res.levels[l];
      m["levels"].push_back({{"level", l},
                             {"cells", info.cells},
                             {"ndof", res.rows[l].ndof},
                             {"eta", res.rows[l].eta},
                             {"howard", to_json(info.history)},
                             {"seconds", info.seconds}});
    }
    m["total_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::ofstream js(dir / "manifest.json");
    js << m.dump(2) << '\n';
  }
  return res;
}

}  // namespace hjb
