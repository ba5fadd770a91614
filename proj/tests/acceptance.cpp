// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero if any criterion fails.
//
//   acceptance [output-dir]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "hjb/hjb.hpp"
#include "oracles.hpp"

using namespace hjb;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

struct Line {
  int id;
  std::string name;
  bool pass;
  std::string detail;
};

std::vector<Line> lines;

void report(int id, std::string name, bool pass, std::string detail) {
  std::printf("[%s] %d %s: %s\n", pass ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
  std::fflush(stdout);
  lines.push_back({id, std::move(name), pass, std::move(detail)});
}

// Checks gathered on every solved level of every run.
struct LevelChecks {
  double worst_identity = 0.0;     // |E - sum eta^2| / E
  double worst_certificate = -1e300;  // max (J(alpha) - J(q)) / scale over samples
  int levels = 0;

  void observe(const HjbProblem& p, const LevelRecord& rec, unsigned seed) {
    ++levels;
    const double e = residual_functional(p, rec.spaces, rec.solution.pair, rec.solution.control);
    const double s = rec.indicators.total;
    worst_identity = std::max(worst_identity, std::abs(e - s) / std::max(e, 1e-300));

    const TriMesh& mesh = *rec.mesh;
    const QuadRule rule = triangle_rule(assembly_degree(rec.spaces.degree()));
    std::mt19937 rng(seed);
    std::uniform_int_distribution<int> pick(0, static_cast<int>(mesh.n_cells()) - 1);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
    const int ncells = std::min<int>(100, static_cast<int>(mesh.n_cells()));
    for (int i = 0; i < ncells; ++i) {
      const int c = mesh.n_cells() <= 100 ? i : pick(rng);
      const CellObjective obj(p, rec.solution.control_source, c, rule);
      const double qa = rec.solution.control[c];
      const double jq = obj(qa);
      const double scale = std::max(obj.scale(qa), 1e-300);
      for (int k = 0; k < 256; ++k)
        worst_certificate = std::max(worst_certificate, (obj(angle(rng)) - jq) / scale);
    }
  }
};

struct Study {
  RunResult result;
  double seconds = 0.0;
};

Study study(RunConfig cfg, LevelChecks& checks) {
  const auto t0 = Clock::now();
  const HjbProblem p = make_problem(cfg.problem, cfg.flip_bump);
  Study s;
  s.result = run(cfg, [&](const LevelRecord& rec, int l) { checks.observe(p, rec, 1000u + l); });
  s.seconds = seconds_since(t0);
  return s;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

std::string residual_list(const HowardHistory& h) {
  std::string s;
  for (const auto& st : h.steps) s += fmt("%s%.2e", s.empty() ? "" : " ", st.res);
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path out = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance_runs");
  fs::create_directories(out);
  LevelChecks checks;

  // 1. Cordes certificates.
  {
    const auto t0 = Clock::now();
    const CordesCertificate sq = verify_cordes(make_square_hjb());
    const CordesCertificate dk = verify_cordes(make_disk_hjb());
    const double t = seconds_since(t0);
    const bool ok = sq.success && dk.success && sq.lambda == 1.0 && dk.lambda == 0.0 && sq.certified_eps >= 0.45 &&
                    dk.certified_eps >= 0.008 && t < 10.0;
    report(1, "Cordes certification", ok,
           fmt("square eps %.4f (>= 0.45), disk eps %.5f (>= 0.008), %.2fs", sq.certified_eps, dk.certified_eps, t));
  }

  // 2. Uniform convergence on the square, P1 and P2, n = 8..64.
  std::vector<Study> square;
  for (int k : {1, 2}) {
    RunConfig cfg;
    cfg.problem = "square-hjb";
    cfg.degree = k;
    cfg.levels = 4;
    cfg.out = (out / ("square_p" + std::to_string(k))).string();
    square.push_back(study(cfg, checks));
  }
  {
    const double e1 = square[0].result.rows.back().eoc_pair_h1.value_or(NAN);
    const double e2 = square[1].result.rows.back().eoc_pair_h1.value_or(NAN);
    const double t = square[0].seconds + square[1].seconds;
    const bool ok = std::abs(e1 - 1.0) <= 0.15 && std::abs(e2 - 2.0) <= 0.2 && t < 600.0;
    report(2, "Uniform convergence rates", ok,
           fmt("final pair-H1 EOC P1 %.3f (1.0 +- 0.15), P2 %.3f (2.0 +- 0.2), %.1fs", e1, e2, t));
  }

  // 3. Howard termination on every level, superlinear signature on the finest.
  {
    bool all_converged = true;
    std::string worst;
    for (int k = 0; k < 2; ++k)
      for (std::size_t l = 0; l < square[k].result.levels.size(); ++l) {
        const HowardHistory& h = square[k].result.levels[l].history;
        if (h.converged && h.iterations() <= 8 && h.steps.back().res <= 1e-7) continue;
        all_converged = false;
        worst += fmt("%sP%d n=%d res %.1e", worst.empty() ? "" : ", ", k + 1, 8 << l, h.steps.back().res);
      }
    bool superlinear = true;
    std::string ratios;
    for (int k = 0; k < 2; ++k) {
      const HowardHistory& h = square[k].result.levels.back().history;
      std::vector<double> r;
      for (std::size_t i = 1; i < h.steps.size(); ++i) r.push_back(h.steps[i].res / h.steps[i - 1].res);
      const bool ok = r.size() >= 2 && r[r.size() - 1] < r[r.size() - 2];
      superlinear = superlinear && ok;
      ratios += fmt("%sP%d last ratios", k ? "; " : "", k + 1);
      for (std::size_t i = r.size() >= 2 ? r.size() - 2 : 0; i < r.size(); ++i) ratios += fmt(" %.3f", r[i]);
      ratios += " (finest res: " + residual_list(h) + ")";
    }
    report(3, "Howard termination", all_converged && superlinear,
           fmt("all levels within 8 iterations at 1e-7: %s%s; finest-mesh ratios decreasing: %s; %s",
               all_converged ? "yes" : "no", worst.empty() ? "" : (" [" + worst + "]").c_str(),
               superlinear ? "yes" : "no", ratios.c_str()));
  }

  // 4. Singleton control: the first solve is the fixed point.
  {
    const HjbProblem p = make_poisson();
    bool ok = true;
    std::string detail;
    for (int k : {1, 2}) {
      auto mesh = std::make_shared<const TriMesh>(unit_square_mesh(16));
      const PairSpaces s = make_pair_spaces(mesh, k);
      const HowardResult r = howard_solve(p, s);
      const double res2 = r.history.steps.size() >= 2 ? r.history.steps[1].res : NAN;
      ok = ok && res2 <= 1e-9;
      detail += fmt("%sP%d res_2 = %.2e", k == 1 ? "" : ", ", k, res2);
      const Indicators ind = compute_indicators(p, s, r.pair, r.control);
      LevelRecord rec{mesh, s, r, ind};
      checks.observe(p, rec, 77u + k);
    }
    report(4, "Degenerate policy iteration", ok, detail + " (<= 1e-9)");
  }

  // 5. One-cell assembly against the dense oracle.
  {
    const auto t0 = Clock::now();
    const std::array<Vec2, 3> tri{Vec2{0.1, -0.2}, Vec2{1.3, 0.1}, Vec2{0.4, 0.9}};
    double worst = 0.0;
    for (int k : {1, 2})
      for (double theta : {0.0, 0.5, 1.0}) {
        const HjbProblem p = oracle::polynomial_problem(theta);
        auto mesh = std::make_shared<const TriMesh>(make_mesh({tri[0], tri[1], tri[2]}, {{0, 1, 2}}));
        const PairSpaces s = make_pair_spaces(mesh, k);
        const SparseSystem sys = assemble(p, s, ControlField(1, 0.0));
        const oracle::DenseSystem ref = oracle::one_cell_system(p, k, tri, s.u->nodes(), 0.0);
        const double kmax = ref.K.cwiseAbs().maxCoeff(), fmax = ref.F.cwiseAbs().maxCoeff();
        for (int i = 0; i < s.size(); ++i) {
          worst = std::max(worst, std::abs(sys.rhs[i] - ref.F(i)) / fmax);
          for (int j = 0; j < s.size(); ++j) worst = std::max(worst, std::abs(sys.matrix.at(i, j) - ref.K(i, j)) / kmax);
        }
      }
    const double t = seconds_since(t0);
    report(5, "Assembly oracle equivalence", worst <= 1e-12 && t < 5.0,
           fmt("max relative entry deviation %.2e over P1/P2 x theta in {0, 0.5, 1} (<= 1e-12), %.2fs", worst, t));
  }

  // 6. Smallest Ritz value of the constrained systems.
  {
    auto mesh = std::make_shared<const TriMesh>(unit_square_mesh(8));
    double smallest = 1e300;
    bool ok = true;
    for (const char* name : {"square-hjb", "disk-hjb"})
      for (double theta : {0.0, 0.5, 1.0}) {
        HjbProblem p = make_problem(name);
        p.theta = theta;
        for (int k : {1, 2}) {
          const PairSpaces s = make_pair_spaces(mesh, k);
          std::mt19937 rng(5);
          std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
          ControlField random(mesh->n_cells());
          for (double& a : random.alpha) a = angle(rng);
          for (const ControlField& q : {ControlField(mesh->n_cells(), 0.0), random,
                                        optimize_control(p, PairField::zero(s))}) {
            const double ritz = smallest_ritz_value(assemble(p, s, q).matrix, 50, 11);
            smallest = std::min(smallest, ritz);
            ok = ok && ritz > 0.0;
          }
        }
      }
    report(6, "Coercivity", ok, fmt("smallest Ritz value %.3e over both problems, theta in {0, 0.5, 1}, P1/P2 (> 0)",
                                    smallest));
  }

  // 8. Adaptive versus uniform on the disk (also feeds 7, 9, 10).
  Study disk_uniform, disk_adaptive;
  {
    RunConfig cfg;
    cfg.problem = "disk-hjb";
    cfg.degree = 2;
    cfg.levels = 4;
    cfg.out = (out / "disk_uniform").string();
    disk_uniform = study(cfg, checks);
    cfg.mode = RunMode::adaptive;
    cfg.levels = 8;
    cfg.beta = 0.3;
    cfg.out = (out / "disk_adaptive").string();
    disk_adaptive = study(cfg, checks);

    const ErrorRow& fin = disk_adaptive.result.rows.back();
    const ErrorRow* match = nullptr;
    for (const ErrorRow& r : disk_uniform.result.rows) {
      const double ratio = double(r.ndof) / fin.ndof;
      if (ratio < 0.5 || ratio > 2.0) continue;
      if (!match || std::abs(std::log(ratio)) < std::abs(std::log(double(match->ndof) / fin.ndof))) match = &r;
    }
    bool monotone = true;
    const auto& rows = disk_adaptive.result.rows;
    for (std::size_t i = 1; i < rows.size(); ++i) monotone = monotone && rows[i].eta < rows[i - 1].eta;
    const double t = disk_uniform.seconds + disk_adaptive.seconds;
    const bool better = match && fin.err_g_h1 < match->err_g_h1;
    report(8, "Adaptive benefit", better && monotone && rows.size() == 8 && t < 900.0,
           match ? fmt("adaptive ndof %d err_g %.3e vs uniform ndof %d err_g %.3e; eta decreasing over %zu levels: %s; "
                       "%.1fs",
                       fin.ndof, fin.err_g_h1, match->ndof, match->err_g_h1, rows.size(), monotone ? "yes" : "no", t)
                 : fmt("no uniform level within a factor 2 of adaptive ndof %d", fin.ndof));
  }

  // 7. Estimator identity on every run; error/estimator ratio on the square studies.
  {
    std::string detail = fmt("max |E - sum eta^2| / E = %.2e over %d solves (<= 1e-10)", checks.worst_identity,
                             checks.levels);
    bool ok = checks.worst_identity <= 1e-10;
    for (int k = 0; k < 2; ++k) {
      double lo = 1e300, hi = 0.0;
      for (const ErrorRow& r : square[k].result.rows) {
        const double ratio = r.err_pair_h1 * r.err_pair_h1 / (r.eta * r.eta);
        lo = std::min(lo, ratio);
        hi = std::max(hi, ratio);
      }
      ok = ok && hi / lo <= 10.0;
      detail += fmt("; P%d error^2/eta^2 in [%.3f, %.3f], spread %.2f (<= 10)", k + 1, lo, hi, hi / lo);
    }
    report(7, "Estimator identity and stability", ok, detail);
  }

  // 9. Control optimality certificate, gathered on every solve above.
  report(9, "Control optimality certificate", checks.worst_certificate <= 1e-9,
         fmt("max (J(alpha) - J(q)) / scale = %.2e over %d solves (<= 1e-9)", checks.worst_certificate, checks.levels));

  // 10. Byte-identical CSV output on repeated runs.
  {
    bool ok = true;
    std::string detail;
    RunConfig cfg;
    cfg.problem = "square-hjb";
    cfg.degree = 1;
    cfg.levels = 3;
    for (const char* tag : {"a", "b"}) {
      cfg.out = (out / (std::string("repeat_square_") + tag)).string();
      run(cfg);
    }
    const bool same_sq = slurp(out / "repeat_square_a" / "report.csv") == slurp(out / "repeat_square_b" / "report.csv");
    cfg.problem = "disk-hjb";
    cfg.degree = 2;
    cfg.mode = RunMode::adaptive;
    cfg.levels = 8;
    cfg.out = (out / "repeat_disk_adaptive").string();
    run(cfg);
    const std::string a = slurp(out / "disk_adaptive" / "report.csv");
    const bool same_disk = !a.empty() && a == slurp(out / "repeat_disk_adaptive" / "report.csv");
    ok = same_sq && same_disk;
    detail = fmt("square P1 uniform: %s; disk P2 adaptive: %s", same_sq ? "identical" : "DIFFERENT",
                 same_disk ? "identical" : "DIFFERENT");
    report(10, "Determinism", ok, detail);
  }

  std::sort(lines.begin(), lines.end(), [](const Line& a, const Line& b) { return a.id < b.id; });
  int failed = 0;
  std::printf("\nsummary:\n");
  for (const Line& l : lines) {
    std::printf("  [%s] %d %s\n", l.pass ? "PASS" : "FAIL", l.id, l.name.c_str());
    failed += !l.pass;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(lines.size()) - failed, lines.size());
  return failed == 0 ? 0 : 1;
}
