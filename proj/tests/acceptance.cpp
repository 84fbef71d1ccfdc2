// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "sdhom/approx.hpp"
#include "sdhom/bulk_cell.hpp"
#include "sdhom/experiment.hpp"
#include "sdhom/oracle.hpp"
#include "sdhom/surface_cell.hpp"

using namespace sdh;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
  std::printf("[%s] %2d %-28s %s\n", pass ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), f, a, b, c);
  return buf;
}

const double kSeven3 = 7.0 / 3.0;

BulkDensity layered_w() { return BulkDensity::power(CoefficientField::layered({1.0, 2.0}), 2.0); }
SurfaceDensity unit_psi() { return SurfaceDensity(CoefficientField::constant(1.0)); }

BulkCellSpec spec_1d(double A, double B, int k, int m) {
  BulkCellSpec s;
  s.A = Mat::scalar(A);
  s.B = Mat::scalar(B);
  s.k = k;
  s.m = m;
  s.tau = Vec(1);
  return s;
}

// Largest gradient entry and largest trace mismatch over all interior faces.
double field_norm(const DiscreteSBVField& f) {
  double n = 0.0;
  for (double g : f.raw_gradients()) n = std::max(n, std::abs(g));
  for (int fc = 0; fc < f.grid().faces(); ++fc)
    if (f.interior(fc)) n = std::max(n, f.mismatch(fc).norm());
  return n;
}

// ---------------------------------------------------------------------------

std::vector<BulkCellResult> c1_results;

void criterion1() {
  const BulkDensity w = layered_w();
  const SurfaceDensity psi = unit_psi();
  const auto t0 = std::chrono::steady_clock::now();
  const DensityEstimate e =
      estimate_Hhom(Mat::scalar(0.0), Mat::scalar(1.0), {1, 2, 4}, w, psi, 64, SolverParams{}, 1, &c1_results);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const double closed = closed_form_layered_1d({1.0, 2.0}, 2.0, 0.0, 1.0, 1.0);
  const CoarseSearchResult cs = coarse_search_bulk(spec_1d(0.0, 1.0, 1, 4), w, psi);
  const double rel = std::abs(e.value - kSeven3) / kSeven3;
  const bool pass = rel <= 0.02 && std::abs(closed - kSeven3) <= 1e-12 && cs.value >= e.value - 1e-9 &&
                    std::abs(cs.value - closed) / closed <= 0.02 && secs < 60.0;
  report(1, "layered 1D bulk = 7/3", pass,
         fmt("H=%.10g closed=%.10g coarse=%.10g", e.value, closed, cs.value) + fmt(" rel=%.2e t=%.2fs", rel, secs));
}

void criterion2() {
  const BulkDensity w = BulkDensity::power(CoefficientField::constant(1.3), 2.0);
  const SurfaceDensity psi(CoefficientField::constant(0.8));
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  double worst_val = 0.0;
  double worst_norm = 0.0;
  for (int s = 0; s < 5; ++s) {
    BulkCellSpec spec;
    spec.A = Mat(2, 2);
    for (int i = 0; i < 4; ++i) spec.A.flat(i) = g(rng);
    spec.B = spec.A;
    spec.k = 1;
    spec.m = 4;
    spec.tau = Vec(2);
    spec.solver.restarts = 2;
    spec.solver.seed = static_cast<std::uint64_t>(s);
    const BulkCellResult r = solve_mk(spec, w, psi);
    const double wa = eval_bulk(w, Vec(2), spec.A);
    worst_val = std::max(worst_val, std::abs(r.value - wa));
    worst_norm = std::max(worst_norm, field_norm(r.field));
  }
  report(2, "homogeneous convex A=B", worst_val <= 1e-6 && worst_norm <= 1e-6,
         fmt("max|m-W(A)|=%.2e max field norm=%.2e", worst_val, worst_norm));
}

void criterion3() {
  const BulkDensity w = BulkDensity::power(CoefficientField::trigonometric(2.0, 1.0), 2.0);
  const SurfaceDensity psi(CoefficientField::constant(0.7));
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  double worst_rel = 0.0;
  double worst_avg = -1e300;
  for (int s = 0; s < 5; ++s) {
    BulkCellSpec spec;
    spec.A = Mat(2, 1);
    spec.B = Mat(2, 1);
    for (int i = 0; i < 2; ++i) {
      spec.A.flat(i) = g(rng);
      spec.B.flat(i) = g(rng);
    }
    spec.m = 32;
    spec.tau = Vec(1);
    spec.solver.seed = static_cast<std::uint64_t>(s);
    spec.k = 1;
    const BulkCellResult r1 = solve_mk(spec, w, psi);
    spec.k = 2;
    const BulkCellResult r2 = solve_mk(spec, w, psi);
    worst_rel = std::max(worst_rel, std::abs(r1.value - r2.value) / r1.value);
    const DiscreteSBVField avg = average_translates(r2.field);
    const double e_avg = energy(avg, w, psi, spec.A, Vec(1)).total();
    worst_avg = std::max(worst_avg, e_avg - r2.value);
  }
  report(3, "convex: m1 = m2, averaging", worst_rel <= 0.03 && worst_avg <= 1e-9,
         fmt("max|m1-m2|/m1=%.2e max(E(avg)-m2)=%.2e", worst_rel, worst_avg));
}

void criterion4() {
  const BulkDensity w = layered_w();
  const SurfaceDensity psi = unit_psi();
  const int m = 16;
  std::vector<Vec> taus;
  for (int j = 0; j < 4; ++j) taus.emplace_back(1, static_cast<double>(j) / m);
  const TranslationReport lat =
      check_translation_invariance(Mat::scalar(0.0), Mat::scalar(1.0), taus, 2, w, psi, m, SolverParams{});

  // Off-lattice half-period shift on an odd grid.
  const int mo = 15;
  const BulkDensity wt = BulkDensity::power(CoefficientField::trigonometric(2.0, 1.0), 2.0);
  std::vector<double> dev;
  for (int k : {1, 2, 4}) {
    BulkCellSpec s = spec_1d(0.0, 1.0, k, mo);
    const double v0 = solve_mk(s, wt, psi).value;
    s.tau = Vec(1, 0.5);
    const double vt = solve_mk(s, wt, psi).value;
    dev.push_back(std::abs(vt - v0));
  }
  bool mono = true;
  for (std::size_t i = 1; i < dev.size(); ++i) mono = mono && dev[i] <= dev[i - 1] + 1e-9;
  report(4, "translation invariance", lat.passed && lat.max_deviation <= 1e-9 && mono,
         fmt("lattice dev=%.2e  half-shift dev k=1,2,4: %.2e %.2e", lat.max_deviation, dev[0], dev[1]) +
             fmt(" %.2e", dev[2]));
}

void criterion5() {
  const double c = 1.7;
  const SurfaceDensity psi(CoefficientField::constant(c));
  const Vec lambda(2, 0.6, -0.9);
  const double expect = c * lambda.norm();
  double worst = 0.0;
  const std::vector<Vec> nus{Vec(2, 1.0, 0.0), Vec(2, 0.0, 1.0), Vec(2, 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0))};
  for (const Vec& nu : nus)
    for (int k : {1, 2, 4, 8})
      for (int m : {2, 4, 8, 16}) {
        const SurfaceCellResult r = solve_gk({lambda, nu, k, m, Vec(2)}, psi);
        worst = std::max(worst, std::abs(r.value - expect));
      }
  double worst_enum = 0.0;
  int grids = 0;
  for (const Vec& nu : nus)
    for (int m : {2, 3}) {
      const SurfaceCellSpec s{lambda, nu, 1, m, Vec(2)};
      OracleBudget b;
      b.max_cells = 12;
      worst_enum = std::max(worst_enum, std::abs(solve_gk(s, psi).value - enumerate_two_phase(s, psi, b).value));
      ++grids;
    }
  for (int km : {2, 4, 6, 12}) {
    const SurfaceCellSpec s{Vec(1, 1.5), Vec(1, 1.0), 1, km, Vec(1)};
    OracleBudget b;
    b.max_cells = 12;
    worst_enum = std::max(worst_enum, std::abs(solve_gk(s, psi).value - enumerate_two_phase(s, psi, b).value));
    ++grids;
  }
  report(5, "constant psi: g_k = c|lambda|", worst <= 1e-12 && worst_enum <= 1e-12,
         fmt("max dev=%.2e  vs enumeration (%g grids)=%.2e", worst, grids, worst_enum));
}

SurfaceDensity random_surface(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.5, 3.0);
  std::uniform_int_distribution<int> fam(0, 3);
  const double eta = std::uniform_real_distribution<double>(0.0, 0.5)(rng);
  switch (fam(rng)) {
    case 0:
      return SurfaceDensity(CoefficientField::constant(u(rng)), eta);
    case 1: {
      const double a = u(rng);
      return SurfaceDensity(CoefficientField::layered({a, u(rng)}, static_cast<int>(rng() % 2)), eta);
    }
    case 2: {
      const double a = u(rng);
      return SurfaceDensity(CoefficientField::checkerboard(a, u(rng)), eta);
    }
    default: {
      const double mean = u(rng) + 1.0;
      return SurfaceDensity(CoefficientField::trigonometric(mean, 0.9 * mean * std::uniform_real_distribution<double>(0.0, 1.0)(rng)), eta);
    }
  }
}

void criterion6() {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> g;
  const std::vector<Vec> nus{Vec(2, 1.0, 0.0), Vec(2, 0.0, 1.0), Vec(2, 0.6, 0.8), Vec(2, -0.8, 0.6),
                             Vec(2, 1.0 / std::sqrt(2.0), -1.0 / std::sqrt(2.0))};
  int growth = 0, homog = 0, sym = 0, dbl = 0;
  double worst_sym = 0.0;
  const int m = 4;
  for (int t = 0; t < 20; ++t) {
    const SurfaceDensity psi = random_surface(rng);
    const Vec lambda(2, g(rng), g(rng));
    const Vec nu = nus[rng() % nus.size()];
    const int k = 1;
    const double v = solve_gk({lambda, nu, k, m, Vec(2)}, psi).value;
    const double lo = psi.lower_constant() * lambda.norm();
    const double hi = psi.upper_constant() * lambda.norm();
    if (v >= lo - 1e-12 && v <= hi + 1e-12) ++growth;
    bool h_ok = true;
    for (double s : {0.25, 2.0, 8.0}) h_ok = h_ok && solve_gk({s * lambda, nu, k, m, Vec(2)}, psi).value == s * v;
    if (h_ok) ++homog;
    const SymmetryReport sr = check_surface_symmetry(lambda, nu, k, psi, m);
    worst_sym = std::max(worst_sym, sr.deviation);
    if (sr.deviation <= 1e-12) ++sym;
    const double v2 = solve_gk({lambda, nu, 2 * k, m, Vec(2)}, psi).value;
    if (v2 <= v + 1e-12) ++dbl;
  }
  report(6, "surface structure (20 draws)", growth == 20 && homog == 20 && sym == 20 && dbl == 20,
         fmt("growth %g/20 homogeneity %g/20 ", growth, homog) + fmt("symmetry %g/20 (max %.1e) ", sym, worst_sym) +
             fmt("doubling %g/20", dbl));
}

void criterion7() {
  const SurfaceDensity psi(CoefficientField::layered({1.0, 3.0}));
  const DensityEstimate e = estimate_hhom(Vec(1, 1.0), Vec(2, 1.0, 0.0), {1, 2, 4, 8}, psi, 4);
  bool mono = true;
  for (std::size_t i = 1; i < e.per_k.size(); ++i) mono = mono && e.per_k[i] <= e.per_k[i - 1] + 1e-12;
  const double v8 = e.per_k.back();
  const double rel = std::abs(v8 - 1.0);
  report(7, "layered surface along layers", rel <= 0.10 && mono,
         fmt("g_8=%.10g rel=%.2e per-k nonincreasing=%g", v8, rel, mono ? 1.0 : 0.0));
}

void criterion8() {
  const SawtoothSequence s({Mat::scalar(0.0), Vec(1), Mat::scalar(1.0)});
  std::vector<double> eps, l1;
  double worst_l1 = 0.0;
  double tv_spread = 0.0;
  const double tv0 = s.total_variation(4);
  for (int n = 4; n <= 256; n *= 2) {
    const double d = s.l1_distance(n);
    eps.push_back(1.0 / n);
    l1.push_back(d);
    worst_l1 = std::max(worst_l1, std::abs(d - 1.0 / (2.0 * n)));
    tv_spread = std::max(tv_spread, std::abs(s.total_variation(n) - tv0));
  }
  const double slope = loglog_slope(eps, l1);
  report(8, "sawtooth convergence", worst_l1 <= 1e-12 && std::abs(slope - 1.0) <= 0.05 && tv_spread <= 1e-12,
         fmt("max|L1-1/(2n)|=%.1e slope=%.6f TV spread=%.1e", worst_l1, slope, tv_spread));
}

void criterion9() {
  const BulkDensity w = layered_w();
  const SurfaceDensity psi = unit_psi();
  double worst = 0.0;
  for (const BulkCellResult& r : c1_results)
    for (int n : {1, 2, 4}) {
      const EnergyPoint p = eval_recovery_energy(r.field, Mat::scalar(0.0), n, w, psi);
      worst = std::max(worst, std::abs(p.total - r.value));
    }
  const SawtoothSequence s({Mat::scalar(0.0), Vec(1), Mat::scalar(1.0)});
  const auto pts = eval_sequence_energy(s, [](int n) { return n; }, w, psi, {4, 16, 64});
  double lowest = pts.front().total;
  for (const auto& p : pts) lowest = std::min(lowest, p.total);
  const DensityEstimate e = estimate_Hhom(Mat::scalar(0.0), Mat::scalar(1.0), {1, 2, 4}, w, psi, 64, SolverParams{});
  const bool pass = !c1_results.empty() && worst <= 1e-9 && lowest >= e.value * 0.98;
  report(9, "recovery and lower bound", pass,
         fmt("max|E_eps(recovery)-m_k|=%.2e  sawtooth E=%.6g >= 0.98 H=%.6g", worst, lowest, 0.98 * e.value));
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void criterion10() {
  // Gradient check over density families.
  std::mt19937_64 rng(10);
  std::normal_distribution<double> g;
  const SurfaceDensity psi(CoefficientField::checkerboard(1.0, 2.0), 0.3);
  const std::vector<BulkDensity> families{
      BulkDensity::power(CoefficientField::constant(1.5), 2.0),
      BulkDensity::power(CoefficientField::layered({1.0, 2.0, 4.0}), 3.0),
      BulkDensity::power(CoefficientField::checkerboard(1.0, 5.0), 2.5),
      BulkDensity::power(CoefficientField::trigonometric(2.0, 1.0), 2.0),
      BulkDensity::double_well(CoefficientField::constant(1.0), 0.5 * Mat::identity(2), 2.0)};
  double worst_fd = 0.0;
  for (const BulkDensity& w : families) {
    const int d = w.form() == BulkDensity::Form::DoubleWell ? 2 : 1;
    const Grid grid(2, d, 1, 3);
    for (int t = 0; t < 10; ++t) {
      DiscreteSBVField f(grid);
      for (double& v : f.raw_values()) v = g(rng);
      for (double& v : f.raw_gradients()) v = g(rng);
      Mat A(d, 2);
      for (int i = 0; i < A.size(); ++i) A.flat(i) = 0.5 * g(rng);
      worst_fd = std::max(worst_fd, fd_gradient_check(f, w, psi, A, Vec(2, 0.1, 0.3), 1e-6).max_relative_error);
    }
  }

  // Byte-identical store across reruns with different job counts.
  const fs::path root = fs::temp_directory_path() / "sdhom_acceptance";
  fs::remove_all(root);
  nlohmann::json j = nlohmann::json::parse(R"({
    "kind": "bulk",
    "density": {"bulk": {"family": "trigonometric", "mean": 2.0, "amplitude": 1.0, "p": 2},
                "surface": {"family": "constant", "c": 1.0}},
    "A": [0], "B": [0.5, 1.5], "k_list": [1, 2], "m": 16, "seed": 5
  })");
  std::vector<std::string> csv;
  for (int jobs : {1, 4}) {
    j["out"] = (root / ("run" + std::to_string(jobs))).string();
    (void)run_experiment(parse_config(j), {jobs, "fixed"});
    csv.push_back(slurp(root / ("run" + std::to_string(jobs)) / "bulk.csv"));
  }
  j["out"] = (root / "run1").string();
  (void)run_experiment(parse_config(j), {2, "fixed"});
  csv.push_back(slurp(root / "run1" / "bulk.csv"));
  const bool identical = !csv[0].empty() && csv[0] == csv[1] && csv[0] == csv[2];

  // Refinement m -> 2m.
  const BulkDensity wt = BulkDensity::power(CoefficientField::trigonometric(2.0, 1.0), 2.0);
  const SurfaceDensity pu = unit_psi();
  double worst_ref = -1e300;
  for (double B : {0.5, 1.5})
    for (int m : {8, 16, 32}) {
      const double vm = solve_mk(spec_1d(0.0, B, 1, m), wt, pu).value;
      const double v2 = solve_mk(spec_1d(0.0, B, 1, 2 * m), wt, pu).value;
      worst_ref = std::max(worst_ref, (v2 - vm) / vm);
    }
  report(10, "fd gradients, determinism, refinement", worst_fd <= 1e-5 && identical && worst_ref <= 1e-3,
         fmt("max fd err=%.2e identical CSV=%g max rel increase m->2m=%.2e", worst_fd, identical ? 1.0 : 0.0,
             worst_ref));
}

}  // namespace

int main() {
  const std::vector<std::function<void()>> criteria{criterion1, criterion2, criterion3, criterion4, criterion5,
                                                    criterion6, criterion7, criterion8, criterion9, criterion10};
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    try {
      criteria[i]();
    } catch (const std::exception& e) {
      report(static_cast<int>(i) + 1, "exception", false, e.what());
    }
  }
  std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
