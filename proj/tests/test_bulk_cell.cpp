#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "sdhom/bulk_cell.hpp"
#include "sdhom/field.hpp"
#include "sdhom/oracle.hpp"

using namespace sdh;

namespace {

BulkCellSpec spec_1d(double A, double B, int k, int m) {
  BulkCellSpec s;
  s.A = Mat::scalar(A);
  s.B = Mat::scalar(B);
  s.k = k;
  s.m = m;
  s.tau = Vec(1);
  s.solver.restarts = 2;
  return s;
}

}  // namespace

TEST_CASE("1D layered cell matches the closed form") {
  const BulkDensity w = BulkDensity::power(CoefficientField::layered({1.0, 2.0}), 2.0);
  const SurfaceDensity psi(CoefficientField::constant(1.0));
  for (double B : {0.0, 0.5, 1.0}) {
    const double expect = closed_form_layered_1d({1.0, 2.0}, 2.0, 0.0, B, 1.0);
    for (int k : {1, 2}) {
      const BulkCellResult r = solve_mk(spec_1d(0.0, B, k, 16), w, psi);
      CHECK(r.converged);
      CHECK(r.value == doctest::Approx(expect).epsilon(1e-6));
      CHECK(mean_gradient(r.field)(0, 0) == doctest::Approx(B - 0.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("cell value is the re-evaluated field energy") {
  const BulkDensity w = BulkDensity::power(CoefficientField::layered({1.0, 2.0}), 2.0);
  const SurfaceDensity psi(CoefficientField::constant(1.0));
  const BulkCellResult r = solve_mk(spec_1d(0.0, 1.0, 2, 8), w, psi);
  const EnergySplit e = energy(r.field, w, psi, Mat::scalar(0.0), Vec(1));
  CHECK(r.value == doctest::Approx(e.total() / 2.0).epsilon(1e-12));
  CHECK(r.bulk_part + r.surface_part == doctest::Approx(r.value).epsilon(1e-12));
  CHECK(r.field.max_inactive_mismatch() <= 1e-9);
}

TEST_CASE("homogeneous convex density with A = B gives W(A)") {
  const BulkDensity w = BulkDensity::power(CoefficientField::constant(1.5), 2.0);
  const SurfaceDensity psi(CoefficientField::constant(1.0));
  BulkCellSpec s;
  s.A = Mat(1, 2);
  s.A(0, 0) = 0.4;
  s.A(0, 1) = -0.3;
  s.B = s.A;
  s.k = 1;
  s.m = 4;
  s.tau = Vec(2);
  s.solver.restarts = 1;
  const BulkCellResult r = solve_mk(s, w, psi);
  CHECK(r.value == doctest::Approx(eval_bulk(w, Vec(2), s.A)).epsilon(1e-9));
}

TEST_CASE("estimate_Hhom takes the minimum over k and keeps k order") {
  const BulkDensity w = BulkDensity::power(CoefficientField::layered({1.0, 2.0}), 2.0);
  const SurfaceDensity psi(CoefficientField::constant(1.0));
  SolverParams p;
  p.restarts = 2;
  std::vector<BulkCellResult> results;
  const DensityEstimate e =
      estimate_Hhom(Mat::scalar(0.0), Mat::scalar(1.0), {1, 2, 4}, w, psi, 8, p, 3, &results);
  REQUIRE(e.per_k.size() == 3);
  CHECK(results.size() == 3);
  CHECK(e.ks == std::vector<int>{1, 2, 4});
  double mn = e.per_k[0];
  for (double v : e.per_k) mn = std::min(mn, v);
  CHECK(e.value == mn);
  CHECK(e.envelope.back() == mn);
  CHECK_FALSE(e.monotonicity_violation);

  const DensityEstimate serial = estimate_Hhom(Mat::scalar(0.0), Mat::scalar(1.0), {1, 2, 4}, w, psi, 8, p, 1);
  CHECK(serial.per_k == e.per_k);
}

TEST_CASE("solver is deterministic for a fixed seed") {
  const BulkDensity w = BulkDensity::power(CoefficientField::trigonometric(2.0, 1.0), 2.0);
  const SurfaceDensity psi(CoefficientField::constant(0.5));
  BulkCellSpec s = spec_1d(0.2, 1.3, 2, 8);
  s.solver.seed = 42;
  const BulkCellResult a = solve_mk(s, w, psi);
  const BulkCellResult b = solve_mk(s, w, psi);
  CHECK(a.value == b.value);
  CHECK(a.field.raw_values() == b.field.raw_values());
}

TEST_CASE("lattice translations leave the cell value unchanged") {
  const BulkDensity w = BulkDensity::power(CoefficientField::layered({1.0, 2.0}), 2.0);
  const SurfaceDensity psi(CoefficientField::constant(1.0));
  SolverParams p;
  p.restarts = 2;
  const int m = 8;
  std::vector<Vec> taus;
  for (int j = 0; j < 3; ++j) taus.emplace_back(1, static_cast<double>(j) / m);
  const TranslationReport r =
      check_translation_invariance(Mat::scalar(0.0), Mat::scalar(1.0), taus, 1, w, psi, m, p);
  CHECK(r.lattice_aligned);
  CHECK(r.tolerance == 1e-9);
  CHECK(r.passed);
  CHECK(r.max_deviation <= 1e-9);
}

TEST_CASE("average of unit translates is Q-periodic with the same mean gradient") {
  const Grid g(1, 1, 2, 4);
  DiscreteSBVField f(g);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  for (int c = 0; c < g.cells(); ++c) {
    f.set_value(c, Vec(1, n(rng)));
    f.set_gradient(c, Mat::scalar(n(rng)));
  }
  const DiscreteSBVField v = average_translates(f);
  CHECK(v.grid().k == 1);
  CHECK(v.grid().m == 4);
  CHECK(mean_gradient(v)(0, 0) == doctest::Approx(mean_gradient(f)(0, 0)).epsilon(1e-14));
  for (int c = 0; c < 4; ++c)
    CHECK(v.value(c)[0] == doctest::Approx(0.5 * (f.value(c)[0] + f.value(c + 4)[0])).epsilon(1e-14));
}

TEST_CASE("energy model gradient agrees with finite differences") {
  const Grid g(2, 1, 1, 3);
  DiscreteSBVField f(g);
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n;
  for (int c = 0; c < g.cells(); ++c) {
    f.set_value(c, Vec(1, n(rng)));
    Mat gr(1, 2);
    gr(0, 0) = n(rng);
    gr(0, 1) = n(rng);
    f.set_gradient(c, gr);
  }
  const BulkDensity w = BulkDensity::power(CoefficientField::checkerboard(1.0, 3.0), 2.0);
  const SurfaceDensity psi(CoefficientField::layered({1.0, 2.0}), 0.3);
  const FdReport rep = fd_gradient_check(f, w, psi, Mat(1, 2), Vec(2), 1e-6);
  CHECK(rep.gradient_norm > 0.0);
  CHECK(rep.max_relative_error <= 1e-5);
}
