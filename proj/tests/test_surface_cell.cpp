#include <doctest.h>

#include <cmath>

#include "sdhom/oracle.hpp"
#include "sdhom/surface_cell.hpp"

using namespace sdh;

TEST_CASE("rational directions") {
  const RationalDirection e1 = rational_direction(Vec(2, 1.0, 0.0));
  CHECK(e1.q == 1);
  CHECK(e1.r == 0);
  const RationalDirection diag = rational_direction(Vec(2, 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0)));
  CHECK(diag.q == 1);
  CHECK(diag.r == 1);
  CHECK(diag.length == doctest::Approx(std::sqrt(2.0)));
  const RationalDirection d34 = rational_direction(Vec(2, 0.6, -0.8));
  CHECK(d34.q == 3);
  CHECK(d34.r == -4);
  CHECK_THROWS(rational_direction(Vec(2, std::cos(1.0), std::sin(1.0))));
}

TEST_CASE("surface grid pinning follows the sign of the normal coordinate") {
  const SurfaceGrid g(2, 2, 3, rational_direction(Vec(2, 1.0, 0.0)));
  CHECK(g.cells() == 36);
  CHECK(g.side() == 2.0);
  for (int c = 0; c < g.cells(); ++c) {
    const auto ij = g.coords(c);
    const bool boundary = ij[0] == 0 || ij[0] == 5 || ij[1] == 0 || ij[1] == 5;
    if (boundary)
      CHECK(g.pin(c) == (g.normal_coordinate(c) > 0.0 ? 1 : 0));
    else
      CHECK(g.pin(c) == -1);
  }
}

TEST_CASE("constant psi gives c |lambda| for every direction") {
  const double c = 1.7;
  const SurfaceDensity psi(CoefficientField::constant(c));
  const Vec lambda(2, 0.3, -1.1);
  const double expect = c * lambda.norm();
  for (const Vec& nu : {Vec(2, 1.0, 0.0), Vec(2, 0.0, 1.0), Vec(2, 0.6, 0.8)})
    for (int k : {1, 2})
      for (int m : {2, 4}) {
        SurfaceCellSpec s{lambda, nu, k, m, Vec(2)};
        const SurfaceCellResult r = solve_gk(s, psi);
        CHECK(r.value == doctest::Approx(expect).epsilon(1e-12));
        CHECK(r.flat_cut);
      }
}

TEST_CASE("1D surface cell is a single jump") {
  const SurfaceDensity psi(CoefficientField::layered({1.0, 3.0}));
  SurfaceCellSpec s{Vec(1, 2.0), Vec(1, 1.0), 2, 4, Vec(1)};
  const SurfaceCellResult r = solve_gk(s, psi);
  CHECK(r.cut_faces == 1);
  CHECK(r.value == doctest::Approx(2.0));
}

TEST_CASE("min cut agrees with exhaustive enumeration") {
  const SurfaceDensity psi(CoefficientField::checkerboard(1.0, 2.5), 0.2);
  for (const Vec& nu : {Vec(2, 1.0, 0.0), Vec(2, 0.0, -1.0)})
    for (double tx : {0.0, 0.3}) {
      SurfaceCellSpec s{Vec(2, 1.0, 0.5), nu, 1, 4, Vec(2, tx, 0.1)};
      const SurfaceCellResult r = solve_gk(s, psi);
      const EnumerationResult e = enumerate_two_phase(s, psi);
      CHECK(r.value == doctest::Approx(e.value).epsilon(1e-12));
      const SurfaceGrid g(2, 1, 4, rational_direction(nu));
      CHECK(labeling_energy(g, r.labeling, s.lambda, psi, s.tau) == doctest::Approx(r.value).epsilon(1e-12));
    }
}

TEST_CASE("layered surface density along the layers") {
  const SurfaceDensity psi(CoefficientField::layered({1.0, 3.0}));
  const Vec lambda(2, 1.0, 0.0);
  const DensityEstimate e = estimate_hhom(lambda, Vec(2, 1.0, 0.0), {1, 2, 4}, psi, 4);
  CHECK(e.value == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_FALSE(e.monotonicity_violation);
  for (std::size_t i = 1; i < e.per_k.size(); ++i) CHECK(e.per_k[i] <= e.per_k[i - 1] + 1e-12);
}

TEST_CASE("surface value is even and homogeneous") {
  const SurfaceDensity psi(CoefficientField::trigonometric(2.0, 1.0), 0.5);
  const Vec lambda(2, 0.7, 0.2);
  const Vec nu(2, 0.6, 0.8);
  const SymmetryReport sym = check_surface_symmetry(lambda, nu, 1, psi, 4);
  CHECK(sym.passed);
  CHECK(sym.deviation <= 1e-12);
  const double v1 = solve_gk({lambda, nu, 1, 4, Vec(2)}, psi).value;
  const double v4 = solve_gk({4.0 * lambda, nu, 1, 4, Vec(2)}, psi).value;
  CHECK(v4 == 4.0 * v1);
}

TEST_CASE("km below two is rejected") {
  const SurfaceDensity psi(CoefficientField::constant(1.0));
  CHECK_THROWS(solve_gk({Vec(2, 1.0, 0.0), Vec(2, 1.0, 0.0), 1, 1, Vec(2)}, psi));
}
