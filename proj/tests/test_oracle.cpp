#include <doctest.h>

#include <cmath>

#include "sdhom/oracle.hpp"

using namespace sdh;

TEST_CASE("closed form for layered 1D") {
  CHECK(closed_form_layered_1d({1.0, 2.0}, 2.0, 0.0, 1.0, 1.0) == doctest::Approx(7.0 / 3.0));
  CHECK(closed_form_layered_1d({1.0}, 2.0, 0.5, 0.5, 3.0) == doctest::Approx(0.25));
  CHECK(closed_form_layered_1d({1.0, 1.0}, 3.0, 0.0, -2.0, 0.5) == doctest::Approx(9.0));
}

TEST_CASE("coarse search is an upper bound close to the closed form") {
  const BulkDensity w = BulkDensity::power(CoefficientField::layered({1.0, 2.0}), 2.0);
  const SurfaceDensity psi(CoefficientField::constant(1.0));
  BulkCellSpec s;
  s.A = Mat::scalar(0.0);
  s.B = Mat::scalar(1.0);
  s.k = 1;
  s.m = 4;
  s.tau = Vec(1);
  const CoarseSearchResult r = coarse_search_bulk(s, w, psi);
  const double exact = 7.0 / 3.0;
  CHECK(r.value >= exact - 1e-12);
  CHECK(r.value <= exact * 1.02);
  CHECK(r.bulk_part + r.surface_part == doctest::Approx(r.value));
  CHECK(r.gradients.size() == 4);
}

TEST_CASE("oracles refuse instead of truncating") {
  const SurfaceDensity psi(CoefficientField::constant(1.0));
  SurfaceCellSpec big{Vec(2, 1.0, 0.0), Vec(2, 1.0, 0.0), 2, 4, Vec(2)};
  CHECK_THROWS_AS(enumerate_two_phase(big, psi), OracleRefusal);

  const BulkDensity w = BulkDensity::power(CoefficientField::constant(1.0), 2.0);
  BulkCellSpec s;
  s.A = Mat::scalar(0.0);
  s.B = Mat::scalar(1.0);
  s.k = 4;
  s.m = 8;
  s.tau = Vec(1);
  CHECK_THROWS_AS(coarse_search_bulk(s, w, psi), OracleRefusal);

  BulkCellSpec s2 = s;
  s2.A = Mat(1, 2);
  s2.B = Mat(1, 2);
  s2.k = 1;
  s2.m = 2;
  CHECK_THROWS_AS(coarse_search_bulk(s2, w, psi), OracleRefusal);
}

TEST_CASE("enumeration tie-break is lexicographic and deterministic") {
  const SurfaceDensity psi(CoefficientField::constant(1.0));
  SurfaceCellSpec s{Vec(2, 1.0, 0.0), Vec(2, 1.0, 0.0), 1, 4, Vec(2)};
  const EnumerationResult a = enumerate_two_phase(s, psi);
  const EnumerationResult b = enumerate_two_phase(s, psi);
  CHECK(a.labeling == b.labeling);
  CHECK(a.value == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(a.labelings == 16);
}

TEST_CASE("finite-difference step bounds") {
  const Grid g(1, 1, 1, 2);
  const DiscreteSBVField f(g);
  const BulkDensity w = BulkDensity::power(CoefficientField::constant(1.0), 2.0);
  const SurfaceDensity psi(CoefficientField::constant(1.0));
  CHECK_THROWS(fd_gradient_check(f, w, psi, Mat::scalar(0.0), Vec(1), 1e-9));
  CHECK_THROWS(fd_gradient_check(f, w, psi, Mat::scalar(0.0), Vec(1), 1e-1));
}
