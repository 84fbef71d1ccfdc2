#include <doctest.h>

#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

#include "sdhom/field.hpp"

using namespace sdh;

namespace {

DiscreteSBVField random_field(const Grid& g, std::uint64_t seed, bool periodic = true) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  DiscreteSBVField f(g, periodic);
  for (int c = 0; c < g.cells(); ++c) {
    Vec v(g.d);
    Mat m(g.d, g.N);
    for (int a = 0; a < g.d; ++a) {
      v[a] = n(rng);
      for (int i = 0; i < g.N; ++i) m(a, i) = n(rng);
    }
    f.set_value(c, v);
    f.set_gradient(c, m);
  }
  for (int fc = 0; fc < g.faces(); ++fc) f.set_active(fc, true);
  return f;
}

}  // namespace

TEST_CASE("grid numbering and geometry") {
  const Grid g(2, 1, 2, 3);
  CHECK(g.per_axis() == 6);
  CHECK(g.cells() == 36);
  CHECK(g.faces() == 72);
  for (int c = 0; c < g.cells(); ++c) CHECK(g.index(g.coords(c)) == c);
  CHECK(g.coords(7)[0] == 1);
  CHECK(g.coords(7)[1] == 1);
  const int f = 5 * 2 + 0;  // +e1 face of cell (5, 0): wraps to (0, 0)
  CHECK(g.is_wrap(f));
  CHECK(g.face_plus(f) == 0);
  CHECK(g.face_midpoint(f)[0] == doctest::Approx(2.0));
}

TEST_CASE("mean gradient") {
  const Grid g(2, 2, 1, 3);
  CHECK(mean_gradient(DiscreteSBVField(g)).norm() == 0.0);

  const DiscreteSBVField f = random_field(g, 5);
  Mat direct(2, 2);
  for (int c = 0; c < g.cells(); ++c) direct += f.gradient(c);
  direct *= 1.0 / g.cells();
  CHECK((mean_gradient(f) - direct).norm() <= 1e-13);

  // 1D sawtooth with slope b and one jump per unit length.
  const Grid g1(1, 1, 3, 4);
  DiscreteSBVField saw(g1);
  const double b = 0.7;
  for (int c = 0; c < g1.cells(); ++c) {
    const double x = g1.center(c)[0];
    saw.set_value(c, Vec(1, b * (x - std::floor(x))));
    saw.set_gradient(c, Mat::scalar(b));
  }
  CHECK(mean_gradient(saw)(0, 0) == doctest::Approx(b).epsilon(1e-15));
  const auto jumps = jump_records(saw);
  CHECK(jumps.size() == 3);
  for (const auto& j : jumps) CHECK(j.jump[0] == doctest::Approx(-b));
}

TEST_CASE("two-phase field split by a vertical line jumps on exactly k m faces") {
  const int k = 2;
  const int m = 3;
  const Grid g(2, 1, k, m);
  DiscreteSBVField f(g, false);
  const double lambda = 1.25;
  for (int c = 0; c < g.cells(); ++c) f.set_value(c, Vec(1, g.center(c)[0] < 1.0 ? 0.0 : lambda));
  const auto rec = jump_records(f);
  CHECK(rec.size() == static_cast<std::size_t>(k * m));
  for (const auto& r : rec) {
    CHECK(r.midpoint[0] == doctest::Approx(1.0));
    CHECK(r.normal[0] == 1.0);
    CHECK(r.jump[0] == lambda);
    CHECK(r.area == doctest::Approx(1.0 / m));
  }
  // The periodic field also jumps back across the wrap faces.
  DiscreteSBVField p(g, true);
  for (int c = 0; c < g.cells(); ++c) p.set_value(c, f.value(c));
  CHECK(jump_records(p).size() == static_cast<std::size_t>(2 * k * m));
}

TEST_CASE("energy is invariant under face orientation flips") {
  const Grid g(2, 2, 1, 3);
  DiscreteSBVField f = random_field(g, 9);
  const BulkDensity w = BulkDensity::power(CoefficientField::checkerboard(1.0, 2.0), 2.0);
  const SurfaceDensity psi(CoefficientField::layered({1.0, 3.0}), 0.4);
  Mat A(2, 2);
  A(0, 1) = 0.3;
  const EnergySplit before = energy(f, w, psi, A, Vec(2, 0.1, 0.2));
  for (int fc = 0; fc < g.faces(); ++fc) f.flip_orientation(fc);
  const EnergySplit after = energy(f, w, psi, A, Vec(2, 0.1, 0.2));
  CHECK(after.bulk == before.bulk);
  CHECK(after.surface == doctest::Approx(before.surface).epsilon(1e-14));
}

TEST_CASE("energy over a partition of boxes adds up") {
  const Grid g(2, 1, 2, 2);
  const DiscreteSBVField f = random_field(g, 3);
  const BulkDensity w = BulkDensity::power(CoefficientField::trigonometric(2.0, 1.0), 3.0);
  const SurfaceDensity psi(CoefficientField::constant(0.5));
  const Vec tau(2);
  const EnergySplit whole = energy(f, w, psi, Mat(1, 2), tau);
  double parts = 0.0;
  for (int bx = 0; bx < 2; ++bx)
    for (int by = 0; by < 2; ++by) {
      CellBox box;
      box.lo = {2 * bx, 2 * by};
      box.hi = {2 * bx + 2, 2 * by + 2};
      parts += energy(f, w, psi, Mat(1, 2), tau, &box).total();
    }
  CHECK(parts == doctest::Approx(whole.total()).epsilon(1e-14));
}

TEST_CASE("snapshot round trip") {
  const Grid g(2, 2, 1, 2);
  DiscreteSBVField f = random_field(g, 21, true);
  f.set_active(3, false);
  const DiscreteSBVField back = from_snapshot(to_snapshot(f));
  CHECK(back.grid() == g);
  CHECK(back.periodic() == f.periodic());
  for (int c = 0; c < g.cells(); ++c) {
    CHECK(back.value(c) == f.value(c));
    CHECK(back.gradient(c) == f.gradient(c));
  }
}
