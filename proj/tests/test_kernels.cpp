#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "sdhom/kernels.hpp"

using namespace sdh;

namespace {

struct Batch {
  std::vector<double> w;
  std::vector<std::vector<double>> xi;
};

Batch make_batch(std::size_t n, int comps, std::uint64_t seed, bool with_zeros) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.5);
  std::uniform_real_distribution<double> u(0.1, 3.0);
  Batch b;
  b.w.resize(n);
  b.xi.assign(static_cast<std::size_t>(comps), std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    b.w[i] = u(rng);
    const bool zero = with_zeros && i % 5 == 2;
    for (int c = 0; c < comps; ++c) b.xi[static_cast<std::size_t>(c)][i] = zero ? 0.0 : g(rng);
  }
  return b;
}

}  // namespace

TEST_CASE("AVX2 kernel matches the scalar reference") {
  if (!kernels::avx2::available()) {
    MESSAGE("AVX2/FMA not available; equivalence test skipped");
    return;
  }
  for (int comps = 1; comps <= kernels::kMaxComponents; ++comps)
    for (std::size_t n : {std::size_t{0}, std::size_t{1}, std::size_t{3}, std::size_t{4}, std::size_t{7},
                          std::size_t{64}, std::size_t{1001}})
      for (double p : {1.0, 1.5, 2.0, 3.0, 4.0}) {
        const Batch b = make_batch(n, comps, 17 + n + static_cast<std::size_t>(comps), true);
        kernels::Components in;
        in.count = comps;
        std::vector<std::vector<double>> gs(static_cast<std::size_t>(comps), std::vector<double>(n));
        std::vector<std::vector<double>> gv(static_cast<std::size_t>(comps), std::vector<double>(n));
        kernels::GradientOut os;
        kernels::GradientOut ov;
        for (int c = 0; c < comps; ++c) {
          in.data[c] = b.xi[static_cast<std::size_t>(c)].data();
          os.data[c] = gs[static_cast<std::size_t>(c)].data();
          ov.data[c] = gv[static_cast<std::size_t>(c)].data();
        }
        const double es = kernels::scalar::weighted_power_norm(b.w.data(), in, n, p, os);
        const double ev = kernels::avx2::weighted_power_norm(b.w.data(), in, n, p, ov);
        CHECK(ev == doctest::Approx(es).epsilon(1e-13));
        for (int c = 0; c < comps; ++c)
          for (std::size_t i = 0; i < n; ++i)
            CHECK(gv[static_cast<std::size_t>(c)][i] ==
                  doctest::Approx(gs[static_cast<std::size_t>(c)][i]).epsilon(1e-13).scale(1.0));
        // Energy only, no gradient buffers.
        CHECK(kernels::avx2::weighted_power_norm(b.w.data(), in, n, p, {}) == doctest::Approx(es).epsilon(1e-13));
      }
}

TEST_CASE("scalar kernel evaluates the defining formula") {
  const std::vector<double> w{2.0, 0.5};
  const std::vector<double> x{3.0, 0.0};
  const std::vector<double> y{4.0, 0.0};
  kernels::Components in;
  in.count = 2;
  in.data[0] = x.data();
  in.data[1] = y.data();
  std::vector<double> gx(2), gy(2);
  kernels::GradientOut out;
  out.data[0] = gx.data();
  out.data[1] = gy.data();
  CHECK(kernels::scalar::weighted_power_norm(w.data(), in, 2, 2.0, out) == 50.0);
  CHECK(gx[0] == 12.0);
  CHECK(gy[0] == 16.0);
  CHECK(kernels::scalar::weighted_power_norm(w.data(), in, 2, 1.0, out) == 10.0);
  CHECK(gx[0] == doctest::Approx(1.2));
  CHECK(gx[1] == 0.0);
  CHECK(gy[1] == 0.0);
}

TEST_CASE("dispatch can be pinned to the scalar path") {
  kernels::force_scalar(true);
  CHECK(kernels::active_isa() == "scalar");
  kernels::force_scalar(false);
  CHECK((kernels::active_isa() == "avx2") == kernels::avx2::available());
}
