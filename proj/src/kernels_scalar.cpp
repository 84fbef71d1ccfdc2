#include <atomic>
#include <cmath>
#include <cstdlib>
#include <cstring>

#include "sdhom/kernels.hpp"

namespace sdh::kernels {

namespace scalar {

double weighted_power_norm(const double* weight, Components xi, std::size_t n, double p,
                           GradientOut grad) {
  const bool want_grad = grad.data[0] != nullptr;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (int c = 0; c < xi.count; ++c) s += xi.data[c][i] * xi.data[c][i];
    const double w = weight[i];
    double e = 0.0;
    double factor = 0.0;  // dE/dxi = factor * xi
    if (p == 2.0) {
      e = w * s;
      factor = 2.0 * w;
    } else if (s > 0.0) {
      const double r = std::sqrt(s);
      if (p == 1.0) {
        e = w * r;
        factor = w / r;
      } else {
        const double rp2 = std::pow(r, p - 2.0);
        e = w * rp2 * s;
        factor = w * p * rp2;
      }
    }
    total += e;
    if (want_grad)
      for (int c = 0; c < xi.count; ++c) grad.data[c][i] = factor * xi.data[c][i];
  }
  return total;
}

}  // namespace scalar

namespace {

std::atomic<int> g_forced{-1};

bool forced_scalar() {
  int f = g_forced.load(std::memory_order_relaxed);
  if (f < 0) {
    const char* env = std::getenv("SDHOM_FORCE_SCALAR");
    f = (env != nullptr && std::strcmp(env, "0") != 0 && *env != '\0') ? 1 : 0;
    g_forced.store(f, std::memory_order_relaxed);
  }
  return f == 1;
}

}  // namespace

double weighted_power_norm(const double* weight, Components xi, std::size_t n, double p,
                           GradientOut grad) {
  static const bool simd = avx2::available();
  if (simd && !forced_scalar()) return avx2::weighted_power_norm(weight, xi, n, p, grad);
  return scalar::weighted_power_norm(weight, xi, n, p, grad);
}

std::string_view active_isa() {
  return (avx2::available() && !forced_scalar()) ? "avx2" : "scalar";
}

void force_scalar(bool on) { g_forced.store(on ? 1 : 0, std::memory_order_relaxed); }

}  // namespace sdh::kernels
