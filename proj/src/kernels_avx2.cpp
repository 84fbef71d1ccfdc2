// AVX2/FMA variant of the weighted power-norm kernel. This translation unit is
// compiled with -mavx2 -mfma on x86-64; it is only entered after the CPUID
// check in available().

#include <cmath>

#include "sdhom/kernels.hpp"

#if defined(__x86_64__) && defined(__AVX2__) && defined(__FMA__)
#include <immintrin.h>
#define SDHOM_HAVE_AVX2 1
#else
#define SDHOM_HAVE_AVX2 0
#endif

namespace sdh::kernels::avx2 {

#if SDHOM_HAVE_AVX2

bool available() {
  static const bool ok = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return ok;
}

double weighted_power_norm(const double* weight, Components xi, std::size_t n, double p,
                           GradientOut grad) {
  const bool want_grad = grad.data[0] != nullptr;
  const int nc = xi.count;
  const __m256d zero = _mm256_setzero_pd();
  __m256d acc = zero;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d comp[kMaxComponents];
    __m256d s = zero;
    for (int c = 0; c < nc; ++c) {
      comp[c] = _mm256_loadu_pd(xi.data[c] + i);
      s = _mm256_fmadd_pd(comp[c], comp[c], s);
    }
    const __m256d w = _mm256_loadu_pd(weight + i);
    __m256d e;
    __m256d factor;
    if (p == 2.0) {
      e = _mm256_mul_pd(w, s);
      factor = _mm256_add_pd(w, w);
    } else if (p == 1.0) {
      const __m256d r = _mm256_sqrt_pd(s);
      const __m256d nonzero = _mm256_cmp_pd(s, zero, _CMP_GT_OQ);
      e = _mm256_mul_pd(w, r);
      factor = _mm256_and_pd(nonzero, _mm256_div_pd(w, r));
    } else {
      alignas(32) double sl[4];
      alignas(32) double rp2[4];
      _mm256_store_pd(sl, s);
      for (int l = 0; l < 4; ++l) rp2[l] = sl[l] > 0.0 ? std::pow(std::sqrt(sl[l]), p - 2.0) : 0.0;
      const __m256d r2 = _mm256_load_pd(rp2);
      e = _mm256_mul_pd(_mm256_mul_pd(w, r2), s);
      factor = _mm256_mul_pd(_mm256_mul_pd(w, _mm256_set1_pd(p)), r2);
    }
    acc = _mm256_add_pd(acc, e);
    if (want_grad)
      for (int c = 0; c < nc; ++c) _mm256_storeu_pd(grad.data[c] + i, _mm256_mul_pd(factor, comp[c]));
  }
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, acc);
  double total = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
  if (i < n) {
    Components tail = xi;
    GradientOut gtail = grad;
    for (int c = 0; c < nc; ++c) {
      tail.data[c] = xi.data[c] + i;
      if (want_grad) gtail.data[c] = grad.data[c] + i;
    }
    total += scalar::weighted_power_norm(weight + i, tail, n - i, p, gtail);
  }
  return total;
}

#else

bool available() { return false; }

double weighted_power_norm(const double* weight, Components xi, std::size_t n, double p,
                           GradientOut grad) {
  return scalar::weighted_power_norm(weight, xi, n, p, grad);
}

#endif

}  // namespace sdh::kernels::avx2
