#pragma once

// Data-parallel energy kernels shared by the discrete energy assembly and the
// bulk cell solver.
//
// The one hot loop in both is a weighted power of Euclidean norms,
//
//   E = sum_i w_i |xi_i|^p,   dE/dxi_i = w_i p |xi_i|^{p-2} xi_i,
//
// over up to four components per item stored structure-of-arrays. Bulk terms
// use it with w = |subcell| a(x_c) and xi = A + grad u; surface terms with
// p = 1, w = |face| rate(x_f, nu_f) and xi = [u]_f.
//
// A scalar reference and an AVX2/FMA variant are provided; the variant is
// selected once at first use from CPUID and can be pinned to scalar with
// SDHOM_FORCE_SCALAR=1 or force_scalar(true).

#include <array>
#include <cstddef>
#include <string_view>

namespace sdh::kernels {

inline constexpr int kMaxComponents = 4;

struct Components {
  int count = 1;  // components per item, 1..4
  std::array<const double*, kMaxComponents> data{};
};

struct GradientOut {
  std::array<double*, kMaxComponents> data{};  // data[0] == nullptr skips the gradient
};

using PowerNormFn = double (*)(const double* weight, Components xi, std::size_t n, double p,
                               GradientOut grad);

namespace scalar {
double weighted_power_norm(const double* weight, Components xi, std::size_t n, double p,
                           GradientOut grad);
}

namespace avx2 {
/// True when the variant was compiled in and the CPU supports AVX2 and FMA.
bool available();
double weighted_power_norm(const double* weight, Components xi, std::size_t n, double p,
                           GradientOut grad);
}  // namespace avx2

/// Dispatching entry point.
double weighted_power_norm(const double* weight, Components xi, std::size_t n, double p,
                           GradientOut grad);

std::string_view active_isa();
void force_scalar(bool on);

}  // namespace sdh::kernels
