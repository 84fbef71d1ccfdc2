#pragma once

// Periodic bulk and surface energy densities W(x, xi) and psi(x, lambda, nu),
// plus the sampled validator for the standing structural assumptions.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sdhom/linalg.hpp"

namespace sdh {

/// Q-periodic positive coefficient a: unit cube -> (0, inf).
///
/// Built-in profiles:
///  - constant:      a(x) = values[0]
///  - layered:       equal-width layers along `axis`, a = values[floor(L * <x_axis>)]
///  - checkerboard:  `cells` squares per axis, a = values[(sum_i floor(cells * <x_i>)) mod 2]
///  - trigonometric: a(x) = mean + amplitude * (1/N) sum_i cos(2 pi x_i)
///
/// Every evaluation reduces x to its fractional part <x> = x - floor(x) first.
class CoefficientField {
 public:
  enum class Kind { Constant, Layered, Checkerboard, Trigonometric };

  static CoefficientField constant(double value);
  static CoefficientField layered(std::vector<double> values, int axis = 0);
  static CoefficientField checkerboard(double even, double odd, int cells = 2);
  static CoefficientField trigonometric(double mean, double amplitude);

  double operator()(const Vec& x) const;

  Kind kind() const { return kind_; }
  const std::vector<double>& values() const { return values_; }
  int axis() const { return axis_; }
  int cells() const { return cells_; }
  double mean_param() const { return mean_; }
  double amplitude() const { return amplitude_; }

  double lower_bound() const;
  double upper_bound() const;
  /// Arithmetic mean over Q.
  double arithmetic_mean() const;

  std::string kind_name() const;

 private:
  Kind kind_ = Kind::Constant;
  std::vector<double> values_{1.0};
  int axis_ = 0;
  int cells_ = 2;
  double mean_ = 1.0;
  double amplitude_ = 0.0;
};

/// Growth and Lipschitz metadata carried with a bulk density.
struct BulkConstants {
  double upper = 0.0;        // C_W: p-Lipschitz and p-growth from above
  double coercive = 0.0;     // C'_W
  double coercive_shift = 0.0;  // c'_W
};

/// W(x, xi) = a(x) |xi|^p               (power form)
/// W(x, xi) = a(x) min(|xi-S|,|xi+S|)^p  (double-well form, nonconvex)
class BulkDensity {
 public:
  enum class Form { Power, DoubleWell };

  static BulkDensity power(CoefficientField a, double p = 2.0);
  static BulkDensity double_well(CoefficientField a, Mat well, double p = 2.0);

  /// Evaluates W(x, xi); x is reduced modulo Q.
  double operator()(const Vec& x, const Mat& xi) const;
  /// Derivative with respect to xi. At the tie of the double well, the
  /// branch of the first well is used.
  Mat gradient(const Vec& x, const Mat& xi) const;

  Form form() const { return form_; }
  const CoefficientField& coefficient() const { return a_; }
  double exponent() const { return p_; }
  const Mat& well() const { return well_; }
  const BulkConstants& constants() const { return constants_; }
  /// Overrides the default metadata (the validator then checks it).
  void set_constants(const BulkConstants& c) { constants_ = c; }
  bool convex() const { return form_ == Form::Power; }

 private:
  BulkDensity(Form f, CoefficientField a, double p, Mat well);
  void derive_constants();

  Form form_;
  CoefficientField a_;
  double p_;
  Mat well_;
  BulkConstants constants_;
};

/// psi(x, lambda, nu) = c(x) |lambda| (1 + eta |nu . e_1|).
///
/// Positively 1-homogeneous, subadditive and even in (lambda, nu) for every
/// built-in coefficient, so psi = rate(x, nu) |lambda|.
class SurfaceDensity {
 public:
  explicit SurfaceDensity(CoefficientField c, double anisotropy = 0.0);

  double operator()(const Vec& x, const Vec& lambda, const Vec& nu) const;
  /// psi(x, lambda, nu) / |lambda|.
  double rate(const Vec& x, const Vec& nu) const;

  const CoefficientField& coefficient() const { return c_; }
  double anisotropy() const { return eta_; }
  double lower_constant() const;  // c_psi
  double upper_constant() const;  // C_psi

 private:
  CoefficientField c_;
  double eta_;
};

/// Checked evaluation: throws std::invalid_argument on non-finite input.
double eval_bulk(const BulkDensity& w, const Vec& x, const Mat& xi);
/// Checked evaluation: throws std::invalid_argument on non-finite input or
/// |nu| != 1 beyond 1e-12.
double eval_surface(const SurfaceDensity& psi, const Vec& x, const Vec& lambda, const Vec& nu);

struct AssumptionCheck {
  std::string id;           // e.g. "H2"
  std::string description;
  std::string mode;         // "exact", "sampled" or "recorded"
  std::int64_t samples = 0;
  std::int64_t violations = 0;
  bool passed = true;
  double worst_margin = 0.0;  // max over samples of (lhs - rhs); <= tolerance passes
  std::optional<double> observed_modulus;
};

struct ValidationReport {
  int N = 1;
  int d = 1;
  std::int64_t budget = 0;
  std::uint64_t seed = 0;
  std::vector<AssumptionCheck> checks;

  bool all_passed() const;
  const AssumptionCheck& find(const std::string& id) const;
};

/// Samples every standing assumption on (W, psi) in dimension (N, d).
/// Pure in (densities, dims, budget, seed).
ValidationReport validate_assumptions(const BulkDensity& w, const SurfaceDensity& psi, int N,
                                      int d, std::int64_t budget, std::uint64_t seed);

}  // namespace sdh
