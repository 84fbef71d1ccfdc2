#include "sdhom/density.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>

namespace sdh {

namespace {

double frac(double t) { return t - std::floor(t); }

void require_positive(const std::vector<double>& values, const char* what) {
  if (values.empty()) throw std::invalid_argument(std::string(what) + ": no values given");
  for (double v : values)
    if (!(v > 0.0) || !std::isfinite(v))
      throw std::invalid_argument(std::string(what) + ": coefficients must be positive and finite");
}

}  // namespace

// ---------------------------------------------------------------------------
// CoefficientField

CoefficientField CoefficientField::constant(double value) {
  require_positive({value}, "constant coefficient");
  CoefficientField f;
  f.kind_ = Kind::Constant;
  f.values_ = {value};
  return f;
}

CoefficientField CoefficientField::layered(std::vector<double> values, int axis) {
  require_positive(values, "layered coefficient");
  if (axis < 0 || axis >= kMaxDim) throw std::invalid_argument("layered coefficient: axis out of range");
  CoefficientField f;
  f.kind_ = Kind::Layered;
  f.values_ = std::move(values);
  f.axis_ = axis;
  return f;
}

CoefficientField CoefficientField::checkerboard(double even, double odd, int cells) {
  require_positive({even, odd}, "checkerboard coefficient");
  if (cells < 1) throw std::invalid_argument("checkerboard coefficient: cells must be >= 1");
  CoefficientField f;
  f.kind_ = Kind::Checkerboard;
  f.values_ = {even, odd};
  f.cells_ = cells;
  return f;
}

CoefficientField CoefficientField::trigonometric(double mean, double amplitude) {
  if (!std::isfinite(mean) || !std::isfinite(amplitude) || !(mean > std::abs(amplitude)))
    throw std::invalid_argument("trigonometric coefficient: need mean > |amplitude|");
  CoefficientField f;
  f.kind_ = Kind::Trigonometric;
  f.mean_ = mean;
  f.amplitude_ = amplitude;
  f.values_ = {mean - std::abs(amplitude), mean + std::abs(amplitude)};
  return f;
}

double CoefficientField::operator()(const Vec& x) const {
  switch (kind_) {
    case Kind::Constant:
      return values_[0];
    case Kind::Layered: {
      const int axis = std::min(axis_, x.dim - 1);
      const auto layers = static_cast<double>(values_.size());
      auto idx = static_cast<std::size_t>(std::floor(layers * frac(x[axis])));
      return values_[std::min(idx, values_.size() - 1)];
    }
    case Kind::Checkerboard: {
      long parity = 0;
      for (int i = 0; i < x.dim; ++i)
        parity += static_cast<long>(std::floor(cells_ * frac(x[i])));
      return values_[static_cast<std::size_t>(parity & 1L)];
    }
    case Kind::Trigonometric: {
      double s = 0.0;
      for (int i = 0; i < x.dim; ++i) s += std::cos(2.0 * std::numbers::pi * frac(x[i]));
      return mean_ + amplitude_ * s / x.dim;
    }
  }
  return values_[0];
}

double CoefficientField::lower_bound() const {
  return *std::min_element(values_.begin(), values_.end());
}

double CoefficientField::upper_bound() const {
  return *std::max_element(values_.begin(), values_.end());
}

double CoefficientField::arithmetic_mean() const {
  switch (kind_) {
    case Kind::Constant:
      return values_[0];
    case Kind::Layered: {
      double s = 0.0;
      for (double v : values_) s += v;
      return s / static_cast<double>(values_.size());
    }
    case Kind::Checkerboard:
      return 0.5 * (values_[0] + values_[1]);
    case Kind::Trigonometric:
      return mean_;
  }
  return values_[0];
}

std::string CoefficientField::kind_name() const {
  switch (kind_) {
    case Kind::Constant: return "constant";
    case Kind::Layered: return "layered";
    case Kind::Checkerboard: return "checkerboard";
    case Kind::Trigonometric: return "trigonometric";
  }
  return "constant";
}

// ---------------------------------------------------------------------------
// BulkDensity

BulkDensity::BulkDensity(Form f, CoefficientField a, double p, Mat well)
    : form_(f), a_(std::move(a)), p_(p), well_(well) {
  if (!(p > 1.0 && p <= 4.0)) throw std::invalid_argument("bulk density: exponent p must lie in (1, 4]");
  if (!well_.finite()) throw std::invalid_argument("bulk density: well must be finite");
  derive_constants();
}

BulkDensity BulkDensity::power(CoefficientField a, double p) {
  return BulkDensity(Form::Power, std::move(a), p, Mat(1, 1));
}

BulkDensity BulkDensity::double_well(CoefficientField a, Mat well, double p) {
  return BulkDensity(Form::DoubleWell, std::move(a), p, well);
}

void BulkDensity::derive_constants() {
  const double amin = a_.lower_bound();
  const double amax = a_.upper_bound();
  const double p = p_;
  if (form_ == Form::Power) {
    // ||s|^p - |t|^p| <= (|s|^{p-1} + |t|^{p-1}) |s - t| for p <= 2, and
    // <= p max(|s|,|t|)^{p-1} |s - t| otherwise.
    constants_.upper = amax * (p <= 2.0 ? 1.0 : p);
    constants_.coercive = amin;
    constants_.coercive_shift = 0.0;
    return;
  }
  const double s = well_.norm();
  const double lip = p * std::max(1.0, std::pow(2.0, p - 2.0)) * std::max(1.0, std::pow(s, p - 1.0));
  const double grow = std::pow(2.0, p - 1.0) * std::max(1.0, std::pow(s, p));
  constants_.upper = amax * std::max(lip, grow);
  constants_.coercive = amin * std::pow(2.0, 1.0 - p);
  constants_.coercive_shift = amax * std::pow(s, p);
}

double BulkDensity::operator()(const Vec& x, const Mat& xi) const {
  const double a = a_(x);
  if (form_ == Form::Power) {
    if (p_ == 2.0) {
      double s = 0.0;
      for (int i = 0; i < xi.size(); ++i) s += xi.flat(i) * xi.flat(i);
      return a * s;
    }
    return a * std::pow(xi.norm(), p_);
  }
  const double r = std::min((xi - well_).norm(), (xi + well_).norm());
  return a * std::pow(r, p_);
}

Mat BulkDensity::gradient(const Vec& x, const Mat& xi) const {
  const double a = a_(x);
  Mat g(xi.rows, xi.cols);
  Mat base = xi;
  if (form_ == Form::DoubleWell) {
    const Mat m1 = xi - well_;
    const Mat m2 = xi + well_;
    base = m1.norm() <= m2.norm() ? m1 : m2;
  }
  const double r = base.norm();
  if (r == 0.0) return g;
  const double scale = (p_ == 2.0) ? 2.0 * a : a * p_ * std::pow(r, p_ - 2.0);
  for (int i = 0; i < xi.size(); ++i) g.flat(i) = scale * base.flat(i);
  return g;
}

// ---------------------------------------------------------------------------
// SurfaceDensity

SurfaceDensity::SurfaceDensity(CoefficientField c, double anisotropy)
    : c_(std::move(c)), eta_(anisotropy) {
  if (!(eta_ >= 0.0) || !std::isfinite(eta_))
    throw std::invalid_argument("surface density: anisotropy must be finite and >= 0");
}

double SurfaceDensity::rate(const Vec& x, const Vec& nu) const {
  return c_(x) * (1.0 + eta_ * std::abs(nu[0]));
}

double SurfaceDensity::operator()(const Vec& x, const Vec& lambda, const Vec& nu) const {
  return rate(x, nu) * lambda.norm();
}

double SurfaceDensity::lower_constant() const { return c_.lower_bound(); }

double SurfaceDensity::upper_constant() const { return c_.upper_bound() * (1.0 + eta_); }

double eval_bulk(const BulkDensity& w, const Vec& x, const Mat& xi) {
  if (!x.finite() || !xi.finite()) throw std::invalid_argument("eval_bulk: non-finite input");
  return w(x, xi);
}

double eval_surface(const SurfaceDensity& psi, const Vec& x, const Vec& lambda, const Vec& nu) {
  if (!x.finite() || !lambda.finite() || !nu.finite())
    throw std::invalid_argument("eval_surface: non-finite input");
  if (std::abs(nu.norm() - 1.0) > 1e-12) throw std::invalid_argument("eval_surface: normal is not a unit vector");
  return psi(x, lambda, nu);
}

// ---------------------------------------------------------------------------
// Validation

bool ValidationReport::all_passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const AssumptionCheck& c) { return c.passed; });
}

const AssumptionCheck& ValidationReport::find(const std::string& id) const {
  for (const auto& c : checks)
    if (c.id == id) return c;
  throw std::out_of_range("no assumption check named " + id);
}

namespace {

class Sampler {
 public:
  Sampler(int N, int d, std::uint64_t seed) : N_(N), d_(d), rng_(seed) {}

  // Dyadic points so that x + z is exact in floating point.
  Vec point() {
    std::uniform_int_distribution<std::int64_t> u(0, (std::int64_t{1} << 20) - 1);
    Vec x(N_);
    for (int i = 0; i < N_; ++i) x[i] = static_cast<double>(u(rng_)) / 1048576.0;
    return x;
  }
  Vec shift() {
    std::uniform_int_distribution<int> u(-3, 3);
    Vec z(N_);
    for (int i = 0; i < N_; ++i) z[i] = u(rng_);
    return z;
  }
  Mat matrix() {
    // Mixture of scales so both small and large |xi| are probed.
    std::uniform_int_distribution<int> pick(0, 2);
    const double scale = std::array<double, 3>{0.1, 1.0, 5.0}[pick(rng_)];
    std::uniform_real_distribution<double> u(-scale, scale);
    Mat m(d_, N_);
    for (int i = 0; i < m.size(); ++i) m.flat(i) = u(rng_);
    return m;
  }
  Vec jump() {
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    Vec l(d_);
    for (int i = 0; i < d_; ++i) l[i] = u(rng_);
    return l;
  }
  Vec normal() {
    if (N_ == 1) return Vec(1, real() < 0.5 ? -1.0 : 1.0);
    std::uniform_real_distribution<double> u(0.0, 2.0 * std::numbers::pi);
    const double t = u(rng_);
    return Vec(2, std::cos(t), std::sin(t));
  }
  double real() { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_); }
  double positive() { return std::uniform_real_distribution<double>(0.01, 8.0)(rng_); }

 private:
  int N_;
  int d_;
  std::mt19937_64 rng_;
};

struct Tracker {
  AssumptionCheck check;
  double tol_rel = 0.0;

  Tracker(std::string id, std::string desc, std::string mode, double tol)
      : tol_rel(tol) {
    check.id = std::move(id);
    check.description = std::move(desc);
    check.mode = std::move(mode);
    check.worst_margin = -std::numeric_limits<double>::infinity();
  }
  // margin = lhs - rhs; the sample violates when margin > tol_rel * (1 + scale).
  void add(double margin, double scale) {
    ++check.samples;
    check.worst_margin = std::max(check.worst_margin, margin);
    if (margin > tol_rel * (1.0 + std::abs(scale))) {
      ++check.violations;
      check.passed = false;
    }
  }
};

}  // namespace

ValidationReport validate_assumptions(const BulkDensity& w, const SurfaceDensity& psi, int N,
                                      int d, std::int64_t budget, std::uint64_t seed) {
  require_dims(N, d);
  if (budget < 1) throw std::invalid_argument("validate_assumptions: budget must be >= 1");
  ValidationReport report;
  report.N = N;
  report.d = d;
  report.budget = budget;
  report.seed = seed;

  const auto& K = w.constants();
  const double p = w.exponent();
  const double c_lo = psi.lower_constant();
  const double c_hi = psi.upper_constant();
  constexpr double kRound = 1e-12;
  constexpr double kModulusStep = 1.0 / 1024.0;

  Sampler s(N, d, seed);

  Tracker h1("H1", "Q-periodicity of W and psi in x", "exact", 0.0);
  Tracker h2("H2", "p-Lipschitz: |W(x,a)-W(x,b)| <= C_W |a-b| (1+|a|^{p-1}+|b|^{p-1})", "sampled", kRound);
  Tracker h2c("H2c", "modulus of continuity of W in x (observed, per unit (1+|xi|^p))", "recorded", 0.0);
  Tracker h8("H8", "coercivity: W(x,xi) >= C'_W |xi|^p - c'_W", "sampled", kRound);
  Tracker grow("pgrabove", "p-growth from above: W(x,xi) <= C_W (1+|xi|^p)", "sampled", kRound);
  Tracker h3("H3", "linear growth: c_psi|l| <= psi(x,l,nu) <= C_psi|l|", "sampled", kRound);
  Tracker h3c("H3c", "modulus of continuity of psi in x (observed, per unit |l|)", "recorded", 0.0);
  Tracker h4("H4", "positive 1-homogeneity in l", "sampled", kRound);
  Tracker h5("H5", "subadditivity in l", "sampled", kRound);
  Tracker h6("H6", "symmetry psi(x,l,nu) = psi(x,-l,-nu)", "exact", 0.0);
  Tracker lip("Lippsi", "Lipschitz in l: |psi(x,a,nu)-psi(x,b,nu)| <= C_psi |a-b|", "sampled", kRound);

  double modulus_w = 0.0;
  double modulus_psi = 0.0;

  for (std::int64_t it = 0; it < budget; ++it) {
    const Vec x = s.point();
    const Vec z = s.shift();
    const Mat a = s.matrix();
    Mat b = s.matrix();
    if (it % 3 == 0) {
      // Nearby pair to probe the local Lipschitz constant.
      for (int i = 0; i < b.size(); ++i) b.flat(i) = a.flat(i) + 1e-3 * b.flat(i);
    }
    const Vec l1 = s.jump();
    const Vec l2 = s.jump();
    const Vec nu = s.normal();

    // H1
    {
      const double dw = std::abs(w(x + z, a) - w(x, a));
      const double dp = std::abs(psi(x + z, l1, nu) - psi(x, l1, nu));
      h1.add(std::max(dw, dp), 0.0);
    }
    // H2
    {
      const double lhs = std::abs(w(x, a) - w(x, b));
      const double rhs = K.upper * (a - b).norm() *
                         (1.0 + std::pow(a.norm(), p - 1.0) + std::pow(b.norm(), p - 1.0));
      h2.add(lhs - rhs, rhs);
    }
    // H2c / H3c: observed ratio over a fixed small step in x.
    {
      Vec x2 = x;
      x2[static_cast<int>(it % N)] += kModulusStep;
      modulus_w = std::max(modulus_w, std::abs(w(x, a) - w(x2, a)) / (1.0 + std::pow(a.norm(), p)));
      const double ln = l1.norm();
      if (ln > 0.0) modulus_psi = std::max(modulus_psi, std::abs(psi(x, l1, nu) - psi(x2, l1, nu)) / ln);
      h2c.add(0.0, 0.0);
      h3c.add(0.0, 0.0);
    }
    // H8 and p-growth; every 7th sample sits exactly at a well.
    {
      Mat xi = a;
      if (w.form() == BulkDensity::Form::DoubleWell && it % 7 == 0) {
        xi = w.well();
        if (xi.rows != d || xi.cols != N) xi = a;
      }
      const double val = w(x, xi);
      const double lower = K.coercive * std::pow(xi.norm(), p) - K.coercive_shift;
      h8.add(lower - val, val);
      const double upper = K.upper * (1.0 + std::pow(xi.norm(), p));
      grow.add(val - upper, upper);
    }
    // H3
    {
      const double val = psi(x, l1, nu);
      const double ln = l1.norm();
      h3.add(std::max(c_lo * ln - val, val - c_hi * ln), c_hi * ln);
    }
    // H4
    {
      const double t = s.positive();
      const double lhs = psi(x, t * l1, nu);
      const double rhs = t * psi(x, l1, nu);
      h4.add(std::abs(lhs - rhs), rhs);
    }
    // H5
    {
      const double lhs = psi(x, l1 + l2, nu);
      const double rhs = psi(x, l1, nu) + psi(x, l2, nu);
      h5.add(lhs - rhs, rhs);
    }
    // H6
    h6.add(std::abs(psi(x, l1, nu) - psi(x, -l1, -nu)), 0.0);
    // Lippsi
    {
      const double lhs = std::abs(psi(x, l1, nu) - psi(x, l2, nu));
      const double rhs = c_hi * (l1 - l2).norm();
      lip.add(lhs - rhs, rhs);
    }
  }

  h2c.check.observed_modulus = modulus_w;
  h3c.check.observed_modulus = modulus_psi;
  for (Tracker* t : {&h2c, &h3c}) t->check.worst_margin = 0.0;

  for (Tracker* t : {&h1, &h2, &h2c, &h8, &grow, &h3, &h3c, &h4, &h5, &h6, &lip})
    report.checks.push_back(t->check);
  return report;
}

}  // namespace sdh
