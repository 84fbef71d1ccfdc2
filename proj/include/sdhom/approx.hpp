#pragma once

// Explicit approximating sequences for structured deformations (g, G) with
// affine g(x) = A x + g0 and constant G, and their heterogeneous energies
//
//   E_eps(u) = int_Q W(x/eps, grad u) dx + int_{S_u} psi(x/eps, [u], nu_u) dH^{N-1}.
//
// Energies are taken on the half-open cube [0,1)^N: the fields considered here
// are g plus a Q-periodic part, and jumps of that part on the lower faces of Q
// are counted once.

#include <functional>
#include <vector>

#include "sdhom/density.hpp"
#include "sdhom/field.hpp"
#include "sdhom/linalg.hpp"

namespace sdh {

struct StructuredDeformationSample {
  Mat A;   // grad g
  Vec g0;  // g(0)
  Mat G;
  Mat disarrangement() const { return A - G; }
};

struct SheetFamily {
  int axis = 0;
  std::vector<double> positions;  // x_axis = j / n, j = 0..n-1
  Vec jump;                       // plus trace minus minus trace, normal e_axis
};

/// u_n(x) = g(x) + sum_i (G - A) e_i s_n(x_i),  s_n(t) = t - floor(n t) / n.
class SawtoothSequence {
 public:
  explicit SawtoothSequence(StructuredDeformationSample sample);

  const StructuredDeformationSample& sample() const { return sample_; }
  int N() const { return sample_.A.cols; }
  int d() const { return sample_.A.rows; }

  Vec evaluate(int n, const Vec& x) const;
  /// Absolutely continuous gradient, identically G.
  const Mat& gradient() const { return sample_.G; }
  std::vector<SheetFamily> sheets(int n) const;
  /// |Du_n|(Q) = |G| + sum over sheets of |jump| times sheet area.
  double total_variation(int n) const;
  /// ||u_n - g||_{L^1(Q)} by Gauss-Legendre quadrature on each sawtooth tooth.
  double l1_distance(int n, int gauss_points = 4) const;
  /// The Q-periodic part u_n - g on a grid with `per_tooth` subcells per tooth.
  DiscreteSBVField periodic_part(int n, int per_tooth) const;
  /// Sum over sheets of [u_n] (x) nu phi(x), integrated along each sheet.
  Mat singular_moment(int n, const std::function<double(const Vec&)>& phi) const;

 private:
  StructuredDeformationSample sample_;
};

/// E_eps of g + v for a Q-periodic discrete field v on [0,1)^N, eps = 1/inv_eps.
/// Densities are evaluated at (cell centre or face midpoint) / eps.
EnergySplit scaled_energy(const DiscreteSBVField& v, const Mat& A, int inv_eps, const BulkDensity& w,
                          const SurfaceDensity& psi);

struct EnergyPoint {
  int n = 0;
  double eps = 0.0;
  double bulk = 0.0;
  double surface = 0.0;
  double total = 0.0;
  double l1_distance = 0.0;
};

/// E_{eps_n}(u_n) along the sawtooth sequence, with eps_n = 1 / inv_eps(n).
/// The bulk integral uses `per_tooth` subcells per sawtooth tooth.
std::vector<EnergyPoint> eval_sequence_energy(const SawtoothSequence& seq, const std::function<int(int)>& inv_eps,
                                              const BulkDensity& w, const SurfaceDensity& psi,
                                              const std::vector<int>& n_list, int per_tooth = 8);

/// u_n(x) = A x + eps u*(x / eps) for a kQ-periodic cell field u*; requires
/// inv_eps to be a multiple of k. Returns the Q-periodic part eps u*(x/eps).
DiscreteSBVField build_cell_recovery_sequence(const DiscreteSBVField& cell_field, int inv_eps);

/// E_eps and L^1 distance to g of the recovery field for eps = 1/(k n).
EnergyPoint eval_recovery_energy(const DiscreteSBVField& cell_field, const Mat& A, int n, const BulkDensity& w,
                                 const SurfaceDensity& psi);

/// Least-squares slope of log y against log x.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace sdh
