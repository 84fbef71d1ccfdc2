#pragma once

// Bulk cell problem: for a pair (A, B) and cube multiplier k,
//
//   m_k(A,B) = k^{-N} inf { int_{kQ} W(x+tau, A + grad u) + int_{S_u} psi(x+tau, [u], nu_u) }
//
// over k-periodic discrete SBV fields with mean absolutely continuous gradient
// B - A, and H_hom(A,B) = inf_k m_k(A,B).

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sdhom/density.hpp"
#include "sdhom/estimate.hpp"
#include "sdhom/field.hpp"

namespace sdh {

struct SolverParams {
  double tolerance = 1e-8;   // projected-gradient stop, relative to 1 + |E|
  int max_iterations = 20000;
  int restarts = 8;
  int max_sweeps = 50;
  std::uint64_t seed = 0;
  bool sheet_moves = true;

  friend bool operator==(const SolverParams&, const SolverParams&) = default;
};

struct BulkCellSpec {
  Mat A;
  Mat B;
  int k = 1;
  int m = 8;
  Vec tau;  // dimension N; zero when left default-constructed with dim mismatch
  SolverParams solver;
};

struct IterationEntry {
  int restart = 0;
  int sweep = 0;
  std::string phase;  // "descent", "open", "close", "sheet"
  int iterations = 0;
  int active_faces = 0;
  double energy = 0.0;
};

struct RestartStat {
  int restart = 0;
  double value = 0.0;
  bool converged = false;
  int sweeps = 0;
};

struct BulkCellResult {
  double value = 0.0;        // energy / k^N of `field`, re-evaluated
  double bulk_part = 0.0;
  double surface_part = 0.0;
  bool converged = false;
  int best_restart = 0;
  DiscreteSBVField field;
  std::vector<IterationEntry> log;
  std::vector<RestartStat> restarts;
};

/// Discrete energy as a smooth-by-pieces function of the stacked affine DOFs.
///
/// DOF layout per cell c (stride d(1+N)): values u_c (d entries) followed by
/// the gradient grad_c row-major (d*N entries). Only faces listed active
/// contribute surface energy. Power-form bulk terms and all surface terms go
/// through the SIMD kernel.
class CellEnergyModel {
 public:
  CellEnergyModel(const Grid& grid, const BulkDensity& w, const SurfaceDensity& psi, const Mat& A,
                  const Vec& tau);

  const Grid& grid() const { return grid_; }
  const BulkDensity& density() const { return *w_; }
  const Mat& A() const { return A_; }
  int dofs() const { return grid_.cells() * stride_; }
  int stride() const { return stride_; }
  int value_dof(int c, int a) const { return c * stride_ + a; }
  int grad_dof(int c, int a, int i) const { return c * stride_ + grid_.d + a * grid_.N + i; }
  double face_weight(int f) const { return face_weight_[static_cast<std::size_t>(f)]; }

  /// Energy over kQ (not normalised by k^N); writes dE/dx into `grad` if non-empty.
  /// With smoothing > 0 each |[u]| is replaced by sqrt(|[u]|^2 + s^2) - s.
  double energy(std::span<const double> x, std::span<const std::uint8_t> active,
                std::span<double> grad, double smoothing = 0.0) const;
  /// Mismatch of face f for DOF vector x (plus trace minus minus trace).
  Vec mismatch(std::span<const double> x, int f) const;

  DiscreteSBVField to_field(std::span<const double> x, std::span<const std::uint8_t> active) const;
  std::vector<double> from_field(const DiscreteSBVField& field) const;

 private:
  Grid grid_;
  const BulkDensity* w_;
  Mat A_;
  int stride_;
  std::vector<Vec> centers_;
  std::vector<double> cell_weight_;  // |c| a(x_c + tau), power form
  std::vector<double> face_weight_;  // |f| rate(x_f + tau, e_i)
  Vec tau_;
};

BulkCellResult solve_mk(const BulkCellSpec& spec, const BulkDensity& w, const SurfaceDensity& psi);

/// Runs solve_mk for each k (concurrently when jobs > 1; results merged in
/// k order) and returns the minimum with the per-k curve.
DensityEstimate estimate_Hhom(const Mat& A, const Mat& B, const std::vector<int>& k_list,
                              const BulkDensity& w, const SurfaceDensity& psi, int m,
                              const SolverParams& params, int jobs = 1,
                              std::vector<BulkCellResult>* results = nullptr);

struct TranslationReport {
  std::vector<Vec> taus;
  std::vector<double> values;
  double max_deviation = 0.0;
  bool lattice_aligned = false;  // every tau is a multiple of 1/m per axis
  double tolerance = 0.0;        // 1e-9 when lattice aligned, else 1/k
  bool passed = false;
};

TranslationReport check_translation_invariance(const Mat& A, const Mat& B, const std::vector<Vec>& taus,
                                               int k, const BulkDensity& w, const SurfaceDensity& psi,
                                               int m, const SolverParams& params);

/// Q-periodic average of the unit translates of a kQ-periodic field:
/// v(x) = k^{-N} sum_{j in {0..k-1}^N} u(x + j).
DiscreteSBVField average_translates(const DiscreteSBVField& field);

}  // namespace sdh
