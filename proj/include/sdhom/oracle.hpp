#pragma once

// Brute-force references: exhaustive two-phase enumeration, quantized search
// for the 1D bulk cell, closed forms, and finite-difference gradient checks.
// Each refuses (throws OracleRefusal) rather than return a partial answer.

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "sdhom/bulk_cell.hpp"
#include "sdhom/density.hpp"
#include "sdhom/field.hpp"
#include "sdhom/surface_cell.hpp"

namespace sdh {

class OracleRefusal : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct OracleBudget {
  int max_cells = 20;                    // enumeration: subcells
  std::uint64_t max_labelings = 1u << 20;
  int max_dofs = 8;                      // coarse search: gradient DOFs
  int lattice_points = 9;                // per DOF, odd
  std::uint64_t max_evaluations = 1u << 24;
};

struct EnumerationResult {
  double value = 0.0;
  std::vector<std::uint8_t> labeling;
  std::uint64_t labelings = 0;
};

/// Minimum of the surface cell energy over every two-phase labeling that
/// respects the boundary pinning; ties resolved by the lexicographically
/// smallest labeling.
EnumerationResult enumerate_two_phase(const SurfaceCellSpec& spec, const SurfaceDensity& psi,
                                      const OracleBudget& budget = {});

struct CoarseSearchResult {
  double value = 0.0;
  double bulk_part = 0.0;
  double surface_part = 0.0;
  std::vector<double> gradients;  // per subcell, d entries each
  std::uint64_t evaluations = 0;
};

/// Upper bound for m_k in 1D: per-subcell gradients on a lattice around B - A
/// (the last one fixed by the mean constraint), total jump placed on the
/// cheapest face, then one refinement around the incumbent.
CoarseSearchResult coarse_search_bulk(const BulkCellSpec& spec, const BulkDensity& w, const SurfaceDensity& psi,
                                      const OracleBudget& budget = {});

/// 1D closed form for power densities a(x)|xi|^p with piecewise-constant a on
/// equal layers and constant surface rate c:
///   (mean a^{-1/(p-1)})^{-(p-1)} |B|^p + c |B - A|.
double closed_form_layered_1d(const std::vector<double>& layers, double p, double A, double B, double c);

struct FdReport {
  double max_relative_error = 0.0;  // max |analytic - fd| / max |analytic|
  double gradient_norm = 0.0;       // max |analytic|
};

/// Compares the analytic gradient of the cell energy (every face active)
/// against central differences of energy() on a periodic field.
FdReport fd_gradient_check(const DiscreteSBVField& field, const BulkDensity& w, const SurfaceDensity& psi,
                           const Mat& A, const Vec& tau, double step);

}  // namespace sdh
