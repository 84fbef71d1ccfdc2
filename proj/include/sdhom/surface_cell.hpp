#pragma once

// Surface cell problem over two-phase competitors:
//
//   g_k(lambda, nu) = T^{1-N} min { sum_faces |f| psi(x_f + tau, [u]_f, nu_f) :
//                                   u in {0, lambda} per subcell, u = s_{lambda,nu} on the boundary layer }
//
// solved exactly as an s-t minimum cut. The cube is Q_nu scaled to side
// T = k L, where nu = (q, r) / L with small coprime integers q, r; the grid is
// axis-aligned in the frame (nu, nu_perp) so every tangential period of the
// density is a lattice translation of the grid.

#include <cstdint>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "sdhom/density.hpp"
#include "sdhom/estimate.hpp"
#include "sdhom/linalg.hpp"

namespace sdh {

/// nu = (q, r) / sqrt(q^2 + r^2) in 2D, nu = q in 1D.
struct RationalDirection {
  int q = 1;
  int r = 0;
  double length = 1.0;
};

/// Recognises nu as a rational direction with |q|, |r| <= max_entry; throws otherwise.
RationalDirection rational_direction(const Vec& nu, int max_entry = 12);

struct SurfaceCellSpec {
  Vec lambda;
  Vec nu;
  int k = 1;
  int m = 4;
  Vec tau;  // zero when left with a dimension mismatch
};

/// Subcells of the rotated cube. Cell (i, j) has frame coordinates
/// y = L (a_i, b_j) with a_i = (i + 1/2)/m - k/2 along nu and b_j = (j + 1/2)/m
/// along nu_perp; the physical point is a (q, r) + b (-r, q).
class SurfaceGrid {
 public:
  SurfaceGrid(int N, int k, int m, RationalDirection dir);

  int N() const { return N_; }
  int k() const { return k_; }
  int m() const { return m_; }
  int per_axis() const { return k_ * m_; }
  int cells() const { return cells_; }
  /// Side of the cube, k L.
  double side() const { return k_ * dir_.length; }
  double face_area() const;
  const RationalDirection& direction() const { return dir_; }

  std::array<int, kMaxDim> coords(int c) const;
  int index(std::array<int, kMaxDim> ij) const;
  /// Signed normal coordinate a of cell c (exact in units of L).
  double normal_coordinate(int c) const;
  Vec center(int c) const;

  /// Internal faces between cell c and its +axis neighbour, if any.
  bool has_face(int c, int axis) const;
  int neighbour(int c, int axis) const;
  Vec face_midpoint(int c, int axis) const;
  /// Physical unit normal of faces along `axis`: nu for axis 0, nu_perp for axis 1.
  Vec face_normal(int axis) const;

  /// -1 free, 0 pinned to phase 0, 1 pinned to phase lambda.
  int pin(int c) const;

 private:
  Vec physical(double a, double b) const;
  int N_;
  int k_;
  int m_;
  int cells_;
  RationalDirection dir_;
};

struct SurfaceCellResult {
  double value = 0.0;
  std::vector<std::uint8_t> labeling;  // 0 -> phase 0, 1 -> phase lambda
  int cut_faces = 0;
  bool flat_cut = false;
};

/// Energy of a labeling divided by T^{N-1}.
double labeling_energy(const SurfaceGrid& grid, const std::vector<std::uint8_t>& labels, const Vec& lambda,
                       const SurfaceDensity& psi, const Vec& tau, int* cut_faces = nullptr);

SurfaceCellResult solve_gk(const SurfaceCellSpec& spec, const SurfaceDensity& psi);

/// Min over k of solve_gk; flags a doubling violation for every pair (k, 2k)
/// in the list.
DensityEstimate estimate_hhom(const Vec& lambda, const Vec& nu, const std::vector<int>& k_list,
                              const SurfaceDensity& psi, int m, int jobs = 1,
                              std::vector<SurfaceCellResult>* results = nullptr);

struct SymmetryReport {
  double value = 0.0;
  double flipped = 0.0;
  double deviation = 0.0;
  bool passed = false;
};

SymmetryReport check_surface_symmetry(const Vec& lambda, const Vec& nu, int k, const SurfaceDensity& psi,
                                      int m);

/// Labeling exported in the field snapshot layout.
nlohmann::json labeling_snapshot(const SurfaceCellSpec& spec, const SurfaceCellResult& result);

}  // namespace sdh
