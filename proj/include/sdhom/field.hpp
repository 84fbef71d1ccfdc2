#pragma once

// Discrete SBV competitors: discontinuous piecewise-affine fields on a uniform
// subdivision of the cube kQ = [0,k)^N, with explicit per-face jump activity.

#include <cstdint>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "sdhom/density.hpp"
#include "sdhom/linalg.hpp"

namespace sdh {

/// Uniform subdivision of kQ into (k m)^N subcells of side h = 1/m.
///
/// Cells are numbered with axis 0 fastest. Face f = c * N + i is the face on
/// the +e_i side of cell c; its plus cell is the neighbour of c along +e_i,
/// wrapping around at the far end of the axis ("wrap faces").
struct Grid {
  int N = 1;
  int d = 1;
  int k = 1;
  int m = 1;

  Grid() = default;
  Grid(int N_, int d_, int k_, int m_);

  int per_axis() const { return k * m; }
  double h() const { return 1.0 / m; }
  int cells() const;
  int faces() const { return cells() * N; }
  double cell_volume() const;
  double face_area() const;

  std::array<int, kMaxDim> coords(int c) const;
  int index(std::array<int, kMaxDim> ij) const;
  Vec center(int c) const;

  int face_minus(int f) const { return f / N; }
  int face_axis(int f) const { return f % N; }
  int face_plus(int f) const;
  bool is_wrap(int f) const;
  Vec face_midpoint(int f) const;

  friend bool operator==(const Grid&, const Grid&) = default;
};

struct JumpRecord {
  int face = 0;
  Vec midpoint;
  Vec normal;
  Vec jump;  // plus-side trace minus minus-side trace, in the stored orientation
  double area = 0.0;
};

/// Per-subcell affine data u(x) = value_c + grad_c (x - x_c) plus face flags.
///
/// With `periodic` set the field lives on the flat torus kQ: wrap faces are
/// interior faces like any other. Otherwise wrap faces are boundary faces of
/// kQ and carry no jump.
class DiscreteSBVField {
 public:
  DiscreteSBVField() = default;
  explicit DiscreteSBVField(const Grid& grid, bool periodic = true);

  const Grid& grid() const { return grid_; }
  bool periodic() const { return periodic_; }

  Vec value(int c) const;
  Mat gradient(int c) const;
  void set_value(int c, const Vec& v);
  void set_gradient(int c, const Mat& g);

  bool active(int f) const { return active_[static_cast<std::size_t>(f)] != 0; }
  void set_active(int f, bool on) { active_[static_cast<std::size_t>(f)] = on ? 1 : 0; }
  int orientation(int f) const { return orientation_[static_cast<std::size_t>(f)]; }
  void flip_orientation(int f) { orientation_[static_cast<std::size_t>(f)] *= -1; }
  /// False for wrap faces of a non-periodic field.
  bool interior(int f) const { return periodic_ || !grid_.is_wrap(f); }

  /// Trace of the plus cell minus trace of the minus cell at the face midpoint,
  /// in the grid's axis orientation.
  Vec mismatch(int f) const;
  /// Value of u at a point inside cell c.
  Vec evaluate(int c, const Vec& x) const;

  /// Largest trace mismatch over interior faces flagged inactive.
  double max_inactive_mismatch() const;
  int active_count() const;

  std::vector<double>& raw_values() { return values_; }
  std::vector<double>& raw_gradients() { return grads_; }
  const std::vector<double>& raw_values() const { return values_; }
  const std::vector<double>& raw_gradients() const { return grads_; }

 private:
  Grid grid_;
  bool periodic_ = true;
  std::vector<double> values_;       // cells * d
  std::vector<double> grads_;        // cells * d * N, row-major per cell
  std::vector<std::uint8_t> active_;
  std::vector<std::int8_t> orientation_;
};

inline constexpr double kAssemblyTolerance = 1e-12;

/// Volume average of the per-subcell gradients over kQ.
Mat mean_gradient(const DiscreteSBVField& field);

/// One record per interior face whose trace mismatch exceeds `tol`.
std::vector<JumpRecord> jump_records(const DiscreteSBVField& field, double tol = kAssemblyTolerance);

struct EnergySplit {
  double bulk = 0.0;
  double surface = 0.0;
  double total() const { return bulk + surface; }
};

/// Half-open range of cell coordinates [lo, hi) per axis.
struct CellBox {
  std::array<int, kMaxDim> lo{0, 0};
  std::array<int, kMaxDim> hi{0, 0};
  bool contains(std::array<int, kMaxDim> ij, int N) const;
};

/// Midpoint-quadrature energy over kQ:
///   bulk    = sum_c |c| W(x_c + tau, A + grad_c)
///   surface = sum_f |f| psi(x_f + tau, [u]_f, nu_f)   over interior faces.
/// With `box`, only cells in the box and faces whose minus cell is in the box
/// are summed, so a partition of kQ into boxes counts every face once.
EnergySplit energy(const DiscreteSBVField& field, const BulkDensity& w, const SurfaceDensity& psi,
                   const Mat& A, const Vec& tau, const CellBox* box = nullptr);

nlohmann::json to_snapshot(const DiscreteSBVField& field);
DiscreteSBVField from_snapshot(const nlohmann::json& j);

}  // namespace sdh
