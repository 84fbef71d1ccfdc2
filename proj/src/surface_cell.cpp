#include "sdhom/surface_cell.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "sdhom/maxflow.hpp"

namespace sdh {

RationalDirection rational_direction(const Vec& nu, int max_entry) {
  if (!nu.finite() || std::abs(nu.norm() - 1.0) > 1e-12)
    throw std::invalid_argument("nu must be a unit vector");
  if (nu.dim == 1) return {nu[0] > 0 ? 1 : -1, 0, 1.0};
  if (nu.dim != 2) throw std::invalid_argument("nu must have dimension 1 or 2");
  for (int s = 1; s <= 2 * max_entry * max_entry; ++s) {
    for (int q = -max_entry; q <= max_entry; ++q)
      for (int r = -max_entry; r <= max_entry; ++r) {
        if (q * q + r * r != s || std::gcd(q, r) != 1) continue;
        const double L = std::sqrt(static_cast<double>(s));
        if (std::abs(nu[0] - q / L) <= 1e-12 && std::abs(nu[1] - r / L) <= 1e-12) return {q, r, L};
      }
  }
  throw std::invalid_argument("nu is not a supported rational direction (|q|,|r| <= " +
                              std::to_string(max_entry) + ")");
}

SurfaceGrid::SurfaceGrid(int N, int k, int m, RationalDirection dir)
    : N_(N), k_(k), m_(m), cells_(N == 1 ? k * m : k * m * k * m), dir_(dir) {
  if (N < 1 || N > 2) throw std::invalid_argument("N must be 1 or 2");
  if (k < 1 || m < 1) throw std::invalid_argument("k and m must be >= 1");
  if (k * m < 2) throw std::invalid_argument("surface cell needs at least two subcells per axis");
}

double SurfaceGrid::face_area() const { return N_ == 1 ? 1.0 : dir_.length / m_; }

std::array<int, kMaxDim> SurfaceGrid::coords(int c) const {
  const int n = per_axis();
  return N_ == 1 ? std::array<int, kMaxDim>{c, 0} : std::array<int, kMaxDim>{c % n, c / n};
}

int SurfaceGrid::index(std::array<int, kMaxDim> ij) const { return N_ == 1 ? ij[0] : ij[0] + per_axis() * ij[1]; }

double SurfaceGrid::normal_coordinate(int c) const {
  return (coords(c)[0] + 0.5) / m_ - 0.5 * k_;
}

Vec SurfaceGrid::physical(double a, double b) const {
  if (N_ == 1) return Vec(1, a * dir_.q);
  return Vec(2, a * dir_.q - b * dir_.r, a * dir_.r + b * dir_.q);
}

Vec SurfaceGrid::center(int c) const {
  const auto ij = coords(c);
  return physical((ij[0] + 0.5) / m_ - 0.5 * k_, N_ == 1 ? 0.0 : (ij[1] + 0.5) / m_);
}

bool SurfaceGrid::has_face(int c, int axis) const { return axis < N_ && coords(c)[axis] + 1 < per_axis(); }

int SurfaceGrid::neighbour(int c, int axis) const {
  auto ij = coords(c);
  ++ij[axis];
  return index(ij);
}

Vec SurfaceGrid::face_midpoint(int c, int axis) const {
  const auto ij = coords(c);
  double a = (ij[0] + 0.5) / m_ - 0.5 * k_;
  double b = N_ == 1 ? 0.0 : (ij[1] + 0.5) / m_;
  if (axis == 0)
    a = static_cast<double>(ij[0] + 1) / m_ - 0.5 * k_;
  else
    b = static_cast<double>(ij[1] + 1) / m_;
  return physical(a, b);
}

Vec SurfaceGrid::face_normal(int axis) const {
  const double L = dir_.length;
  if (N_ == 1) return Vec(1, static_cast<double>(dir_.q));
  return axis == 0 ? Vec(2, dir_.q / L, dir_.r / L) : Vec(2, -dir_.r / L, dir_.q / L);
}

int SurfaceGrid::pin(int c) const {
  const auto ij = coords(c);
  const int last = per_axis() - 1;
  bool boundary = false;
  for (int i = 0; i < N_; ++i) boundary = boundary || ij[i] == 0 || ij[i] == last;
  if (!boundary) return -1;
  const double a = normal_coordinate(c);
  if (a < 0) return 0;
  if (a > 0) return 1;
  return -1;
}

namespace {

Vec shift_of(const Vec& tau, int N) {
  if (tau.dim == N) return tau;
  if (tau.norm() != 0.0) throw std::invalid_argument("shift dimension does not match N");
  return Vec(N);
}

}  // namespace

double labeling_energy(const SurfaceGrid& grid, const std::vector<std::uint8_t>& labels, const Vec& lambda,
                       const SurfaceDensity& psi, const Vec& tau, int* cut_faces) {
  const Vec t = shift_of(tau, grid.N());
  double total = 0.0;
  int faces = 0;
  for (int c = 0; c < grid.cells(); ++c)
    for (int axis = 0; axis < grid.N(); ++axis) {
      if (!grid.has_face(c, axis)) continue;
      const int lm = labels[static_cast<std::size_t>(c)];
      const int lp = labels[static_cast<std::size_t>(grid.neighbour(c, axis))];
      if (lm == lp) continue;
      const Vec jump = lp == 1 ? lambda : -lambda;
      total += grid.face_area() * psi(grid.face_midpoint(c, axis) + t, jump, grid.face_normal(axis));
      ++faces;
    }
  if (cut_faces != nullptr) *cut_faces = faces;
  return total / std::pow(grid.side(), grid.N() - 1);
}

SurfaceCellResult solve_gk(const SurfaceCellSpec& spec, const SurfaceDensity& psi) {
  const int N = spec.nu.dim;
  if (spec.lambda.dim < 1 || spec.lambda.dim > kMaxDim) throw std::invalid_argument("lambda must have dimension 1 or 2");
  if (!spec.lambda.finite()) throw std::invalid_argument("lambda must be finite");
  const SurfaceGrid grid(N, spec.k, spec.m, rational_direction(spec.nu));
  const Vec tau = shift_of(spec.tau, N);

  std::vector<int> pins(static_cast<std::size_t>(grid.cells()));
  bool has0 = false;
  bool has1 = false;
  for (int c = 0; c < grid.cells(); ++c) {
    pins[static_cast<std::size_t>(c)] = grid.pin(c);
    has0 = has0 || pins[static_cast<std::size_t>(c)] == 0;
    has1 = has1 || pins[static_cast<std::size_t>(c)] == 1;
  }
  if (!has0 || !has1) throw std::logic_error("surface cell: boundary layer does not pin both phases");

  SurfaceCellResult res;
  res.labeling.assign(static_cast<std::size_t>(grid.cells()), 0);
  if (spec.lambda.norm() == 0.0) {
    res.flat_cut = true;
    return res;
  }

  // Node 0 is the source (phase 0), node 1 the sink (phase lambda); free cells follow.
  std::vector<int> node(static_cast<std::size_t>(grid.cells()));
  int next = 2;
  for (int c = 0; c < grid.cells(); ++c) {
    const int p = pins[static_cast<std::size_t>(c)];
    node[static_cast<std::size_t>(c)] = p < 0 ? next++ : p;
  }
  MaxFlow flow(next);
  for (int c = 0; c < grid.cells(); ++c)
    for (int axis = 0; axis < N; ++axis) {
      if (!grid.has_face(c, axis)) continue;
      const int u = node[static_cast<std::size_t>(c)];
      const int v = node[static_cast<std::size_t>(grid.neighbour(c, axis))];
      if (u == v) continue;
      const Vec x = grid.face_midpoint(c, axis) + tau;
      const Vec n = grid.face_normal(axis);
      flow.add_arc(u, v, grid.face_area() * psi(x, spec.lambda, n));
      flow.add_arc(v, u, grid.face_area() * psi(x, -spec.lambda, n));
    }
  flow.solve(0, 1);
  const std::vector<bool> side = flow.source_side();
  for (int c = 0; c < grid.cells(); ++c)
    res.labeling[static_cast<std::size_t>(c)] = side[static_cast<std::size_t>(node[static_cast<std::size_t>(c)])] ? 0 : 1;

  res.value = labeling_energy(grid, res.labeling, spec.lambda, psi, tau, &res.cut_faces);
  res.flat_cut = true;
  for (int c = 0; c < grid.cells() && res.flat_cut; ++c) {
    const double a = grid.normal_coordinate(c);
    const int l = res.labeling[static_cast<std::size_t>(c)];
    if ((a < 0 && l != 0) || (a > 0 && l != 1)) res.flat_cut = false;
  }
  return res;
}

DensityEstimate estimate_hhom(const Vec& lambda, const Vec& nu, const std::vector<int>& k_list,
                              const SurfaceDensity& psi, int m, int jobs,
                              std::vector<SurfaceCellResult>* results) {
  if (k_list.empty()) throw std::invalid_argument("estimate_hhom: k_list is empty");
  for (std::size_t i = 1; i < k_list.size(); ++i)
    if (k_list[i] <= k_list[i - 1]) throw std::invalid_argument("estimate_hhom: k_list must be increasing");
  std::vector<SurfaceCellResult> per(k_list.size());
  auto work = [&](std::size_t i) {
    SurfaceCellSpec spec{lambda, nu, k_list[i], m, Vec(nu.dim)};
    per[i] = solve_gk(spec, psi);
  };
  if (jobs <= 1) {
    for (std::size_t i = 0; i < k_list.size(); ++i) work(i);
  } else {
    std::vector<std::future<void>> pending;
    for (std::size_t i = 0; i < k_list.size(); ++i) {
      pending.push_back(std::async(std::launch::async, work, i));
      if (static_cast<int>(pending.size()) >= jobs) {
        for (auto& p : pending) p.get();
        pending.clear();
      }
    }
    for (auto& p : pending) p.get();
  }

  DensityEstimate est;
  double running = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < k_list.size(); ++i) {
    est.ks.push_back(k_list[i]);
    est.per_k.push_back(per[i].value);
    running = std::min(running, per[i].value);
    est.envelope.push_back(running);
    est.converged.push_back(true);
    for (std::size_t j = 0; j < i; ++j)
      if (k_list[i] == 2 * k_list[j] && (k_list[j] * m) % 2 == 0 && per[i].value > per[j].value + 1e-12)
        est.monotonicity_violation = true;
  }
  est.value = running;
  if (results != nullptr) *results = std::move(per);
  return est;
}

SymmetryReport check_surface_symmetry(const Vec& lambda, const Vec& nu, int k, const SurfaceDensity& psi,
                                      int m) {
  SymmetryReport rep;
  rep.value = solve_gk({lambda, nu, k, m, Vec(nu.dim)}, psi).value;
  rep.flipped = solve_gk({-lambda, -nu, k, m, Vec(nu.dim)}, psi).value;
  rep.deviation = std::abs(rep.value - rep.flipped);
  rep.passed = rep.deviation <= 1e-12;
  return rep;
}

nlohmann::json labeling_snapshot(const SurfaceCellSpec& spec, const SurfaceCellResult& result) {
  const SurfaceGrid grid(spec.nu.dim, spec.k, spec.m, rational_direction(spec.nu));
  const Vec zero(spec.lambda.dim);
  nlohmann::json cells = nlohmann::json::array();
  for (int c = 0; c < grid.cells(); ++c) {
    const Vec x = grid.center(c);
    const Vec& v = result.labeling[static_cast<std::size_t>(c)] ? spec.lambda : zero;
    cells.push_back({{"center", std::vector<double>(x.v.begin(), x.v.begin() + x.dim)},
                     {"value", std::vector<double>(v.v.begin(), v.v.begin() + v.dim)},
                     {"grad", std::vector<double>(static_cast<std::size_t>(v.dim * grid.N()), 0.0)}});
  }
  nlohmann::json jumps = nlohmann::json::array();
  for (int c = 0; c < grid.cells(); ++c)
    for (int axis = 0; axis < grid.N(); ++axis) {
      if (!grid.has_face(c, axis)) continue;
      const int lm = result.labeling[static_cast<std::size_t>(c)];
      const int lp = result.labeling[static_cast<std::size_t>(grid.neighbour(c, axis))];
      if (lm == lp) continue;
      const Vec j = lp == 1 ? spec.lambda : -spec.lambda;
      const Vec n = grid.face_normal(axis);
      jumps.push_back({{"face", c * grid.N() + axis},
                       {"value", std::vector<double>(j.v.begin(), j.v.begin() + j.dim)},
                       {"normal", std::vector<double>(n.v.begin(), n.v.begin() + n.dim)}});
    }
  const RationalDirection& dir = grid.direction();
  return {{"grid",
           {{"N", grid.N()}, {"d", spec.lambda.dim}, {"k", spec.k}, {"m", spec.m}, {"direction", {dir.q, dir.r}}}},
          {"periodic", false},
          {"cells", cells},
          {"jumps", jumps}};
}

}  // namespace sdh
