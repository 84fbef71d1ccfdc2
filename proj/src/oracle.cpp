#include "sdhom/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sdh {

EnumerationResult enumerate_two_phase(const SurfaceCellSpec& spec, const SurfaceDensity& psi,
                                      const OracleBudget& budget) {
  const int N = spec.nu.dim;
  const SurfaceGrid grid(N, spec.k, spec.m, rational_direction(spec.nu));
  if (grid.cells() > budget.max_cells || grid.cells() > 20)
    throw OracleRefusal("enumerate_two_phase: " + std::to_string(grid.cells()) + " subcells exceed the budget");
  const Vec tau = spec.tau.dim == N ? spec.tau : Vec(N);

  std::vector<int> free_cells;
  std::vector<std::uint8_t> labels(static_cast<std::size_t>(grid.cells()), 0);
  for (int c = 0; c < grid.cells(); ++c) {
    const int p = grid.pin(c);
    if (p < 0)
      free_cells.push_back(c);
    else
      labels[static_cast<std::size_t>(c)] = static_cast<std::uint8_t>(p);
  }
  const std::uint64_t count = std::uint64_t{1} << free_cells.size();
  if (count > budget.max_labelings) throw OracleRefusal("enumerate_two_phase: labeling count exceeds the budget");

  // Face list with both capacities, summed independently of the cut solver.
  struct Face {
    int minus, plus;
    double forward, backward;  // minus 0 / plus lambda, and the reverse
  };
  std::vector<Face> faces;
  const double area = N == 1 ? 1.0 : grid.side() / grid.per_axis();
  for (int c = 0; c < grid.cells(); ++c)
    for (int axis = 0; axis < N; ++axis) {
      const auto ij = grid.coords(c);
      if (ij[axis] + 1 >= grid.per_axis()) continue;
      auto nb = ij;
      ++nb[axis];
      const Vec x = grid.face_midpoint(c, axis) + tau;
      const Vec n = grid.face_normal(axis);
      faces.push_back({c, grid.index(nb), area * psi(x, spec.lambda, n), area * psi(x, -spec.lambda, n)});
    }
  const double norm = std::pow(grid.side(), N - 1);

  EnumerationResult best;
  best.value = std::numeric_limits<double>::infinity();
  // Bit b of the counter labels free_cells[size - 1 - b], so increasing
  // counters visit labelings in lexicographic order.
  const std::size_t nf = free_cells.size();
  for (std::uint64_t bits = 0; bits < count; ++bits) {
    for (std::size_t b = 0; b < nf; ++b)
      labels[static_cast<std::size_t>(free_cells[nf - 1 - b])] = static_cast<std::uint8_t>((bits >> b) & 1u);
    double e = 0.0;
    for (const Face& f : faces) {
      const int lm = labels[static_cast<std::size_t>(f.minus)];
      const int lp = labels[static_cast<std::size_t>(f.plus)];
      if (lm == 0 && lp == 1) e += f.forward;
      if (lm == 1 && lp == 0) e += f.backward;
    }
    e /= norm;
    if (e < best.value) {
      best.value = e;
      best.labeling = labels;
    }
  }
  best.labelings = count;
  return best;
}

CoarseSearchResult coarse_search_bulk(const BulkCellSpec& spec, const BulkDensity& w, const SurfaceDensity& psi,
                                      const OracleBudget& budget) {
  if (spec.A.cols != 1) throw OracleRefusal("coarse_search_bulk: only N = 1 is supported");
  const int d = spec.A.rows;
  const int cells = spec.k * spec.m;
  const int dofs = cells * d;
  if (dofs > budget.max_dofs) throw OracleRefusal("coarse_search_bulk: " + std::to_string(dofs) + " DOFs exceed the budget");
  const int P = budget.lattice_points;
  if (P < 3 || P % 2 == 0) throw OracleRefusal("coarse_search_bulk: lattice_points must be odd and >= 3");
  const int free_dofs = (cells - 1) * d;
  double evals = std::pow(static_cast<double>(P), free_dofs) * 2.0;
  if (evals > static_cast<double>(budget.max_evaluations))
    throw OracleRefusal("coarse_search_bulk: lattice exceeds the evaluation budget");

  const double h = 1.0 / spec.m;
  const double tau = spec.tau.dim == 1 ? spec.tau[0] : 0.0;
  std::vector<double> xc(static_cast<std::size_t>(cells));
  std::vector<double> rate(static_cast<std::size_t>(cells));
  for (int c = 0; c < cells; ++c) {
    xc[static_cast<std::size_t>(c)] = (c + 0.5) * h + tau;
    rate[static_cast<std::size_t>(c)] = psi.rate(Vec(1, (c + 1) * h + tau), Vec(1, 1.0));
  }
  const double cheapest = *std::min_element(rate.begin(), rate.end());
  std::vector<double> target(static_cast<std::size_t>(d));
  for (int a = 0; a < d; ++a) target[static_cast<std::size_t>(a)] = spec.B(a, 0) - spec.A(a, 0);

  auto split = [&](const std::vector<double>& g, double& surface) {
    double bulk = 0.0;
    Vec total(d);
    for (int c = 0; c < cells; ++c) {
      Mat xi(d, 1);
      for (int a = 0; a < d; ++a) {
        xi(a, 0) = spec.A(a, 0) + g[static_cast<std::size_t>(c * d + a)];
        total[a] += h * g[static_cast<std::size_t>(c * d + a)];
      }
      bulk += h * w(Vec(1, xc[static_cast<std::size_t>(c)]), xi);
    }
    surface = cheapest * total.norm() / spec.k;
    return bulk / spec.k;
  };
  auto evaluate = [&](const std::vector<double>& g) {
    double surface = 0.0;
    const double bulk = split(g, surface);
    return bulk + surface;
  };

  CoarseSearchResult res;
  res.value = std::numeric_limits<double>::infinity();
  std::vector<double> center(static_cast<std::size_t>(dofs));
  for (int c = 0; c < cells; ++c)
    for (int a = 0; a < d; ++a) center[static_cast<std::size_t>(c * d + a)] = target[static_cast<std::size_t>(a)];
  double radius = 2.0 * (1.0 + std::abs(spec.A.norm()) + spec.B.norm());

  for (int pass = 0; pass < 2; ++pass) {
    const double spacing = 2.0 * radius / (P - 1);
    const std::vector<double> base = center;
    std::vector<int> idx(static_cast<std::size_t>(free_dofs), 0);
    std::vector<double> g(static_cast<std::size_t>(dofs));
    while (true) {
      for (int q = 0; q < free_dofs; ++q)
        g[static_cast<std::size_t>(q)] = base[static_cast<std::size_t>(q)] - radius + spacing * idx[static_cast<std::size_t>(q)];
      for (int a = 0; a < d; ++a) {
        double s = 0.0;
        for (int c = 0; c + 1 < cells; ++c) s += g[static_cast<std::size_t>(c * d + a)];
        g[static_cast<std::size_t>((cells - 1) * d + a)] = cells * target[static_cast<std::size_t>(a)] - s;
      }
      const double e = evaluate(g);
      ++res.evaluations;
      if (e < res.value) {
        res.value = e;
        res.gradients = g;
      }
      int q = 0;
      while (q < free_dofs && ++idx[static_cast<std::size_t>(q)] == P) idx[static_cast<std::size_t>(q++)] = 0;
      if (q == free_dofs) break;
    }
    center = res.gradients;
    radius = spacing;
  }
  res.bulk_part = split(res.gradients, res.surface_part);
  return res;
}

double closed_form_layered_1d(const std::vector<double>& layers, double p, double A, double B, double c) {
  if (layers.empty() || p <= 1.0) throw std::invalid_argument("closed_form_layered_1d: bad arguments");
  double mean = 0.0;
  for (double a : layers) mean += std::pow(a, -1.0 / (p - 1.0));
  mean /= static_cast<double>(layers.size());
  return std::pow(mean, -(p - 1.0)) * std::pow(std::abs(B), p) + c * std::abs(B - A);
}

FdReport fd_gradient_check(const DiscreteSBVField& field, const BulkDensity& w, const SurfaceDensity& psi,
                           const Mat& A, const Vec& tau, double step) {
  if (!(step >= 1e-7 && step <= 1e-3)) throw std::invalid_argument("step must lie in [1e-7, 1e-3]");
  if (!field.periodic()) throw std::invalid_argument("fd_gradient_check expects a periodic field");
  const Grid& g = field.grid();
  const CellEnergyModel model(g, w, psi, A, tau);
  const std::vector<double> x = model.from_field(field);
  const std::vector<std::uint8_t> all(static_cast<std::size_t>(g.faces()), 1);
  std::vector<double> grad(x.size());
  model.energy(x, all, grad);

  const Vec t = tau.dim == g.N ? tau : Vec(g.N);
  DiscreteSBVField probe = field;
  auto perturbed = [&](std::size_t i, double delta) {
    const int c = static_cast<int>(i) / model.stride();
    const int r = static_cast<int>(i) % model.stride();
    if (r < g.d) {
      Vec v = field.value(c);
      v[r] += delta;
      probe.set_value(c, v);
    } else {
      Mat m = field.gradient(c);
      m.flat(r - g.d) += delta;
      probe.set_gradient(c, m);
    }
    const double e = energy(probe, w, psi, A, t).total();
    probe.set_value(c, field.value(c));
    probe.set_gradient(c, field.gradient(c));
    return e;
  };

  FdReport rep;
  std::vector<double> fd(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    fd[i] = (perturbed(i, step) - perturbed(i, -step)) / (2.0 * step);
    rep.gradient_norm = std::max(rep.gradient_norm, std::abs(grad[i]));
  }
  const double scale = std::max(rep.gradient_norm, 1e-300);
  for (std::size_t i = 0; i < x.size(); ++i)
    rep.max_relative_error = std::max(rep.max_relative_error, std::abs(grad[i] - fd[i]) / scale);
  return rep;
}

}  // namespace sdh
