#include "sdhom/approx.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

namespace sdh {

namespace {

struct GaussRule {
  std::vector<double> nodes;  // on [0,1]
  std::vector<double> weights;
};

GaussRule gauss_rule(int points) {
  static const double r3 = std::sqrt(3.0 / 5.0);
  const double a4 = std::sqrt(3.0 / 7.0 - 2.0 / 7.0 * std::sqrt(6.0 / 5.0));
  const double b4 = std::sqrt(3.0 / 7.0 + 2.0 / 7.0 * std::sqrt(6.0 / 5.0));
  const double wa4 = (18.0 + std::sqrt(30.0)) / 36.0;
  const double wb4 = (18.0 - std::sqrt(30.0)) / 36.0;
  std::vector<double> x;
  std::vector<double> w;
  switch (points) {
    case 1: x = {0.0}; w = {2.0}; break;
    case 2: x = {-1.0 / std::sqrt(3.0), 1.0 / std::sqrt(3.0)}; w = {1.0, 1.0}; break;
    case 3: x = {-r3, 0.0, r3}; w = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0}; break;
    case 4: x = {-b4, -a4, a4, b4}; w = {wb4, wa4, wa4, wb4}; break;
    default: throw std::invalid_argument("gauss_points must be in 1..4");
  }
  GaussRule r;
  for (std::size_t i = 0; i < x.size(); ++i) {
    r.nodes.push_back(0.5 * (x[i] + 1.0));
    r.weights.push_back(0.5 * w[i]);
  }
  return r;
}

double l1_norm(const DiscreteSBVField& f) {
  const Grid& g = f.grid();
  const GaussRule q = gauss_rule(3);
  const int nq = static_cast<int>(q.nodes.size());
  const int pts = g.N == 1 ? nq : nq * nq;
  double total = 0.0;
  for (int c = 0; c < g.cells(); ++c) {
    const Vec v = f.value(c);
    const Mat grad = f.gradient(c);
    double cell = 0.0;
    for (int p = 0; p < pts; ++p) {
      Vec off(g.N);
      double wt = 1.0;
      for (int i = 0; i < g.N; ++i) {
        const int qi = i == 0 ? p % nq : p / nq;
        off[i] = (q.nodes[static_cast<std::size_t>(qi)] - 0.5) * g.h();
        wt *= q.weights[static_cast<std::size_t>(qi)];
      }
      cell += wt * (v + grad.apply(off)).norm();
    }
    total += cell * g.cell_volume();
  }
  return total;
}

}  // namespace

SawtoothSequence::SawtoothSequence(StructuredDeformationSample sample) : sample_(std::move(sample)) {
  require_dims(sample_.A.cols, sample_.A.rows);
  if (sample_.G.rows != sample_.A.rows || sample_.G.cols != sample_.A.cols)
    throw std::invalid_argument("G must have the shape of A");
  if (sample_.g0.dim != sample_.A.rows) sample_.g0 = Vec(sample_.A.rows);
}

Vec SawtoothSequence::evaluate(int n, const Vec& x) const {
  if (n < 1) throw std::invalid_argument("n must be >= 1");
  Vec u = sample_.A.apply(x) + sample_.g0;
  const Mat M = sample_.G - sample_.A;
  for (int i = 0; i < N(); ++i) {
    const double s = x[i] - std::floor(n * x[i]) / n;
    u += s * M.column(i);
  }
  return u;
}

std::vector<SheetFamily> SawtoothSequence::sheets(int n) const {
  if (n < 1) throw std::invalid_argument("n must be >= 1");
  std::vector<SheetFamily> out;
  const Mat M = sample_.G - sample_.A;
  for (int i = 0; i < N(); ++i) {
    const Vec col = M.column(i);
    if (col.norm() == 0.0) continue;
    SheetFamily s;
    s.axis = i;
    for (int j = 0; j < n; ++j) s.positions.push_back(static_cast<double>(j) / n);
    s.jump = (-1.0 / n) * col;
    out.push_back(std::move(s));
  }
  return out;
}

double SawtoothSequence::total_variation(int n) const {
  double tv = sample_.G.norm();
  for (const SheetFamily& s : sheets(n))
    for (std::size_t j = 0; j < s.positions.size(); ++j) tv += s.jump.norm();
  return tv;
}

double SawtoothSequence::l1_distance(int n, int gauss_points) const {
  if (n < 1) throw std::invalid_argument("n must be >= 1");
  const GaussRule q = gauss_rule(gauss_points);
  const int nq = gauss_points;
  const Mat M = sample_.G - sample_.A;
  const double h = 1.0 / n;
  const int teeth = N() == 1 ? n : n * n;
  const int pts = N() == 1 ? nq : nq * nq;
  double total = 0.0;
  for (int t = 0; t < teeth; ++t) {
    double tooth = 0.0;
    for (int p = 0; p < pts; ++p) {
      Vec u(d());
      double wt = 1.0;
      for (int i = 0; i < N(); ++i) {
        const int qi = i == 0 ? p % nq : p / nq;
        u += (q.nodes[static_cast<std::size_t>(qi)] * h) * M.column(i);
        wt *= q.weights[static_cast<std::size_t>(qi)];
      }
      tooth += wt * u.norm();
    }
    total += tooth * std::pow(h, N());
  }
  return total;
}

DiscreteSBVField SawtoothSequence::periodic_part(int n, int per_tooth) const {
  if (n < 1 || per_tooth < 1) throw std::invalid_argument("n and per_tooth must be >= 1");
  const int Mcells = n * per_tooth;
  const Grid grid(N(), d(), 1, Mcells);
  DiscreteSBVField f(grid, true);
  const Mat M = sample_.G - sample_.A;
  for (int c = 0; c < grid.cells(); ++c) {
    const auto ij = grid.coords(c);
    Vec v(d());
    for (int i = 0; i < N(); ++i) {
      const double s = ((ij[i] % per_tooth) + 0.5) / Mcells;
      v += s * M.column(i);
    }
    f.set_value(c, v);
    f.set_gradient(c, M);
  }
  for (int fc = 0; fc < grid.faces(); ++fc) {
    const int i = grid.face_axis(fc);
    const int q = grid.coords(grid.face_minus(fc))[i];
    f.set_active(fc, M.column(i).norm() > 0.0 && (q + 1) % per_tooth == 0);
  }
  return f;
}

Mat SawtoothSequence::singular_moment(int n, const std::function<double(const Vec&)>& phi) const {
  const GaussRule q = gauss_rule(4);
  Mat out(d(), N());
  for (const SheetFamily& s : sheets(n)) {
    for (double pos : s.positions) {
      double integral = 0.0;
      if (N() == 1) {
        integral = phi(Vec(1, pos));
      } else {
        for (std::size_t p = 0; p < q.nodes.size(); ++p) {
          Vec x(2);
          x[s.axis] = pos;
          x[1 - s.axis] = q.nodes[p];
          integral += q.weights[p] * phi(x);
        }
      }
      out += integral * outer(s.jump, Vec::unit(N(), s.axis));
    }
  }
  return out;
}

EnergySplit scaled_energy(const DiscreteSBVField& v, const Mat& A, int inv_eps, const BulkDensity& w,
                          const SurfaceDensity& psi) {
  const Grid& g = v.grid();
  if (g.k != 1) throw std::invalid_argument("scaled_energy expects a field on the unit cube");
  if (!v.periodic()) throw std::invalid_argument("scaled_energy expects a periodic field");
  if (inv_eps < 1) throw std::invalid_argument("inv_eps must be >= 1");
  const int Mcells = g.m;
  const bool aligned = Mcells % inv_eps == 0;
  const int per = aligned ? Mcells / inv_eps : 0;
  auto coord = [&](int i) {
    return aligned ? ((i % per) + 0.5) * (1.0 / per) : (i + 0.5) * inv_eps / Mcells;
  };
  auto half_step = [&]() { return aligned ? 0.5 / per : 0.5 * inv_eps / Mcells; };

  EnergySplit e;
  for (int c = 0; c < g.cells(); ++c) {
    const auto ij = g.coords(c);
    Vec y(g.N);
    for (int i = 0; i < g.N; ++i) y[i] = coord(ij[i]);
    e.bulk += g.cell_volume() * w(y, A + v.gradient(c));
  }
  for (int f = 0; f < g.faces(); ++f) {
    const Vec jump = v.mismatch(f);
    if (jump.norm() == 0.0) continue;
    const auto ij = g.coords(g.face_minus(f));
    const int axis = g.face_axis(f);
    Vec y(g.N);
    for (int i = 0; i < g.N; ++i) y[i] = coord(ij[i]);
    y[axis] += half_step();
    e.surface += g.face_area() * psi(y, jump, Vec::unit(g.N, axis));
  }
  return e;
}

std::vector<EnergyPoint> eval_sequence_energy(const SawtoothSequence& seq, const std::function<int(int)>& inv_eps,
                                              const BulkDensity& w, const SurfaceDensity& psi,
                                              const std::vector<int>& n_list, int per_tooth) {
  std::vector<EnergyPoint> out;
  for (int n : n_list) {
    const int q = inv_eps(n);
    const DiscreteSBVField v = seq.periodic_part(n, per_tooth);
    const EnergySplit e = scaled_energy(v, seq.sample().A, q, w, psi);
    EnergyPoint p;
    p.n = n;
    p.eps = 1.0 / q;
    p.bulk = e.bulk;
    p.surface = e.surface;
    p.total = e.total();
    p.l1_distance = seq.l1_distance(n);
    out.push_back(p);
  }
  return out;
}

DiscreteSBVField build_cell_recovery_sequence(const DiscreteSBVField& cell_field, int inv_eps) {
  const Grid& g = cell_field.grid();
  if (!cell_field.periodic()) throw std::invalid_argument("cell field must be periodic");
  if (inv_eps < 1 || inv_eps % g.k != 0)
    throw std::invalid_argument("eps is incommensurate with the cell: use eps_n = 1/(k n)");
  const double eps = 1.0 / inv_eps;
  const int n_per = g.per_axis();
  const Grid out_grid(g.N, g.d, 1, inv_eps * g.m);
  DiscreteSBVField out(out_grid, true);
  for (int c = 0; c < out_grid.cells(); ++c) {
    auto ij = out_grid.coords(c);
    for (int i = 0; i < g.N; ++i) ij[i] %= n_per;
    const int src = g.index(ij);
    out.set_value(c, eps * cell_field.value(src));
    out.set_gradient(c, cell_field.gradient(src));
  }
  for (int f = 0; f < out_grid.faces(); ++f) {
    auto ij = out_grid.coords(out_grid.face_minus(f));
    for (int i = 0; i < g.N; ++i) ij[i] %= n_per;
    out.set_active(f, cell_field.active(g.index(ij) * g.N + out_grid.face_axis(f)));
  }
  return out;
}

EnergyPoint eval_recovery_energy(const DiscreteSBVField& cell_field, const Mat& A, int n, const BulkDensity& w,
                                 const SurfaceDensity& psi) {
  const int q = cell_field.grid().k * n;
  const DiscreteSBVField v = build_cell_recovery_sequence(cell_field, q);
  const EnergySplit e = scaled_energy(v, A, q, w, psi);
  EnergyPoint p;
  p.n = n;
  p.eps = 1.0 / q;
  p.bulk = e.bulk;
  p.surface = e.surface;
  p.total = e.total();
  p.l1_distance = l1_norm(v);
  return p;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("loglog_slope needs two or more points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]);
    const double ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace sdh
