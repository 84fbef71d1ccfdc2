#include "sdhom/bulk_cell.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "sdhom/kernels.hpp"

namespace sdh {

namespace {

std::uint64_t splitmix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Vec normalized_tau(const Vec& tau, int N) {
  if (tau.dim == N) return tau;
  if (tau.norm() != 0.0) throw std::invalid_argument("shift dimension does not match N");
  return Vec(N);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// CellEnergyModel

CellEnergyModel::CellEnergyModel(const Grid& grid, const BulkDensity& w, const SurfaceDensity& psi,
                                 const Mat& A, const Vec& tau)
    : grid_(grid), w_(&w), A_(A), stride_(grid.d * (1 + grid.N)), tau_(normalized_tau(tau, grid.N)) {
  if (A.rows != grid.d || A.cols != grid.N) throw std::invalid_argument("A must be d x N");
  const int nc = grid.cells();
  centers_.reserve(static_cast<std::size_t>(nc));
  cell_weight_.reserve(static_cast<std::size_t>(nc));
  for (int c = 0; c < nc; ++c) {
    centers_.push_back(grid.center(c));
    cell_weight_.push_back(grid.cell_volume() * w.coefficient()(centers_.back() + tau_));
  }
  face_weight_.reserve(static_cast<std::size_t>(grid.faces()));
  for (int f = 0; f < grid.faces(); ++f)
    face_weight_.push_back(grid.face_area() *
                           psi.rate(grid.face_midpoint(f) + tau_, Vec::unit(grid.N, grid.face_axis(f))));
}

Vec CellEnergyModel::mismatch(std::span<const double> x, int f) const {
  const int cm = grid_.face_minus(f);
  const int cp = grid_.face_plus(f);
  const int i = grid_.face_axis(f);
  const double half = 0.5 * grid_.h();
  Vec j(grid_.d);
  for (int a = 0; a < grid_.d; ++a)
    j[a] = (x[value_dof(cp, a)] - half * x[grad_dof(cp, a, i)]) -
           (x[value_dof(cm, a)] + half * x[grad_dof(cm, a, i)]);
  return j;
}

double CellEnergyModel::energy(std::span<const double> x, std::span<const std::uint8_t> active,
                               std::span<double> grad, double smoothing) const {
  const int nc = grid_.cells();
  const int d = grid_.d;
  const int N = grid_.N;
  const int s = d * N;
  const bool want = !grad.empty();
  if (want) std::fill(grad.begin(), grad.end(), 0.0);

  // Bulk: xi_c = A + grad_c (minus the nearer well for the double-well form).
  std::vector<double> xi(static_cast<std::size_t>(s * nc));
  std::vector<double> gxi(want ? xi.size() : 0);
  const bool well = w_->form() == BulkDensity::Form::DoubleWell;
  const Mat& S = w_->well();
  for (int c = 0; c < nc; ++c) {
    Mat m(d, N);
    for (int q = 0; q < s; ++q) m.flat(q) = A_.flat(q) + x[static_cast<std::size_t>(c * stride_ + d + q)];
    if (well) {
      const Mat m1 = m - S;
      const Mat m2 = m + S;
      m = m1.norm() <= m2.norm() ? m1 : m2;
    }
    for (int q = 0; q < s; ++q) xi[static_cast<std::size_t>(q * nc + c)] = m.flat(q);
  }
  kernels::Components comps;
  kernels::GradientOut gout;
  comps.count = s;
  for (int q = 0; q < s; ++q) {
    comps.data[q] = xi.data() + q * nc;
    if (want) gout.data[q] = gxi.data() + q * nc;
  }
  const double bulk = kernels::weighted_power_norm(cell_weight_.data(), comps,
                                                   static_cast<std::size_t>(nc), w_->exponent(), gout);
  if (want)
    for (int c = 0; c < nc; ++c)
      for (int q = 0; q < s; ++q)
        grad[static_cast<std::size_t>(c * stride_ + d + q)] = gxi[static_cast<std::size_t>(q * nc + c)];

  // Surface over active faces.
  std::vector<int> faces;
  for (int f = 0; f < grid_.faces(); ++f)
    if (active[static_cast<std::size_t>(f)] != 0) faces.push_back(f);
  if (faces.empty()) return bulk;
  const auto nf = faces.size();
  const int comps_j = smoothing > 0.0 ? d + 1 : d;
  std::vector<double> jumps(static_cast<std::size_t>(comps_j) * nf, smoothing);
  std::vector<double> gj(want ? jumps.size() : 0);
  std::vector<double> weights(nf);
  double weight_sum = 0.0;
  for (std::size_t q = 0; q < nf; ++q) {
    const Vec j = mismatch(x, faces[q]);
    for (int a = 0; a < d; ++a) jumps[static_cast<std::size_t>(a) * nf + q] = j[a];
    weights[q] = face_weight_[static_cast<std::size_t>(faces[q])];
    weight_sum += weights[q];
  }
  kernels::Components jc;
  kernels::GradientOut jg;
  jc.count = comps_j;
  for (int a = 0; a < comps_j; ++a) {
    jc.data[a] = jumps.data() + static_cast<std::size_t>(a) * nf;
    if (want) jg.data[a] = gj.data() + static_cast<std::size_t>(a) * nf;
  }
  double surface = kernels::weighted_power_norm(weights.data(), jc, nf, 1.0, jg);
  if (smoothing > 0.0) surface -= smoothing * weight_sum;
  if (want) {
    const double half = 0.5 * grid_.h();
    for (std::size_t q = 0; q < nf; ++q) {
      const int f = faces[q];
      const int cm = grid_.face_minus(f);
      const int cp = grid_.face_plus(f);
      const int i = grid_.face_axis(f);
      for (int a = 0; a < d; ++a) {
        const double g = gj[static_cast<std::size_t>(a) * nf + q];
        grad[static_cast<std::size_t>(value_dof(cp, a))] += g;
        grad[static_cast<std::size_t>(grad_dof(cp, a, i))] -= half * g;
        grad[static_cast<std::size_t>(value_dof(cm, a))] -= g;
        grad[static_cast<std::size_t>(grad_dof(cm, a, i))] -= half * g;
      }
    }
  }
  return bulk + surface;
}

DiscreteSBVField CellEnergyModel::to_field(std::span<const double> x,
                                           std::span<const std::uint8_t> active) const {
  DiscreteSBVField field(grid_, true);
  for (int c = 0; c < grid_.cells(); ++c) {
    Vec v(grid_.d);
    Mat g(grid_.d, grid_.N);
    for (int a = 0; a < grid_.d; ++a) {
      v[a] = x[static_cast<std::size_t>(value_dof(c, a))];
      for (int i = 0; i < grid_.N; ++i) g(a, i) = x[static_cast<std::size_t>(grad_dof(c, a, i))];
    }
    field.set_value(c, v);
    field.set_gradient(c, g);
  }
  for (int f = 0; f < grid_.faces(); ++f) field.set_active(f, active[static_cast<std::size_t>(f)] != 0);
  return field;
}

std::vector<double> CellEnergyModel::from_field(const DiscreteSBVField& field) const {
  if (!(field.grid() == grid_)) throw std::invalid_argument("field grid does not match the model");
  std::vector<double> x(static_cast<std::size_t>(dofs()));
  for (int c = 0; c < grid_.cells(); ++c) {
    const Vec v = field.value(c);
    const Mat g = field.gradient(c);
    for (int a = 0; a < grid_.d; ++a) {
      x[static_cast<std::size_t>(value_dof(c, a))] = v[a];
      for (int i = 0; i < grid_.N; ++i) x[static_cast<std::size_t>(grad_dof(c, a, i))] = g(a, i);
    }
  }
  return x;
}

// ---------------------------------------------------------------------------
// Constraint projection: continuity on inactive faces and the mean-gradient
// condition, as C x = b. Orthogonal projection through a sparse LDL^T of
// C C^T (+ tiny diagonal to absorb rank deficiency).

namespace {

class Projector {
 public:
  Projector(const CellEnergyModel& model, std::span<const std::uint8_t> active, const Mat& target) {
    const Grid& g = model.grid();
    const int d = g.d;
    const int N = g.N;
    const double half = 0.5 * g.h();
    row_of_face_.assign(static_cast<std::size_t>(g.faces()), -1);
    std::vector<Eigen::Triplet<double>> trip;
    int rows = 0;
    for (int f = 0; f < g.faces(); ++f) {
      if (active[static_cast<std::size_t>(f)] != 0) continue;
      row_of_face_[static_cast<std::size_t>(f)] = rows;
      const int cm = g.face_minus(f);
      const int cp = g.face_plus(f);
      const int i = g.face_axis(f);
      for (int a = 0; a < d; ++a) {
        trip.emplace_back(rows + a, model.value_dof(cp, a), 1.0);
        trip.emplace_back(rows + a, model.grad_dof(cp, a, i), -half);
        trip.emplace_back(rows + a, model.value_dof(cm, a), -1.0);
        trip.emplace_back(rows + a, model.grad_dof(cm, a, i), -half);
      }
      rows += d;
    }
    mean_row_ = rows;
    const double nc = g.cells();
    const double scale = 1.0 / std::sqrt(nc);
    std::vector<double> rhs(static_cast<std::size_t>(rows), 0.0);
    for (int a = 0; a < d; ++a)
      for (int i = 0; i < N; ++i) {
        for (int c = 0; c < g.cells(); ++c) trip.emplace_back(rows, model.grad_dof(c, a, i), scale);
        rhs.push_back(target(a, i) * std::sqrt(nc));
        ++rows;
      }
    C_.resize(rows, model.dofs());
    C_.setFromTriplets(trip.begin(), trip.end());
    b_ = Eigen::Map<const Eigen::VectorXd>(rhs.data(), rows);
    Eigen::SparseMatrix<double> M = C_ * C_.transpose();
    for (int r = 0; r < rows; ++r) M.coeffRef(r, r) += 1e-13;
    ldlt_.compute(M);
    ok_ = ldlt_.info() == Eigen::Success;
  }

  bool ok() const { return ok_; }
  int face_row(int f) const { return row_of_face_[static_cast<std::size_t>(f)]; }

  void project_direction(std::span<double> g) const {
    Eigen::Map<Eigen::VectorXd> v(g.data(), static_cast<Eigen::Index>(g.size()));
    for (int pass = 0; pass < 2; ++pass) {
      const Eigen::VectorXd y = ldlt_.solve(C_ * v);
      v -= C_.transpose() * y;
    }
  }

  /// Returns the constraint residual (max norm) after projecting.
  double project_point(std::span<double> x) const {
    Eigen::Map<Eigen::VectorXd> v(x.data(), static_cast<Eigen::Index>(x.size()));
    double res = 0.0;
    for (int pass = 0; pass < 4; ++pass) {
      const Eigen::VectorXd r = C_ * v - b_;
      res = r.size() > 0 ? r.cwiseAbs().maxCoeff() : 0.0;
      if (res <= 1e-15 * (1.0 + b_.cwiseAbs().maxCoeff())) break;
      v -= C_.transpose() * ldlt_.solve(r);
    }
    const Eigen::VectorXd r = C_ * v - b_;
    return r.size() > 0 ? r.cwiseAbs().maxCoeff() : 0.0;
  }

  Eigen::VectorXd multipliers(std::span<const double> g) const {
    Eigen::Map<const Eigen::VectorXd> v(g.data(), static_cast<Eigen::Index>(g.size()));
    return ldlt_.solve(C_ * v);
  }

  double rhs_scale() const { return 1.0 + (b_.size() > 0 ? b_.cwiseAbs().maxCoeff() : 0.0); }

 private:
  Eigen::SparseMatrix<double> C_;
  Eigen::VectorXd b_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt_;
  std::vector<int> row_of_face_;
  int mean_row_ = 0;
  bool ok_ = false;
};

struct DescentOutcome {
  int iterations = 0;
  bool converged = false;
  double energy = 0.0;
};

// Projected gradient descent with Barzilai-Borwein trial steps and Armijo
// backtracking. x must be feasible on entry and stays feasible.
DescentOutcome descend(const CellEnergyModel& model, const Projector& proj,
                       std::span<const std::uint8_t> active, std::vector<double>& x, double tol,
                       int max_iterations, double smoothing) {
  const std::size_t n = x.size();
  std::vector<double> g(n), pg(n), xt(n), gt(n), pgt(n);
  DescentOutcome out;
  double E = model.energy(x, active, g, smoothing);
  pg = g;
  proj.project_direction(pg);

  double max_w = 0.0;
  for (int c = 0; c < model.grid().cells(); ++c)
    max_w = std::max(max_w, model.grid().cell_volume());
  double alpha = 0.25 / std::max(max_w, 1e-300);
  int flat_steps = 0;

  for (int it = 0; it < max_iterations; ++it) {
    const double gn2 = dot(pg, pg);
    if (std::sqrt(gn2) <= tol * (1.0 + std::abs(E))) {
      out.converged = true;
      out.iterations = it;
      break;
    }
    double step = alpha;
    double Et = E;
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      for (std::size_t i = 0; i < n; ++i) xt[i] = x[i] - step * pg[i];
      Et = model.energy(xt, active, {}, smoothing);
      if (Et <= E - 1e-4 * step * gn2) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    out.iterations = it + 1;
    if (!accepted) break;
    model.energy(xt, active, gt, smoothing);
    pgt = gt;
    proj.project_direction(pgt);
    double ss = 0.0;
    double sy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double si = xt[i] - x[i];
      ss += si * si;
      sy += si * (pgt[i] - pg[i]);
    }
    alpha = sy > 0.0 ? std::clamp(ss / sy, 1e-12 * alpha, 1e6 * alpha) : 2.0 * step;
    flat_steps = (E - Et <= 1e-15 * (1.0 + std::abs(E))) ? flat_steps + 1 : 0;
    x.swap(xt);
    pg.swap(pgt);
    E = Et;
    if ((it + 1) % 200 == 0) {
      proj.project_point(x);
      E = model.energy(x, active, g, smoothing);
      pg = g;
      proj.project_direction(pg);
    }
    if (flat_steps >= 40) break;
  }
  proj.project_point(x);
  out.energy = model.energy(x, active, {});
  return out;
}

// Continuation in the jump smoothing; the last stage is exact.
DescentOutcome minimize(const CellEnergyModel& model, const Projector& proj, std::span<const std::uint8_t> active,
                        std::vector<double>& x, const SolverParams& params, double jump_scale) {
  if (std::find(active.begin(), active.end(), std::uint8_t{1}) == active.end())
    return descend(model, proj, active, x, params.tolerance, params.max_iterations, 0.0);
  DescentOutcome total;
  for (double f : {1e-2, 1e-4, 1e-6, 1e-9, 0.0}) {
    const DescentOutcome o = descend(model, proj, active, x, params.tolerance, params.max_iterations, f * jump_scale);
    total.iterations += o.iterations;
    if (f > 0.0) total.converged = o.converged;
    total.energy = o.energy;
  }
  return total;
}

struct RestartOutcome {
  std::vector<double> x;
  std::vector<std::uint8_t> active;
  double energy = std::numeric_limits<double>::infinity();
  bool converged = false;
  int sweeps = 0;
};

class BulkSolver {
 public:
  BulkSolver(const BulkCellSpec& spec, const CellEnergyModel& model, std::vector<IterationEntry>& log)
      : spec_(spec),
        model_(model),
        grid_(model.grid()),
        target_(spec.B - spec.A),
        jump_scale_((1.0 + target_.norm()) * model.grid().h()),
        log_(log) {}

  RestartOutcome run(int restart) {
    std::mt19937_64 rng(splitmix(spec_.solver.seed ^ splitmix(static_cast<std::uint64_t>(restart) + 1)));
    RestartOutcome st;
    initialize(restart, rng, st);
    auto proj = std::make_unique<Projector>(model_, st.active, target_);
    if (!proj->ok() || proj->project_point(st.x) > 1e-9 * proj->rhs_scale())
      throw std::runtime_error("bulk cell: constraint projection failed at initialization");
    auto d0 = minimize(model_, *proj, st.active, st.x, spec_.solver, jump_scale_);
    st.energy = d0.energy;
    st.converged = d0.converged;
    note(restart, 0, "descent", d0.iterations, st);

    for (int sweep = 1; sweep <= spec_.solver.max_sweeps; ++sweep) {
      st.sweeps = sweep;
      bool changed = false;
      changed |= open_pass(restart, sweep, rng, st, proj);
      changed |= close_pass(restart, sweep, rng, st, proj);
      if (grid_.N == 2 && spec_.solver.sheet_moves) changed |= sheet_pass(restart, sweep, st, proj);
      if (!changed) break;
      if (sweep == spec_.solver.max_sweeps) st.converged = false;
    }
    return st;
  }

 private:
  void note(int restart, int sweep, const char* phase, int iterations, const RestartOutcome& st) {
    IterationEntry e;
    e.restart = restart;
    e.sweep = sweep;
    e.phase = phase;
    e.iterations = iterations;
    e.energy = st.energy;
    e.active_faces = static_cast<int>(std::count(st.active.begin(), st.active.end(), std::uint8_t{1}));
    log_.push_back(e);
  }

  // Rank-one sawtooth: grad u = B - A everywhere and one jump sheet per unit
  // length along each axis whose column of B - A is nonzero, carrying minus
  // that column.
  void initialize(int restart, std::mt19937_64& rng, RestartOutcome& st) {
    const int N = grid_.N;
    const int d = grid_.d;
    const int m = grid_.m;
    std::array<int, kMaxDim> offset{0, 0};
    if (restart > 0)
      for (int i = 0; i < N; ++i) offset[i] = std::uniform_int_distribution<int>(0, m - 1)(rng);

    st.x.assign(static_cast<std::size_t>(model_.dofs()), 0.0);
    st.active.assign(static_cast<std::size_t>(grid_.faces()), 0);
    std::array<bool, kMaxDim> sheets{false, false};
    for (int i = 0; i < N; ++i) sheets[i] = target_.column(i).norm() > 0.0;

    for (int c = 0; c < grid_.cells(); ++c) {
      const Vec xc = grid_.center(c);
      for (int a = 0; a < d; ++a) {
        double v = 0.0;
        for (int i = 0; i < N; ++i) {
          if (!sheets[i]) continue;
          const double t = xc[i] - static_cast<double>(offset[i]) / m;
          v += target_(a, i) * (t - std::floor(t));
          st.x[static_cast<std::size_t>(model_.grad_dof(c, a, i))] = target_(a, i);
        }
        st.x[static_cast<std::size_t>(model_.value_dof(c, a))] = v;
      }
    }
    for (int f = 0; f < grid_.faces(); ++f) {
      const int i = grid_.face_axis(f);
      if (!sheets[i]) continue;
      const int q = grid_.coords(grid_.face_minus(f))[i];
      if ((q + 1) % m == offset[i]) st.active[static_cast<std::size_t>(f)] = 1;
    }
    if (restart > 0) {
      const double sigma = 0.25 * (1.0 + target_.norm());
      std::normal_distribution<double> noise(0.0, sigma);
      for (int c = 0; c < grid_.cells(); ++c)
        for (int a = 0; a < d; ++a) {
          st.x[static_cast<std::size_t>(model_.value_dof(c, a))] += grid_.h() * noise(rng);
          for (int i = 0; i < N; ++i) st.x[static_cast<std::size_t>(model_.grad_dof(c, a, i))] += noise(rng);
        }
    }
    if (restart > 0 && restart % 2 == 0 && model_.density().form() == BulkDensity::Form::DoubleWell) {
      const Mat& S = model_.density().well();
      std::bernoulli_distribution coin(0.5);
      for (int c = 0; c < grid_.cells(); ++c) {
        const Mat g = (coin(rng) ? S : -1.0 * S) - model_.A();
        for (int a = 0; a < d; ++a)
          for (int i = 0; i < N; ++i) st.x[static_cast<std::size_t>(model_.grad_dof(c, a, i))] = g(a, i);
      }
    }
  }

  double strict_margin(double E) const { return 1e-12 * (1.0 + std::abs(E)); }

  // Opens every inactive face whose multiplier certifies a strict first-order
  // decrease: |mu_f| > |f| rate(x_f + tau, nu_f).
  bool open_pass(int restart, int sweep, std::mt19937_64& rng, RestartOutcome& st,
                 std::unique_ptr<Projector>& proj) {
    std::vector<double> g(st.x.size());
    model_.energy(st.x, st.active, g);
    const Eigen::VectorXd mu = proj->multipliers(g);
    std::vector<int> order;
    for (int f = 0; f < grid_.faces(); ++f)
      if (st.active[static_cast<std::size_t>(f)] == 0) order.push_back(f);
    std::shuffle(order.begin(), order.end(), rng);
    bool any = false;
    for (int f : order) {
      const int r = proj->face_row(f);
      double n2 = 0.0;
      for (int a = 0; a < grid_.d; ++a) n2 += mu[r + a] * mu[r + a];
      if (std::sqrt(n2) > model_.face_weight(f) * (1.0 + 1e-6)) {
        st.active[static_cast<std::size_t>(f)] = 1;
        any = true;
      }
    }
    if (!any) return false;
    proj = std::make_unique<Projector>(model_, st.active, target_);
    if (!proj->ok()) throw std::runtime_error("bulk cell: factorization failed after opening faces");
    auto out = minimize(model_, *proj, st.active, st.x, spec_.solver, jump_scale_);
    st.energy = out.energy;
    st.converged = out.converged;
    note(restart, sweep, "open", out.iterations, st);
    return true;
  }

  // Trial-closes each active face; keeps the closure when the re-minimised
  // energy is strictly lower, or not higher for faces already carrying a
  // vanishing jump.
  bool close_pass(int restart, int sweep, std::mt19937_64& rng, RestartOutcome& st,
                  std::unique_ptr<Projector>& proj) {
    std::vector<int> order;
    for (int f = 0; f < grid_.faces(); ++f)
      if (st.active[static_cast<std::size_t>(f)] != 0) order.push_back(f);
    std::shuffle(order.begin(), order.end(), rng);
    bool any = false;

    std::vector<std::uint8_t> batch = st.active;
    int batch_size = 0;
    for (int f : order)
      if (model_.mismatch(st.x, f).norm() <= 1e-6 * jump_scale_) {
        batch[static_cast<std::size_t>(f)] = 0;
        ++batch_size;
      }
    if (batch_size > 1) {
      auto batch_proj = std::make_unique<Projector>(model_, batch, target_);
      std::vector<double> xt = st.x;
      if (batch_proj->ok() && batch_proj->project_point(xt) <= 1e-9 * batch_proj->rhs_scale()) {
        auto out = minimize(model_, *batch_proj, batch, xt, spec_.solver, jump_scale_);
        if (out.energy <= st.energy + strict_margin(st.energy)) {
          st.x.swap(xt);
          st.active.swap(batch);
          st.energy = out.energy;
          st.converged = out.converged;
          proj = std::move(batch_proj);
          any = true;
          note(restart, sweep, "close", out.iterations, st);
          order.erase(std::remove_if(order.begin(), order.end(),
                                     [&](int f) { return st.active[static_cast<std::size_t>(f)] == 0; }),
                      order.end());
        }
      }
    }

    for (int f : order) {
      const bool vanishing = model_.mismatch(st.x, f).norm() <= 1e-6 * jump_scale_;
      std::vector<std::uint8_t> trial_active = st.active;
      trial_active[static_cast<std::size_t>(f)] = 0;
      auto trial_proj = std::make_unique<Projector>(model_, trial_active, target_);
      if (!trial_proj->ok()) continue;
      std::vector<double> xt = st.x;
      if (trial_proj->project_point(xt) > 1e-9 * trial_proj->rhs_scale()) continue;
      SolverParams screen = spec_.solver;
      screen.max_iterations = std::min(screen.max_iterations, 300);
      auto out = minimize(model_, *trial_proj, trial_active, xt, screen, jump_scale_);
      const bool better = out.energy < st.energy - strict_margin(st.energy);
      const bool neutral = vanishing && out.energy <= st.energy + strict_margin(st.energy);
      if (better || neutral) {
        out = minimize(model_, *trial_proj, trial_active, xt, spec_.solver, jump_scale_);
        st.x.swap(xt);
        st.active.swap(trial_active);
        st.energy = out.energy;
        st.converged = out.converged;
        proj = std::move(trial_proj);
        any = true;
        note(restart, sweep, "close", out.iterations, st);
      }
    }
    return any;
  }

  // Whole-sheet insertion at each lattice plane.
  bool sheet_pass(int restart, int sweep, RestartOutcome& st, std::unique_ptr<Projector>& proj) {
    bool any = false;
    const int n = grid_.per_axis();
    for (int i = 0; i < grid_.N; ++i)
      for (int q = 0; q < n; ++q) {
        std::vector<std::uint8_t> trial_active = st.active;
        bool grows = false;
        for (int t = 0; t < n; ++t) {
          std::array<int, kMaxDim> ij{0, 0};
          ij[i] = q;
          ij[1 - i] = t;
          const int f = grid_.index(ij) * grid_.N + i;
          if (trial_active[static_cast<std::size_t>(f)] == 0) {
            trial_active[static_cast<std::size_t>(f)] = 1;
            grows = true;
          }
        }
        if (!grows) continue;
        auto trial_proj = std::make_unique<Projector>(model_, trial_active, target_);
        if (!trial_proj->ok()) continue;
        std::vector<double> xt = st.x;
        auto out = minimize(model_, *trial_proj, trial_active, xt, spec_.solver, jump_scale_);
        if (out.energy < st.energy - strict_margin(st.energy)) {
          st.x.swap(xt);
          st.active.swap(trial_active);
          st.energy = out.energy;
          st.converged = out.converged;
          proj = std::move(trial_proj);
          any = true;
          note(restart, sweep, "sheet", out.iterations, st);
        }
      }
    return any;
  }

  const BulkCellSpec& spec_;
  const CellEnergyModel& model_;
  const Grid& grid_;
  Mat target_;
  double jump_scale_;
  std::vector<IterationEntry>& log_;
};

}  // namespace

BulkCellResult solve_mk(const BulkCellSpec& spec, const BulkDensity& w, const SurfaceDensity& psi) {
  const int d = spec.A.rows;
  const int N = spec.A.cols;
  require_dims(N, d);
  if (spec.B.rows != d || spec.B.cols != N) throw std::invalid_argument("solve_mk: A and B must have equal shape");
  if (!spec.A.finite() || !spec.B.finite()) throw std::invalid_argument("solve_mk: A and B must be finite");
  if (spec.k < 1 || spec.m < 1) throw std::invalid_argument("solve_mk: k and m must be >= 1");
  if (spec.solver.restarts < 1) throw std::invalid_argument("solve_mk: restarts must be >= 1");
  const Vec tau = normalized_tau(spec.tau, N);

  const Grid grid(N, d, spec.k, spec.m);
  const CellEnergyModel model(grid, w, psi, spec.A, tau);
  BulkCellResult result;
  BulkSolver solver(spec, model, result.log);

  RestartOutcome best;
  for (int r = 0; r < spec.solver.restarts; ++r) {
    RestartOutcome out = solver.run(r);
    const DiscreteSBVField f = model.to_field(out.x, out.active);
    const EnergySplit e = energy(f, w, psi, spec.A, tau);
    const double kN = std::pow(static_cast<double>(spec.k), N);
    result.restarts.push_back({r, e.total() / kN, out.converged, out.sweeps});
    if (r == 0 || e.total() / kN < result.value) {
      result.value = e.total() / kN;
      result.bulk_part = e.bulk / kN;
      result.surface_part = e.surface / kN;
      result.converged = out.converged;
      result.best_restart = r;
      result.field = f;
      best = std::move(out);
    }
  }
  return result;
}

DensityEstimate estimate_Hhom(const Mat& A, const Mat& B, const std::vector<int>& k_list,
                              const BulkDensity& w, const SurfaceDensity& psi, int m,
                              const SolverParams& params, int jobs,
                              std::vector<BulkCellResult>* results) {
  if (k_list.empty()) throw std::invalid_argument("estimate_Hhom: k_list is empty");
  std::vector<BulkCellResult> per(k_list.size());
  auto work = [&](std::size_t i) {
    BulkCellSpec spec;
    spec.A = A;
    spec.B = B;
    spec.k = k_list[i];
    spec.m = m;
    spec.tau = Vec(A.cols);
    spec.solver = params;
    per[i] = solve_mk(spec, w, psi);
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
    est.converged.push_back(per[i].converged);
    est.all_converged = est.all_converged && per[i].converged;
  }
  est.value = running;
  if (results != nullptr) *results = std::move(per);
  return est;
}

TranslationReport check_translation_invariance(const Mat& A, const Mat& B, const std::vector<Vec>& taus,
                                               int k, const BulkDensity& w, const SurfaceDensity& psi,
                                               int m, const SolverParams& params) {
  TranslationReport rep;
  rep.taus = taus;
  rep.lattice_aligned = true;
  for (const Vec& t : taus) {
    for (int i = 0; i < t.dim; ++i) {
      if (t[i] < 0.0 || t[i] >= 1.0) throw std::invalid_argument("shifts must lie in [0,1)^N");
      const double scaled = t[i] * m;
      if (std::abs(scaled - std::round(scaled)) > 1e-12) rep.lattice_aligned = false;
    }
    BulkCellSpec spec;
    spec.A = A;
    spec.B = B;
    spec.k = k;
    spec.m = m;
    spec.tau = t;
    spec.solver = params;
    rep.values.push_back(solve_mk(spec, w, psi).value);
  }
  for (std::size_t i = 0; i < rep.values.size(); ++i)
    for (std::size_t j = i + 1; j < rep.values.size(); ++j)
      rep.max_deviation = std::max(rep.max_deviation, std::abs(rep.values[i] - rep.values[j]));
  rep.tolerance = rep.lattice_aligned ? 1e-9 : 1.0 / k;
  rep.passed = rep.max_deviation <= rep.tolerance;
  return rep;
}

DiscreteSBVField average_translates(const DiscreteSBVField& field) {
  const Grid& g = field.grid();
  const Grid unit(g.N, g.d, 1, g.m);
  DiscreteSBVField out(unit, true);
  const int k = g.k;
  const int m = g.m;
  const int copies = g.N == 1 ? k : k * k;
  const double inv = 1.0 / copies;
  for (int c = 0; c < unit.cells(); ++c) {
    const auto ij = unit.coords(c);
    Vec v(g.d);
    Mat grad(g.d, g.N);
    for (int j = 0; j < copies; ++j) {
      std::array<int, kMaxDim> src = ij;
      src[0] += (j % k) * m;
      if (g.N == 2) src[1] += (j / k) * m;
      const int sc = g.index(src);
      v += field.value(sc);
      grad += field.gradient(sc);
    }
    out.set_value(c, inv * v);
    out.set_gradient(c, inv * grad);
  }
  for (int f = 0; f < unit.faces(); ++f) {
    const auto ij = unit.coords(unit.face_minus(f));
    bool on = false;
    for (int j = 0; j < copies && !on; ++j) {
      std::array<int, kMaxDim> src = ij;
      src[0] += (j % k) * m;
      if (g.N == 2) src[1] += (j / k) * m;
      const int sf = g.index(src) * g.N + unit.face_axis(f);
      on = field.active(sf) || field.mismatch(sf).norm() > kAssemblyTolerance;
    }
    out.set_active(f, on);
  }
  return out;
}

}  // namespace sdh
