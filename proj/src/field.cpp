#include "sdhom/field.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace sdh {

Grid::Grid(int N_, int d_, int k_, int m_) : N(N_), d(d_), k(k_), m(m_) {
  require_dims(N, d);
  if (k < 1 || m < 1) throw std::invalid_argument("grid: k and m must be >= 1");
}

int Grid::cells() const {
  int c = 1;
  for (int i = 0; i < N; ++i) c *= per_axis();
  return c;
}

double Grid::cell_volume() const { return std::pow(h(), N); }

double Grid::face_area() const { return std::pow(h(), N - 1); }

std::array<int, kMaxDim> Grid::coords(int c) const {
  const int n = per_axis();
  return N == 1 ? std::array<int, kMaxDim>{c, 0} : std::array<int, kMaxDim>{c % n, c / n};
}

int Grid::index(std::array<int, kMaxDim> ij) const {
  const int n = per_axis();
  return N == 1 ? ij[0] : ij[0] + n * ij[1];
}

Vec Grid::center(int c) const {
  const auto ij = coords(c);
  Vec x(N);
  for (int i = 0; i < N; ++i) x[i] = (ij[i] + 0.5) * h();
  return x;
}

int Grid::face_plus(int f) const {
  auto ij = coords(face_minus(f));
  const int i = face_axis(f);
  ij[i] = (ij[i] + 1) % per_axis();
  return index(ij);
}

bool Grid::is_wrap(int f) const {
  return coords(face_minus(f))[face_axis(f)] == per_axis() - 1;
}

Vec Grid::face_midpoint(int f) const {
  Vec x = center(face_minus(f));
  x[face_axis(f)] += 0.5 * h();
  return x;
}

bool CellBox::contains(std::array<int, kMaxDim> ij, int N) const {
  for (int i = 0; i < N; ++i)
    if (ij[i] < lo[i] || ij[i] >= hi[i]) return false;
  return true;
}

// ---------------------------------------------------------------------------

DiscreteSBVField::DiscreteSBVField(const Grid& grid, bool periodic)
    : grid_(grid),
      periodic_(periodic),
      values_(static_cast<std::size_t>(grid.cells() * grid.d), 0.0),
      grads_(static_cast<std::size_t>(grid.cells() * grid.d * grid.N), 0.0),
      active_(static_cast<std::size_t>(grid.faces()), 0),
      orientation_(static_cast<std::size_t>(grid.faces()), 1) {}

Vec DiscreteSBVField::value(int c) const {
  Vec v(grid_.d);
  for (int a = 0; a < grid_.d; ++a) v[a] = values_[static_cast<std::size_t>(c * grid_.d + a)];
  return v;
}

Mat DiscreteSBVField::gradient(int c) const {
  Mat g(grid_.d, grid_.N);
  const int s = grid_.d * grid_.N;
  for (int i = 0; i < s; ++i) g.flat(i) = grads_[static_cast<std::size_t>(c * s + i)];
  return g;
}

void DiscreteSBVField::set_value(int c, const Vec& v) {
  for (int a = 0; a < grid_.d; ++a) values_[static_cast<std::size_t>(c * grid_.d + a)] = v[a];
}

void DiscreteSBVField::set_gradient(int c, const Mat& g) {
  const int s = grid_.d * grid_.N;
  for (int i = 0; i < s; ++i) grads_[static_cast<std::size_t>(c * s + i)] = g.flat(i);
}

Vec DiscreteSBVField::mismatch(int f) const {
  const int cm = grid_.face_minus(f);
  const int cp = grid_.face_plus(f);
  const int i = grid_.face_axis(f);
  const double half = 0.5 * grid_.h();
  Vec j(grid_.d);
  const Mat gm = gradient(cm);
  const Mat gp = gradient(cp);
  const Vec vm = value(cm);
  const Vec vp = value(cp);
  for (int a = 0; a < grid_.d; ++a) j[a] = (vp[a] - half * gp(a, i)) - (vm[a] + half * gm(a, i));
  return j;
}

Vec DiscreteSBVField::evaluate(int c, const Vec& x) const {
  return value(c) + gradient(c).apply(x - grid_.center(c));
}

double DiscreteSBVField::max_inactive_mismatch() const {
  double worst = 0.0;
  for (int f = 0; f < grid_.faces(); ++f)
    if (interior(f) && !active(f)) worst = std::max(worst, mismatch(f).norm());
  return worst;
}

int DiscreteSBVField::active_count() const {
  int n = 0;
  for (int f = 0; f < grid_.faces(); ++f) n += (interior(f) && active(f)) ? 1 : 0;
  return n;
}

// ---------------------------------------------------------------------------

Mat mean_gradient(const DiscreteSBVField& field) {
  const Grid& g = field.grid();
  Mat sum(g.d, g.N);
  for (int c = 0; c < g.cells(); ++c) sum += field.gradient(c);
  sum *= 1.0 / g.cells();
  return sum;
}

std::vector<JumpRecord> jump_records(const DiscreteSBVField& field, double tol) {
  const Grid& g = field.grid();
  std::vector<JumpRecord> out;
  for (int f = 0; f < g.faces(); ++f) {
    if (!field.interior(f)) continue;
    const Vec j = field.mismatch(f);
    if (j.norm() <= tol) continue;
    const double s = field.orientation(f);
    JumpRecord r;
    r.face = f;
    r.midpoint = g.face_midpoint(f);
    r.normal = s * Vec::unit(g.N, g.face_axis(f));
    r.jump = s * j;
    r.area = g.face_area();
    out.push_back(r);
  }
  return out;
}

EnergySplit energy(const DiscreteSBVField& field, const BulkDensity& w, const SurfaceDensity& psi,
                   const Mat& A, const Vec& tau, const CellBox* box) {
  const Grid& g = field.grid();
  EnergySplit e;
  const double vol = g.cell_volume();
  for (int c = 0; c < g.cells(); ++c) {
    if (box != nullptr && !box->contains(g.coords(c), g.N)) continue;
    e.bulk += vol * w(g.center(c) + tau, A + field.gradient(c));
  }
  const double area = g.face_area();
  for (int f = 0; f < g.faces(); ++f) {
    if (!field.interior(f)) continue;
    if (box != nullptr && !box->contains(g.coords(g.face_minus(f)), g.N)) continue;
    const Vec j = field.mismatch(f);
    if (j.norm() == 0.0) continue;
    const double s = field.orientation(f);
    e.surface += area * psi(g.face_midpoint(f) + tau, s * j, s * Vec::unit(g.N, g.face_axis(f)));
  }
  return e;
}

// ---------------------------------------------------------------------------

namespace {

nlohmann::json vec_json(const Vec& v) {
  auto a = nlohmann::json::array();
  for (int i = 0; i < v.dim; ++i) a.push_back(v[i]);
  return a;
}

nlohmann::json mat_json(const Mat& m) {
  auto a = nlohmann::json::array();
  for (int r = 0; r < m.rows; ++r) {
    auto row = nlohmann::json::array();
    for (int c = 0; c < m.cols; ++c) row.push_back(m(r, c));
    a.push_back(row);
  }
  return a;
}

}  // namespace

nlohmann::json to_snapshot(const DiscreteSBVField& field) {
  const Grid& g = field.grid();
  nlohmann::json j;
  j["grid"] = {{"N", g.N}, {"d", g.d}, {"k", g.k}, {"m", g.m}};
  j["periodic"] = field.periodic();
  auto cells = nlohmann::json::array();
  for (int c = 0; c < g.cells(); ++c)
    cells.push_back({{"center", vec_json(g.center(c))},
                     {"value", vec_json(field.value(c))},
                     {"grad", mat_json(field.gradient(c))}});
  j["cells"] = std::move(cells);
  auto jumps = nlohmann::json::array();
  for (int f = 0; f < g.faces(); ++f) {
    if (!field.interior(f) || !field.active(f)) continue;
    const double s = field.orientation(f);
    jumps.push_back({{"face", f},
                     {"value", vec_json(s * field.mismatch(f))},
                     {"normal", vec_json(s * Vec::unit(g.N, g.face_axis(f)))}});
  }
  j["jumps"] = std::move(jumps);
  return j;
}

DiscreteSBVField from_snapshot(const nlohmann::json& j) {
  const auto& gj = j.at("grid");
  Grid g(gj.at("N").get<int>(), gj.at("d").get<int>(), gj.at("k").get<int>(), gj.at("m").get<int>());
  DiscreteSBVField field(g, j.value("periodic", true));
  const auto& cells = j.at("cells");
  if (static_cast<int>(cells.size()) != g.cells())
    throw std::invalid_argument("snapshot: cell count does not match grid");
  for (int c = 0; c < g.cells(); ++c) {
    const auto& cj = cells[static_cast<std::size_t>(c)];
    Vec v(g.d);
    for (int a = 0; a < g.d; ++a) v[a] = cj.at("value").at(static_cast<std::size_t>(a)).get<double>();
    Mat m(g.d, g.N);
    for (int a = 0; a < g.d; ++a)
      for (int i = 0; i < g.N; ++i)
        m(a, i) = cj.at("grad").at(static_cast<std::size_t>(a)).at(static_cast<std::size_t>(i)).get<double>();
    field.set_value(c, v);
    field.set_gradient(c, m);
  }
  for (const auto& jj : j.at("jumps")) {
    const int f = jj.at("face").get<int>();
    if (f < 0 || f >= g.faces()) throw std::invalid_argument("snapshot: face id out of range");
    field.set_active(f, true);
  }
  return field;
}

}  // namespace sdh
