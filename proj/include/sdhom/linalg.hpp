#pragma once

// Small fixed-capacity vectors and matrices for the d,N <= 2 setting.

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace sdh {

inline constexpr int kMaxDim = 2;

/// Vector with runtime dimension 1 or 2.
struct Vec {
  int dim = 1;
  std::array<double, kMaxDim> v{0.0, 0.0};

  Vec() = default;
  explicit Vec(int n) : dim(n) {}
  Vec(int n, double a, double b = 0.0) : dim(n), v{a, b} {}

  double& operator[](int i) { return v[static_cast<std::size_t>(i)]; }
  double operator[](int i) const { return v[static_cast<std::size_t>(i)]; }

  static Vec unit(int n, int axis) {
    Vec e(n);
    e[axis] = 1.0;
    return e;
  }

  double norm() const {
    double s = 0.0;
    for (int i = 0; i < dim; ++i) s += v[i] * v[i];
    return std::sqrt(s);
  }
  bool finite() const {
    for (int i = 0; i < dim; ++i)
      if (!std::isfinite(v[i])) return false;
    return true;
  }
  Vec operator-() const {
    Vec r(dim);
    for (int i = 0; i < dim; ++i) r[i] = -v[i];
    return r;
  }
  Vec& operator+=(const Vec& o) {
    for (int i = 0; i < dim; ++i) v[i] += o[i];
    return *this;
  }
  Vec& operator-=(const Vec& o) {
    for (int i = 0; i < dim; ++i) v[i] -= o[i];
    return *this;
  }
  Vec& operator*=(double s) {
    for (int i = 0; i < dim; ++i) v[i] *= s;
    return *this;
  }
  friend Vec operator+(Vec a, const Vec& b) { return a += b; }
  friend Vec operator-(Vec a, const Vec& b) { return a -= b; }
  friend Vec operator*(double s, Vec a) { return a *= s; }
  friend Vec operator*(Vec a, double s) { return a *= s; }
  friend bool operator==(const Vec& a, const Vec& b) {
    if (a.dim != b.dim) return false;
    for (int i = 0; i < a.dim; ++i)
      if (a[i] != b[i]) return false;
    return true;
  }
};

inline double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (int i = 0; i < a.dim; ++i) s += a[i] * b[i];
  return s;
}

/// d x N matrix, row-major, d,N in {1,2}.
struct Mat {
  int rows = 1;
  int cols = 1;
  std::array<double, kMaxDim * kMaxDim> a{0.0, 0.0, 0.0, 0.0};

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c) {}

  static Mat identity(int n) {
    Mat m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }
  static Mat scalar(double s) {
    Mat m(1, 1);
    m(0, 0) = s;
    return m;
  }

  double& operator()(int r, int c) { return a[static_cast<std::size_t>(r * cols + c)]; }
  double operator()(int r, int c) const { return a[static_cast<std::size_t>(r * cols + c)]; }
  int size() const { return rows * cols; }
  double& flat(int i) { return a[static_cast<std::size_t>(i)]; }
  double flat(int i) const { return a[static_cast<std::size_t>(i)]; }

  /// Frobenius norm.
  double norm() const {
    double s = 0.0;
    for (int i = 0; i < size(); ++i) s += a[i] * a[i];
    return std::sqrt(s);
  }
  bool finite() const {
    for (int i = 0; i < size(); ++i)
      if (!std::isfinite(a[i])) return false;
    return true;
  }
  Vec column(int c) const {
    Vec r(rows);
    for (int i = 0; i < rows; ++i) r[i] = (*this)(i, c);
    return r;
  }
  Vec apply(const Vec& x) const {
    Vec r(rows);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) r[i] += (*this)(i, j) * x[j];
    return r;
  }
  Mat& operator+=(const Mat& o) {
    for (int i = 0; i < size(); ++i) a[i] += o.a[i];
    return *this;
  }
  Mat& operator-=(const Mat& o) {
    for (int i = 0; i < size(); ++i) a[i] -= o.a[i];
    return *this;
  }
  Mat& operator*=(double s) {
    for (int i = 0; i < size(); ++i) a[i] *= s;
    return *this;
  }
  friend Mat operator+(Mat x, const Mat& y) { return x += y; }
  friend Mat operator-(Mat x, const Mat& y) { return x -= y; }
  friend Mat operator*(double s, Mat x) { return x *= s; }
  friend bool operator==(const Mat& x, const Mat& y) {
    if (x.rows != y.rows || x.cols != y.cols) return false;
    for (int i = 0; i < x.size(); ++i)
      if (x.a[i] != y.a[i]) return false;
    return true;
  }
};

/// Rank-one matrix a (x) b.
inline Mat outer(const Vec& a, const Vec& b) {
  Mat m(a.dim, b.dim);
  for (int i = 0; i < a.dim; ++i)
    for (int j = 0; j < b.dim; ++j) m(i, j) = a[i] * b[j];
  return m;
}

inline void require_dims(int N, int d) {
  if (N < 1 || N > kMaxDim || d < 1 || d > kMaxDim)
    throw std::invalid_argument("dimensions must satisfy N,d in {1,2}, got N=" +
                                std::to_string(N) + " d=" + std::to_string(d));
}

/// Row-major "a b;c d" rendering used in CSV cells.
std::string format_mat(const Mat& m);
std::string format_vec(const Vec& v);
/// Shortest round-trip decimal representation.
std::string format_double(double x);

}  // namespace sdh
