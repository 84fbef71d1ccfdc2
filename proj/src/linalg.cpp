#include "sdhom/linalg.hpp"

#include <charconv>

namespace sdh {

std::string format_double(double x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

std::string format_vec(const Vec& v) {
  std::string s;
  for (int i = 0; i < v.dim; ++i) {
    if (i > 0) s += ' ';
    s += format_double(v[i]);
  }
  return s;
}

std::string format_mat(const Mat& m) {
  std::string s;
  for (int r = 0; r < m.rows; ++r) {
    if (r > 0) s += ';';
    for (int c = 0; c < m.cols; ++c) {
      if (c > 0) s += ' ';
      s += format_double(m(r, c));
    }
  }
  return s;
}

}  // namespace sdh
