#include "aigi/tensor.hpp"

#include <cmath>

#include "aigi/common.hpp"

namespace aigi {

Matrix Matrix::transposed() const {
  Matrix t(cols, rows);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) t(j, i) = (*this)(i, j);
  return t;
}

double dot(const Vector& a, const Vector& b) {
  if (a.size() != b.size())
    fail(ErrorKind::Shape, "dot: dimension mismatch " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double l2_norm(const Vector& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

Vector normalized(const Vector& v) {
  const double n = l2_norm(v);
  if (!(n > 0.0) || !std::isfinite(n)) fail(ErrorKind::Shape, "cannot normalize a zero or non-finite vector");
  Vector out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] / n;
  return out;
}

Gradients zero_gradients(const std::vector<Parameter>& params) {
  Gradients g;
  g.reserve(params.size());
  for (const auto& p : params) g.emplace_back(p.size(), 0.0);
  return g;
}

}  // namespace aigi
