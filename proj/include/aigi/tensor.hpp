#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace aigi {

using Vector = std::vector<double>;

/// Dense row-major matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  Matrix transposed() const;
  bool operator==(const Matrix&) const = default;
};

double dot(const Vector& a, const Vector& b);
double l2_norm(const Vector& v);
/// v / ||v||; a zero vector is a shape error (it has no direction).
Vector normalized(const Vector& v);

/// A named trainable tensor. `decay` marks participation in weight decay.
struct Parameter {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> value;
  bool decay = true;

  std::size_t size() const noexcept { return value.size(); }
};

/// Gradient buffers laid out parallel to a parameter list.
using Gradients = std::vector<std::vector<double>>;

Gradients zero_gradients(const std::vector<Parameter>& params);

}  // namespace aigi
