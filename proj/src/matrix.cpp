#include "deepar/matrix.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>

namespace deepar {

Matrix Matrix::column(std::span<const double> values) {
  Matrix m(values.size(), 1);
  std::copy(values.begin(), values.end(), m.data_.begin());
  return m;
}

void Matrix::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

bool Matrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void gemv_acc(const Matrix& a, std::span<const double> x, std::span<double> y) {
  assert(x.size() == a.cols() && y.size() == a.rows());
  const std::size_t cols = a.cols();
  const double* p = a.values().data();
  for (std::size_t r = 0; r < a.rows(); ++r, p += cols) {
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      acc += p[c] * x[c];
    }
    y[r] += acc;
  }
}

void gemv_t_acc(const Matrix& a, std::span<const double> x, std::span<double> y) {
  assert(x.size() == a.rows() && y.size() == a.cols());
  const std::size_t cols = a.cols();
  const double* p = a.values().data();
  for (std::size_t r = 0; r < a.rows(); ++r, p += cols) {
    const double xr = x[r];
    if (xr == 0.0) {
      continue;
    }
    for (std::size_t c = 0; c < cols; ++c) {
      y[c] += p[c] * xr;
    }
  }
}

void outer_acc(Matrix& a, std::span<const double> u, std::span<const double> v) {
  assert(u.size() == a.rows() && v.size() == a.cols());
  const std::size_t cols = a.cols();
  double* p = a.values().data();
  for (std::size_t r = 0; r < a.rows(); ++r, p += cols) {
    const double ur = u[r];
    if (ur == 0.0) {
      continue;
    }
    for (std::size_t c = 0; c < cols; ++c) {
      p[c] += ur * v[c];
    }
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    acc += a[i] * b[i];
  }
  return acc;
}

double squared_norm(std::span<const double> a) { return dot(a, a); }

}  // namespace deepar
