// Copyright 2026 The itrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

namespace itrack {

using Vector = std::vector<double>;

// Dense row-major matrix of doubles. Vector-shaped parameters are stored
// as (n, 1).
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> a;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), a(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return a[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return a[i * cols + j]; }

  std::size_t size() const { return a.size(); }
  void fill(double v) { a.assign(a.size(), v); }

  static Matrix identity(std::size_t n);

  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
  bool operator==(const Matrix& o) const = default;
};

// y = W x. Throws ShapeError on mismatch.
Vector matvec(const Matrix& w, const Vector& x);

// out += W^T y. out must have size cols(W).
void matvec_transposed_acc(const Matrix& w, const Vector& y, Vector& out);

// acc += u v^T. acc must be (len(u), len(v)).
void add_outer(Matrix& acc, const Vector& u, const Vector& v);

// y += alpha * x.
void axpy(double alpha, const Vector& x, Vector& y);

double dot(const Vector& a, const Vector& b);

bool all_finite(const Vector& v);
bool all_finite(const Matrix& m);

}  // namespace itrack
