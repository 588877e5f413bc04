// Copyright 2026 The itrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "itrack/linalg.hpp"

#include <cmath>
#include <string>

#include "itrack/errors.hpp"

namespace itrack {

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

namespace {

// Four independent accumulators keep the dot product out of a single FMA
// dependency chain; the summation order is fixed, so results are
// reproducible run to run.
double dot_row(const double* w, const double* x, std::size_t n) {
  double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    a0 += w[j] * x[j];
    a1 += w[j + 1] * x[j + 1];
    a2 += w[j + 2] * x[j + 2];
    a3 += w[j + 3] * x[j + 3];
  }
  double acc = (a0 + a1) + (a2 + a3);
  for (; j < n; ++j) acc += w[j] * x[j];
  return acc;
}

}  // namespace

Vector matvec(const Matrix& w, const Vector& x) {
  if (w.cols != x.size()) {
    throw ShapeError("matvec: " + std::to_string(w.rows) + "x" + std::to_string(w.cols) +
                     " times vector of length " + std::to_string(x.size()));
  }
  Vector y(w.rows);
  const double* wp = w.a.data();
  for (std::size_t i = 0; i < w.rows; ++i) y[i] = dot_row(wp + i * w.cols, x.data(), w.cols);
  return y;
}

void matvec_transposed_acc(const Matrix& w, const Vector& y, Vector& out) {
  if (w.rows != y.size() || w.cols != out.size()) {
    throw ShapeError("matvec_transposed_acc: shape mismatch");
  }
  const double* wp = w.a.data();
  for (std::size_t i = 0; i < w.rows; ++i) {
    const double yi = y[i];
    const double* row = wp + i * w.cols;
    for (std::size_t j = 0; j < w.cols; ++j) out[j] += yi * row[j];
  }
}

void add_outer(Matrix& acc, const Vector& u, const Vector& v) {
  if (acc.rows != u.size() || acc.cols != v.size()) {
    throw ShapeError("add_outer: shape mismatch");
  }
  double* ap = acc.a.data();
  for (std::size_t i = 0; i < acc.rows; ++i) {
    const double ui = u[i];
    double* row = ap + i * acc.cols;
    for (std::size_t j = 0; j < acc.cols; ++j) row[j] += ui * v[j];
  }
}

void axpy(double alpha, const Vector& x, Vector& y) {
  if (x.size() != y.size()) throw ShapeError("axpy: length mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

double dot(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw ShapeError("dot: length mismatch");
  return dot_row(a.data(), b.data(), a.size());
}

bool all_finite(const Vector& v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

bool all_finite(const Matrix& m) { return all_finite(m.a); }

}  // namespace itrack
