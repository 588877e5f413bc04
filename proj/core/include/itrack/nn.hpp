// Copyright 2026 The itrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "itrack/linalg.hpp"
#include "itrack/rng.hpp"

namespace itrack::nn {

struct OptimizerConfig {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;

  void validate() const;  // throws ValueError on out-of-range settings
};

// A learnable tensor with its gradient accumulator and AMSGrad state.
// Vector-shaped parameters use cols = 1.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  Matrix m;      // first moment
  Matrix v;      // second moment
  Matrix v_max;  // running entrywise max of v
  std::int64_t step_count = 0;

  Parameter() = default;
  Parameter(std::string n, std::size_t rows, std::size_t cols);

  // U[-1/sqrt(fan_in), +1/sqrt(fan_in)], drawn row-major from rng.
  void init_uniform(Rng& rng, std::size_t fan_in);
  void zero_grad() { grad.fill(0.0); }
};

// One AMSGrad update with bias correction; zeroes the gradient afterwards.
// Throws DivergenceError if the gradient is not finite.
void amsgrad_step(Parameter& p, const OptimizerConfig& cfg);

// ---------------------------------------------------------------------------
// Stateless layer math. Every backward is exact and is checked against
// central finite differences in the test suite.
// ---------------------------------------------------------------------------

// y = W x + b
Vector affine(const Matrix& w, const Vector& b, const Vector& x);

struct AffineGrads {
  Matrix dw;
  Vector db;
  Vector dx;
};
AffineGrads affine_backward(const Matrix& w, const Vector& x, const Vector& dy);

// Accumulating form used on the training path; returns dx.
Vector affine_backward_acc(const Matrix& w, const Vector& x, const Vector& dy, Matrix& dw_acc,
                           Matrix& db_acc);

// Log-probabilities with max-subtraction; exp of the result sums to 1.
Vector log_softmax(const Vector& z);

double sigmoid(double z);
Vector sigmoid(const Vector& z);

struct ScalarLoss {
  double loss = 0.0;
  Vector grad;
};

// loss = -log_probs[target]; grad is w.r.t. the pre-softmax logits:
// softmax(z) - one_hot(target).
ScalarLoss nll_loss(const Vector& log_probs, std::size_t target);

// Mean binary cross-entropy over entries; grad is w.r.t. probs.
ScalarLoss bce_multilabel_loss(const Vector& probs, const Vector& targets);

// Same loss for a sigmoid head, but with grad w.r.t. the logits:
// (probs - targets) / n. Numerically safe at saturated probabilities.
ScalarLoss bce_multilabel_loss_logits_grad(const Vector& probs, const Vector& targets);

// ---------------------------------------------------------------------------
// Layers with owned parameters.
// ---------------------------------------------------------------------------

struct Affine {
  Parameter w, b;

  Affine() = default;
  Affine(const std::string& prefix, std::size_t out, std::size_t in);

  std::size_t in_features() const { return w.value.cols; }
  std::size_t out_features() const { return w.value.rows; }

  void init(Rng& rng);
  std::vector<Parameter*> parameters();

  Vector forward(const Vector& x) const { return affine(w.value, b.value.a, x); }
  // Accumulates into w.grad / b.grad; returns dx.
  Vector backward_acc(const Vector& x, const Vector& dy);
};

struct LstmState {
  Vector c, h;
};

struct LstmCache {
  Vector x, c_prev, h_prev;
  Vector gi, gf, gg, go;  // post-activation gate values
  Vector c_new, tanh_c_new;
};

// Standard cell: logistic input/forget/output gates, tanh candidate,
// c' = f.c + i.g, h' = o.tanh(c'). One bias per gate.
struct LstmCell {
  Parameter wxi, whi, bi;
  Parameter wxf, whf, bf;
  Parameter wxg, whg, bg;
  Parameter wxo, who, bo;

  LstmCell() = default;
  LstmCell(std::size_t input, std::size_t hidden);

  std::size_t input_size() const { return wxi.value.cols; }
  std::size_t hidden_size() const { return wxi.value.rows; }

  void init(Rng& rng);
  std::vector<Parameter*> parameters();

  LstmState step(const Vector& x, const LstmState& s) const;
  LstmState step(const Vector& x, const LstmState& s, LstmCache* cache) const;

  struct Back {
    Vector dx, dc_prev, dh_prev;
  };
  // Accumulates parameter gradients into the cell's grad buffers.
  Back backward(const LstmCache& cache, const Vector& dc_next, const Vector& dh_next);
};

// Free-function form of one cell application.
LstmState lstm_step(const LstmCell& cell, const Vector& x, const LstmState& s);

}  // namespace itrack::nn
