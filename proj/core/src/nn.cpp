// Copyright 2026 The itrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "itrack/nn.hpp"

#include <algorithm>
#include <cmath>

#include "itrack/errors.hpp"

namespace itrack::nn {

void OptimizerConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ValueError("optimizer: learning_rate must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ValueError("optimizer: beta1 must be in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ValueError("optimizer: beta2 must be in [0, 1)");
  if (!(eps > 0.0)) throw ValueError("optimizer: eps must be > 0");
  if (weight_decay < 0.0) throw ValueError("optimizer: weight_decay must be >= 0");
}

Parameter::Parameter(std::string n, std::size_t rows, std::size_t cols)
    : name(std::move(n)),
      value(rows, cols),
      grad(rows, cols),
      m(rows, cols),
      v(rows, cols),
      v_max(rows, cols) {}

void Parameter::init_uniform(Rng& rng, std::size_t fan_in) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (double& x : value.a) x = rng.uniform(-bound, bound);
}

void amsgrad_step(Parameter& p, const OptimizerConfig& cfg) {
  if (!all_finite(p.grad)) {
    throw DivergenceError("non-finite gradient in parameter '" + p.name + "'");
  }
  const std::int64_t t = p.step_count + 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  const std::size_t n = p.value.size();
  for (std::size_t i = 0; i < n; ++i) {
    double g = p.grad.a[i];
    if (cfg.weight_decay != 0.0) g += cfg.weight_decay * p.value.a[i];
    const double m = cfg.beta1 * p.m.a[i] + (1.0 - cfg.beta1) * g;
    const double v = cfg.beta2 * p.v.a[i] + (1.0 - cfg.beta2) * g * g;
    const double vmax = std::max(p.v_max.a[i], v);
    p.m.a[i] = m;
    p.v.a[i] = v;
    p.v_max.a[i] = vmax;
    const double m_hat = m / bc1;
    const double v_hat = vmax / bc2;
    p.value.a[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.eps);
  }
  p.step_count = t;
  p.zero_grad();
}

Vector affine(const Matrix& w, const Vector& b, const Vector& x) {
  if (b.size() != w.rows) throw ShapeError("affine: bias length != rows(W)");
  Vector y = matvec(w, x);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += b[i];
  return y;
}

AffineGrads affine_backward(const Matrix& w, const Vector& x, const Vector& dy) {
  if (dy.size() != w.rows || x.size() != w.cols) throw ShapeError("affine_backward: shape mismatch");
  AffineGrads g;
  g.dw = Matrix(w.rows, w.cols);
  add_outer(g.dw, dy, x);
  g.db = dy;
  g.dx.assign(w.cols, 0.0);
  matvec_transposed_acc(w, dy, g.dx);
  return g;
}

Vector affine_backward_acc(const Matrix& w, const Vector& x, const Vector& dy, Matrix& dw_acc,
                           Matrix& db_acc) {
  add_outer(dw_acc, dy, x);
  for (std::size_t i = 0; i < dy.size(); ++i) db_acc.a[i] += dy[i];
  Vector dx(w.cols, 0.0);
  matvec_transposed_acc(w, dy, dx);
  return dx;
}

Vector log_softmax(const Vector& z) {
  if (z.empty()) throw ShapeError("log_softmax: empty input");
  const double zmax = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double x : z) sum += std::exp(x - zmax);
  const double lse = zmax + std::log(sum);
  Vector out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i] - lse;
  return out;
}

double sigmoid(double z) {
  // Split on sign so the exponential never overflows.
  if (z >= 0.0) {
    const double e = std::exp(-z);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

Vector sigmoid(const Vector& z) {
  Vector out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = sigmoid(z[i]);
  return out;
}

ScalarLoss nll_loss(const Vector& log_probs, std::size_t target) {
  if (target >= log_probs.size()) {
    throw ValueError("nll_loss: target " + std::to_string(target) + " out of range for " +
                     std::to_string(log_probs.size()) + " classes");
  }
  ScalarLoss out;
  out.loss = -log_probs[target];
  out.grad.resize(log_probs.size());
  for (std::size_t i = 0; i < log_probs.size(); ++i) out.grad[i] = std::exp(log_probs[i]);
  out.grad[target] -= 1.0;
  return out;
}

ScalarLoss bce_multilabel_loss(const Vector& probs, const Vector& targets) {
  if (probs.size() != targets.size() || probs.empty()) {
    throw ShapeError("bce_multilabel_loss: length mismatch");
  }
  constexpr double kClamp = 1e-12;
  const double n = static_cast<double>(probs.size());
  ScalarLoss out;
  out.grad.resize(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = std::clamp(probs[i], kClamp, 1.0 - kClamp);
    const double t = targets[i];
    out.loss += -(t * std::log(p) + (1.0 - t) * std::log(1.0 - p)) / n;
    out.grad[i] = (-t / p + (1.0 - t) / (1.0 - p)) / n;
  }
  return out;
}

ScalarLoss bce_multilabel_loss_logits_grad(const Vector& probs, const Vector& targets) {
  ScalarLoss out = bce_multilabel_loss(probs, targets);
  const double n = static_cast<double>(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) out.grad[i] = (probs[i] - targets[i]) / n;
  return out;
}

Affine::Affine(const std::string& prefix, std::size_t out, std::size_t in)
    : w(prefix + ".weight", out, in), b(prefix + ".bias", out, 1) {}

void Affine::init(Rng& rng) {
  w.init_uniform(rng, w.value.cols);
  b.init_uniform(rng, w.value.cols);
}

std::vector<Parameter*> Affine::parameters() { return {&w, &b}; }

Vector Affine::backward_acc(const Vector& x, const Vector& dy) {
  return affine_backward_acc(w.value, x, dy, w.grad, b.grad);
}

LstmCell::LstmCell(std::size_t input, std::size_t hidden)
    : wxi("lstm.wxi", hidden, input),
      whi("lstm.whi", hidden, hidden),
      bi("lstm.bi", hidden, 1),
      wxf("lstm.wxf", hidden, input),
      whf("lstm.whf", hidden, hidden),
      bf("lstm.bf", hidden, 1),
      wxg("lstm.wxg", hidden, input),
      whg("lstm.whg", hidden, hidden),
      bg("lstm.bg", hidden, 1),
      wxo("lstm.wxo", hidden, input),
      who("lstm.who", hidden, hidden),
      bo("lstm.bo", hidden, 1) {}

void LstmCell::init(Rng& rng) {
  for (Parameter* p : parameters()) {
    const std::size_t fan_in = p->value.cols > 1 ? p->value.cols : hidden_size();
    p->init_uniform(rng, fan_in);
  }
}

std::vector<Parameter*> LstmCell::parameters() {
  return {&wxi, &whi, &bi, &wxf, &whf, &bf, &wxg, &whg, &bg, &wxo, &who, &bo};
}

namespace {

Vector gate_preact(const Matrix& wx, const Matrix& wh, const Matrix& b, const Vector& x,
                   const Vector& h) {
  Vector z = matvec(wx, x);
  const Vector zh = matvec(wh, h);
  for (std::size_t i = 0; i < z.size(); ++i) z[i] += zh[i] + b.a[i];
  return z;
}

}  // namespace

LstmState LstmCell::step(const Vector& x, const LstmState& s) const {
  return step(x, s, nullptr);
}

LstmState LstmCell::step(const Vector& x, const LstmState& s, LstmCache* cache) const {
  const std::size_t hidden = hidden_size();
  if (x.size() != input_size() || s.c.size() != hidden || s.h.size() != hidden) {
    throw ShapeError("lstm_step: input/state shape mismatch");
  }
  Vector gi = sigmoid(gate_preact(wxi.value, whi.value, bi.value, x, s.h));
  Vector gf = sigmoid(gate_preact(wxf.value, whf.value, bf.value, x, s.h));
  Vector gg = gate_preact(wxg.value, whg.value, bg.value, x, s.h);
  for (double& g : gg) g = std::tanh(g);
  Vector go = sigmoid(gate_preact(wxo.value, who.value, bo.value, x, s.h));

  LstmState out;
  out.c.resize(hidden);
  out.h.resize(hidden);
  Vector tanh_c(hidden);
  for (std::size_t i = 0; i < hidden; ++i) {
    out.c[i] = gf[i] * s.c[i] + gi[i] * gg[i];
    tanh_c[i] = std::tanh(out.c[i]);
    out.h[i] = go[i] * tanh_c[i];
  }
  if (cache != nullptr) {
    cache->x = x;
    cache->c_prev = s.c;
    cache->h_prev = s.h;
    cache->gi = std::move(gi);
    cache->gf = std::move(gf);
    cache->gg = std::move(gg);
    cache->go = std::move(go);
    cache->c_new = out.c;
    cache->tanh_c_new = std::move(tanh_c);
  }
  return out;
}

LstmCell::Back LstmCell::backward(const LstmCache& cache, const Vector& dc_next,
                                  const Vector& dh_next) {
  const std::size_t hidden = hidden_size();
  Vector dzi(hidden), dzf(hidden), dzg(hidden), dzo(hidden);
  Back back;
  back.dc_prev.resize(hidden);
  for (std::size_t i = 0; i < hidden; ++i) {
    const double dho = dh_next[i];
    const double tc = cache.tanh_c_new[i];
    // dL/dc' collects the direct path and the h' = o * tanh(c') path.
    const double dc = dc_next[i] + dho * cache.go[i] * (1.0 - tc * tc);
    const double gi = cache.gi[i], gf = cache.gf[i], gg = cache.gg[i], go = cache.go[i];
    dzi[i] = dc * gg * gi * (1.0 - gi);
    dzf[i] = dc * cache.c_prev[i] * gf * (1.0 - gf);
    dzg[i] = dc * gi * (1.0 - gg * gg);
    dzo[i] = dho * tc * go * (1.0 - go);
    back.dc_prev[i] = dc * gf;
  }

  back.dx.assign(input_size(), 0.0);
  back.dh_prev.assign(hidden, 0.0);
  const auto acc_gate = [&](const Vector& dz, Parameter& wx, Parameter& wh, Parameter& b) {
    add_outer(wx.grad, dz, cache.x);
    add_outer(wh.grad, dz, cache.h_prev);
    for (std::size_t i = 0; i < hidden; ++i) b.grad.a[i] += dz[i];
    matvec_transposed_acc(wx.value, dz, back.dx);
    matvec_transposed_acc(wh.value, dz, back.dh_prev);
  };
  acc_gate(dzi, wxi, whi, bi);
  acc_gate(dzf, wxf, whf, bf);
  acc_gate(dzg, wxg, whg, bg);
  acc_gate(dzo, wxo, who, bo);
  return back;
}

LstmState lstm_step(const LstmCell& cell, const Vector& x, const LstmState& s) {
  return cell.step(x, s);
}

}  // namespace itrack::nn
