//
// Copyright 2026 The UMEDA Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

// Generative aggregation of kernel updates in spectral coordinates.
//
// Client updates are projected onto the top-r broadcast basis,
// Sigma_k = U_r^T dM_k W_r, and the r^2 coefficients are treated as samples
// from an unknown distribution. A small score network is fitted by
// denoising score matching under a variance-exploding SDE and a consensus
// is drawn by Euler-Maruyama integration of the reverse-time SDE.
//
//   sigma(t) = sigma_min (sigma_max / sigma_min)^t
//   g(t)     = sigma(t) sqrt(2 ln(sigma_max / sigma_min))
//   forward  theta_t = theta_0 + sigma(t) eps
//   reverse  theta <- theta + g(t)^2 s(theta, t) dt + g(t) sqrt(dt) xi

#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "umeda/linalg.hpp"
#include "umeda/optim.hpp"

namespace umeda {

struct VeSchedule {
  double sigma_min = 0.01;
  double sigma_max = 50.0;

  void Validate() const {
    if (!(sigma_min > 0.0 && sigma_max > sigma_min)) {
      throw ValidationError(internal::StrCat("VE schedule needs 0 < sigma_min < sigma_max, got ",
                                             sigma_min, ", ", sigma_max));
    }
  }

  double Sigma(double t) const {
    CheckTime(t);
    return sigma_min * std::pow(sigma_max / sigma_min, t);
  }

  double G(double t) const {
    return Sigma(t) * std::sqrt(2.0 * std::log(sigma_max / sigma_min));
  }

 private:
  static void CheckTime(double t) {
    if (!(t >= 0.0 && t <= 1.0))
      throw ValidationError(internal::StrCat("diffusion time ", t, " outside [0,1]"));
  }
};

struct SpectralCoeffs {
  Vector theta;  // vec of an r x r coefficient matrix, length r^2
  std::size_t rank = 0;

  static SpectralCoeffs Zero(std::size_t rank) { return {Vector(rank * rank, 0.0), rank}; }
  std::size_t size() const { return theta.size(); }
};

// ---------------------------------------------------------------------------
// Score network: x = [c_in(t) theta_t, emb(t)] -> c_out(t) (W2 silu(W1 x + b1) + b2).
//
// With preconditioning on, c_in = 1 / sqrt(1 + sigma(t)^2) and
// c_out = 1 / sigma(t), so the two layers only ever see O(1) inputs and
// targets while the score itself spans 1/sigma_max .. 1/sigma_min.
// Without it both factors are 1.

struct ScoreNet {
  Matrix w1;  // hidden x (state + t_embed)
  Matrix b1;  // 1 x hidden
  Matrix w2;  // state x hidden
  Matrix b2;  // 1 x state
  std::size_t t_embed_dim = 0;
  std::optional<VeSchedule> precondition;

  static ScoreNet Zero(std::size_t state_dim, std::size_t hidden, std::size_t t_embed_dim) {
    if (t_embed_dim % 2 != 0) throw ValidationError("t_embed_dim must be even");
    return ScoreNet{Matrix(hidden, state_dim + t_embed_dim), Matrix(1, hidden),
                    Matrix(state_dim, hidden), Matrix(1, state_dim), t_embed_dim, std::nullopt};
  }

  static ScoreNet Create(std::size_t state_dim, std::size_t hidden, std::size_t t_embed_dim,
                         Rng& rng, std::optional<VeSchedule> precondition = std::nullopt) {
    ScoreNet n = Zero(state_dim, hidden, t_embed_dim);
    n.precondition = precondition;
    n.w1 = Matrix::Gaussian(hidden, state_dim + t_embed_dim, rng,
                            1.0 / std::sqrt(static_cast<double>(state_dim + t_embed_dim)));
    n.w2 = Matrix::Gaussian(state_dim, hidden, rng,
                            1.0 / std::sqrt(static_cast<double>(hidden)));
    return n;
  }

  std::size_t state_dim() const { return w2.rows(); }
  std::size_t hidden() const { return w1.rows(); }

  double InputScale(double t) const {
    if (!precondition) return 1.0;
    const double s = precondition->Sigma(t);
    return 1.0 / std::sqrt(1.0 + s * s);
  }
  double OutputScale(double t) const {
    return precondition ? 1.0 / precondition->Sigma(t) : 1.0;
  }

  std::vector<Matrix*> Params() { return {&w1, &b1, &w2, &b2}; }
  std::vector<const Matrix*> Params() const { return {&w1, &b1, &w2, &b2}; }
};

// sin(t 2^j pi) for j < dim/2, followed by the matching cosines.
inline Vector TimeEmbedding(double t, std::size_t dim) {
  Vector e(dim);
  const std::size_t half = dim / 2;
  for (std::size_t j = 0; j < half; ++j) {
    const double arg = t * std::ldexp(1.0, static_cast<int>(j)) * std::numbers::pi;
    e[j] = std::sin(arg);
    e[half + j] = std::cos(arg);
  }
  return e;
}

namespace internal {

inline double Sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
// SiLU(x) = x sigmoid(x), the hidden-layer activation.
inline double Silu(double x) { return x * Sigmoid(x); }
inline double SiluGrad(double x) {
  const double s = Sigmoid(x);
  return s * (1.0 + x * (1.0 - s));
}

struct ScoreActivations {
  Vector input;
  Vector pre;
  Vector hidden;
  Vector out;
  double c_out = 1.0;
};

inline ScoreActivations ScoreForwardFull(const ScoreNet& net, std::span<const double> theta_t,
                                         double t) {
  if (theta_t.size() != net.state_dim()) {
    throw ValidationError(internal::StrCat("score net expects state of length ",
                                           net.state_dim(), ", got ", theta_t.size()));
  }
  ScoreActivations a;
  a.input.assign(theta_t.begin(), theta_t.end());
  const double c_in = net.InputScale(t);
  for (double& x : a.input) x *= c_in;
  const Vector emb = TimeEmbedding(t, net.t_embed_dim);
  a.input.insert(a.input.end(), emb.begin(), emb.end());
  a.pre = MatVec(net.w1, a.input);
  a.hidden.resize(a.pre.size());
  for (std::size_t i = 0; i < a.pre.size(); ++i) {
    a.pre[i] += net.b1.data()[i];
    a.hidden[i] = Silu(a.pre[i]);
  }
  a.out = MatVec(net.w2, a.hidden);
  a.c_out = net.OutputScale(t);
  for (std::size_t i = 0; i < a.out.size(); ++i) a.out[i] = a.c_out * (a.out[i] + net.b2.data()[i]);
  return a;
}

}  // namespace internal

inline Vector ScoreForward(const ScoreNet& net, std::span<const double> theta_t, double t) {
  return internal::ScoreForwardFull(net, theta_t, t).out;
}

// ---------------------------------------------------------------------------
// Forward process and denoising score matching.

struct NoisedSample {
  SpectralCoeffs theta_t;
  Vector eps;
};

inline NoisedSample ForwardNoise(const VeSchedule& sched, const SpectralCoeffs& theta0,
                                 double t, Rng& rng) {
  const double sigma = sched.Sigma(t);
  NoisedSample s{theta0, Gaussian(rng, theta0.size(), 1.0)};
  for (std::size_t i = 0; i < s.eps.size(); ++i) s.theta_t.theta[i] += sigma * s.eps[i];
  return s;
}

struct DsmResult {
  double loss = 0.0;
  ScoreNet grad;  // same shapes as the net
};

inline constexpr double kDsmTimeFloor = 1e-3;

// kNone is the plain objective. kSigmaSquared multiplies each term by
// sigma(t)^2, which keeps the large-t terms from vanishing next to the
// 1/sigma^2-sized small-t terms.
enum class DsmWeighting { kNone, kSigmaSquared };

// Loss and exact gradient for given diffusion times and noise vectors:
//   L = (1/n) sum_i w(t_i) || s(theta0_i + sigma(t_i) eps_i, t_i) + eps_i / sigma(t_i) ||^2
inline DsmResult DsmLossAt(const ScoreNet& net, const VeSchedule& sched,
                           std::span<const SpectralCoeffs> batch, std::span<const double> times,
                           std::span<const Vector> noise,
                           DsmWeighting weighting = DsmWeighting::kNone) {
  if (batch.empty()) throw ValidationError("dsm loss: empty batch");
  DsmResult r{0.0, ScoreNet::Zero(net.state_dim(), net.hidden(), net.t_embed_dim)};
  if (times.size() != batch.size() || noise.size() != batch.size())
    throw ValidationError("dsm loss: times/noise count must match the batch");
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double sigma = sched.Sigma(times[i]);
    Vector theta_t = batch[i].theta;
    for (std::size_t j = 0; j < theta_t.size(); ++j) theta_t[j] += sigma * noise[i][j];
    const auto act = internal::ScoreForwardFull(net, theta_t, times[i]);
    const double w = weighting == DsmWeighting::kSigmaSquared ? sigma * sigma * inv_n : inv_n;

    Vector d_out(act.out.size());
    for (std::size_t j = 0; j < act.out.size(); ++j) {
      const double res = act.out[j] + noise[i][j] / sigma;
      r.loss += res * res * w;
      d_out[j] = 2.0 * res * w * act.c_out;
    }
    Vector d_pre(act.hidden.size(), 0.0);
    for (std::size_t o = 0; o < d_out.size(); ++o) {
      r.grad.b2.data()[o] += d_out[o];
      auto w2row = net.w2.row(o);
      auto g2row = r.grad.w2.row(o);
      for (std::size_t h = 0; h < act.hidden.size(); ++h) {
        g2row[h] += d_out[o] * act.hidden[h];
        d_pre[h] += d_out[o] * w2row[h];
      }
    }
    for (std::size_t h = 0; h < d_pre.size(); ++h) {
      d_pre[h] *= internal::SiluGrad(act.pre[h]);
      r.grad.b1.data()[h] += d_pre[h];
      auto g1row = r.grad.w1.row(h);
      for (std::size_t k = 0; k < act.input.size(); ++k) g1row[k] += d_pre[h] * act.input[k];
    }
  }
  return r;
}

// Draws t ~ U[t_floor, 1] and eps ~ N(0, I) per element (t first, then eps,
// element by element) and evaluates DsmLossAt.
inline DsmResult DsmLoss(const ScoreNet& net, const VeSchedule& sched,
                         std::span<const SpectralCoeffs> batch, Rng& rng,
                         double t_floor = kDsmTimeFloor,
                         DsmWeighting weighting = DsmWeighting::kNone) {
  if (batch.empty()) throw ValidationError("dsm loss: empty batch");
  Vector times(batch.size());
  std::vector<Vector> noise(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    times[i] = t_floor + (1.0 - t_floor) * rng.Uniform();
    noise[i] = Gaussian(rng, batch[i].size(), 1.0);
  }
  return DsmLossAt(net, sched, batch, times, noise, weighting);
}

// Runs `steps` Adam updates on fresh DSM draws. Optimizer moments start from
// zero on every call; the network parameters carry over. Returns the
// per-step losses.
inline Vector TrainScoreNet(ScoreNet& net, const VeSchedule& sched,
                            std::span<const SpectralCoeffs> data, std::size_t steps,
                            double lr, Rng& rng, double t_floor = kDsmTimeFloor,
                            DsmWeighting weighting = DsmWeighting::kNone) {
  AdamW opt({.lr = lr});
  Vector losses;
  losses.reserve(steps);
  std::vector<Matrix*> params = net.Params();
  for (std::size_t s = 0; s < steps; ++s) {
    DsmResult r = DsmLoss(net, sched, data, rng, t_floor, weighting);
    losses.push_back(r.loss);
    const auto grads = std::as_const(r.grad).Params();
    opt.Step(params, grads);
  }
  return losses;
}

// ---------------------------------------------------------------------------
// Reverse-time sampling.

// `score(theta, t)` returns the score estimate. Integrates from t = 1 down to
// t = 0 in n_steps uniform steps, evaluating the drift and diffusion at the
// start of each step. The last step adds no noise.
template <typename ScoreFn>
SpectralCoeffs ReverseSample(ScoreFn&& score, std::size_t rank, const VeSchedule& sched,
                             std::size_t n_steps, Rng& rng,
                             const std::optional<SpectralCoeffs>& init = std::nullopt) {
  if (n_steps < 1) throw ValidationError("reverse sampling needs n_steps >= 1");
  SpectralCoeffs x = init ? *init : SpectralCoeffs{Gaussian(rng, rank * rank, sched.sigma_max), rank};
  if (x.size() != rank * rank) throw ValidationError("reverse sampling: init length");
  const double dt = 1.0 / static_cast<double>(n_steps);
  for (std::size_t i = 0; i < n_steps; ++i) {
    const double t = 1.0 - static_cast<double>(i) * dt;
    const double g = sched.G(t);
    const Vector s = score(std::as_const(x.theta), t);
    for (std::size_t j = 0; j < x.size(); ++j) x.theta[j] += g * g * s[j] * dt;
    if (i + 1 < n_steps) {
      const double amp = g * std::sqrt(dt);
      for (double& v : x.theta) v += amp * rng.Normal();
    }
  }
  return x;
}

inline SpectralCoeffs ReverseSample(const ScoreNet& net, const VeSchedule& sched,
                                    std::size_t n_steps, Rng& rng,
                                    const std::optional<SpectralCoeffs>& init = std::nullopt) {
  const auto rank = static_cast<std::size_t>(std::llround(std::sqrt(net.state_dim())));
  return ReverseSample(
      [&net](const Vector& th, double t) { return ScoreForward(net, th, t); }, rank, sched,
      n_steps, rng, init);
}

// ---------------------------------------------------------------------------
// Spectral coordinates.

inline SpectralCoeffs SpectralProject(const Matrix& delta_m, const Matrix& u_g,
                                      const Matrix& w_g, std::size_t rank) {
  if (rank < 1 || rank > delta_m.rows() || rank > u_g.cols() || rank > w_g.cols()) {
    throw ValidationError(internal::StrCat("spectral rank ", rank, " exceeds basis size"));
  }
  const Matrix u_r = LeadingColumns(u_g, rank);
  const Matrix w_r = LeadingColumns(w_g, rank);
  return {Vec(MatMul(MatMulTN(u_r, delta_m), w_r)), rank};
}

inline Matrix SpectralReconstruct(const SpectralCoeffs& theta, const Matrix& u_g,
                                  const Matrix& w_g) {
  const std::size_t r = theta.rank;
  if (theta.size() != r * r) throw ValidationError("spectral coeffs length != rank^2");
  const Matrix u_r = LeadingColumns(u_g, r);
  const Matrix w_r = LeadingColumns(w_g, r);
  return MatMulNT(MatMul(u_r, Unvec(theta.theta, r, r)), w_r);
}

// ---------------------------------------------------------------------------
// Server-side aggregation.

inline constexpr double kDivergenceFactor = 10.0;

struct AggregateOptions {
  std::size_t train_steps = 200;
  std::size_t n_rev = 50;
  double lr = 1e-3;
  std::size_t consensus_samples = 1;
  double t_floor = kDsmTimeFloor;
  DsmWeighting weighting = DsmWeighting::kSigmaSquared;
};

struct AggregateResult {
  Matrix delta_m;             // reconstructed consensus update
  SpectralCoeffs consensus;   // de-standardized coefficients
  double final_dsm_loss = 0.0;
  std::vector<std::string> warnings;
};

// Projects every update, standardizes the coefficient cloud (shared mean,
// scalar RMS spread), trains the score net on it, averages
// `consensus_samples` reverse samples and maps the result back.
//
// Updates are sorted by their coefficients before training so the outcome
// does not depend on the order they arrive in. When the cloud has no spread
// (one client, or identical clients) it is a point mass: the score net is
// left untouched and the consensus is the mean itself. A non-finite sample
// also falls back to the mean, as does one with a standardized coordinate
// beyond kDivergenceFactor times the largest standardized data coordinate.
inline AggregateResult Aggregate(std::span<const Matrix> updates, const Matrix& u_g,
                                 const Matrix& w_g, std::size_t rank, ScoreNet& net,
                                 const VeSchedule& sched, const AggregateOptions& opts,
                                 Rng& rng) {
  if (updates.empty()) throw ValidationError("aggregate: no updates");
  if (net.state_dim() != rank * rank)
    throw ValidationError("aggregate: score net state dim != rank^2");
  if (opts.consensus_samples < 1) throw ValidationError("consensus_samples must be >= 1");

  AggregateResult r;
  std::vector<SpectralCoeffs> coeffs;
  coeffs.reserve(updates.size());
  for (const Matrix& u : updates) coeffs.push_back(SpectralProject(u, u_g, w_g, rank));
  std::sort(coeffs.begin(), coeffs.end(),
            [](const SpectralCoeffs& a, const SpectralCoeffs& b) { return a.theta < b.theta; });

  const std::size_t dim = rank * rank;
  const double n = static_cast<double>(coeffs.size());
  Vector mean(dim, 0.0);
  for (const auto& c : coeffs)
    for (std::size_t j = 0; j < dim; ++j) mean[j] += c.theta[j] / n;
  double spread_sq = 0.0;
  for (const auto& c : coeffs)
    for (std::size_t j = 0; j < dim; ++j) spread_sq += std::pow(c.theta[j] - mean[j], 2);
  const double spread = std::sqrt(spread_sq / (n * static_cast<double>(dim)));
  const double mean_rms = Norm2(mean) / std::sqrt(static_cast<double>(dim));

  r.consensus = SpectralCoeffs{mean, rank};
  if (!(spread > 1e-12 * mean_rms) || spread == 0.0) {
    r.warnings.push_back(coeffs.size() == 1
                             ? "single client update; consensus is that update"
                             : "client updates have no spread; consensus is their mean");
    r.delta_m = SpectralReconstruct(r.consensus, u_g, w_g);
    return r;
  }

  std::vector<SpectralCoeffs> standardized = coeffs;
  for (auto& c : standardized)
    for (std::size_t j = 0; j < dim; ++j) c.theta[j] = (c.theta[j] - mean[j]) / spread;

  const Vector losses = TrainScoreNet(net, sched, standardized, opts.train_steps, opts.lr, rng,
                                      opts.t_floor, opts.weighting);
  r.final_dsm_loss = losses.empty() ? 0.0 : losses.back();

  Vector avg(dim, 0.0);
  for (std::size_t s = 0; s < opts.consensus_samples; ++s) {
    const SpectralCoeffs z = ReverseSample(net, sched, opts.n_rev, rng);
    for (std::size_t j = 0; j < dim; ++j)
      avg[j] += z.theta[j] / static_cast<double>(opts.consensus_samples);
  }
  double data_max = 0.0;
  for (const auto& c : standardized)
    for (double v : c.theta) data_max = std::max(data_max, std::abs(v));
  const double limit = kDivergenceFactor * data_max;
  if (std::all_of(avg.begin(), avg.end(),
                  [limit](double v) { return std::isfinite(v) && std::abs(v) <= limit; })) {
    for (std::size_t j = 0; j < dim; ++j) r.consensus.theta[j] = mean[j] + spread * avg[j];
  } else {
    r.warnings.push_back("reverse sample diverged; consensus falls back to the mean");
  }
  r.delta_m = SpectralReconstruct(r.consensus, u_g, w_g);
  return r;
}

}  // namespace umeda
