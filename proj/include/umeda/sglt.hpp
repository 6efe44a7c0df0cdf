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

// Spectral-gated linear attention.
//
// Tokens are lifted with positive random features, contracted into a d x d
// semantic kernel, and the kernel's singular values are gated before the
// normalized attention read-out:
//
//   M_total = theta_M + phi(K)^T V
//   M_hat   = U diag(g(sigma) * sigma) W^T = F M_total,  F = U diag(g) U^T
//   H'_i    = phi(q_i) M_hat / (phi(q_i) . phi(K)^T 1 + eps)
//
// Gradients treat F as a constant of the forward pass, so M_hat is linear in
// M_total and the backward pass never differentiates through the SVD.

#pragma once

#include <cmath>
#include <limits>
#include <optional>

#include "umeda/linalg.hpp"

namespace umeda {

// Positive random features for the softmax kernel:
//   phi(x)_a = exp(w_a . x - |x|^2 / 2) / sqrt(m),  w_a ~ N(0, I).
struct FeatureMap {
  Matrix projection;  // m x d

  static FeatureMap Create(std::size_t num_features, std::size_t dim, Rng& rng) {
    if (num_features == 0 || dim == 0) throw ValidationError("feature map: empty shape");
    return FeatureMap{Matrix::Gaussian(num_features, dim, rng)};
  }

  std::size_t num_features() const { return projection.rows(); }
  std::size_t dim() const { return projection.cols(); }

  // x: L x d  ->  L x m, every entry strictly positive.
  Matrix Apply(const Matrix& x) const {
    if (x.cols() != dim()) {
      throw ValidationError(internal::StrCat("feature map expects ", dim(),
                                             " columns, got ", x.cols()));
    }
    const std::size_t m = num_features();
    const double inv_sqrt_m = 1.0 / std::sqrt(static_cast<double>(m));
    Matrix out = MatMulNT(x, projection);
    for (std::size_t i = 0; i < x.rows(); ++i) {
      const double half_sq = 0.5 * Dot(x.row(i), x.row(i));
      for (double& v : out.row(i)) v = std::exp(v - half_sq) * inv_sqrt_m;
    }
    return out;
  }

  // Pullback of d_phi through Apply at x, given phi = Apply(x).
  Matrix Backward(const Matrix& x, const Matrix& phi, const Matrix& d_phi) const {
    Matrix weighted = d_phi;  // d_phi * phi
    for (std::size_t i = 0; i < weighted.size(); ++i) weighted.data()[i] *= phi.data()[i];
    Matrix dx = MatMul(weighted, projection);
    for (std::size_t i = 0; i < x.rows(); ++i) {
      double s = 0.0;
      for (double v : weighted.row(i)) s += v;
      auto xi = x.row(i);
      auto di = dx.row(i);
      for (std::size_t j = 0; j < xi.size(); ++j) di[j] -= s * xi[j];
    }
    return dx;
  }
};

enum class GateMode { kSoft, kHard };

struct GateConfig {
  GateMode mode = GateMode::kSoft;
  double tau = 0.05;
  double beta = 0.01;  // soft mode only

  // g == 1 for every singular value.
  static GateConfig Passthrough() {
    return GateConfig{GateMode::kHard, -std::numeric_limits<double>::infinity(), 1.0};
  }

  void Validate() const {
    if (mode == GateMode::kSoft && !(beta > 0.0))
      throw ValidationError("soft gate temperature beta must be > 0");
  }

  double Gain(double sigma) const {
    if (mode == GateMode::kHard) return sigma > tau ? 1.0 : 0.0;
    return 1.0 / (1.0 + std::exp(-(sigma - tau) / beta));
  }
};

struct SemanticKernel {
  Matrix theta_m;  // d x d

  static SemanticKernel Zero(std::size_t dim) { return {Matrix(dim, dim)}; }
  std::size_t dim() const { return theta_m.rows(); }
};

// phi(K)^T V. The sequence length L is contracted away, so the result is
// m x d for every L.
inline Matrix ComputeSemanticKernel(const FeatureMap& fm, const Matrix& k,
                                    const Matrix& v) {
  if (k.rows() != v.rows()) {
    throw ValidationError(internal::StrCat("semantic kernel: K has ", k.rows(),
                                           " rows, V has ", v.rows()));
  }
  return MatMulTN(fm.Apply(k), v);
}

struct GateResult {
  Matrix m_hat;
  Matrix filter;  // F = U diag(g) U^T
  SvdResult svd;
  Vector gains;
};

inline GateResult SpectralGate(const Matrix& m, const GateConfig& gate) {
  if (m.rows() != m.cols()) throw ValidationError("spectral gate needs a square matrix");
  gate.Validate();
  GateResult r;
  r.svd = Svd(m);
  const std::size_t n = r.svd.sigma.size();
  r.gains.resize(n);
  Vector kept(n);
  for (std::size_t i = 0; i < n; ++i) {
    r.gains[i] = gate.Gain(r.svd.sigma[i]);
    kept[i] = r.gains[i] * r.svd.sigma[i];
  }
  r.m_hat = ScaledOuter(r.svd.u, kept, r.svd.w);
  r.filter = ScaledOuter(r.svd.u, r.gains, r.svd.u);
  return r;
}

// max_i (1 - g(sigma_i)) sigma_i, which equals ||M - M_hat||_2.
inline double SoftGateError(const Matrix& m, const GateConfig& gate) {
  if (m.rows() != m.cols()) throw ValidationError("soft gate error needs a square matrix");
  gate.Validate();
  const SvdResult s = Svd(m);
  double worst = 0.0;
  for (double sigma : s.sigma) worst = std::max(worst, (1.0 - gate.Gain(sigma)) * sigma);
  return worst;
}

struct SgltOutput {
  Matrix h_prime;          // L x d
  Matrix filtered_kernel;  // M_hat
  Matrix filter;           // F, frozen for the backward pass
  // Forward intermediates kept for SgltBackward.
  Matrix phi_q;            // L x m
  Matrix phi_k;            // L x m
  Vector key_sum;          // phi(K)^T 1
  Vector denom;            // per query row, >= eps
};

inline constexpr double kDefaultSgltEps = 1e-6;

// When `frozen_filter` is given it replaces the SVD gate: M_hat = F M_total.
// This is the function whose exact gradient SgltBackward computes.
inline SgltOutput SgltForward(const FeatureMap& fm, const SemanticKernel& kernel,
                              const GateConfig& gate, const Matrix& q, const Matrix& k,
                              const Matrix& v, double eps = kDefaultSgltEps,
                              const Matrix* frozen_filter = nullptr) {
  const std::size_t d = kernel.dim();
  if (fm.num_features() != d || fm.dim() != d) {
    throw ValidationError(internal::StrCat("sglt requires m = d; got m=", fm.num_features(),
                                           " feature dim=", fm.dim(), " kernel d=", d));
  }
  if (q.cols() != d || k.cols() != d || v.cols() != d || k.rows() != v.rows()) {
    throw ValidationError("sglt forward: inconsistent q/k/v shapes");
  }
  if (!(eps > 0.0)) throw ValidationError("sglt eps must be > 0");

  SgltOutput out;
  out.phi_q = fm.Apply(q);
  out.phi_k = fm.Apply(k);
  Matrix m_total = kernel.theta_m + MatMulTN(out.phi_k, v);
  if (frozen_filter != nullptr) {
    out.filter = *frozen_filter;
    out.filtered_kernel = MatMul(out.filter, m_total);
  } else {
    GateResult g = SpectralGate(m_total, gate);
    out.filter = std::move(g.filter);
    out.filtered_kernel = std::move(g.m_hat);
  }

  const std::size_t m = fm.num_features();
  out.key_sum.assign(m, 0.0);
  for (std::size_t j = 0; j < out.phi_k.rows(); ++j) {
    auto row = out.phi_k.row(j);
    for (std::size_t a = 0; a < m; ++a) out.key_sum[a] += row[a];
  }
  out.h_prime = MatMul(out.phi_q, out.filtered_kernel);
  out.denom.resize(q.rows());
  for (std::size_t i = 0; i < q.rows(); ++i) {
    out.denom[i] = Dot(out.phi_q.row(i), out.key_sum) + eps;
    for (double& x : out.h_prime.row(i)) x /= out.denom[i];
  }
  return out;
}

struct SgltGrads {
  Matrix dq;
  Matrix dk;
  Matrix dv;
  Matrix dtheta;
};

inline SgltGrads SgltBackward(const FeatureMap& fm, const SgltOutput& fwd,
                              const Matrix& q, const Matrix& k, const Matrix& v,
                              const Matrix& d_hprime) {
  const std::size_t rows_q = q.rows();
  const std::size_t d = v.cols();
  // numerator N = h_prime * denom; d_N = d_h / denom; d_denom = -(d_h . N) / denom^2
  Matrix d_num(rows_q, d);
  Vector d_denom(rows_q);
  for (std::size_t i = 0; i < rows_q; ++i) {
    auto dh = d_hprime.row(i);
    auto hp = fwd.h_prime.row(i);
    auto dn = d_num.row(i);
    const double den = fwd.denom[i];
    double dot = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      dn[j] = dh[j] / den;
      dot += dh[j] * hp[j];  // h' = N / den, so d_h . N / den^2 = d_h . h' / den
    }
    d_denom[i] = -dot / den;
  }

  // phi_q appears in the numerator and the denominator.
  Matrix d_phi_q = MatMulNT(d_num, fwd.filtered_kernel);
  for (std::size_t i = 0; i < rows_q; ++i) {
    auto row = d_phi_q.row(i);
    for (std::size_t a = 0; a < row.size(); ++a) row[a] += d_denom[i] * fwd.key_sum[a];
  }

  const Matrix d_mhat = MatMulTN(fwd.phi_q, d_num);
  // M_hat = F M_total with F symmetric.
  Matrix d_total = MatMulTN(fwd.filter, d_mhat);

  // key_sum = phi_k^T 1
  Vector d_key_sum(fwd.key_sum.size(), 0.0);
  for (std::size_t i = 0; i < rows_q; ++i) {
    auto pq = fwd.phi_q.row(i);
    for (std::size_t a = 0; a < pq.size(); ++a) d_key_sum[a] += d_denom[i] * pq[a];
  }

  // S = phi_k^T V:  d_phi_k = V d_S^T,  d_V = phi_k d_S
  Matrix d_phi_k = MatMulNT(v, d_total);
  for (std::size_t j = 0; j < d_phi_k.rows(); ++j) {
    auto row = d_phi_k.row(j);
    for (std::size_t a = 0; a < row.size(); ++a) row[a] += d_key_sum[a];
  }

  SgltGrads g;
  g.dv = MatMul(fwd.phi_k, d_total);
  g.dq = fm.Backward(q, fwd.phi_q, d_phi_q);
  g.dk = fm.Backward(k, fwd.phi_k, d_phi_k);
  g.dtheta = std::move(d_total);
  return g;
}

}  // namespace umeda
