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

// Subspace-projected Gaussian mechanism for kernel updates.
//
// A client update is clipped in vec form, then receives Gaussian noise of
// scale sigma_sig inside the public signal subspace span(U_g[:, :r]) and
// kappa * sigma_sig in its orthogonal complement. The projectors come only
// from the server's broadcast basis, never from client data. With kappa >= 1
// the noise covariance dominates sigma_sig^2 I, so the (epsilon, delta)
// guarantee of the isotropic Gaussian mechanism carries over.

#pragma once

#include <cmath>
#include <string>

#include "umeda/linalg.hpp"

namespace umeda {

struct PrivacyBudget {
  double epsilon = 2.0;
  double delta = 1e-5;
  double clip_bound = 1.0;
  double kappa = 4.0;
  // Permits kappa < 1 for noise-allocation sweeps. The DP guarantee does not
  // hold in that regime.
  bool research_mode = false;

  void Validate() const {
    if (!(epsilon > 0.0))
      throw ValidationError(internal::StrCat("epsilon = ", epsilon, " violates epsilon > 0"));
    if (!(delta > 0.0 && delta < 1.0))
      throw ValidationError(internal::StrCat("delta = ", delta, " violates delta in (0,1)"));
    if (!(clip_bound > 0.0))
      throw ValidationError(internal::StrCat("clip = ", clip_bound, " violates clip > 0"));
    if (!(kappa > 0.0))
      throw ValidationError(internal::StrCat("kappa = ", kappa, " violates kappa > 0"));
    if (kappa < 1.0 && !research_mode) {
      throw ValidationError(internal::StrCat(
          "kappa = ", kappa,
          " violates kappa >= 1 (sigma_null >= sigma_sig is required for the DP "
          "guarantee); set privacy.research_mode = true to run it anyway"));
    }
  }

  bool GuaranteeHolds() const { return kappa >= 1.0; }
};

// sigma_sig = C sqrt(2 ln(1.25 / delta)) / epsilon
inline double CalibrateSigma(const PrivacyBudget& b) {
  b.Validate();
  return b.clip_bound * std::sqrt(2.0 * std::log(1.25 / b.delta)) / b.epsilon;
}

struct SubspaceProjectors {
  Matrix p_signal;  // U_r U_r^T
  Matrix p_null;    // I - p_signal
  std::size_t rank = 0;

  std::size_t dim() const { return p_signal.rows(); }
};

inline SubspaceProjectors BuildProjectors(const Matrix& u_g, std::size_t rank) {
  if (rank < 1 || rank > u_g.cols()) {
    throw ValidationError(internal::StrCat("projector rank ", rank, " outside [1, ",
                                           u_g.cols(), "]"));
  }
  const Matrix u_r = LeadingColumns(u_g, rank);
  SubspaceProjectors p;
  p.rank = rank;
  p.p_signal = MatMulNT(u_r, u_r);
  // Symmetrize away rounding so P_S is exactly symmetric.
  for (std::size_t i = 0; i < p.p_signal.rows(); ++i)
    for (std::size_t j = i + 1; j < p.p_signal.cols(); ++j) {
      const double s = 0.5 * (p.p_signal(i, j) + p.p_signal(j, i));
      p.p_signal(i, j) = s;
      p.p_signal(j, i) = s;
    }
  p.p_null = Matrix::Identity(u_g.rows()) - p.p_signal;
  return p;
}

// Noise term P_S Z_sig + P_null Z_null. The Kronecker form (P (x) I) acting
// on the column-major vec is realized as left-multiplication on the d x d
// noise matrices. Z_sig is drawn before Z_null, each in column-major order.
inline Matrix ProjectedNoise(const SubspaceProjectors& proj, double sigma_sig,
                             double sigma_null, Rng& rng) {
  const std::size_t d = proj.dim();
  const Matrix z_sig = Unvec(Gaussian(rng, d * d, sigma_sig), d, d);
  const Matrix z_null = Unvec(Gaussian(rng, d * d, sigma_null), d, d);
  return MatMul(proj.p_signal, z_sig) + MatMul(proj.p_null, z_null);
}

// Clip vec(delta_m) to clip_bound and add projected noise. When sigma_sig is
// zero (epsilon = inf) the result is the clipped update, bitwise.
inline Matrix Privatize(const Matrix& delta_m, const SubspaceProjectors& proj,
                        const PrivacyBudget& budget, Rng& rng) {
  if (delta_m.rows() != proj.dim() || delta_m.cols() != proj.dim()) {
    throw ValidationError(internal::StrCat("privatize: update ", delta_m.rows(), "x",
                                           delta_m.cols(), " vs projector dim ",
                                           proj.dim()));
  }
  const double sigma_sig = CalibrateSigma(budget);
  Matrix clipped = Unvec(ClipL2(Vec(delta_m), budget.clip_bound), delta_m.rows(),
                         delta_m.cols());
  if (sigma_sig == 0.0) return clipped;
  return clipped + ProjectedNoise(proj, sigma_sig, budget.kappa * sigma_sig, rng);
}

// Isotropic DP-FedAvg baseline: clip, then add sigma_sig N(0, I).
inline Matrix PrivatizeIsotropic(const Matrix& delta_m, const PrivacyBudget& budget,
                                 Rng& rng) {
  const double sigma_sig = CalibrateSigma(budget);
  Matrix clipped = Unvec(ClipL2(Vec(delta_m), budget.clip_bound), delta_m.rows(),
                         delta_m.cols());
  if (sigma_sig == 0.0) return clipped;
  return clipped + Unvec(Gaussian(rng, delta_m.size(), sigma_sig), delta_m.rows(),
                         delta_m.cols());
}

// Analytic variance of the injected noise along a unit direction.
//
// A length-d direction v is a column-space direction: v^T C v with
// C = sigma_sig^2 P_S + sigma_null^2 P_null. A length-d^2 direction is
// vec(D) for a d x d matrix D; the noise N = P_S Z_sig + P_null Z_null has
// Var<N, D>_F = trace(D^T C D).
inline double NoiseVarianceAlong(const SubspaceProjectors& proj,
                                 const PrivacyBudget& budget,
                                 std::span<const double> direction) {
  const double norm = Norm2(direction);
  if (std::abs(norm - 1.0) > 1e-10) {
    throw ValidationError(internal::StrCat("direction norm ", norm, " is not 1"));
  }
  const double s2 = std::pow(CalibrateSigma(budget), 2);
  const double n2 = s2 * budget.kappa * budget.kappa;
  const Matrix cov = s2 * proj.p_signal + n2 * proj.p_null;
  const std::size_t d = proj.dim();
  if (direction.size() == d) return Dot(direction, MatVec(cov, direction));
  if (direction.size() == d * d) {
    const Matrix dm = Unvec(direction, d, d);
    return Trace(MatMulTN(dm, MatMul(cov, dm)));
  }
  throw ValidationError(internal::StrCat("direction length ", direction.size(),
                                         " is neither d nor d^2 (d = ", d, ")"));
}

}  // namespace umeda
