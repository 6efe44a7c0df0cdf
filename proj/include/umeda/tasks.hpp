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

// Synthetic multi-modal sensing task and the per-client model.
//
// World: a latent code u ~ N(0, I_r) lives in an r-dimensional subspace of
// the p-dimensional latent space (z = B u). Each modality m observes it
// through its own orthonormal signal map A_m, plus an offset b_m and
// "high-frequency" noise confined to the orthogonal complement N_m:
//
//   token = A_m u + b_m + noise_scale * N_m xi,   xi ~ N(0, I)
//
// Targets are a unit-variance linear readout of z; the class is the argmax
// of a second linear readout.
//
// Model: per-modality affine embedders into R^d, token concatenation across
// present modalities, one spectral-gated linear-attention block with
// Q = K = d^(-1/4) H and V = H, mean pooling, and linear regression and
// classification heads.

#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "umeda/linalg.hpp"
#include "umeda/optim.hpp"
#include "umeda/sglt.hpp"

namespace umeda {

// ---------------------------------------------------------------------------
// World.

struct WorldConfig {
  std::size_t latent_dim = 8;
  std::size_t rank_true = 4;
  std::size_t num_classes = 5;
  std::size_t target_dim = 3;
  std::vector<std::size_t> modality_dims = {12, 16, 10};
  double noise_scale = 0.5;
  uint64_t seed = 1;

  void Validate() const {
    if (rank_true < 1 || rank_true > latent_dim)
      throw ValidationError("world: rank_true must be in [1, latent_dim]");
    if (num_classes < 2) throw ValidationError("world: need at least 2 classes");
    if (target_dim < 1) throw ValidationError("world: target_dim must be >= 1");
    if (modality_dims.empty()) throw ValidationError("world: no modalities");
    for (std::size_t d : modality_dims)
      if (d < rank_true)
        throw ValidationError("world: every modality dim must be >= rank_true");
    if (!(noise_scale >= 0.0)) throw ValidationError("world: noise_scale must be >= 0");
  }
};

struct SyntheticWorld {
  WorldConfig config;
  Matrix latent_basis;               // p x r, orthonormal columns
  std::vector<Matrix> signal_maps;   // d_m x r
  std::vector<Matrix> noise_maps;    // d_m x (d_m - r), orthogonal to signal_maps[m]
  std::vector<Vector> offsets;       // d_m
  Matrix readout;                    // target_dim x p
  Matrix class_readout;              // num_classes x p

  std::size_t num_modalities() const { return signal_maps.size(); }
};

inline SyntheticWorld GenerateWorld(const WorldConfig& cfg) {
  cfg.Validate();
  Rng rng = Rng::Derive(cfg.seed, {0x5752ULL});
  SyntheticWorld w;
  w.config = cfg;
  const std::size_t r = cfg.rank_true;
  w.latent_basis = LeadingColumns(Svd(Matrix::Gaussian(cfg.latent_dim, cfg.latent_dim, rng)).u, r);
  for (std::size_t dm : cfg.modality_dims) {
    const Matrix q = Svd(Matrix::Gaussian(dm, dm, rng)).u;
    Matrix signal(dm, r);
    Matrix noise(dm, dm - r);
    for (std::size_t i = 0; i < dm; ++i) {
      for (std::size_t j = 0; j < r; ++j) signal(i, j) = q(i, j);
      for (std::size_t j = r; j < dm; ++j) noise(i, j - r) = q(i, j);
    }
    if (noise.cols() > 0 && MaxAbsDiff(MatMulTN(signal, noise), Matrix(r, dm - r)) > 1e-10)
      throw Error("world: signal and noise bases are not orthogonal");
    w.signal_maps.push_back(std::move(signal));
    w.noise_maps.push_back(std::move(noise));
    w.offsets.push_back(Gaussian(rng, dm, 0.5));
  }
  // Each target coordinate r_i . z has unit variance: scale so |B^T r_i| = 1.
  w.readout = Matrix::Gaussian(cfg.target_dim, cfg.latent_dim, rng);
  const Matrix proj = MatMul(w.readout, w.latent_basis);
  for (std::size_t i = 0; i < cfg.target_dim; ++i) {
    const double n = Norm2(proj.row(i));
    for (double& x : w.readout.row(i)) x /= n;
  }
  w.class_readout = Matrix::Gaussian(cfg.num_classes, cfg.latent_dim, rng);
  return w;
}

// Latent draw with its supervised labels.
struct LatentSample {
  Vector code;    // u, length rank_true
  Vector target;  // regression target
  std::size_t label = 0;
};

inline LatentSample DrawLatent(const SyntheticWorld& w, Rng& rng) {
  LatentSample s;
  s.code = Gaussian(rng, w.config.rank_true, 1.0);
  const Vector z = MatVec(w.latent_basis, s.code);
  s.target = MatVec(w.readout, z);
  const Vector scores = MatVec(w.class_readout, z);
  s.label = static_cast<std::size_t>(std::max_element(scores.begin(), scores.end()) -
                                     scores.begin());
  return s;
}

// ---------------------------------------------------------------------------
// Client modality configurations.

enum class ClientType { kA, kB, kC };

inline char ClientTypeName(ClientType t) {
  return t == ClientType::kA ? 'A' : (t == ClientType::kB ? 'B' : 'C');
}

struct ModalityConfig {
  std::size_t modality = 0;
  std::size_t seq_len = 8;
  bool present = true;
};

struct ClientProfile {
  ClientType type = ClientType::kA;
  std::vector<ModalityConfig> modalities;
  // Per-stream absence probability, applied per observation (Type C).
  double missing_rate = 0.0;
};

struct ProfileConfig {
  std::size_t seq_len_a = 8;
  std::size_t seq_len_b = 32;
  std::size_t seq_len_c = 64;
  double missing_rate = 0.1;
};

// Type A: the first two modalities, short sequences.
// Type B: every modality, medium sequences.
// Type C: every modality, long sequences, random missing streams.
inline ClientProfile MakeProfile(ClientType type, std::size_t num_modalities,
                                 const ProfileConfig& pc) {
  ClientProfile p;
  p.type = type;
  const std::size_t n_a = std::min<std::size_t>(2, num_modalities);
  switch (type) {
    case ClientType::kA:
      for (std::size_t m = 0; m < n_a; ++m) p.modalities.push_back({m, pc.seq_len_a, true});
      break;
    case ClientType::kB:
      for (std::size_t m = 0; m < num_modalities; ++m)
        p.modalities.push_back({m, pc.seq_len_b, true});
      break;
    case ClientType::kC:
      for (std::size_t m = 0; m < num_modalities; ++m)
        p.modalities.push_back({m, pc.seq_len_c, true});
      p.missing_rate = pc.missing_rate;
      break;
  }
  return p;
}

// Independent Bernoulli(1 - rate) presence per stream. If every stream
// drops, one stream chosen uniformly is kept.
inline std::vector<bool> DrawPresence(std::size_t n, double rate, Rng& rng) {
  std::vector<bool> present(n);
  bool any = false;
  for (std::size_t i = 0; i < n; ++i) {
    present[i] = rng.Uniform() >= rate;
    any = any || present[i];
  }
  if (!any && n > 0) present[rng.UniformInt(n)] = true;
  return present;
}

// One multi-modal observation. tokens[m] is empty when modality m is absent.
struct Observation {
  std::vector<Matrix> tokens;
  Vector target;
  std::size_t label = 0;
  std::size_t num_tokens() const {
    std::size_t n = 0;
    for (const auto& t : tokens) n += t.rows();
    return n;
  }
};

inline Observation Render(const SyntheticWorld& w, const std::vector<ModalityConfig>& mods,
                          const LatentSample& s, Rng& rng) {
  Observation o;
  o.tokens.resize(w.num_modalities());
  o.target = s.target;
  o.label = s.label;
  bool any = false;
  for (const ModalityConfig& mc : mods) {
    if (!mc.present) continue;
    if (mc.modality >= w.num_modalities()) throw ValidationError("unknown modality id");
    any = true;
    const Matrix& a = w.signal_maps[mc.modality];
    const Matrix& nz = w.noise_maps[mc.modality];
    const Vector base = MatVec(a, s.code);
    Matrix toks(mc.seq_len, a.rows());
    for (std::size_t l = 0; l < mc.seq_len; ++l) {
      auto row = toks.row(l);
      for (std::size_t i = 0; i < row.size(); ++i) row[i] = base[i] + w.offsets[mc.modality][i];
      if (w.config.noise_scale > 0.0 && nz.cols() > 0) {
        const Vector xi = Gaussian(rng, nz.cols(), w.config.noise_scale);
        const Vector n = MatVec(nz, xi);
        for (std::size_t i = 0; i < row.size(); ++i) row[i] += n[i];
      }
    }
    o.tokens[mc.modality] = std::move(toks);
  }
  if (!any) throw ValidationError("observation has no present modality");
  return o;
}

// Applies the profile's random stream dropout, then renders.
inline Observation RenderForClient(const SyntheticWorld& w, const ClientProfile& p,
                                   const LatentSample& s, Rng& rng) {
  std::vector<ModalityConfig> mods = p.modalities;
  if (p.missing_rate > 0.0) {
    const std::vector<bool> present = DrawPresence(mods.size(), p.missing_rate, rng);
    for (std::size_t i = 0; i < mods.size(); ++i) mods[i].present = present[i];
  }
  return Render(w, mods, s, rng);
}

// Fresh latents rendered through a fixed modality set.
inline std::vector<Observation> SampleBatch(const SyntheticWorld& w,
                                            const std::vector<ModalityConfig>& mods,
                                            std::size_t batch, Rng& rng) {
  if (std::none_of(mods.begin(), mods.end(), [](const auto& m) { return m.present; }))
    throw ValidationError("sample_batch: every modality is absent");
  std::vector<Observation> out;
  out.reserve(batch);
  for (std::size_t i = 0; i < batch; ++i) out.push_back(Render(w, mods, DrawLatent(w, rng), rng));
  return out;
}

// ---------------------------------------------------------------------------
// Model.

using NamedBlocks = std::map<std::string, Matrix>;

inline std::string EmbedWeightName(std::size_t m) { return "embed" + std::to_string(m) + ".w"; }
inline std::string EmbedBiasName(std::size_t m) { return "embed" + std::to_string(m) + ".b"; }

struct ClientModel {
  NamedBlocks rest;  // embedders and heads
  SemanticKernel kernel;
  std::shared_ptr<const FeatureMap> features;
  GateConfig gate;
  double attn_eps = kDefaultSgltEps;

  std::size_t dim() const { return kernel.dim(); }
  const Matrix& at(const std::string& name) const {
    auto it = rest.find(name);
    if (it == rest.end()) throw ValidationError("missing parameter block " + name);
    return it->second;
  }
};

struct ModelShape {
  std::size_t dim = 32;
  std::vector<std::size_t> modality_dims;
  std::size_t target_dim = 3;
  std::size_t num_classes = 5;
};

// Gaussian embedders and heads (1/sqrt(fan_in)), zero biases, theta_M with
// entries N(0, 1e-4) so the SVD basis is well defined from round 0.
inline NamedBlocks InitRestBlocks(const ModelShape& s, Rng& rng) {
  NamedBlocks b;
  for (std::size_t m = 0; m < s.modality_dims.size(); ++m) {
    b[EmbedWeightName(m)] = Matrix::Gaussian(s.modality_dims[m], s.dim, rng,
                                             1.0 / std::sqrt(double(s.modality_dims[m])));
    b[EmbedBiasName(m)] = Matrix(1, s.dim);
  }
  const double head_scale = 1.0 / std::sqrt(double(s.dim));
  b["reg.w"] = Matrix::Gaussian(s.dim, s.target_dim, rng, head_scale);
  b["reg.b"] = Matrix(1, s.target_dim);
  b["cls.w"] = Matrix::Gaussian(s.dim, s.num_classes, rng, head_scale);
  b["cls.b"] = Matrix(1, s.num_classes);
  return b;
}

inline constexpr double kKernelInitScale = 1e-2;

struct ForwardPass {
  Vector pred_reg;
  Vector logits;
  Vector pooled;   // mean of the attention output rows; the shared latent
  Matrix h;        // concatenated embedded tokens, L x d
  Matrix qk;       // d^(-1/4) h
  SgltOutput attn;
  std::vector<std::pair<std::size_t, std::size_t>> segments;  // (modality, first row)
};

inline ForwardPass Forward(const ClientModel& model, const Observation& obs,
                           const Matrix* frozen_filter = nullptr) {
  const std::size_t d = model.dim();
  ForwardPass f;
  const std::size_t total = obs.num_tokens();
  if (total == 0) throw ValidationError("forward: observation has no tokens");
  f.h = Matrix(total, d);
  std::size_t row = 0;
  for (std::size_t m = 0; m < obs.tokens.size(); ++m) {
    const Matrix& x = obs.tokens[m];
    if (x.rows() == 0) continue;
    const Matrix& w = model.at(EmbedWeightName(m));
    const Matrix& b = model.at(EmbedBiasName(m));
    const Matrix e = MatMul(x, w);
    for (std::size_t i = 0; i < x.rows(); ++i) {
      auto dst = f.h.row(row + i);
      auto src = e.row(i);
      for (std::size_t j = 0; j < d; ++j) dst[j] = src[j] + b.data()[j];
    }
    f.segments.emplace_back(m, row);
    row += x.rows();
  }
  const double qk_scale = std::pow(static_cast<double>(d), -0.25);
  f.qk = f.h * qk_scale;
  f.attn = SgltForward(*model.features, model.kernel, model.gate, f.qk, f.qk, f.h,
                       model.attn_eps, frozen_filter);
  f.pooled.assign(d, 0.0);
  const double inv_l = 1.0 / static_cast<double>(total);
  for (std::size_t i = 0; i < total; ++i) {
    auto r = f.attn.h_prime.row(i);
    for (std::size_t j = 0; j < d; ++j) f.pooled[j] += r[j] * inv_l;
  }
  const Matrix& rw = model.at("reg.w");
  const Matrix& rb = model.at("reg.b");
  const Matrix& cw = model.at("cls.w");
  const Matrix& cb = model.at("cls.b");
  f.pred_reg = MatVec(Transpose(rw), f.pooled);
  for (std::size_t j = 0; j < f.pred_reg.size(); ++j) f.pred_reg[j] += rb.data()[j];
  f.logits = MatVec(Transpose(cw), f.pooled);
  for (std::size_t j = 0; j < f.logits.size(); ++j) f.logits[j] += cb.data()[j];
  return f;
}

// Mean squared error over target coordinates plus softmax cross-entropy,
// equally weighted.
struct SampleLoss {
  double total = 0.0;
  Vector d_reg;
  Vector d_logits;
};

inline SampleLoss ComputeLoss(const Vector& pred, const Vector& target, const Vector& logits,
                              std::size_t label) {
  SampleLoss s;
  const double inv_t = 1.0 / static_cast<double>(target.size());
  s.d_reg.resize(pred.size());
  for (std::size_t j = 0; j < pred.size(); ++j) {
    const double e = pred[j] - target[j];
    s.total += e * e * inv_t;
    s.d_reg[j] = 2.0 * e * inv_t;
  }
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double l : logits) z += std::exp(l - mx);
  const double lse = mx + std::log(z);
  s.total += lse - logits[label];
  s.d_logits.resize(logits.size());
  for (std::size_t j = 0; j < logits.size(); ++j)
    s.d_logits[j] = std::exp(logits[j] - lse) - (j == label ? 1.0 : 0.0);
  return s;
}

struct Gradients {
  double loss = 0.0;
  NamedBlocks rest;
  Matrix theta;
  std::vector<Matrix> filters;  // frozen filter used for each observation
};

// Mean loss over `batch` and its gradient. The gate is frozen per
// observation; pass `frozen_filters` to evaluate with recorded filters.
inline Gradients LossAndGradient(const ClientModel& model, std::span<const Observation> batch,
                                 const std::vector<Matrix>* frozen_filters = nullptr) {
  Gradients g;
  for (const auto& [name, m] : model.rest) g.rest[name] = Matrix(m.rows(), m.cols());
  g.theta = Matrix(model.dim(), model.dim());
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  const double qk_scale = std::pow(static_cast<double>(model.dim()), -0.25);
  const Matrix& rw = model.at("reg.w");
  const Matrix& cw = model.at("cls.w");

  for (std::size_t n = 0; n < batch.size(); ++n) {
    const Observation& obs = batch[n];
    const Matrix* filt = frozen_filters ? &(*frozen_filters)[n] : nullptr;
    const ForwardPass f = Forward(model, obs, filt);
    SampleLoss sl = ComputeLoss(f.pred_reg, obs.target, f.logits, obs.label);
    g.loss += sl.total * inv_b;
    for (double& x : sl.d_reg) x *= inv_b;
    for (double& x : sl.d_logits) x *= inv_b;

    // Heads.
    Matrix& grw = g.rest["reg.w"];
    Matrix& gcw = g.rest["cls.w"];
    Vector d_pooled(model.dim(), 0.0);
    for (std::size_t i = 0; i < model.dim(); ++i) {
      for (std::size_t j = 0; j < sl.d_reg.size(); ++j) {
        grw(i, j) += f.pooled[i] * sl.d_reg[j];
        d_pooled[i] += rw(i, j) * sl.d_reg[j];
      }
      for (std::size_t j = 0; j < sl.d_logits.size(); ++j) {
        gcw(i, j) += f.pooled[i] * sl.d_logits[j];
        d_pooled[i] += cw(i, j) * sl.d_logits[j];
      }
    }
    for (std::size_t j = 0; j < sl.d_reg.size(); ++j) g.rest["reg.b"].data()[j] += sl.d_reg[j];
    for (std::size_t j = 0; j < sl.d_logits.size(); ++j)
      g.rest["cls.b"].data()[j] += sl.d_logits[j];

    // Mean pool.
    const std::size_t total = f.h.rows();
    Matrix d_hprime(total, model.dim());
    const double inv_l = 1.0 / static_cast<double>(total);
    for (std::size_t i = 0; i < total; ++i)
      for (std::size_t j = 0; j < model.dim(); ++j) d_hprime(i, j) = d_pooled[j] * inv_l;

    const SgltGrads sg = SgltBackward(*model.features, f.attn, f.qk, f.qk, f.h, d_hprime);
    g.theta += sg.dtheta;
    Matrix d_h = sg.dv;
    for (std::size_t i = 0; i < d_h.size(); ++i)
      d_h.data()[i] += qk_scale * (sg.dq.data()[i] + sg.dk.data()[i]);

    // Embedders.
    for (const auto& [m, first] : f.segments) {
      const Matrix& x = obs.tokens[m];
      Matrix& gw = g.rest[EmbedWeightName(m)];
      Matrix& gb = g.rest[EmbedBiasName(m)];
      for (std::size_t l = 0; l < x.rows(); ++l) {
        auto dh = d_h.row(first + l);
        auto xr = x.row(l);
        for (std::size_t i = 0; i < xr.size(); ++i) {
          auto gwr = gw.row(i);
          for (std::size_t j = 0; j < dh.size(); ++j) gwr[j] += xr[i] * dh[j];
        }
        for (std::size_t j = 0; j < dh.size(); ++j) gb.data()[j] += dh[j];
      }
    }
    g.filters.push_back(f.attn.filter);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Local training.

struct ClientData {
  ClientProfile profile;
  std::vector<LatentSample> samples;
};

struct TrainOptions {
  std::size_t local_steps = 10;
  std::size_t batch = 16;
  double lr = 1e-3;
  double weight_decay = 1e-4;
};

struct LocalResult {
  Matrix kernel_delta;
  NamedBlocks rest_deltas;
  double mean_loss = 0.0;
};

inline std::vector<Observation> DrawClientBatch(const SyntheticWorld& w, const ClientData& data,
                                                std::size_t batch, Rng& rng) {
  if (data.samples.empty()) throw ValidationError("client has no samples");
  std::vector<Observation> out;
  out.reserve(batch);
  for (std::size_t i = 0; i < batch; ++i) {
    const LatentSample& s = data.samples[rng.UniformInt(data.samples.size())];
    out.push_back(RenderForClient(w, data.profile, s, rng));
  }
  return out;
}

// Runs `local_steps` AdamW steps (beta1 0.9, beta2 0.999, eps 1e-8, fresh
// moments) from `global` and returns parameter deltas. With zero steps the
// deltas are zero and the loss is measured on one batch.
inline LocalResult LocalTrain(const ClientModel& global, const SyntheticWorld& w,
                              const ClientData& data, const TrainOptions& opts, Rng& rng) {
  ClientModel local = global;
  AdamW opt({.lr = opts.lr, .weight_decay = opts.weight_decay});
  std::vector<Matrix*> params;
  for (auto& [name, m] : local.rest) params.push_back(&m);
  params.push_back(&local.kernel.theta_m);

  LocalResult r;
  if (opts.local_steps == 0) {
    const auto batch = DrawClientBatch(w, data, opts.batch, rng);
    r.mean_loss = LossAndGradient(local, batch).loss;
  }
  for (std::size_t step = 0; step < opts.local_steps; ++step) {
    const auto batch = DrawClientBatch(w, data, opts.batch, rng);
    Gradients g = LossAndGradient(local, batch);
    r.mean_loss += g.loss / static_cast<double>(opts.local_steps);
    std::vector<const Matrix*> grads;
    for (auto& [name, m] : g.rest) grads.push_back(&m);
    grads.push_back(&g.theta);
    opt.Step(params, grads);
  }
  r.kernel_delta = local.kernel.theta_m - global.kernel.theta_m;
  for (const auto& [name, m] : local.rest) r.rest_deltas[name] = m - global.at(name);
  return r;
}

// ---------------------------------------------------------------------------
// Evaluation.

struct Metrics {
  double rmse = 0.0;      // root mean square over samples and coordinates
  double top1 = 0.0;      // classification accuracy
  double pose_err = 0.0;  // mean absolute error per coordinate
};

inline Metrics ScorePredictions(std::span<const Vector> preds, std::span<const Vector> targets,
                                std::span<const std::size_t> pred_labels,
                                std::span<const std::size_t> labels) {
  if (preds.empty()) throw ValidationError("evaluate: empty set");
  Metrics m;
  double sq = 0.0, ab = 0.0;
  std::size_t count = 0, hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    for (std::size_t j = 0; j < preds[i].size(); ++j) {
      const double e = preds[i][j] - targets[i][j];
      sq += e * e;
      ab += std::abs(e);
      ++count;
    }
    hits += pred_labels[i] == labels[i] ? 1 : 0;
  }
  m.rmse = std::sqrt(sq / static_cast<double>(count));
  m.pose_err = ab / static_cast<double>(count);
  m.top1 = static_cast<double>(hits) / static_cast<double>(preds.size());
  return m;
}

inline Metrics Evaluate(const ClientModel& model, std::span<const Observation> eval_set) {
  if (eval_set.empty()) throw ValidationError("evaluate: empty set");
  std::vector<Vector> preds, targets;
  std::vector<std::size_t> pl, tl;
  for (const Observation& o : eval_set) {
    const ForwardPass f = Forward(model, o);
    preds.push_back(f.pred_reg);
    targets.push_back(o.target);
    pl.push_back(static_cast<std::size_t>(std::max_element(f.logits.begin(), f.logits.end()) -
                                          f.logits.begin()));
    tl.push_back(o.label);
  }
  return ScorePredictions(preds, targets, pl, tl);
}

}  // namespace umeda
