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

// Round orchestration.
//
// One round:
//   1. SVD of the global kernel theta_M -> broadcast basis (U_g, W_g)
//   2. sample ceil(q K) clients
//   3. each client trains locally and privatizes its kernel delta against
//      the broadcast U_g (kernel only; other blocks are uploaded as-is)
//   4. kernel deltas -> spectral coefficients -> diffusion consensus
//   5. theta_M += eta_s dM*,  theta_rest += eta_s FedAvg(rest deltas)
//
// All randomness is derived from (seed, round, client id), so clients can
// train in any order or in parallel without changing the result.

#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "umeda/diffgno.hpp"
#include "umeda/linalg.hpp"
#include "umeda/spdp.hpp"
#include "umeda/tasks.hpp"

namespace umeda {

struct Ablation {
  bool no_sglt_gate = false;   // gate passes every singular value
  bool no_diffgno = false;     // kernel deltas averaged with FedAvg
  bool no_spdp = false;        // no privacy noise on kernel deltas
  bool no_spdp_clip = false;   // with no_spdp: still clip to C
  bool isotropic_dp = false;   // DP-FedAvg: isotropic sigma_sig noise
  bool hard_gate = false;      // hard threshold instead of the sigmoid gate
};

struct FederationConfig {
  std::size_t rounds = 1000;
  std::size_t clients = 100;
  double sample_rate = 0.4;
  std::size_t local_steps = 100;
  std::size_t batch = 64;
  double lr = 1e-3;
  double weight_decay = 1e-4;
  double server_step = 1.0;
  std::size_t rank = 16;
  PrivacyBudget budget;
  VeSchedule sched;
  std::size_t n_rev = 50;
  std::size_t dsm_steps = 200;
  double dsm_lr = 1e-3;
  DsmWeighting dsm_weighting = DsmWeighting::kSigmaSquared;
  std::size_t score_hidden = 512;
  std::size_t t_embed_dim = 16;
  std::size_t consensus_samples = 1;
  double dirichlet_alpha = 0.5;
  std::array<double, 3> type_mix = {1.0 / 3, 1.0 / 3, 1.0 / 3};
  uint64_t seed = 0;
  std::optional<double> target_rmse;
  bool weighted_fedavg = true;
  Ablation ablation;

  std::size_t ParticipantsPerRound() const {
    return static_cast<std::size_t>(
        std::ceil(sample_rate * static_cast<double>(clients) - 1e-9));
  }
};

// ---------------------------------------------------------------------------
// Global state.

struct GlobalModel {
  SemanticKernel theta_m;
  NamedBlocks theta_rest;
  std::size_t round = 0;
  Matrix basis_u;
  Matrix basis_w;
};

// Full SVD of theta_M under the linalg sign convention, stored on the model.
// A zero kernel yields the identity basis.
inline std::pair<Matrix, Matrix> GlobalBasis(GlobalModel& model) {
  SvdResult s = Svd(model.theta_m.theta_m);
  model.basis_u = s.u;
  model.basis_w = s.w;
  return {std::move(s.u), std::move(s.w)};
}

// ---------------------------------------------------------------------------
// Client selection and data partitioning.

inline constexpr uint64_t kSampleTag = 0x53414D50ULL;
inline constexpr uint64_t kClientTag = 0x434C4E54ULL;
inline constexpr uint64_t kAggregateTag = 0x41474752ULL;
inline constexpr uint64_t kPartitionTag = 0x50415254ULL;
inline constexpr uint64_t kTypesTag = 0x54595045ULL;
inline constexpr uint64_t kEvalTag = 0x4556414CULL;
inline constexpr uint64_t kInitTag = 0x494E4954ULL;
inline constexpr uint64_t kDataTag = 0x44415441ULL;

// ceil(qK) distinct ids by partial Fisher-Yates, returned sorted.
inline std::vector<std::size_t> SampleClients(const FederationConfig& cfg, std::size_t round) {
  Rng rng = Rng::Derive(cfg.seed, {kSampleTag, round});
  const std::size_t k = cfg.clients;
  const std::size_t n = std::min(k, cfg.ParticipantsPerRound());
  std::vector<std::size_t> ids(k);
  for (std::size_t i = 0; i < k; ++i) ids[i] = i;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.UniformInt(k - i));
    std::swap(ids[i], ids[j]);
  }
  ids.resize(n);
  std::sort(ids.begin(), ids.end());
  return ids;
}

// Per-class Dirichlet(alpha) split across K clients. Each class's shuffled
// indices are cut at round(cumsum(p) * n_c). If any client ends up empty the
// whole partition is redrawn (up to 1000 attempts).
inline std::vector<std::vector<std::size_t>> DirichletPartition(
    std::span<const std::size_t> labels, std::size_t num_clients, double alpha, Rng& rng) {
  if (num_clients < 1) throw ValidationError("dirichlet partition: K must be >= 1");
  if (!(alpha > 0.0)) throw ValidationError("dirichlet partition: alpha must be > 0");
  if (labels.size() < num_clients) {
    throw ValidationError(internal::StrCat("dirichlet partition: ", labels.size(),
                                           " samples for ", num_clients, " clients"));
  }
  std::size_t num_classes = 0;
  for (std::size_t l : labels) num_classes = std::max(num_classes, l + 1);
  std::vector<std::vector<std::size_t>> by_class(num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);

  for (int attempt = 0; attempt < 1000; ++attempt) {
    std::vector<std::vector<std::size_t>> parts(num_clients);
    for (auto idx : by_class) {
      if (idx.empty()) continue;
      for (std::size_t i = idx.size(); i > 1; --i)
        std::swap(idx[i - 1], idx[rng.UniformInt(i)]);
      Vector p(num_clients);
      double total = 0.0;
      for (double& x : p) total += (x = rng.Gamma(alpha));
      double cum = 0.0;
      std::size_t start = 0;
      for (std::size_t k = 0; k < num_clients; ++k) {
        cum += p[k] / total;
        const std::size_t end =
            k + 1 == num_clients
                ? idx.size()
                : std::min(idx.size(),
                           static_cast<std::size_t>(std::llround(cum * double(idx.size()))));
        for (std::size_t i = start; i < std::max(start, end); ++i) parts[k].push_back(idx[i]);
        start = std::max(start, end);
      }
    }
    if (std::all_of(parts.begin(), parts.end(), [](const auto& v) { return !v.empty(); })) {
      for (auto& v : parts) std::sort(v.begin(), v.end());
      return parts;
    }
  }
  throw Error("dirichlet partition: could not give every client a sample");
}

inline std::vector<ClientType> AssignClientTypes(std::size_t num_clients,
                                                 const std::array<double, 3>& mix, Rng& rng) {
  const double sum = mix[0] + mix[1] + mix[2];
  if (std::abs(sum - 1.0) > 1e-9 || mix[0] < 0 || mix[1] < 0 || mix[2] < 0)
    throw ValidationError("client type mix must be non-negative and sum to 1");
  std::vector<ClientType> out(num_clients);
  for (auto& t : out) {
    const double u = rng.Uniform();
    t = u < mix[0] ? ClientType::kA : (u < mix[0] + mix[1] ? ClientType::kB : ClientType::kC);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Aggregation of the non-kernel blocks.

// Per-block sum_k w_k delta_k / sum_k w_k, accumulated in the given order.
inline NamedBlocks FedAvg(std::span<const NamedBlocks> deltas, std::span<const double> weights) {
  if (deltas.empty()) throw ValidationError("fedavg: no deltas");
  if (deltas.size() != weights.size()) throw ValidationError("fedavg: weights/deltas count");
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0)) throw ValidationError("fedavg: weights must sum to > 0");
  NamedBlocks acc;
  for (const auto& [name, m] : deltas.front()) acc[name] = Matrix(m.rows(), m.cols());
  for (std::size_t k = 0; k < deltas.size(); ++k) {
    if (deltas[k].size() != acc.size()) throw ValidationError("fedavg: block sets differ");
    for (auto& [name, a] : acc) {
      auto it = deltas[k].find(name);
      if (it == deltas[k].end()) throw ValidationError("fedavg: missing block " + name);
      if (!it->second.SameShape(a))
        throw ValidationError("fedavg: shape mismatch in block " + name);
      for (std::size_t i = 0; i < a.size(); ++i) a.data()[i] += weights[k] * it->second.data()[i];
    }
  }
  for (auto& [name, a] : acc)
    for (double& x : a.data()) x /= total;
  return acc;
}

inline Matrix FedAvgMatrix(std::span<const Matrix> deltas, std::span<const double> weights) {
  std::vector<NamedBlocks> wrapped;
  wrapped.reserve(deltas.size());
  for (const Matrix& m : deltas) wrapped.push_back(NamedBlocks{{"m", m}});
  return FedAvg(wrapped, weights).at("m");
}

// ---------------------------------------------------------------------------
// Alignment metric.

// Unbiased MMD^2 with the Gaussian kernel exp(-|a - b|^2 / (2 bw^2)).
inline double Mmd(std::span<const Vector> x, std::span<const Vector> y, double bandwidth) {
  if (x.size() < 2 || y.size() < 2)
    throw ValidationError("mmd: unbiased estimator needs at least 2 samples per set");
  if (!(bandwidth > 0.0)) throw ValidationError("mmd: bandwidth must be > 0");
  const double inv = 1.0 / (2.0 * bandwidth * bandwidth);
  auto k = [&](const Vector& a, const Vector& b) {
    if (a.size() != b.size()) throw ValidationError("mmd: dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::exp(-s * inv);
  };
  const double n = static_cast<double>(x.size());
  const double m = static_cast<double>(y.size());
  double xx = 0.0, yy = 0.0, xy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < x.size(); ++j)
      if (i != j) xx += k(x[i], x[j]);
  for (std::size_t i = 0; i < y.size(); ++i)
    for (std::size_t j = 0; j < y.size(); ++j)
      if (i != j) yy += k(y[i], y[j]);
  for (const auto& a : x)
    for (const auto& b : y) xy += k(a, b);
  return xx / (n * (n - 1.0)) + yy / (m * (m - 1.0)) - 2.0 * xy / (n * m);
}

// Median pairwise distance over the pooled sets.
inline double MedianBandwidth(std::span<const Vector> x, std::span<const Vector> y) {
  std::vector<Vector> all(x.begin(), x.end());
  all.insert(all.end(), y.begin(), y.end());
  Vector dists;
  for (std::size_t i = 0; i < all.size(); ++i)
    for (std::size_t j = i + 1; j < all.size(); ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < all[i].size(); ++c) s += std::pow(all[i][c] - all[j][c], 2);
      dists.push_back(std::sqrt(s));
    }
  if (dists.empty()) return 1.0;
  std::nth_element(dists.begin(), dists.begin() + dists.size() / 2, dists.end());
  const double med = dists[dists.size() / 2];
  return med > 0.0 ? med : 1.0;
}

struct PermutationTest {
  double statistic = 0.0;
  Vector null;  // sorted permutation statistics
  double Quantile(double q) const {
    const auto idx = static_cast<std::size_t>(std::ceil(q * double(null.size()))) - 1;
    return null[std::min(idx, null.size() - 1)];
  }
};

inline PermutationTest MmdPermutationTest(std::span<const Vector> x, std::span<const Vector> y,
                                          double bandwidth, std::size_t permutations, Rng& rng) {
  PermutationTest t;
  t.statistic = Mmd(x, y, bandwidth);
  std::vector<Vector> pool(x.begin(), x.end());
  pool.insert(pool.end(), y.begin(), y.end());
  for (std::size_t p = 0; p < permutations; ++p) {
    for (std::size_t i = pool.size(); i > 1; --i) std::swap(pool[i - 1], pool[rng.UniformInt(i)]);
    std::span<const Vector> all(pool);
    t.null.push_back(Mmd(all.first(x.size()), all.subspan(x.size()), bandwidth));
  }
  std::sort(t.null.begin(), t.null.end());
  return t;
}

// ---------------------------------------------------------------------------
// Population.

struct TaskConfig {
  WorldConfig world;
  std::size_t model_dim = 32;
  ProfileConfig profiles;
  std::size_t samples_per_client = 50;
  std::size_t eval_samples = 150;
  GateConfig gate;
  double attn_eps = kDefaultSgltEps;
};

struct Population {
  SyntheticWorld world;
  std::shared_ptr<const FeatureMap> features;
  std::vector<ClientData> clients;
  std::vector<Observation> eval_set;
  std::vector<ClientType> eval_types;
  GateConfig gate;
  double attn_eps = kDefaultSgltEps;
};

// World, feature map, per-client types and Dirichlet label partition, and a
// held-out evaluation set rendered for types A, B, C in rotation. Fully
// determined by fed.seed and the task config.
inline Population BuildPopulation(const FederationConfig& fed, const TaskConfig& task) {
  Population pop;
  WorldConfig wc = task.world;
  wc.seed = fed.seed;
  pop.world = GenerateWorld(wc);
  Rng feat_rng = Rng::Derive(fed.seed, {kInitTag, 1});
  pop.features = std::make_shared<const FeatureMap>(
      FeatureMap::Create(task.model_dim, task.model_dim, feat_rng));
  pop.gate = task.gate;
  if (fed.ablation.hard_gate) pop.gate.mode = GateMode::kHard;
  if (fed.ablation.no_sglt_gate) pop.gate = GateConfig::Passthrough();
  pop.attn_eps = task.attn_eps;

  Rng data_rng = Rng::Derive(fed.seed, {kDataTag});
  std::vector<LatentSample> pool;
  const std::size_t total = task.samples_per_client * fed.clients;
  pool.reserve(total);
  std::vector<std::size_t> labels;
  for (std::size_t i = 0; i < total; ++i) {
    pool.push_back(DrawLatent(pop.world, data_rng));
    labels.push_back(pool.back().label);
  }
  Rng part_rng = Rng::Derive(fed.seed, {kPartitionTag});
  const auto parts = DirichletPartition(labels, fed.clients, fed.dirichlet_alpha, part_rng);
  Rng type_rng = Rng::Derive(fed.seed, {kTypesTag});
  const auto types = AssignClientTypes(fed.clients, fed.type_mix, type_rng);
  const std::size_t n_mod = pop.world.num_modalities();
  for (std::size_t k = 0; k < fed.clients; ++k) {
    ClientData cd;
    cd.profile = MakeProfile(types[k], n_mod, task.profiles);
    for (std::size_t idx : parts[k]) cd.samples.push_back(pool[idx]);
    pop.clients.push_back(std::move(cd));
  }

  Rng eval_rng = Rng::Derive(fed.seed, {kEvalTag});
  const ClientType rotation[3] = {ClientType::kA, ClientType::kB, ClientType::kC};
  for (std::size_t i = 0; i < task.eval_samples; ++i) {
    const ClientType t = rotation[i % 3];
    const ClientProfile prof = MakeProfile(t, n_mod, task.profiles);
    const LatentSample s = DrawLatent(pop.world, eval_rng);
    pop.eval_set.push_back(RenderForClient(pop.world, prof, s, eval_rng));
    pop.eval_types.push_back(t);
  }
  return pop;
}

inline GlobalModel InitGlobalModel(const FederationConfig& fed, const TaskConfig& task) {
  Rng rng = Rng::Derive(fed.seed, {kInitTag, 2});
  GlobalModel g;
  ModelShape shape{task.model_dim, task.world.modality_dims, task.world.target_dim,
                   task.world.num_classes};
  g.theta_rest = InitRestBlocks(shape, rng);
  g.theta_m = SemanticKernel{Matrix::Gaussian(task.model_dim, task.model_dim, rng,
                                              kKernelInitScale)};
  GlobalBasis(g);
  return g;
}

inline ScoreNet InitScoreNet(const FederationConfig& fed) {
  Rng rng = Rng::Derive(fed.seed, {kInitTag, 3});
  return ScoreNet::Create(fed.rank * fed.rank, fed.score_hidden, fed.t_embed_dim, rng,
                          fed.sched);
}

inline ClientModel MakeClientModel(const GlobalModel& g, const Population& pop) {
  return ClientModel{g.theta_rest, g.theta_m, pop.features, pop.gate, pop.attn_eps};
}

// ---------------------------------------------------------------------------
// Round.

struct ClientUpdate {
  std::size_t client_id = 0;
  Matrix kernel_delta;  // privatized
  NamedBlocks rest_deltas;
  std::size_t num_samples = 0;
  double train_loss = 0.0;
};

struct RoundRecord {
  std::size_t round = 0;
  std::vector<std::size_t> participating;
  std::vector<std::size_t> dropped;
  double train_loss_mean = 0.0;
  Metrics eval;
  double mmd = 0.0;
  double sigma_sig = 0.0;
  double dsm_loss = 0.0;
  int64_t wallclock_ms = 0;
  std::vector<std::string> warnings;
};

// Local training hook. The default runs LocalTrain; tests substitute fixed
// deltas or failures.
using ClientTrainer = std::function<LocalResult(
    std::size_t client_id, const ClientModel& global, const Population& pop,
    const TrainOptions& opts, Rng& rng)>;

inline LocalResult DefaultTrainer(std::size_t client_id, const ClientModel& global,
                                  const Population& pop, const TrainOptions& opts, Rng& rng) {
  return LocalTrain(global, pop.world, pop.clients.at(client_id), opts, rng);
}

struct RoundOptions {
  std::size_t parallel_clients = 1;
  ClientTrainer trainer = DefaultTrainer;
};

// Kernel privatization for one client according to the ablation flags.
inline Matrix PrivatizeKernelDelta(const Matrix& delta, const SubspaceProjectors& proj,
                                   const FederationConfig& cfg, Rng& rng) {
  const Ablation& ab = cfg.ablation;
  if (ab.no_spdp) {
    if (!ab.no_spdp_clip) return delta;
    return Unvec(ClipL2(Vec(delta), cfg.budget.clip_bound), delta.rows(), delta.cols());
  }
  if (ab.isotropic_dp) return PrivatizeIsotropic(delta, cfg.budget, rng);
  return Privatize(delta, proj, cfg.budget, rng);
}

// Pooled latent representations of eval observations of types A and B under
// the model, compared by MMD^2 with a median-distance bandwidth.
inline double AlignmentMmd(const ClientModel& model, const Population& pop) {
  std::vector<Vector> a, b;
  for (std::size_t i = 0; i < pop.eval_set.size(); ++i) {
    if (pop.eval_types[i] == ClientType::kC) continue;
    Vector pooled = Forward(model, pop.eval_set[i]).pooled;
    (pop.eval_types[i] == ClientType::kA ? a : b).push_back(std::move(pooled));
  }
  if (a.size() < 2 || b.size() < 2) return 0.0;
  return Mmd(a, b, MedianBandwidth(a, b));
}

inline RoundRecord RunRound(GlobalModel& model, const Population& pop, const FederationConfig& cfg,
                            ScoreNet& net, const RoundOptions& opts = {}) {
  const auto start = std::chrono::steady_clock::now();
  RoundRecord rec;
  rec.round = model.round;

  // Rethrows with the failing phase named.
  auto phase = [&](const char* name, auto&& fn) {
    try {
      return fn();
    } catch (const ValidationError& e) {
      throw ValidationError(internal::StrCat("round ", model.round, ", ", name, ": ", e.what()));
    } catch (const std::exception& e) {
      throw Error(internal::StrCat("round ", model.round, ", ", name, ": ", e.what()));
    }
  };

  const auto [u_g, w_g] = phase("basis", [&] { return GlobalBasis(model); });
  rec.participating = SampleClients(cfg, model.round);
  if (!cfg.ablation.no_spdp) rec.sigma_sig = CalibrateSigma(cfg.budget);
  const SubspaceProjectors proj = phase("projectors", [&] { return BuildProjectors(u_g, cfg.rank); });
  const ClientModel broadcast = MakeClientModel(model, pop);
  const TrainOptions train{cfg.local_steps, cfg.batch, cfg.lr, cfg.weight_decay};

  const std::size_t n = rec.participating.size();
  std::vector<std::optional<ClientUpdate>> slots(n);
  std::vector<std::string> failures(n);
  auto work = [&](std::size_t slot) {
    const std::size_t id = rec.participating[slot];
    try {
      Rng rng = Rng::Derive(cfg.seed, {kClientTag, model.round, id});
      LocalResult lr = opts.trainer(id, broadcast, pop, train, rng);
      if (!lr.kernel_delta.AllFinite()) throw Error("non-finite kernel delta");
      for (const auto& [name, m] : lr.rest_deltas)
        if (!m.AllFinite()) throw Error("non-finite delta in block " + name);
      ClientUpdate up;
      up.client_id = id;
      up.kernel_delta = PrivatizeKernelDelta(lr.kernel_delta, proj, cfg, rng);
      up.rest_deltas = std::move(lr.rest_deltas);
      up.num_samples = pop.clients.empty() ? 1 : pop.clients.at(id).samples.size();
      up.train_loss = lr.mean_loss;
      slots[slot] = std::move(up);
    } catch (const std::exception& e) {
      failures[slot] = e.what();
    }
  };
  const std::size_t workers = std::max<std::size_t>(1, std::min(opts.parallel_clients, n));
  if (workers == 1) {
    for (std::size_t s = 0; s < n; ++s) work(s);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t s = w; s < n; s += workers) work(s);
      });
    }
    for (auto& t : pool) t.join();
  }

  std::vector<ClientUpdate> updates;
  for (std::size_t s = 0; s < n; ++s) {
    if (slots[s]) {
      updates.push_back(std::move(*slots[s]));
    } else {
      rec.dropped.push_back(rec.participating[s]);
      rec.warnings.push_back(internal::StrCat("client ", rec.participating[s],
                                              " dropped: ", failures[s]));
    }
  }

  if (!updates.empty()) {
    std::vector<Matrix> kernels;
    std::vector<NamedBlocks> rests;
    Vector weights;
    for (const auto& u : updates) {
      kernels.push_back(u.kernel_delta);
      rests.push_back(u.rest_deltas);
      weights.push_back(cfg.weighted_fedavg ? static_cast<double>(u.num_samples) : 1.0);
      rec.train_loss_mean += u.train_loss / static_cast<double>(updates.size());
    }

    Matrix kernel_step;
    if (cfg.ablation.no_diffgno) {
      kernel_step = FedAvgMatrix(kernels, weights);
    } else {
      Rng agg_rng = Rng::Derive(cfg.seed, {kAggregateTag, model.round});
      AggregateOptions ao{cfg.dsm_steps, cfg.n_rev, cfg.dsm_lr, cfg.consensus_samples,
                          kDsmTimeFloor, cfg.dsm_weighting};
      AggregateResult ar = phase("aggregate", [&] {
        return Aggregate(kernels, u_g, w_g, cfg.rank, net, cfg.sched, ao, agg_rng);
      });
      kernel_step = std::move(ar.delta_m);
      rec.dsm_loss = ar.final_dsm_loss;
      for (auto& w : ar.warnings) rec.warnings.push_back(std::move(w));
    }
    model.theta_m.theta_m += cfg.server_step * kernel_step;

    const NamedBlocks avg = phase("fedavg", [&] { return FedAvg(rests, weights); });
    for (auto& [name, block] : model.theta_rest) block += cfg.server_step * avg.at(name);
  } else {
    rec.warnings.push_back("no client update survived this round");
  }

  ++model.round;
  const ClientModel updated = MakeClientModel(model, pop);
  if (!pop.eval_set.empty()) {
    phase("evaluate", [&] {
      rec.eval = Evaluate(updated, pop.eval_set);
      rec.mmd = AlignmentMmd(updated, pop);
    });
  }
  rec.wallclock_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                         std::chrono::steady_clock::now() - start)
                         .count();
  return rec;
}

}  // namespace umeda
