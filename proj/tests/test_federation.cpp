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

#include "umeda/federation.hpp"

#include <cmath>
#include <set>

#include "gtest/gtest.h"
#include "umeda/checks.hpp"

namespace umeda {
namespace {

TEST(SampleClientsTest, CountDistinctSortedDeterministic) {
  FederationConfig cfg;
  cfg.clients = 10;
  cfg.sample_rate = 0.35;
  const auto ids = SampleClients(cfg, 3);
  EXPECT_EQ(ids.size(), 4u);  // ceil(3.5)
  EXPECT_TRUE(std::is_sorted(ids.begin(), ids.end()));
  EXPECT_EQ(std::set<std::size_t>(ids.begin(), ids.end()).size(), ids.size());
  EXPECT_EQ(ids, SampleClients(cfg, 3));
  cfg.sample_rate = 0.3;
  EXPECT_EQ(SampleClients(cfg, 0).size(), 3u);  // exact product, no rounding up
  cfg.sample_rate = 1.0;
  EXPECT_EQ(SampleClients(cfg, 0).size(), 10u);
}

TEST(SampleClientsTest, RoundsDiffer) {
  FederationConfig cfg;
  cfg.clients = 50;
  cfg.sample_rate = 0.2;
  int same = 0;
  for (std::size_t r = 1; r < 20; ++r) same += SampleClients(cfg, r) == SampleClients(cfg, 0);
  EXPECT_EQ(same, 0);
}

TEST(DirichletPartitionTest, EveryIndexOnceNoEmptyClient) {
  Rng rng(1);
  std::vector<std::size_t> labels;
  for (int i = 0; i < 300; ++i) labels.push_back(i % 5);
  const auto parts = DirichletPartition(labels, 10, 0.5, rng);
  std::vector<int> seen(300, 0);
  for (const auto& p : parts) {
    EXPECT_FALSE(p.empty());
    for (std::size_t i : p) ++seen[i];
  }
  for (int s : seen) EXPECT_EQ(s, 1);
}

TEST(DirichletPartitionTest, SmallAlphaSkewsLabels) {
  std::vector<std::size_t> labels;
  for (int i = 0; i < 2000; ++i) labels.push_back(i % 4);
  auto purity = [&](double alpha) {
    Rng rng(2);
    const auto parts = DirichletPartition(labels, 5, alpha, rng);
    double total = 0.0;
    for (const auto& p : parts) {
      std::vector<int> c(4, 0);
      for (std::size_t i : p) ++c[labels[i]];
      total += *std::max_element(c.begin(), c.end()) / static_cast<double>(p.size());
    }
    return total / 5.0;
  };
  EXPECT_GT(purity(0.05), 0.7);
  EXPECT_LT(purity(1000.0), 0.35);
}

TEST(DirichletPartitionTest, Validation) {
  Rng rng(3);
  const std::vector<std::size_t> labels = {0, 1};
  EXPECT_THROW(DirichletPartition(labels, 3, 0.5, rng), ValidationError);
  EXPECT_THROW(DirichletPartition(labels, 2, 0.0, rng), ValidationError);
}

TEST(ClientTypesTest, MixProportions) {
  Rng rng(4);
  const auto t = AssignClientTypes(9000, {0.5, 0.3, 0.2}, rng);
  EXPECT_NEAR(std::count(t.begin(), t.end(), ClientType::kA) / 9000.0, 0.5, 0.02);
  EXPECT_NEAR(std::count(t.begin(), t.end(), ClientType::kC) / 9000.0, 0.2, 0.02);
  EXPECT_THROW(AssignClientTypes(3, {0.5, 0.5, 0.5}, rng), ValidationError);
}

TEST(FedAvgTest, WeightedMean) {
  const std::vector<NamedBlocks> d = {{{"a", Matrix{{1.0, 2.0}}}}, {{"a", Matrix{{4.0, 8.0}}}}};
  const NamedBlocks avg = FedAvg(d, Vector{1.0, 2.0});
  EXPECT_DOUBLE_EQ(avg.at("a")(0, 0), 3.0);
  EXPECT_DOUBLE_EQ(avg.at("a")(0, 1), 6.0);
  EXPECT_THROW(FedAvg(d, Vector{1.0}), ValidationError);
  EXPECT_THROW(FedAvg(d, Vector{0.0, 0.0}), ValidationError);
  const std::vector<NamedBlocks> bad = {{{"a", Matrix(1, 2)}}, {{"b", Matrix(1, 2)}}};
  EXPECT_THROW(FedAvg(bad, Vector{1.0, 1.0}), ValidationError);
}

TEST(FedAvgTest, DegeneracyOfFullRound) {
  const CheckOutcome o = checks::FedAvgDegeneracy();
  EXPECT_TRUE(o.passed) << o.detail;
}

TEST(MmdTest, HandComputed) {
  const std::vector<Vector> x = {{0.0}, {1.0}}, y = {{2.0}, {3.0}};
  const double kxx = std::exp(-0.5), kyy = std::exp(-0.5);
  const double kxy = (2 * std::exp(-2.0) + std::exp(-4.5) + std::exp(-0.5)) / 4.0;
  EXPECT_NEAR(Mmd(x, y, 1.0), kxx + kyy - 2 * kxy, 1e-15);
}

TEST(MmdTest, PermutationTestSeparatesDistributions) {
  const CheckOutcome o = checks::MmdProxy();
  EXPECT_TRUE(o.passed) << o.detail;
}

TEST(MmdTest, QuantileIndexing) {
  PermutationTest t;
  for (int i = 1; i <= 200; ++i) t.null.push_back(i);
  EXPECT_EQ(t.Quantile(0.95), 190.0);
  EXPECT_EQ(t.Quantile(0.99), 198.0);
}

TEST(PopulationTest, Structure) {
  const RunConfig c = checks::TinyConfig();
  const Population pop = BuildPopulation(c.fed, c.task);
  ASSERT_EQ(pop.clients.size(), c.fed.clients);
  std::size_t total = 0;
  for (const auto& cl : pop.clients) {
    EXPECT_FALSE(cl.samples.empty());
    total += cl.samples.size();
  }
  EXPECT_EQ(total, c.fed.clients * c.task.samples_per_client);
  ASSERT_EQ(pop.eval_set.size(), c.task.eval_samples);
  EXPECT_EQ(pop.eval_types[0], ClientType::kA);
  EXPECT_EQ(pop.eval_types[1], ClientType::kB);
  EXPECT_EQ(pop.eval_types[2], ClientType::kC);
}

TEST(PopulationTest, GateAblations) {
  RunConfig c = checks::TinyConfig();
  c.fed.ablation.hard_gate = true;
  EXPECT_EQ(BuildPopulation(c.fed, c.task).gate.mode, GateMode::kHard);
  c.fed.ablation.no_sglt_gate = true;
  EXPECT_EQ(BuildPopulation(c.fed, c.task).gate.Gain(0.0), 1.0);
}

TEST(PrivatizeKernelDeltaTest, AblationPaths) {
  FederationConfig cfg;
  Rng rng(5);
  const SubspaceProjectors p = BuildProjectors(Matrix::Identity(3), 1);
  const Matrix delta = Matrix::Gaussian(3, 3, rng, 10.0);
  cfg.ablation.no_spdp = true;
  EXPECT_EQ(PrivatizeKernelDelta(delta, p, cfg, rng), delta);
  cfg.ablation.no_spdp_clip = true;
  EXPECT_NEAR(FrobeniusNorm(PrivatizeKernelDelta(delta, p, cfg, rng)), 1.0, 1e-12);
}

struct RoundFixture {
  RunConfig cfg = checks::TinyConfig();
  Population pop = BuildPopulation(cfg.fed, cfg.task);
  GlobalModel model = InitGlobalModel(cfg.fed, cfg.task);
  ScoreNet net = InitScoreNet(cfg.fed);
};

TEST(RunRoundTest, DeterministicAndThreadCountInvariant) {
  RoundFixture a, b;
  RoundOptions par;
  par.parallel_clients = 3;
  for (int r = 0; r < 2; ++r) {
    const RoundRecord ra = RunRound(a.model, a.pop, a.cfg.fed, a.net);
    const RoundRecord rb = RunRound(b.model, b.pop, b.cfg.fed, b.net, par);
    EXPECT_EQ(ra.participating, rb.participating);
    EXPECT_EQ(ra.train_loss_mean, rb.train_loss_mean);
  }
  EXPECT_EQ(a.model.theta_m.theta_m, b.model.theta_m.theta_m);
  EXPECT_EQ(a.model.theta_rest, b.model.theta_rest);
  EXPECT_EQ(a.model.round, 2u);
}

TEST(RunRoundTest, FailingClientIsDropped) {
  RoundFixture f;
  const auto ids = SampleClients(f.cfg.fed, 0);
  const std::size_t bad = ids.front();
  RoundOptions opts;
  opts.trainer = [bad](std::size_t id, const ClientModel& g, const Population& p,
                       const TrainOptions& o, Rng& rng) {
    if (id == bad) throw Error("simulated crash");
    return checks::FixedDeltaTrainer(id, g, p, o, rng);
  };
  const RoundRecord rec = RunRound(f.model, f.pop, f.cfg.fed, f.net, opts);
  EXPECT_EQ(rec.dropped, std::vector<std::size_t>{bad});
  ASSERT_FALSE(rec.warnings.empty());
  EXPECT_NE(rec.warnings[0].find("simulated crash"), std::string::npos);
  EXPECT_EQ(f.model.round, 1u);
}

TEST(RunRoundTest, NonFiniteDeltaIsDropped) {
  RoundFixture f;
  RoundOptions opts;
  opts.trainer = [](std::size_t id, const ClientModel& g, const Population& p,
                    const TrainOptions& o, Rng& rng) {
    LocalResult r = checks::FixedDeltaTrainer(id, g, p, o, rng);
    r.kernel_delta(0, 0) = std::nan("");
    return r;
  };
  const ClientModel before = MakeClientModel(f.model, f.pop);
  const RoundRecord rec = RunRound(f.model, f.pop, f.cfg.fed, f.net, opts);
  EXPECT_EQ(rec.dropped.size(), rec.participating.size());
  EXPECT_EQ(rec.warnings.back(), "no client update survived this round");
  EXPECT_EQ(f.model.theta_m.theta_m, before.kernel.theta_m);
}

TEST(RunRoundTest, ErrorsNameTheRoundAndPhase) {
  RoundFixture f;
  f.cfg.fed.rank = f.cfg.task.model_dim + 1;
  try {
    RunRound(f.model, f.pop, f.cfg.fed, f.net);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_EQ(std::string(e.what()).rfind("round 0, projectors: ", 0), 0u) << e.what();
  }
}

TEST(RunRoundTest, PrivacyAndEvaluationFields) {
  RoundFixture f;
  const RoundRecord rec = RunRound(f.model, f.pop, f.cfg.fed, f.net);
  EXPECT_DOUBLE_EQ(rec.sigma_sig, CalibrateSigma(f.cfg.fed.budget));
  EXPECT_TRUE(std::isfinite(rec.eval.rmse));
  EXPECT_GE(rec.eval.top1, 0.0);
  EXPECT_LE(rec.eval.top1, 1.0);
}

}  // namespace
}  // namespace umeda
