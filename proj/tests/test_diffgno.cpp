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

#include "umeda/diffgno.hpp"

#include <algorithm>
#include <cmath>

#include "gtest/gtest.h"
#include "umeda/checks.hpp"

namespace umeda {
namespace {

TEST(VeScheduleTest, EndpointsDiffusionAndForwardNoise) {
  const CheckOutcome o = checks::ScheduleCheck();
  EXPECT_TRUE(o.passed) << o.detail;
}

TEST(VeScheduleTest, RejectsOutOfRangeTime) {
  const VeSchedule s;
  EXPECT_THROW(s.Sigma(-0.1), ValidationError);
  EXPECT_THROW(s.Sigma(1.5), ValidationError);
  EXPECT_THROW((VeSchedule{1.0, 0.5}).Validate(), ValidationError);
}

TEST(TimeEmbeddingTest, Values) {
  const Vector e = TimeEmbedding(0.0, 4);
  EXPECT_EQ(e, (Vector{0, 0, 1, 1}));
  const Vector h = TimeEmbedding(0.5, 4);
  EXPECT_NEAR(h[0], 1.0, 1e-15);                       // sin(pi/2)
  EXPECT_NEAR(h[1], 0.0, 1e-15);                       // sin(pi)
  EXPECT_NEAR(h[3], -1.0, 1e-15);                      // cos(pi)
}

TEST(ScoreNetTest, ZeroNetGivesZeroScore) {
  const ScoreNet net = ScoreNet::Zero(4, 8, 4);
  EXPECT_EQ(ScoreForward(net, Vector{1, 2, 3, 4}, 0.3), (Vector{0, 0, 0, 0}));
  EXPECT_THROW(ScoreForward(net, Vector{1, 2}, 0.3), ValidationError);
  EXPECT_THROW(ScoreNet::Zero(4, 8, 3), ValidationError);
}

TEST(ScoreNetTest, PreconditioningScalesInputAndOutput) {
  const VeSchedule s;
  Rng rng(1);
  const ScoreNet plain = ScoreNet::Create(1, 4, 2, rng);
  ScoreNet pre = plain;
  pre.precondition = s;
  const double t = 0.7, sigma = s.Sigma(t);
  EXPECT_DOUBLE_EQ(pre.OutputScale(t), 1.0 / sigma);
  EXPECT_DOUBLE_EQ(pre.InputScale(t), 1.0 / std::sqrt(1.0 + sigma * sigma));
  const double x = 3.0;
  const Vector a = ScoreForward(pre, Vector{x}, t);
  const Vector b = ScoreForward(plain, Vector{x * pre.InputScale(t)}, t);
  EXPECT_NEAR(a[0], b[0] / sigma, 1e-14);
}

TEST(DsmLossTest, ZeroNetClosedForm) {
  // s = 0 gives L = (1/n) sum |eps_i|^2 / sigma(t_i)^2.
  const VeSchedule sched;
  const ScoreNet net = ScoreNet::Zero(4, 3, 2);
  const std::vector<SpectralCoeffs> batch = {{Vector{1, 2, 3, 4}, 2}, {Vector{0, 0, 0, 0}, 2}};
  const Vector times = {0.25, 0.75};
  const std::vector<Vector> noise = {Vector{1, 0, 0, 0}, Vector{1, 1, 1, 1}};
  const double expect = 0.5 * (1.0 / std::pow(sched.Sigma(0.25), 2) +
                               4.0 / std::pow(sched.Sigma(0.75), 2));
  EXPECT_NEAR(DsmLossAt(net, sched, batch, times, noise).loss, expect, 1e-12 * expect);
  const double weighted = 0.5 * (1.0 + 4.0);
  EXPECT_NEAR(DsmLossAt(net, sched, batch, times, noise, DsmWeighting::kSigmaSquared).loss,
              weighted, 1e-12);
}

TEST(DsmLossTest, GradientMatchesFiniteDifferences) {
  const CheckOutcome o = checks::DsmGradientOracle();
  EXPECT_TRUE(o.passed) << o.detail;
}

class DsmGradientVariantTest
    : public ::testing::TestWithParam<std::pair<bool, DsmWeighting>> {};

TEST_P(DsmGradientVariantTest, MatchesFiniteDifferences) {
  const auto [precondition, weighting] = GetParam();
  const VeSchedule sched;
  Rng rng(2);
  const ScoreNet net = precondition ? ScoreNet::Create(4, 6, 4, rng, sched)
                                    : ScoreNet::Create(4, 6, 4, rng);
  std::vector<SpectralCoeffs> batch;
  Vector times;
  std::vector<Vector> noise;
  for (int i = 0; i < 4; ++i) {
    batch.push_back({Gaussian(rng, 4, 1.0), 2});
    times.push_back(0.05 + 0.9 * rng.Uniform());
    noise.push_back(Gaussian(rng, 4, 1.0));
  }
  const DsmResult a = DsmLossAt(net, sched, batch, times, noise, weighting);
  const ScoreNet fd = checks::FiniteDifferenceDsmGrad(net, sched, batch, times, noise, 1e-5,
                                                      weighting);
  const auto ga = std::as_const(a.grad).Params();
  const auto gf = fd.Params();
  for (std::size_t p = 0; p < ga.size(); ++p)
    EXPECT_LE(FrobeniusNorm(*ga[p] - *gf[p]), 1e-4 * FrobeniusNorm(*gf[p]) + 1e-9) << "block " << p;
}

INSTANTIATE_TEST_SUITE_P(Variants, DsmGradientVariantTest,
                         ::testing::Values(std::pair{false, DsmWeighting::kNone},
                                           std::pair{true, DsmWeighting::kNone},
                                           std::pair{true, DsmWeighting::kSigmaSquared}));

TEST(DsmLossTest, InputValidation) {
  const VeSchedule sched;
  const ScoreNet net = ScoreNet::Zero(1, 2, 2);
  const std::vector<SpectralCoeffs> batch = {{Vector{1}, 1}};
  EXPECT_THROW(DsmLossAt(net, sched, {}, {}, {}), ValidationError);
  EXPECT_THROW(DsmLossAt(net, sched, batch, Vector{0.5, 0.5}, std::vector<Vector>{{1}}),
               ValidationError);
}

TEST(TrainScoreNetTest, WeightedLossDecreases) {
  const VeSchedule sched;
  Rng rng(3);
  ScoreNet net = ScoreNet::Create(4, 32, 8, rng, sched);
  std::vector<SpectralCoeffs> data;
  for (int i = 0; i < 16; ++i) data.push_back({Gaussian(rng, 4, 1.0), 2});
  const Vector losses = TrainScoreNet(net, sched, data, 400, 1e-2, rng, kDsmTimeFloor,
                                      DsmWeighting::kSigmaSquared);
  auto mean = [&](std::size_t from, std::size_t to) {
    double s = 0.0;
    for (std::size_t i = from; i < to; ++i) s += losses[i];
    return s / static_cast<double>(to - from);
  };
  EXPECT_LT(mean(350, 400), 0.8 * mean(0, 50));
}

TEST(ReverseSampleTest, GaussianTargetWithExactScore) {
  const CheckOutcome o = checks::ReverseSamplerOracle();
  EXPECT_TRUE(o.passed) << o.detail;
}

TEST(ReverseSampleTest, PointMassWithExactScore) {
  // Individual samples keep O(g(t) sqrt(dt)) error from the final steps; the
  // sample mean converges to the point.
  const VeSchedule sched;
  const Vector mu = {0.3, -0.7, 1.1, 0.0};
  auto score = [&](const Vector& th, double t) {
    const double var = std::pow(sched.Sigma(t), 2);
    Vector out(th.size());
    for (std::size_t j = 0; j < th.size(); ++j) out[j] = -(th[j] - mu[j]) / var;
    return out;
  };
  Rng rng(4);
  const int n = 500;
  Vector mean(4, 0.0);
  double worst = 0.0;
  for (int i = 0; i < n; ++i) {
    const SpectralCoeffs x = ReverseSample(score, 2, sched, 50, rng);
    double d2 = 0.0;
    for (std::size_t j = 0; j < 4; ++j) {
      mean[j] += x.theta[j] / n;
      d2 += std::pow(x.theta[j] - mu[j], 2);
    }
    worst = std::max(worst, std::sqrt(d2));
  }
  for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(mean[j], mu[j], 0.005);
  EXPECT_LT(worst, 0.1);
}

TEST(ReverseSampleTest, SingleStepIsDeterministicDrift) {
  const VeSchedule sched;
  auto score = [](const Vector& th, double) { return Vector(th.size(), 1.0); };
  Rng rng(5);
  const SpectralCoeffs init{Vector{0.0}, 1};
  const SpectralCoeffs x = ReverseSample(score, 1, sched, 1, rng, init);
  EXPECT_NEAR(x.theta[0], std::pow(sched.G(1.0), 2), 1e-9);
  EXPECT_THROW(ReverseSample(score, 1, sched, 0, rng), ValidationError);
}

TEST(SpectralTest, RoundTripAndConsensusRank) {
  const CheckOutcome o = checks::SpectralRoundtrip();
  EXPECT_TRUE(o.passed) << o.detail;
}

TEST(SpectralTest, RankValidation) {
  const Matrix i4 = Matrix::Identity(4);
  EXPECT_THROW(SpectralProject(i4, i4, i4, 0), ValidationError);
  EXPECT_THROW(SpectralProject(i4, i4, i4, 5), ValidationError);
  EXPECT_THROW(SpectralReconstruct(SpectralCoeffs{Vector(3), 2}, i4, i4), ValidationError);
}

struct AggregateFixture {
  Rng rng{6};
  std::size_t d = 6, r = 2;
  VeSchedule sched;
  Matrix u = Svd(Matrix::Gaussian(6, 6, rng)).u;
  Matrix w = Svd(Matrix::Gaussian(6, 6, rng)).u;
  ScoreNet net = ScoreNet::Create(4, 16, 4, rng, sched);
  AggregateOptions opts{.train_steps = 30, .n_rev = 20, .lr = 1e-2};
};

TEST(AggregateTest, SingleUpdateIsItsProjection) {
  AggregateFixture f;
  const Matrix up = Matrix::Gaussian(6, 6, f.rng);
  const ScoreNet before = f.net;
  const AggregateResult ar = Aggregate(std::vector<Matrix>{up}, f.u, f.w, f.r, f.net, f.sched,
                                       f.opts, f.rng);
  const Matrix expect = SpectralReconstruct(SpectralProject(up, f.u, f.w, f.r), f.u, f.w);
  EXPECT_LT(MaxAbsDiff(ar.delta_m, expect), 1e-12);
  ASSERT_EQ(ar.warnings.size(), 1u);
  EXPECT_EQ(ar.warnings[0], "single client update; consensus is that update");
  EXPECT_EQ(f.net.w1, before.w1);
}

TEST(AggregateTest, IdenticalUpdatesGiveTheirMean) {
  AggregateFixture f;
  const Matrix up = Matrix::Gaussian(6, 6, f.rng);
  const AggregateResult ar = Aggregate(std::vector<Matrix>{up, up, up}, f.u, f.w, f.r, f.net,
                                       f.sched, f.opts, f.rng);
  EXPECT_EQ(ar.warnings.size(), 1u);
  EXPECT_LT(MaxAbsDiff(ar.delta_m,
                       SpectralReconstruct(SpectralProject(up, f.u, f.w, f.r), f.u, f.w)),
            1e-12);
}

TEST(AggregateTest, OrderInvariant) {
  AggregateFixture f;
  std::vector<Matrix> ups;
  for (int i = 0; i < 5; ++i) ups.push_back(Matrix::Gaussian(6, 6, f.rng, 0.1));
  std::vector<Matrix> rev(ups.rbegin(), ups.rend());
  ScoreNet n1 = f.net, n2 = f.net;
  Rng r1(11), r2(11);
  const AggregateResult a = Aggregate(ups, f.u, f.w, f.r, n1, f.sched, f.opts, r1);
  const AggregateResult b = Aggregate(rev, f.u, f.w, f.r, n2, f.sched, f.opts, r2);
  EXPECT_EQ(a.delta_m, b.delta_m);
}

TEST(AggregateTest, ConsensusNearCloudForTightCluster) {
  AggregateFixture f;
  const Matrix center = Matrix::Gaussian(6, 6, f.rng);
  std::vector<Matrix> ups;
  for (int i = 0; i < 8; ++i) ups.push_back(center + Matrix::Gaussian(6, 6, f.rng, 1e-3));
  const AggregateResult ar = Aggregate(ups, f.u, f.w, f.r, f.net, f.sched, f.opts, f.rng);
  const Matrix target = SpectralReconstruct(SpectralProject(center, f.u, f.w, f.r), f.u, f.w);
  EXPECT_LT(MaxAbsDiff(ar.delta_m, target), 0.05);
}

TEST(AggregateTest, DivergentSampleFallsBackToMean) {
  AggregateFixture f;
  for (double& b : f.net.b2.data()) b = 1e8;
  f.opts.train_steps = 1;
  f.opts.lr = 1e-12;
  std::vector<Matrix> ups;
  for (int i = 0; i < 4; ++i) ups.push_back(Matrix::Gaussian(6, 6, f.rng));
  const AggregateResult ar = Aggregate(ups, f.u, f.w, f.r, f.net, f.sched, f.opts, f.rng);
  ASSERT_EQ(ar.warnings.size(), 1u);
  EXPECT_EQ(ar.warnings[0], "reverse sample diverged; consensus falls back to the mean");
  Matrix mean(6, 6);
  for (const auto& u : ups) mean += 0.25 * u;
  EXPECT_LT(MaxAbsDiff(ar.delta_m,
                       SpectralReconstruct(SpectralProject(mean, f.u, f.w, f.r), f.u, f.w)),
            1e-12);
}

TEST(AggregateTest, InputValidation) {
  AggregateFixture f;
  EXPECT_THROW(Aggregate(std::vector<Matrix>{}, f.u, f.w, f.r, f.net, f.sched, f.opts, f.rng),
               ValidationError);
  EXPECT_THROW(Aggregate(std::vector<Matrix>{Matrix(6, 6)}, f.u, f.w, 3, f.net, f.sched, f.opts,
                         f.rng),
               ValidationError);
}

}  // namespace
}  // namespace umeda
