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

#include "umeda/runner.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "gtest/gtest.h"
#include "umeda/checks.hpp"

namespace umeda {
namespace {

namespace fs = std::filesystem;

class RunnerTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() /
           (std::string("umeda_runner_") + info->name() + "_" + std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  RunConfig Tiny(const std::string& name, std::size_t rounds = 3) const {
    RunConfig c = checks::TinyConfig();
    c.fed.rounds = rounds;
    c.out_dir = (dir_ / name).string();
    c.run_id = name;
    return c;
  }

  static std::vector<std::string> Lines(const std::string& path) {
    std::ifstream in(path);
    std::vector<std::string> out;
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
  }

  fs::path dir_;
};

TEST_F(RunnerTest, CheckpointRoundTripIsBitExact) {
  const RunConfig c = Tiny("ckpt");
  GlobalModel model = InitGlobalModel(c.fed, c.task);
  model.round = 17;
  const ScoreNet net = InitScoreNet(c.fed);
  const std::string path = (dir_ / "a.bin").string();
  SaveCheckpoint(path, model, net);
  EXPECT_FALSE(fs::exists(path + ".tmp"));

  RunConfig other = c;
  other.fed.seed = 99;
  const auto [m2, n2] =
      LoadCheckpoint(path, InitGlobalModel(other.fed, other.task), InitScoreNet(other.fed));
  EXPECT_EQ(m2.round, 17u);
  EXPECT_EQ(m2.theta_m.theta_m, model.theta_m.theta_m);
  EXPECT_EQ(m2.theta_rest, model.theta_rest);
  EXPECT_EQ(n2.w1, net.w1);
  EXPECT_EQ(n2.b2, net.b2);
  EXPECT_EQ(m2.basis_u, model.basis_u);
}

std::string ReadBytes(const std::string& p) { return checks::ReadFile(p); }

void WriteBytes(const std::string& p, const std::string& b) {
  std::ofstream(p, std::ios::binary | std::ios::trunc) << b;
}

std::string LoadError(const std::string& path, const RunConfig& c) {
  try {
    LoadCheckpoint(path, InitGlobalModel(c.fed, c.task), InitScoreNet(c.fed));
  } catch (const ValidationError& e) {
    return e.what();
  }
  return "loaded";
}

TEST_F(RunnerTest, CheckpointRejectsCorruption) {
  const RunConfig c = Tiny("bad");
  const std::string path = (dir_ / "c.bin").string();
  SaveCheckpoint(path, InitGlobalModel(c.fed, c.task), InitScoreNet(c.fed));
  const std::string good = ReadBytes(path);
  const std::string p2 = (dir_ / "d.bin").string();

  std::string v = good;
  v[4] = 7;
  WriteBytes(p2, v);
  EXPECT_EQ(LoadError(p2, c), "checkpoint version 7 does not match supported version 1");

  WriteBytes(p2, "NOPE" + good.substr(4));
  EXPECT_NE(LoadError(p2, c).find("bad magic"), std::string::npos);

  WriteBytes(p2, good.substr(0, good.size() - 3));
  EXPECT_NE(LoadError(p2, c).find("truncated"), std::string::npos);

  WriteBytes(p2, good + "x");
  EXPECT_EQ(LoadError(p2, c), "trailing bytes after checkpoint records");

  RunConfig wider = c;
  wider.task.model_dim = 10;
  EXPECT_EQ(LoadError(path, wider), "shape mismatch for 'theta_m': checkpoint 8x8 vs model 10x10");

  EXPECT_NE(LoadError((dir_ / "missing.bin").string(), c).find("cannot open"), std::string::npos);
}

TEST_F(RunnerTest, RunWritesArtifacts) {
  const RunConfig c = Tiny("run");
  const RunSummary s = RunExperiment(c);
  EXPECT_EQ(s.rounds_completed, 3u);
  const auto rows = Lines(s.records_path);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0], kMetricsHeader);
  EXPECT_EQ(rows[1].substr(0, 4), "0,3,");
  EXPECT_EQ(rows[3].substr(rows[3].rfind(',')), ",0");  // wallclock off by default
  EXPECT_TRUE(fs::exists(s.checkpoint_path));
  EXPECT_TRUE(fs::exists(dir_ / "run" / "config.cfg"));
  const auto summary = Lines((dir_ / "run" / "summary.txt").string());
  EXPECT_EQ(summary[1], "config_hash = " + ConfigHash(c));
  // The written config reproduces the run's hash.
  EXPECT_EQ(ConfigHash(LoadConfigFile((dir_ / "run" / "config.cfg").string(), {}, false)),
            ConfigHash(c));
}

TEST_F(RunnerTest, ResumeMatchesUninterruptedRun) {
  const RunSummary full = RunExperiment(Tiny("full", 4));
  const RunSummary head = RunExperiment(Tiny("head", 2));
  RunOptions ro;
  ro.resume_from = head.checkpoint_path;
  const RunSummary tail = RunExperiment(Tiny("tail", 4), ro);
  EXPECT_EQ(tail.rounds_completed, 2u);
  EXPECT_EQ(ReadBytes(tail.checkpoint_path), ReadBytes(full.checkpoint_path));
  const auto a = Lines(full.records_path), b = Lines(tail.records_path);
  ASSERT_EQ(b.size(), 3u);
  EXPECT_EQ(b[1], a[3]);
  EXPECT_EQ(b[2], a[4]);
}

TEST_F(RunnerTest, PeriodicCheckpoints) {
  RunConfig c = Tiny("periodic", 4);
  c.checkpoint_every = 2;
  const RunSummary s = RunExperiment(c);
  EXPECT_TRUE(fs::exists(s.checkpoint_path));
}

TEST_F(RunnerTest, TargetRmseStopsEarly) {
  RunConfig c = Tiny("target", 5);
  c.fed.target_rmse = 1e6;
  const RunSummary s = RunExperiment(c);
  EXPECT_EQ(s.rounds_completed, 1u);
  ASSERT_TRUE(s.rounds_to_target.has_value());
  EXPECT_EQ(*s.rounds_to_target, 1u);
}

TEST_F(RunnerTest, FixturesDumpedAsMatrixRecords) {
  RunConfig c = Tiny("fixtures", 1);
  c.dump_fixtures = (dir_ / "fx").string();
  RunExperiment(c);
  std::ifstream in(dir_ / "fx" / "eval0_mod0.bin", std::ios::binary);
  ASSERT_TRUE(in.good());
  const Matrix m = ReadMatrix(in);
  EXPECT_EQ(m.cols(), c.task.world.modality_dims[0]);
}

TEST_F(RunnerTest, SweepWritesTable) {
  RunConfig base = Tiny("sweep", 2);
  base.out_dir = (dir_ / "sweep").string();
  const auto runs = RunSweep(base, "kappa", {"1", "4"});
  ASSERT_EQ(runs.size(), 2u);
  EXPECT_NE(runs[0].config_hash, runs[1].config_hash);
  const auto rows = Lines((dir_ / "sweep" / "sweep_kappa.csv").string());
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0], kSweepHeader);
  EXPECT_EQ(rows[1].substr(0, 8), "kappa,1,");
  EXPECT_TRUE(fs::exists(dir_ / "sweep" / "sweep_kappa_4" / "metrics.csv"));
}

TEST_F(RunnerTest, SweepValidatesBeforeRunning) {
  RunConfig base = Tiny("sweep_bad", 2);
  try {
    RunSweep(base, "kappa", {"2", "0.5"});
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_EQ(std::string(e.what()).rfind("sweep value kappa = 0.5: ", 0), 0u) << e.what();
  }
  EXPECT_FALSE(fs::exists(dir_ / "sweep_bad"));
  EXPECT_THROW(RunSweep(base, "lr", {"1"}), ValidationError);
  EXPECT_THROW(RunSweep(base, "kappa", {}), ValidationError);
  EXPECT_EQ(SweepKey("privacy.epsilon"), "privacy.epsilon");
}

}  // namespace
}  // namespace umeda
