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

#include "umeda/config.hpp"

#include <cstdlib>

#include "gtest/gtest.h"

namespace umeda {
namespace {

// Clears every UMEDA_ override for the duration of a test.
class ConfigTest : public ::testing::Test {
 protected:
  void SetUp() override { Clear(); }
  void TearDown() override { Clear(); }
  static void Clear() {
    for (const auto& k : ConfigKeys()) ::unsetenv(EnvName(k).c_str());
    ::unsetenv("UMEDA_RUN_PRESET");
  }
};

TEST_F(ConfigTest, FullPresetDefaults) {
  const RunConfig c = PresetConfig(Preset::kFull);
  EXPECT_EQ(c.fed.rounds, 1000u);
  EXPECT_EQ(c.fed.clients, 100u);
  EXPECT_EQ(c.fed.sample_rate, 0.4);
  EXPECT_EQ(c.fed.local_steps, 100u);
  EXPECT_EQ(c.fed.batch, 64u);
  EXPECT_EQ(c.fed.lr, 1e-3);
  EXPECT_EQ(c.fed.weight_decay, 1e-4);
  EXPECT_EQ(c.fed.rank, 16u);
  EXPECT_EQ(c.fed.budget.epsilon, 2.0);
  EXPECT_EQ(c.fed.budget.delta, 1e-5);
  EXPECT_EQ(c.fed.budget.clip_bound, 1.0);
  EXPECT_EQ(c.fed.budget.kappa, 4.0);
  EXPECT_EQ(c.fed.sched.sigma_min, 0.01);
  EXPECT_EQ(c.fed.sched.sigma_max, 50.0);
  EXPECT_EQ(c.fed.n_rev, 50u);
  EXPECT_EQ(c.task.gate.tau, 0.05);
  EXPECT_EQ(c.task.gate.beta, 0.01);
  EXPECT_EQ(c.task.model_dim, 256u);
  EXPECT_NO_THROW(ValidateConfig(c));
  EXPECT_NO_THROW(ValidateConfig(PresetConfig(Preset::kDesk)));
}

TEST_F(ConfigTest, ParseSectionsCommentsAndQualifiedKeys) {
  const auto kv = ParseConfigText(
      "# comment\n[federation]\nrounds = 7  # trailing\n\nprivacy.kappa=2\n[ sglt ]\ngate = hard\n");
  ASSERT_EQ(kv.size(), 3u);
  EXPECT_EQ(kv[0], (std::pair<std::string, std::string>{"federation.rounds", "7"}));
  EXPECT_EQ(kv[1], (std::pair<std::string, std::string>{"privacy.kappa", "2"}));
  EXPECT_EQ(kv[2], (std::pair<std::string, std::string>{"sglt.gate", "hard"}));
}

TEST_F(ConfigTest, ParseErrorsNameTheLine) {
  auto message = [](const std::string& text) {
    try {
      ParseConfigText(text);
    } catch (const ValidationError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  EXPECT_EQ(message("[federation\n"), "config line 1: malformed section");
  EXPECT_EQ(message("\n\nrounds\n"), "config line 3: expected key = value");
  EXPECT_EQ(message("rounds = 3\n"), "config line 1: key 'rounds' outside a section");
}

TEST_F(ConfigTest, UnknownKeyAndBadValues) {
  RunConfig c;
  EXPECT_THROW(SetConfigValue(c, "federation.bogus", "1"), ValidationError);
  EXPECT_THROW(SetConfigValue(c, "federation.rounds", "abc"), ValidationError);
  EXPECT_THROW(SetConfigValue(c, "federation.rounds", "-3"), ValidationError);
  EXPECT_THROW(SetConfigValue(c, "privacy.epsilon", "2x"), ValidationError);
  EXPECT_THROW(SetConfigValue(c, "sglt.gate", "medium"), ValidationError);
  EXPECT_THROW(SetConfigValue(c, "ablation.no_spdp", "maybe"), ValidationError);
}

TEST_F(ConfigTest, SerializeRoundTripsEveryKey) {
  RunConfig c = PresetConfig(Preset::kDesk);
  SetConfigValue(c, "privacy.kappa", "2.5");
  SetConfigValue(c, "sglt.gate", "hard");
  SetConfigValue(c, "federation.target_rmse", "0.25");
  SetConfigValue(c, "task.modality_dims", "5,6,7,8");
  SetConfigValue(c, "ablation.isotropic_dp", "true");
  SetConfigValue(c, "sweep.values", "1,2,4");
  const std::string text = SerializeConfig(c);
  const RunConfig back = BuildConfig({text, std::nullopt, false});
  EXPECT_EQ(SerializeConfig(back), text);
  for (const auto& k : ConfigKeys()) EXPECT_EQ(GetConfigValue(back, k), GetConfigValue(c, k)) << k;
  EXPECT_EQ(back.preset, Preset::kDesk);
}

TEST_F(ConfigTest, DoublesRoundTripExactly) {
  RunConfig c;
  SetConfigValue(c, "federation.lr", "0.1");
  const RunConfig back = BuildConfig({SerializeConfig(c), std::nullopt, false});
  EXPECT_EQ(back.fed.lr, 0.1);
}

TEST_F(ConfigTest, PresetPrecedence) {
  EXPECT_EQ(BuildConfig({std::nullopt, std::nullopt, true}).preset, Preset::kFull);
  EXPECT_EQ(BuildConfig({"[run]\npreset = desk\n", std::nullopt, true}).fed.rounds, 50u);
  EXPECT_EQ(BuildConfig({"[run]\npreset = desk\n", Preset::kFull, true}).fed.rounds, 1000u);
  ::setenv("UMEDA_RUN_PRESET", "desk", 1);
  EXPECT_EQ(BuildConfig({std::nullopt, std::nullopt, true}).preset, Preset::kDesk);
  EXPECT_EQ(BuildConfig({std::nullopt, std::nullopt, false}).preset, Preset::kFull);
  EXPECT_THROW(BuildConfig({"[run]\npreset = big\n", std::nullopt, false}), ValidationError);
}

TEST_F(ConfigTest, FileOverridesPresetAndEnvironmentOverridesFile) {
  const std::string text = "[privacy]\nkappa = 2\n[federation]\nrounds = 9\n";
  RunConfig c = BuildConfig({text, Preset::kDesk, true});
  EXPECT_EQ(c.fed.budget.kappa, 2.0);
  EXPECT_EQ(c.fed.rounds, 9u);
  ::setenv("UMEDA_PRIVACY_KAPPA", "3", 1);
  c = BuildConfig({text, Preset::kDesk, true});
  EXPECT_EQ(c.fed.budget.kappa, 3.0);
  EXPECT_EQ(EnvName("federation.sample_rate"), "UMEDA_FEDERATION_SAMPLE_RATE");
}

TEST_F(ConfigTest, ValidationMessagesNameFieldValueAndRule) {
  auto message = [](const std::string& key, const std::string& value) {
    RunConfig c = PresetConfig(Preset::kDesk);
    SetConfigValue(c, key, value);
    try {
      ValidateConfig(c);
    } catch (const ValidationError& e) {
      return std::string(e.what());
    }
    return std::string("accepted");
  };
  EXPECT_EQ(message("federation.sample_rate", "1.5"),
            "federation.sample_rate = 1.5 violates sample_rate ∈ (0,1]");
  EXPECT_EQ(message("federation.rank", "40"),
            "federation.rank = 40 violates 1 <= rank <= sglt.model_dim");
  EXPECT_NE(message("privacy.kappa", "0.5").find("kappa = 0.5 violates kappa >= 1"),
            std::string::npos);
  EXPECT_EQ(message("privacy.epsilon", "0"), "epsilon = 0 violates epsilon > 0");
  EXPECT_NE(message("task.missing_rate", "1").find("missing_rate"), std::string::npos);
  EXPECT_NE(message("diffgno.sigma_min", "60").find("sigma_min"), std::string::npos);
  EXPECT_EQ(message("federation.rounds", "5"), "accepted");
}

TEST_F(ConfigTest, HashIgnoresOperationalKeys) {
  RunConfig a = PresetConfig(Preset::kDesk);
  RunConfig b = a;
  SetConfigValue(b, "run.out", "/elsewhere");
  SetConfigValue(b, "run.parallel_clients", "4");
  SetConfigValue(b, "run.timing", "true");
  EXPECT_EQ(ConfigHash(a), ConfigHash(b));
  SetConfigValue(b, "federation.seed", "1");
  EXPECT_NE(ConfigHash(a), ConfigHash(b));
  EXPECT_EQ(ConfigHash(a).size(), 16u);
  EXPECT_EQ(ConfigHash(a).find_first_not_of("0123456789abcdef"), std::string::npos);
}

TEST_F(ConfigTest, TargetRmseNone) {
  RunConfig c;
  SetConfigValue(c, "federation.target_rmse", "0.3");
  ASSERT_TRUE(c.fed.target_rmse.has_value());
  SetConfigValue(c, "federation.target_rmse", "none");
  EXPECT_FALSE(c.fed.target_rmse.has_value());
  EXPECT_EQ(GetConfigValue(c, "federation.target_rmse"), "none");
}

TEST_F(ConfigTest, LoadConfigFileMissing) {
  EXPECT_THROW(LoadConfigFile("/nonexistent/umeda.cfg"), ValidationError);
}

}  // namespace
}  // namespace umeda
