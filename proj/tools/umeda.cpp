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

// umeda: run, sweep and check.
//
// Exit codes: 0 success, 1 invalid configuration or arguments, 2 runtime
// failure (including failed checks).

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <unistd.h>

#include "CLI11.hpp"
#include "umeda/checks.hpp"
#include "umeda/config.hpp"
#include "umeda/runner.hpp"

namespace {

constexpr int kExitInvalid = 1;
constexpr int kExitRuntime = 2;

// Options shared by run and sweep.
struct CommonArgs {
  std::string config_path;
  bool desk = false;
  bool full = false;
  std::optional<uint64_t> seed;
  std::string ablation;
  std::optional<std::size_t> parallel_clients;
  std::optional<std::string> out;
  std::vector<std::string> overrides;
  bool quiet = false;
};

void AddCommon(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("--config", a.config_path, "Config file (key = value, [section] headers)")
      ->check(CLI::ExistingFile);
  auto* desk = cmd->add_flag("--desk", a.desk, "Start from the desk-scale preset");
  cmd->add_flag("--full", a.full, "Start from the full-scale preset")->excludes(desk);
  cmd->add_option("--seed", a.seed, "Override federation.seed");
  cmd->add_option("--ablation", a.ablation,
                  "Comma list of ablations: no_sglt_gate, no_diffgno, no_spdp, no_spdp_clip, "
                  "isotropic_dp, hard_gate");
  cmd->add_option("--parallel-clients", a.parallel_clients, "Client worker threads");
  cmd->add_option("--out", a.out, "Output directory");
  cmd->add_option("--set", a.overrides, "Extra key=value override (repeatable)");
  cmd->add_flag("--quiet", a.quiet, "No per-round progress on stderr");
}

umeda::RunConfig ResolveConfig(const CommonArgs& a) {
  std::optional<umeda::Preset> preset;
  if (a.desk) preset = umeda::Preset::kDesk;
  if (a.full) preset = umeda::Preset::kFull;
  umeda::RunConfig c = a.config_path.empty()
                           ? umeda::BuildConfig({std::nullopt, preset, true})
                           : umeda::LoadConfigFile(a.config_path, preset);
  if (a.seed) umeda::SetConfigValue(c, "federation.seed", std::to_string(*a.seed));
  for (const std::string& flag : umeda::internal::SplitList(a.ablation))
    umeda::SetConfigValue(c, "ablation." + flag, "true");
  if (a.parallel_clients)
    umeda::SetConfigValue(c, "run.parallel_clients", std::to_string(*a.parallel_clients));
  if (a.out) umeda::SetConfigValue(c, "run.out", *a.out);
  for (const std::string& kv : a.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw umeda::ValidationError("--set expects key=value, got '" + kv + "'");
    umeda::SetConfigValue(c, umeda::internal::Trim(kv.substr(0, eq)), kv.substr(eq + 1));
  }
  umeda::ValidateConfig(c);
  return c;
}

void PrintSummary(const umeda::RunSummary& s) {
  std::printf("%s", umeda::internal::SummaryText(s).c_str());
}

int Run(const CommonArgs& a, const std::optional<std::string>& resume) {
  const umeda::RunConfig cfg = ResolveConfig(a);
  umeda::RunOptions opts;
  opts.resume_from = resume;
  if (!a.quiet) opts.log = &std::cerr;
  PrintSummary(umeda::RunExperiment(cfg, opts));
  return 0;
}

int Sweep(const CommonArgs& a, std::string axis, std::vector<std::string> values) {
  const umeda::RunConfig cfg = ResolveConfig(a);
  if (axis.empty()) axis = cfg.sweep_axis;
  if (values.empty()) values = cfg.sweep_values;
  if (axis.empty()) throw umeda::ValidationError("sweep needs --axis or sweep.axis");
  umeda::RunOptions opts;
  if (!a.quiet) opts.log = &std::cerr;
  const auto runs = umeda::RunSweep(cfg, axis, values, opts);
  for (const auto& s : runs) PrintSummary(s);
  std::printf("sweep table: %s\n",
              (std::filesystem::path(cfg.out_dir) / ("sweep_" + axis + ".csv")).c_str());
  return 0;
}

int CheckAll(bool all, const std::vector<int>& only) {
  namespace fs = std::filesystem;
  const fs::path work = fs::temp_directory_path() / ("umeda_check_" + std::to_string(::getpid()));
  fs::create_directories(work);
  int failures = 0, ran = 0;
  for (const umeda::Check& c : umeda::AcceptanceChecks(work)) {
    const bool selected =
        only.empty() ? (all || !c.slow) : std::find(only.begin(), only.end(), c.id) != only.end();
    if (!selected) continue;
    const umeda::CheckReport r = umeda::RunCheck(c);
    std::printf("%s\n", umeda::FormatReport(r).c_str());
    std::fflush(stdout);
    failures += !r.passed;
    ++ran;
  }
  fs::remove_all(work);
  std::printf("%d/%d passed\n", ran - failures, ran);
  return failures == 0 ? 0 : kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"UMEDA federated multimodal training"};
  app.require_subcommand(1);

  CommonArgs run_args;
  std::optional<std::string> resume;
  auto* run = app.add_subcommand("run", "Run one federated experiment");
  AddCommon(run, run_args);
  run->add_option("--resume", resume, "Resume from a checkpoint file")->check(CLI::ExistingFile);

  CommonArgs sweep_args;
  std::string axis;
  std::vector<std::string> values;
  auto* sweep = app.add_subcommand("sweep", "Run one experiment per value of an axis");
  AddCommon(sweep, sweep_args);
  sweep->add_option("--axis", axis,
                    "kappa, epsilon, clip, tau, beta, sample_rate or rank");
  sweep->add_option("--values", values, "Comma-separated values")->delimiter(',');

  bool all = false;
  std::vector<int> only;
  auto* check = app.add_subcommand("check", "Run the invariant suite");
  check->add_flag("--all", all, "Include the desk federation runs");
  check->add_option("--only", only, "Run only these check ids")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInvalid;
  }

  try {
    if (*run) return Run(run_args, resume);
    if (*sweep) return Sweep(sweep_args, axis, values);
    return CheckAll(all, only);
  } catch (const umeda::ValidationError& e) {
    std::fprintf(stderr, "invalid configuration: %s\n", e.what());
    return kExitInvalid;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
}
