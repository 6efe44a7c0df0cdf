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

// End-to-end runs, sweeps and checkpoints.
//
// A run writes into its output directory:
//   config.cfg      fully expanded configuration
//   metrics.csv     one row per round (columns below, stable order)
//   summary.txt     key = value run summary
//   checkpoint.bin  global model + score network after the last round

#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "umeda/config.hpp"
#include "umeda/federation.hpp"

namespace umeda {

inline constexpr const char* kMetricsHeader =
    "round,participating_count,train_loss,rmse,top1,pose_err,mmd,sigma_sig,wallclock_ms";

// ---------------------------------------------------------------------------
// Checkpoints: "UMCK", version byte, u64 round, u32 record count, then per
// record u32 name length, name bytes and one binary matrix record.

inline constexpr char kCheckpointMagic[4] = {'U', 'M', 'C', 'K'};
inline constexpr uint8_t kCheckpointVersion = 1;

namespace internal {

inline std::vector<std::pair<std::string, const Matrix*>> CheckpointRecords(
    const GlobalModel& model, const ScoreNet& net) {
  std::vector<std::pair<std::string, const Matrix*>> r;
  r.emplace_back("theta_m", &model.theta_m.theta_m);
  for (const auto& [name, m] : model.theta_rest) r.emplace_back("rest/" + name, &m);
  r.emplace_back("score/w1", &net.w1);
  r.emplace_back("score/b1", &net.b1);
  r.emplace_back("score/w2", &net.w2);
  r.emplace_back("score/b2", &net.b2);
  return r;
}

}  // namespace internal

inline void SaveCheckpoint(const std::string& path, const GlobalModel& model,
                           const ScoreNet& net) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("cannot write checkpoint '" + tmp + "'");
    os.write(kCheckpointMagic, 4);
    os.put(static_cast<char>(kCheckpointVersion));
    internal::PutU64(os, model.round);
    const auto records = internal::CheckpointRecords(model, net);
    internal::PutU32(os, static_cast<uint32_t>(records.size()));
    for (const auto& [name, m] : records) {
      internal::PutU32(os, static_cast<uint32_t>(name.size()));
      os.write(name.data(), static_cast<std::streamsize>(name.size()));
      WriteMatrix(os, *m);
    }
    if (!os) throw Error("write failed for checkpoint '" + tmp + "'");
  }
  std::filesystem::rename(tmp, path);
}

// Reads a checkpoint whose records must match the shapes of `model_like` and
// `net_like`. On any error nothing is returned.
inline std::pair<GlobalModel, ScoreNet> LoadCheckpoint(const std::string& path,
                                                       const GlobalModel& model_like,
                                                       const ScoreNet& net_like) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ValidationError("cannot open checkpoint '" + path + "'");
  char magic[4];
  if (!is.read(magic, 4)) throw ValidationError("truncated checkpoint: missing magic");
  if (!std::equal(magic, magic + 4, kCheckpointMagic))
    throw ValidationError("'" + path + "' is not a checkpoint (bad magic)");
  const int version = is.get();
  if (version == std::char_traits<char>::eof())
    throw ValidationError("truncated checkpoint: missing version");
  if (version != kCheckpointVersion) {
    throw ValidationError(internal::StrCat("checkpoint version ", version,
                                           " does not match supported version ",
                                           int{kCheckpointVersion}));
  }
  GlobalModel model = model_like;
  ScoreNet net = net_like;
  model.round = internal::GetU64(is);
  const uint32_t count = internal::GetU32(is);

  std::map<std::string, Matrix*> slots;
  slots["theta_m"] = &model.theta_m.theta_m;
  for (auto& [name, m] : model.theta_rest) slots["rest/" + name] = &m;
  slots["score/w1"] = &net.w1;
  slots["score/b1"] = &net.b1;
  slots["score/w2"] = &net.w2;
  slots["score/b2"] = &net.b2;
  if (count != slots.size()) {
    throw ValidationError(internal::StrCat("checkpoint has ", count,
                                           " records, model expects ", slots.size()));
  }
  std::map<std::string, bool> seen;
  for (uint32_t i = 0; i < count; ++i) {
    const uint32_t len = internal::GetU32(is);
    if (len > 4096) throw ValidationError("corrupt checkpoint: record name too long");
    std::string name(len, '\0');
    if (!is.read(name.data(), len)) throw ValidationError("truncated checkpoint: record name");
    Matrix m = ReadMatrix(is);
    auto it = slots.find(name);
    if (it == slots.end())
      throw ValidationError("checkpoint record '" + name + "' is not part of the model");
    if (!m.SameShape(*it->second)) {
      throw ValidationError(internal::StrCat("shape mismatch for '", name, "': checkpoint ",
                                             m.rows(), "x", m.cols(), " vs model ",
                                             it->second->rows(), "x", it->second->cols()));
    }
    if (seen[name]) throw ValidationError("duplicate checkpoint record '" + name + "'");
    seen[name] = true;
    *it->second = std::move(m);
  }
  if (is.peek() != std::char_traits<char>::eof())
    throw ValidationError("trailing bytes after checkpoint records");
  GlobalBasis(model);
  return {std::move(model), std::move(net)};
}

// ---------------------------------------------------------------------------
// Runs.

struct RunSummary {
  std::string run_id;
  std::string config_hash;
  std::size_t rounds_completed = 0;
  double first_train_loss = 0.0;
  double final_train_loss = 0.0;
  Metrics final_metrics;
  double final_mmd = 0.0;
  std::optional<std::size_t> rounds_to_target;
  std::size_t dropped_clients = 0;
  std::string records_path;
  std::string checkpoint_path;
};

struct RunOptions {
  std::optional<std::string> resume_from;  // checkpoint path
  ClientTrainer trainer = DefaultTrainer;
  std::ostream* log = nullptr;             // per-round progress lines
};

namespace internal {

inline std::string CsvRow(const RoundRecord& r, bool timing) {
  auto f = [](double v) { return FormatDouble(v); };
  return StrCat(r.round, ",", r.participating.size() - r.dropped.size(), ",",
                f(r.train_loss_mean), ",", f(r.eval.rmse), ",", f(r.eval.top1), ",",
                f(r.eval.pose_err), ",", f(r.mmd), ",", f(r.sigma_sig), ",",
                timing ? r.wallclock_ms : 0);
}

inline void WriteText(const std::filesystem::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::trunc);
  if (!os) throw Error("cannot write '" + p.string() + "'");
  os << text;
  if (!os) throw Error("write failed for '" + p.string() + "'");
}

inline std::string SummaryText(const RunSummary& s) {
  auto f = [](double v) { return FormatDouble(v); };
  return StrCat("run_id = ", s.run_id, "\nconfig_hash = ", s.config_hash,
                "\nrounds_completed = ", s.rounds_completed,
                "\nfirst_train_loss = ", f(s.first_train_loss),
                "\nfinal_train_loss = ", f(s.final_train_loss),
                "\nfinal_rmse = ", f(s.final_metrics.rmse),
                "\nfinal_top1 = ", f(s.final_metrics.top1),
                "\nfinal_pose_err = ", f(s.final_metrics.pose_err),
                "\nfinal_mmd = ", f(s.final_mmd), "\nrounds_to_target = ",
                s.rounds_to_target ? std::to_string(*s.rounds_to_target) : std::string("none"),
                "\ndropped_clients = ", s.dropped_clients,
                "\nrecords = ", s.records_path, "\n");
}

inline void DumpFixtures(const Population& pop, const std::string& dir) {
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < pop.eval_set.size(); ++i) {
    const Observation& o = pop.eval_set[i];
    for (std::size_t m = 0; m < o.tokens.size(); ++m) {
      if (o.tokens[m].rows() == 0) continue;
      std::ofstream os(std::filesystem::path(dir) / StrCat("eval", i, "_mod", m, ".bin"),
                       std::ios::binary);
      WriteMatrix(os, o.tokens[m]);
    }
  }
}

}  // namespace internal

// Builds the population, runs the configured rounds (or stops early once
// eval RMSE reaches target_rmse), and writes the run directory.
inline RunSummary RunExperiment(const RunConfig& cfg, const RunOptions& opts = {}) {
  ValidateConfig(cfg);
  namespace fs = std::filesystem;
  const fs::path dir(cfg.out_dir);
  fs::create_directories(dir);
  internal::WriteText(dir / "config.cfg", SerializeConfig(cfg));

  const Population pop = BuildPopulation(cfg.fed, cfg.task);
  if (!cfg.dump_fixtures.empty()) internal::DumpFixtures(pop, cfg.dump_fixtures);
  GlobalModel model = InitGlobalModel(cfg.fed, cfg.task);
  ScoreNet net = InitScoreNet(cfg.fed);
  if (opts.resume_from) std::tie(model, net) = LoadCheckpoint(*opts.resume_from, model, net);

  RunSummary s;
  s.run_id = cfg.run_id;
  s.config_hash = ConfigHash(cfg);
  s.records_path = (dir / "metrics.csv").string();
  s.checkpoint_path = (dir / "checkpoint.bin").string();
  std::ofstream csv(s.records_path, std::ios::trunc);
  if (!csv) throw Error("cannot write '" + s.records_path + "'");
  csv << kMetricsHeader << "\n";

  RoundOptions ro{cfg.parallel_clients, opts.trainer};
  bool first = true;
  while (model.round < cfg.fed.rounds) {
    const RoundRecord rec = RunRound(model, pop, cfg.fed, net, ro);
    csv << internal::CsvRow(rec, cfg.timing) << "\n";
    csv.flush();
    if (first) s.first_train_loss = rec.train_loss_mean;
    first = false;
    ++s.rounds_completed;
    s.final_train_loss = rec.train_loss_mean;
    s.final_metrics = rec.eval;
    s.final_mmd = rec.mmd;
    s.dropped_clients += rec.dropped.size();
    if (opts.log) {
      *opts.log << "round " << rec.round << " loss " << rec.train_loss_mean << " rmse "
                << rec.eval.rmse << " top1 " << rec.eval.top1 << "\n";
      for (const auto& w : rec.warnings) *opts.log << "  warning: " << w << "\n";
    }
    if (cfg.checkpoint_every > 0 && model.round % cfg.checkpoint_every == 0)
      SaveCheckpoint(s.checkpoint_path, model, net);
    if (cfg.fed.target_rmse && rec.eval.rmse <= *cfg.fed.target_rmse) {
      s.rounds_to_target = model.round;
      break;
    }
  }
  if (!csv) throw Error("write failed for '" + s.records_path + "'");
  SaveCheckpoint(s.checkpoint_path, model, net);
  internal::WriteText(dir / "summary.txt", internal::SummaryText(s));
  return s;
}

// ---------------------------------------------------------------------------
// Sweeps.

// Short axis name -> config key.
inline const std::map<std::string, std::string>& SweepAxes() {
  static const std::map<std::string, std::string> axes = {
      {"kappa", "privacy.kappa"},       {"epsilon", "privacy.epsilon"},
      {"clip", "privacy.clip"},         {"tau", "sglt.tau"},
      {"beta", "sglt.beta"},            {"sample_rate", "federation.sample_rate"},
      {"rank", "federation.rank"},
  };
  return axes;
}

inline std::string SweepKey(const std::string& axis) {
  const auto& axes = SweepAxes();
  if (auto it = axes.find(axis); it != axes.end()) return it->second;
  for (const auto& [name, key] : axes)
    if (key == axis) return key;
  std::string known;
  for (const auto& [name, key] : axes) known += (known.empty() ? "" : ", ") + name;
  throw ValidationError("sweep axis '" + axis + "' is not sweepable (sweepable: " + known + ")");
}

inline constexpr const char* kSweepHeader =
    "axis,value,run_id,config_hash,rounds_completed,final_train_loss,rmse,top1,pose_err,mmd,"
    "rounds_to_target";

// One run per value with the base seed; every config is validated before the
// first run starts. Writes <out>/sweep_<axis>.csv.
inline std::vector<RunSummary> RunSweep(const RunConfig& base, const std::string& axis,
                                        const std::vector<std::string>& values,
                                        const RunOptions& opts = {}) {
  const std::string key = SweepKey(axis);
  if (values.empty()) throw ValidationError("sweep over '" + axis + "' has no values");
  std::vector<RunConfig> configs;
  for (const auto& v : values) {
    RunConfig c = base;
    SetConfigValue(c, key, v);
    c.run_id = base.run_id + "_" + axis + "_" + v;
    c.out_dir = (std::filesystem::path(base.out_dir) / c.run_id).string();
    c.sweep_axis.clear();
    c.sweep_values.clear();
    try {
      ValidateConfig(c);
    } catch (const ValidationError& e) {
      throw ValidationError("sweep value " + axis + " = " + v + ": " + e.what());
    }
    configs.push_back(std::move(c));
  }
  std::filesystem::create_directories(base.out_dir);
  const auto path = std::filesystem::path(base.out_dir) / ("sweep_" + axis + ".csv");
  std::ofstream csv(path, std::ios::trunc);
  if (!csv) throw Error("cannot write '" + path.string() + "'");
  csv << kSweepHeader << "\n";
  std::vector<RunSummary> out;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    RunSummary s = RunExperiment(configs[i], opts);
    auto f = [](double x) { return internal::FormatDouble(x); };
    csv << axis << "," << values[i] << "," << s.run_id << "," << s.config_hash << ","
        << s.rounds_completed << "," << f(s.final_train_loss) << "," << f(s.final_metrics.rmse)
        << "," << f(s.final_metrics.top1) << "," << f(s.final_metrics.pose_err) << ","
        << f(s.final_mmd) << ","
        << (s.rounds_to_target ? std::to_string(*s.rounds_to_target) : std::string("none"))
        << "\n";
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace umeda
