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

// Run configuration: presets, a sectioned key = value text format,
// environment overrides and a canonical form for hashing.
//
//   # comment
//   [federation]
//   rounds = 50
//   sample_rate = 0.4
//
// A key may also be written fully qualified ("federation.rounds = 50")
// outside any section. Environment variables UMEDA_<SECTION>_<KEY>
// (upper case) override the file.

#pragma once

#include <cctype>
#include <cerrno>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "umeda/federation.hpp"

namespace umeda {

enum class Preset { kFull, kDesk };

struct RunConfig {
  Preset preset = Preset::kFull;
  FederationConfig fed;
  TaskConfig task;
  std::string sweep_axis;
  std::vector<std::string> sweep_values;
  std::string out_dir = "out";
  std::string run_id = "run";
  std::size_t parallel_clients = 1;
  bool timing = false;
  std::size_t checkpoint_every = 0;  // 0 = only at the end
  std::string dump_fixtures;         // directory; empty = off
};

inline RunConfig PresetConfig(Preset p) {
  RunConfig c;
  c.preset = p;
  if (p == Preset::kFull) {
    c.task.model_dim = 256;
    return c;
  }
  c.fed.rounds = 50;
  c.fed.clients = 20;
  c.fed.local_steps = 5;
  c.fed.batch = 8;
  c.fed.lr = 1e-2;
  c.fed.rank = 4;
  c.fed.dsm_lr = 1e-2;
  c.fed.score_hidden = 64;
  c.fed.t_embed_dim = 16;
  c.task.model_dim = 32;
  return c;
}

namespace internal {

inline std::string Trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

inline std::vector<std::string> SplitList(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, ',')) {
    cur = Trim(cur);
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

inline std::string FormatDouble(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline double ParseDouble(const std::string& key, const std::string& v) {
  const std::string t = Trim(v);
  char* end = nullptr;
  const double d = std::strtod(t.c_str(), &end);
  if (t.empty() || end != t.c_str() + t.size())
    throw ValidationError(StrCat(key, " = '", v, "' is not a number"));
  return d;
}

inline uint64_t ParseU64(const std::string& key, const std::string& v) {
  const std::string t = Trim(v);
  if (t.empty() || t[0] == '-' || t[0] == '+')
    throw ValidationError(StrCat(key, " = '", v, "' is not a non-negative integer"));
  char* end = nullptr;
  errno = 0;
  const unsigned long long u = std::strtoull(t.c_str(), &end, 10);
  if (errno != 0 || end != t.c_str() + t.size())
    throw ValidationError(StrCat(key, " = '", v, "' is not a non-negative integer"));
  return u;
}

inline bool ParseBool(const std::string& key, const std::string& v) {
  const std::string t = Trim(v);
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw ValidationError(StrCat(key, " = '", v, "' is not a boolean"));
}

struct KeySpec {
  std::string name;  // section.key
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
  bool semantic = true;  // part of the config hash
};

template <typename Field>
KeySpec SizeKey(std::string name, Field f) {
  return {name,
          [name, f](RunConfig& c, const std::string& v) { f(c) = ParseU64(name, v); },
          [f](const RunConfig& c) { return std::to_string(f(const_cast<RunConfig&>(c))); }};
}

template <typename Field>
KeySpec RealKey(std::string name, Field f) {
  return {name,
          [name, f](RunConfig& c, const std::string& v) { f(c) = ParseDouble(name, v); },
          [f](const RunConfig& c) { return FormatDouble(f(const_cast<RunConfig&>(c))); }};
}

template <typename Field>
KeySpec BoolKey(std::string name, Field f) {
  return {name,
          [name, f](RunConfig& c, const std::string& v) { f(c) = ParseBool(name, v); },
          [f](const RunConfig& c) { return f(const_cast<RunConfig&>(c)) ? "true" : "false"; }};
}

inline const std::vector<KeySpec>& Keys() {
  static const std::vector<KeySpec> keys = [] {
    std::vector<KeySpec> k;
    // federation
    k.push_back(SizeKey("federation.rounds", [](RunConfig& c) -> auto& { return c.fed.rounds; }));
    k.push_back(SizeKey("federation.clients", [](RunConfig& c) -> auto& { return c.fed.clients; }));
    k.push_back(RealKey("federation.sample_rate",
                        [](RunConfig& c) -> auto& { return c.fed.sample_rate; }));
    k.push_back(SizeKey("federation.local_steps",
                        [](RunConfig& c) -> auto& { return c.fed.local_steps; }));
    k.push_back(SizeKey("federation.batch", [](RunConfig& c) -> auto& { return c.fed.batch; }));
    k.push_back(RealKey("federation.lr", [](RunConfig& c) -> auto& { return c.fed.lr; }));
    k.push_back(RealKey("federation.weight_decay",
                        [](RunConfig& c) -> auto& { return c.fed.weight_decay; }));
    k.push_back(RealKey("federation.server_step",
                        [](RunConfig& c) -> auto& { return c.fed.server_step; }));
    k.push_back(SizeKey("federation.rank", [](RunConfig& c) -> auto& { return c.fed.rank; }));
    k.push_back(SizeKey("federation.seed", [](RunConfig& c) -> auto& { return c.fed.seed; }));
    k.push_back(RealKey("federation.dirichlet_alpha",
                        [](RunConfig& c) -> auto& { return c.fed.dirichlet_alpha; }));
    k.push_back({"federation.type_mix",
                 [](RunConfig& c, const std::string& v) {
                   const auto parts = SplitList(v);
                   if (parts.size() != 3)
                     throw ValidationError(
                         StrCat("federation.type_mix = '", v, "' needs three values"));
                   for (int i = 0; i < 3; ++i)
                     c.fed.type_mix[i] = ParseDouble("federation.type_mix", parts[i]);
                 },
                 [](const RunConfig& c) {
                   return StrCat(FormatDouble(c.fed.type_mix[0]), ",",
                                 FormatDouble(c.fed.type_mix[1]), ",",
                                 FormatDouble(c.fed.type_mix[2]));
                 }});
    k.push_back({"federation.target_rmse",
                 [](RunConfig& c, const std::string& v) {
                   if (Trim(v) == "none" || Trim(v).empty()) {
                     c.fed.target_rmse.reset();
                   } else {
                     c.fed.target_rmse = ParseDouble("federation.target_rmse", v);
                   }
                 },
                 [](const RunConfig& c) {
                   return c.fed.target_rmse ? FormatDouble(*c.fed.target_rmse)
                                            : std::string("none");
                 }});
    k.push_back(BoolKey("federation.weighted_fedavg",
                        [](RunConfig& c) -> auto& { return c.fed.weighted_fedavg; }));
    // privacy
    k.push_back(RealKey("privacy.epsilon", [](RunConfig& c) -> auto& { return c.fed.budget.epsilon; }));
    k.push_back(RealKey("privacy.delta", [](RunConfig& c) -> auto& { return c.fed.budget.delta; }));
    k.push_back(RealKey("privacy.clip", [](RunConfig& c) -> auto& { return c.fed.budget.clip_bound; }));
    k.push_back(RealKey("privacy.kappa", [](RunConfig& c) -> auto& { return c.fed.budget.kappa; }));
    k.push_back(BoolKey("privacy.research_mode",
                        [](RunConfig& c) -> auto& { return c.fed.budget.research_mode; }));
    // diffgno
    k.push_back(RealKey("diffgno.sigma_min", [](RunConfig& c) -> auto& { return c.fed.sched.sigma_min; }));
    k.push_back(RealKey("diffgno.sigma_max", [](RunConfig& c) -> auto& { return c.fed.sched.sigma_max; }));
    k.push_back(SizeKey("diffgno.n_rev", [](RunConfig& c) -> auto& { return c.fed.n_rev; }));
    k.push_back(SizeKey("diffgno.dsm_steps", [](RunConfig& c) -> auto& { return c.fed.dsm_steps; }));
    k.push_back(RealKey("diffgno.dsm_lr", [](RunConfig& c) -> auto& { return c.fed.dsm_lr; }));
    k.push_back({"diffgno.dsm_weighting",
                 [](RunConfig& c, const std::string& v) {
                   const std::string t = Trim(v);
                   if (t == "sigma2") {
                     c.fed.dsm_weighting = DsmWeighting::kSigmaSquared;
                   } else if (t == "none") {
                     c.fed.dsm_weighting = DsmWeighting::kNone;
                   } else {
                     throw ValidationError(StrCat("diffgno.dsm_weighting = '", v,
                                                  "' must be sigma2 or none"));
                   }
                 },
                 [](const RunConfig& c) {
                   return std::string(c.fed.dsm_weighting == DsmWeighting::kNone ? "none"
                                                                                  : "sigma2");
                 }});
    k.push_back(SizeKey("diffgno.score_hidden",
                        [](RunConfig& c) -> auto& { return c.fed.score_hidden; }));
    k.push_back(SizeKey("diffgno.t_embed_dim",
                        [](RunConfig& c) -> auto& { return c.fed.t_embed_dim; }));
    k.push_back(SizeKey("diffgno.consensus_samples",
                        [](RunConfig& c) -> auto& { return c.fed.consensus_samples; }));
    // sglt
    k.push_back({"sglt.gate",
                 [](RunConfig& c, const std::string& v) {
                   const std::string t = Trim(v);
                   if (t == "soft") {
                     c.task.gate.mode = GateMode::kSoft;
                   } else if (t == "hard") {
                     c.task.gate.mode = GateMode::kHard;
                   } else {
                     throw ValidationError(StrCat("sglt.gate = '", v, "' must be soft or hard"));
                   }
                 },
                 [](const RunConfig& c) {
                   return std::string(c.task.gate.mode == GateMode::kSoft ? "soft" : "hard");
                 }});
    k.push_back(RealKey("sglt.tau", [](RunConfig& c) -> auto& { return c.task.gate.tau; }));
    k.push_back(RealKey("sglt.beta", [](RunConfig& c) -> auto& { return c.task.gate.beta; }));
    k.push_back(RealKey("sglt.attn_eps", [](RunConfig& c) -> auto& { return c.task.attn_eps; }));
    k.push_back(SizeKey("sglt.model_dim", [](RunConfig& c) -> auto& { return c.task.model_dim; }));
    // task
    k.push_back(SizeKey("task.latent_dim", [](RunConfig& c) -> auto& { return c.task.world.latent_dim; }));
    k.push_back(SizeKey("task.rank_true", [](RunConfig& c) -> auto& { return c.task.world.rank_true; }));
    k.push_back(SizeKey("task.num_classes", [](RunConfig& c) -> auto& { return c.task.world.num_classes; }));
    k.push_back(SizeKey("task.target_dim", [](RunConfig& c) -> auto& { return c.task.world.target_dim; }));
    k.push_back({"task.modality_dims",
                 [](RunConfig& c, const std::string& v) {
                   const auto parts = SplitList(v);
                   if (parts.empty())
                     throw ValidationError("task.modality_dims needs at least one value");
                   c.task.world.modality_dims.clear();
                   for (const auto& p : parts)
                     c.task.world.modality_dims.push_back(ParseU64("task.modality_dims", p));
                 },
                 [](const RunConfig& c) {
                   std::string s;
                   for (std::size_t i = 0; i < c.task.world.modality_dims.size(); ++i)
                     s += (i ? "," : "") + std::to_string(c.task.world.modality_dims[i]);
                   return s;
                 }});
    k.push_back(RealKey("task.noise_scale", [](RunConfig& c) -> auto& { return c.task.world.noise_scale; }));
    k.push_back(SizeKey("task.seq_len_a", [](RunConfig& c) -> auto& { return c.task.profiles.seq_len_a; }));
    k.push_back(SizeKey("task.seq_len_b", [](RunConfig& c) -> auto& { return c.task.profiles.seq_len_b; }));
    k.push_back(SizeKey("task.seq_len_c", [](RunConfig& c) -> auto& { return c.task.profiles.seq_len_c; }));
    k.push_back(RealKey("task.missing_rate",
                        [](RunConfig& c) -> auto& { return c.task.profiles.missing_rate; }));
    k.push_back(SizeKey("task.samples_per_client",
                        [](RunConfig& c) -> auto& { return c.task.samples_per_client; }));
    k.push_back(SizeKey("task.eval_samples", [](RunConfig& c) -> auto& { return c.task.eval_samples; }));
    // ablation
    k.push_back(BoolKey("ablation.no_sglt_gate",
                        [](RunConfig& c) -> auto& { return c.fed.ablation.no_sglt_gate; }));
    k.push_back(BoolKey("ablation.no_diffgno",
                        [](RunConfig& c) -> auto& { return c.fed.ablation.no_diffgno; }));
    k.push_back(BoolKey("ablation.no_spdp", [](RunConfig& c) -> auto& { return c.fed.ablation.no_spdp; }));
    k.push_back(BoolKey("ablation.no_spdp_clip",
                        [](RunConfig& c) -> auto& { return c.fed.ablation.no_spdp_clip; }));
    k.push_back(BoolKey("ablation.isotropic_dp",
                        [](RunConfig& c) -> auto& { return c.fed.ablation.isotropic_dp; }));
    k.push_back(BoolKey("ablation.hard_gate",
                        [](RunConfig& c) -> auto& { return c.fed.ablation.hard_gate; }));
    // sweep
    k.push_back({"sweep.axis", [](RunConfig& c, const std::string& v) { c.sweep_axis = Trim(v); },
                 [](const RunConfig& c) { return c.sweep_axis; }});
    k.push_back({"sweep.values",
                 [](RunConfig& c, const std::string& v) { c.sweep_values = SplitList(v); },
                 [](const RunConfig& c) {
                   std::string s;
                   for (std::size_t i = 0; i < c.sweep_values.size(); ++i)
                     s += (i ? "," : "") + c.sweep_values[i];
                   return s;
                 }});
    // run (output plumbing, excluded from the hash)
    k.push_back({"run.out", [](RunConfig& c, const std::string& v) { c.out_dir = Trim(v); },
                 [](const RunConfig& c) { return c.out_dir; }, false});
    k.push_back({"run.run_id", [](RunConfig& c, const std::string& v) { c.run_id = Trim(v); },
                 [](const RunConfig& c) { return c.run_id; }, false});
    KeySpec par = SizeKey("run.parallel_clients",
                          [](RunConfig& c) -> auto& { return c.parallel_clients; });
    par.semantic = false;
    k.push_back(par);
    KeySpec timing = BoolKey("run.timing", [](RunConfig& c) -> auto& { return c.timing; });
    timing.semantic = false;
    k.push_back(timing);
    KeySpec every = SizeKey("run.checkpoint_every",
                            [](RunConfig& c) -> auto& { return c.checkpoint_every; });
    every.semantic = false;
    k.push_back(every);
    k.push_back({"run.dump_fixtures",
                 [](RunConfig& c, const std::string& v) { c.dump_fixtures = Trim(v); },
                 [](const RunConfig& c) { return c.dump_fixtures; }, false});
    return k;
  }();
  return keys;
}

inline const KeySpec* FindKey(const std::string& name) {
  for (const auto& k : Keys())
    if (k.name == name) return &k;
  return nullptr;
}

}  // namespace internal

// Every documented key, in registry order.
inline std::vector<std::string> ConfigKeys() {
  std::vector<std::string> out;
  for (const auto& k : internal::Keys()) out.push_back(k.name);
  return out;
}

inline void SetConfigValue(RunConfig& c, const std::string& key, const std::string& value) {
  const internal::KeySpec* spec = internal::FindKey(key);
  if (!spec) throw ValidationError(internal::StrCat("unknown config key '", key, "'"));
  spec->set(c, value);
}

inline std::string GetConfigValue(const RunConfig& c, const std::string& key) {
  const internal::KeySpec* spec = internal::FindKey(key);
  if (!spec) throw ValidationError(internal::StrCat("unknown config key '", key, "'"));
  return spec->get(c);
}

// Ordered (key, value) pairs from config text. "run.preset" is reported like
// any other key; BuildConfig handles it separately.
inline std::vector<std::pair<std::string, std::string>> ParseConfigText(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = internal::Trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ValidationError(internal::StrCat("config line ", lineno, ": malformed section"));
      section = internal::Trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ValidationError(internal::StrCat("config line ", lineno, ": expected key = value"));
    std::string key = internal::Trim(line.substr(0, eq));
    const std::string value = internal::Trim(line.substr(eq + 1));
    if (key.find('.') == std::string::npos) {
      if (section.empty())
        throw ValidationError(internal::StrCat("config line ", lineno, ": key '", key,
                                               "' outside a section"));
      key = section + "." + key;
    }
    out.emplace_back(key, value);
  }
  return out;
}

inline std::optional<Preset> ParsePreset(const std::string& v) {
  const std::string t = internal::Trim(v);
  if (t == "full") return Preset::kFull;
  if (t == "desk") return Preset::kDesk;
  return std::nullopt;
}

inline std::string EnvName(const std::string& key) {
  std::string s = "UMEDA_";
  for (char ch : key) s += ch == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  return s;
}

// Applies environment overrides for every documented key.
inline void ApplyEnvironment(RunConfig& c) {
  for (const auto& k : internal::Keys()) {
    if (const char* v = std::getenv(EnvName(k.name).c_str())) k.set(c, v);
  }
}

// Throws ValidationError naming the field, the value and the constraint.
inline void ValidateConfig(const RunConfig& c) {
  auto fail = [](const std::string& key, const std::string& value, const std::string& rule) {
    throw ValidationError(internal::StrCat(key, " = ", value, " violates ", rule));
  };
  auto v = [&](const char* key) { return GetConfigValue(c, key); };
  const FederationConfig& f = c.fed;
  if (f.rounds < 1) fail("federation.rounds", v("federation.rounds"), "rounds >= 1");
  if (f.clients < 1) fail("federation.clients", v("federation.clients"), "clients >= 1");
  if (!(f.sample_rate > 0.0 && f.sample_rate <= 1.0))
    fail("federation.sample_rate", v("federation.sample_rate"), "sample_rate ∈ (0,1]");
  if (f.batch < 1) fail("federation.batch", v("federation.batch"), "batch >= 1");
  if (!(f.lr > 0.0)) fail("federation.lr", v("federation.lr"), "lr > 0");
  if (!(f.weight_decay >= 0.0))
    fail("federation.weight_decay", v("federation.weight_decay"), "weight_decay >= 0");
  if (!(f.server_step > 0.0))
    fail("federation.server_step", v("federation.server_step"), "server_step > 0");
  if (f.rank < 1 || f.rank > c.task.model_dim)
    fail("federation.rank", v("federation.rank"), "1 <= rank <= sglt.model_dim");
  if (!(f.dirichlet_alpha > 0.0))
    fail("federation.dirichlet_alpha", v("federation.dirichlet_alpha"), "dirichlet_alpha > 0");
  const double mix = f.type_mix[0] + f.type_mix[1] + f.type_mix[2];
  if (std::abs(mix - 1.0) > 1e-9 || f.type_mix[0] < 0 || f.type_mix[1] < 0 || f.type_mix[2] < 0)
    fail("federation.type_mix", v("federation.type_mix"), "non-negative and summing to 1");
  if (f.target_rmse && !(*f.target_rmse > 0.0))
    fail("federation.target_rmse", v("federation.target_rmse"), "target_rmse > 0");
  f.budget.Validate();
  f.sched.Validate();
  if (f.n_rev < 1) fail("diffgno.n_rev", v("diffgno.n_rev"), "n_rev >= 1");
  if (!(f.dsm_lr > 0.0)) fail("diffgno.dsm_lr", v("diffgno.dsm_lr"), "dsm_lr > 0");
  if (f.score_hidden < 1) fail("diffgno.score_hidden", v("diffgno.score_hidden"), "score_hidden >= 1");
  if (f.t_embed_dim < 2 || f.t_embed_dim % 2 != 0)
    fail("diffgno.t_embed_dim", v("diffgno.t_embed_dim"), "even t_embed_dim >= 2");
  if (f.consensus_samples < 1)
    fail("diffgno.consensus_samples", v("diffgno.consensus_samples"), "consensus_samples >= 1");
  c.task.gate.Validate();
  if (!(c.task.attn_eps > 0.0)) fail("sglt.attn_eps", v("sglt.attn_eps"), "attn_eps > 0");
  if (c.task.model_dim < 1) fail("sglt.model_dim", v("sglt.model_dim"), "model_dim >= 1");
  c.task.world.Validate();
  const auto& p = c.task.profiles;
  if (p.seq_len_a < 1 || p.seq_len_b < 1 || p.seq_len_c < 1)
    fail("task.seq_len_*", internal::StrCat(p.seq_len_a, ",", p.seq_len_b, ",", p.seq_len_c),
         "sequence lengths >= 1");
  if (!(p.missing_rate >= 0.0 && p.missing_rate < 1.0))
    fail("task.missing_rate", v("task.missing_rate"), "missing_rate ∈ [0,1)");
  if (c.task.samples_per_client < 1)
    fail("task.samples_per_client", v("task.samples_per_client"), "samples_per_client >= 1");
  if (c.parallel_clients < 1)
    fail("run.parallel_clients", v("run.parallel_clients"), "parallel_clients >= 1");
  if (c.run_id.empty()) fail("run.run_id", "''", "non-empty run_id");
}

struct ConfigSources {
  std::optional<std::string> text;       // config file contents
  std::optional<Preset> preset;          // --desk / --full
  bool use_environment = true;
};

// Preset defaults, then the file, then the environment. The preset comes
// from the explicit argument, else a "run.preset" line, else UMEDA_RUN_PRESET,
// else full.
inline RunConfig BuildConfig(const ConfigSources& src) {
  std::vector<std::pair<std::string, std::string>> entries;
  if (src.text) entries = ParseConfigText(*src.text);
  std::optional<Preset> preset = src.preset;
  auto preset_from = [](const std::string& where, const std::string& v) {
    auto p = ParsePreset(v);
    if (!p) throw ValidationError(where + " = '" + v + "' must be full or desk");
    return *p;
  };
  for (const auto& [k, v] : entries)
    if (k == "run.preset" && !preset) preset = preset_from("run.preset", v);
  if (!preset && src.use_environment)
    if (const char* e = std::getenv("UMEDA_RUN_PRESET")) preset = preset_from("UMEDA_RUN_PRESET", e);
  RunConfig c = PresetConfig(preset.value_or(Preset::kFull));
  for (const auto& [k, v] : entries)
    if (k != "run.preset") SetConfigValue(c, k, v);
  if (src.use_environment) ApplyEnvironment(c);
  return c;
}

inline RunConfig LoadConfigFile(const std::string& path, std::optional<Preset> preset = {},
                                bool use_environment = true) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return BuildConfig({ss.str(), preset, use_environment});
}

// Sorted key = value lines for every key, semantic or not.
inline std::string SerializeConfig(const RunConfig& c) {
  std::map<std::string, std::string> sorted;
  for (const auto& k : internal::Keys()) sorted[k.name] = k.get(c);
  std::string out = internal::StrCat("run.preset = ", c.preset == Preset::kDesk ? "desk" : "full",
                                     "\n");
  for (const auto& [k, v] : sorted) out += k + " = " + v + "\n";
  return out;
}

// Sorted key=value form of the semantic keys only.
inline std::string CanonicalConfig(const RunConfig& c) {
  std::map<std::string, std::string> sorted;
  for (const auto& k : internal::Keys())
    if (k.semantic) sorted[k.name] = k.get(c);
  std::string out;
  for (const auto& [k, v] : sorted) out += k + "=" + v + "\n";
  return out;
}

// FNV-1a 64 of the canonical form, as 16 hex digits.
inline std::string ConfigHash(const RunConfig& c) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : CanonicalConfig(c)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace umeda
