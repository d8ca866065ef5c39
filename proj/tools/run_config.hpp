#pragma once

// Run configuration shared by every subcommand. Settings come from three
// layers: built-in defaults, a flat key=value config file, then command-line
// flags. Each layer is applied through apply_setting, so a key means the same
// thing everywhere.

#include <cstdint>
#include <cstdlib>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "advm/attacks.hpp"
#include "advm/data.hpp"
#include "advm/eval.hpp"
#include "advm/hash.hpp"
#include "advm/model.hpp"
#include "advm/text.hpp"
#include "advm/train.hpp"

namespace advm::cli {

struct RunConfig {
  std::string command;

  std::string data;       // dataset spec, see parse_dataset_spec
  double holdout = 0.2;   // tail fraction reserved for attacks and evaluation
  std::size_t limit = 0;  // attack a random subset of this size; 0 = all held-out examples

  std::vector<std::string> surrogates;
  std::vector<std::string> targets;

  ModelSpec model;
  TrainOptions train;
  AttackConfig attack;
  EvalOptions eval;

  std::string param;
  std::vector<std::string> grid;
  ReportFormat format = ReportFormat::csv;

  std::string adv_dir;
  std::string in;
  std::string out;

  std::uint64_t seed = 0;
};

/// ADVM_SEED if set and numeric, else 0.
inline std::uint64_t default_seed() {
  const char* env = std::getenv("ADVM_SEED");
  if (!env || !*env) return 0;
  try {
    std::size_t used = 0;
    const auto v = std::stoull(env, &used);
    if (used == std::string(env).size()) return v;
  } catch (const std::logic_error&) {
  }
  throw Error(Errc::invalid_argument, std::string("ADVM_SEED is not an integer: '") + env + "'");
}

inline RunConfig default_config() {
  RunConfig c;
  c.seed = default_seed();
  return c;
}

namespace detail {

inline std::uint64_t to_u64(const std::string& v) {
  try {
    std::size_t used = 0;
    const auto n = std::stoull(v, &used);
    if (used == v.size() && v.find('-') == std::string::npos) return n;
  } catch (const std::logic_error&) {
  }
  throw Error(Errc::invalid_argument, "not a non-negative integer: '" + v + "'");
}

inline std::size_t to_size(const std::string& v) { return static_cast<std::size_t>(to_u64(v)); }

inline bool to_bool(const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw Error(Errc::invalid_argument, "not a boolean: '" + v + "'");
}

inline std::vector<std::size_t> to_sizes(const std::string& v) {
  std::vector<std::size_t> out;
  for (const auto& p : split_list(v)) out.push_back(to_size(trim(p)));
  return out;
}

inline std::vector<std::string> to_list(const std::string& v) {
  std::vector<std::string> out;
  for (const auto& p : split_list(v)) out.push_back(trim(p));
  return out;
}

using Setter = std::function<void(RunConfig&, const std::string&)>;

inline const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"data", [](RunConfig& c, const std::string& v) { c.data = v; }},
      {"holdout",
       [](RunConfig& c, const std::string& v) {
         c.holdout = parse_real(v);
         if (!(c.holdout >= 0.0 && c.holdout < 1.0)) throw Error(Errc::invalid_argument, "holdout must be in [0,1)");
       }},
      {"limit", [](RunConfig& c, const std::string& v) { c.limit = to_size(v); }},
      {"surrogate", [](RunConfig& c, const std::string& v) { c.surrogates = to_list(v); }},
      {"targets", [](RunConfig& c, const std::string& v) { c.targets = to_list(v); }},

      {"arch", [](RunConfig& c, const std::string& v) { c.model.arch = parse_arch(v); }},
      {"hidden", [](RunConfig& c, const std::string& v) { c.model.hidden = to_sizes(v); }},
      {"conv_channels", [](RunConfig& c, const std::string& v) { c.model.conv_channels = to_sizes(v); }},
      {"kernel", [](RunConfig& c, const std::string& v) { c.model.kernel = to_size(v); }},
      {"epochs", [](RunConfig& c, const std::string& v) { c.train.epochs = to_size(v); }},
      {"lr", [](RunConfig& c, const std::string& v) { c.train.lr = parse_real(v); }},
      {"batch", [](RunConfig& c, const std::string& v) { c.train.batch = to_size(v); }},
      {"momentum", [](RunConfig& c, const std::string& v) { c.train.momentum = parse_real(v); }},

      {"attack", [](RunConfig& c, const std::string& v) { c.attack.variant = parse_variant(v); }},
      {"eps", [](RunConfig& c, const std::string& v) { c.attack.eps = parse_real(v); }},
      {"iters", [](RunConfig& c, const std::string& v) { c.attack.iters = to_size(v); }},
      {"mu", [](RunConfig& c, const std::string& v) { c.attack.mu = parse_real(v); }},
      {"eta", [](RunConfig& c, const std::string& v) { c.attack.sampling.eta = parse_real(v); }},
      {"samples", [](RunConfig& c, const std::string& v) { c.attack.sampling.count = to_size(v); }},
      {"sampling", [](RunConfig& c, const std::string& v) { c.attack.sampling.method = parse_sampling(v); }},
      {"normalize_sample_dir",
       [](RunConfig& c, const std::string& v) { c.attack.normalize_sample_dir = to_bool(v); }},
      {"transforms",
       [](RunConfig& c, const std::string& v) {
         auto& t = c.attack.transforms;
         t.use_dim = t.use_tim = t.use_sim = false;
         for (const auto& name : to_list(v)) {
           if (name == "dim") t.use_dim = true;
           else if (name == "tim") t.use_tim = true;
           else if (name == "sim") t.use_sim = true;
           else if (name == "dts") t.use_dim = t.use_tim = t.use_sim = true;
           else if (name != "none") throw Error(Errc::invalid_argument, "unknown transform '" + name + "'");
         }
       }},
      {"dim.prob", [](RunConfig& c, const std::string& v) { c.attack.transforms.dim.prob = parse_real(v); }},
      {"dim.resize_low", [](RunConfig& c, const std::string& v) { c.attack.transforms.dim.resize_low = to_size(v); }},
      {"dim.pad_to", [](RunConfig& c, const std::string& v) { c.attack.transforms.dim.pad_to = to_size(v); }},
      {"tim.kernel_size", [](RunConfig& c, const std::string& v) { c.attack.transforms.tim.kernel_size = to_size(v); }},
      {"tim.sigma", [](RunConfig& c, const std::string& v) { c.attack.transforms.tim.sigma = parse_real(v); }},
      {"sim.copies", [](RunConfig& c, const std::string& v) { c.attack.transforms.sim.copies = to_size(v); }},

      {"jobs",
       [](RunConfig& c, const std::string& v) {
         c.eval.jobs = to_size(v);
         if (c.eval.jobs == 0) throw Error(Errc::invalid_argument, "jobs must be >= 1");
       }},
      {"only_correct", [](RunConfig& c, const std::string& v) { c.eval.only_correct = to_bool(v); }},
      {"param", [](RunConfig& c, const std::string& v) { c.param = v; }},
      {"grid", [](RunConfig& c, const std::string& v) { c.grid = to_list(v); }},
      {"format", [](RunConfig& c, const std::string& v) { c.format = parse_report_format(v); }},
      {"adv", [](RunConfig& c, const std::string& v) { c.adv_dir = v; }},
      {"in", [](RunConfig& c, const std::string& v) { c.in = v; }},
      {"out", [](RunConfig& c, const std::string& v) { c.out = v; }},
      {"seed", [](RunConfig& c, const std::string& v) { c.seed = to_u64(v); }},
  };
  return table;
}

}  // namespace detail

/// Accepted keys, in the spelling used by config files.
inline std::vector<std::string> setting_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, _] : detail::setters()) keys.push_back(k);
  return keys;
}

/// Config-file key for a command-line flag: "--dim-prob" -> "dim.prob",
/// "--conv-channels" -> "conv_channels".
inline std::string key_for_flag(std::string flag) {
  while (!flag.empty() && flag.front() == '-') flag.erase(flag.begin());
  for (const char* group : {"dim-", "tim-", "sim-"})
    if (flag.rfind(group, 0) == 0) flag[3] = '.';
  for (auto& ch : flag)
    if (ch == '-') ch = '_';
  return flag;
}

inline void apply_setting(RunConfig& c, const std::string& key, const std::string& value) {
  const auto& table = detail::setters();
  const auto it = table.find(key);
  if (it == table.end()) throw Error(Errc::unknown_parameter, "unknown setting '" + key + "'");
  it->second(c, value);
}

/// Flat "key = value" lines; '#' starts a comment; blank lines are ignored.
inline std::vector<std::pair<std::string, std::string>> parse_config_text(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(Errc::invalid_argument, "config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw Error(Errc::invalid_argument, "config line " + std::to_string(lineno) + ": empty key");
    out.emplace_back(key, trim(line.substr(eq + 1)));
  }
  return out;
}

inline void apply_config_text(RunConfig& c, const std::string& text) {
  for (const auto& [k, v] : parse_config_text(text)) apply_setting(c, k, v);
}

/// The attack configuration with the run seed folded in.
inline AttackConfig attack_config(const RunConfig& c) {
  AttackConfig a = c.attack;
  a.seed = c.seed;
  return a;
}

/// Canonical text of every setting that affects outputs of `command`.
inline std::string canonical_run_config(const RunConfig& c) {
  std::string s = "command=" + c.command + "\n";
  auto kv = [&](const std::string& k, const std::string& v) { s += k + "=" + v + "\n"; };
  auto join = [](const std::vector<std::string>& v) {
    std::string out;
    for (const auto& e : v) out += (out.empty() ? "" : ",") + e;
    return out;
  };
  auto join_sizes = [](const std::vector<std::size_t>& v) {
    std::string out;
    for (auto e : v) out += (out.empty() ? "" : ",") + std::to_string(e);
    return out;
  };
  kv("seed", std::to_string(c.seed));
  kv("data", c.data);
  kv("holdout", exact_decimal(c.holdout));
  if (c.command == "train") {
    kv("arch", arch_name(c.model.arch));
    kv("hidden", join_sizes(c.model.hidden));
    kv("conv_channels", join_sizes(c.model.conv_channels));
    kv("kernel", std::to_string(c.model.kernel));
    kv("epochs", std::to_string(c.train.epochs));
    kv("lr", exact_decimal(c.train.lr));
    kv("batch", std::to_string(c.train.batch));
    kv("momentum", exact_decimal(c.train.momentum));
    return s;
  }
  kv("limit", std::to_string(c.limit));
  kv("surrogate", join(c.surrogates));
  if (c.command != "attack") {
    kv("targets", join(c.targets));
    kv("only_correct", c.eval.only_correct ? "1" : "0");
  }
  if (c.command == "ablate") {
    kv("param", c.param);
    kv("grid", join(c.grid));
  }
  s += canonical_config(attack_config(c));
  return s;
}

inline std::string run_config_hash(const RunConfig& c) { return hex64(fnv1a64(canonical_run_config(c))); }

// ---------------------------------------------------------------------------
// Dataset specs
//
//   synthetic:CLASSESxPER_CLASSxSIDE[xCHANNELS][:key=value,...]
//       keys: noise, contrast, jitter, amp, seed
//   idx:IMAGES,LABELS   (or just IMAGES,LABELS)

struct DatasetSpec {
  bool synthetic = false;
  SyntheticOptions options;
  std::string images;
  std::string labels;
};

inline DatasetSpec parse_dataset_spec(const std::string& text) {
  DatasetSpec d;
  if (text.rfind("synthetic:", 0) == 0) {
    d.synthetic = true;
    std::string rest = text.substr(10);
    std::string opts;
    if (const auto colon = rest.find(':'); colon != std::string::npos) {
      opts = rest.substr(colon + 1);
      rest = rest.substr(0, colon);
    }
    const auto dims = split_list(rest, 'x');
    if (dims.size() != 3 && dims.size() != 4)
      throw Error(Errc::invalid_argument, "synthetic spec needs CLASSESxPER_CLASSxSIDE[xCHANNELS]: '" + text + "'");
    auto& o = d.options;
    o.classes = detail::to_size(dims[0]);
    o.per_class = detail::to_size(dims[1]);
    const std::size_t side = detail::to_size(dims[2]);
    o.shape = Shape{side, side, dims.size() == 4 ? detail::to_size(dims[3]) : 1};
    o.noise_sigma = 0.1;
    for (const auto& item : split_list(opts)) {
      const auto eq = item.find('=');
      if (eq == std::string::npos) throw Error(Errc::invalid_argument, "synthetic option needs key=value: " + item);
      const std::string k = item.substr(0, eq), v = item.substr(eq + 1);
      if (k == "noise") o.noise_sigma = parse_real(v);
      else if (k == "contrast") o.contrast = parse_real(v);
      else if (k == "jitter") o.jitter = parse_real(v);
      else if (k == "amp") o.amp_spread = parse_real(v);
      else if (k == "seed") o.seed = detail::to_u64(v);
      else throw Error(Errc::unknown_parameter, "unknown synthetic option '" + k + "'");
    }
    return d;
  }
  std::string rest = text.rfind("idx:", 0) == 0 ? text.substr(4) : text;
  const auto parts = split_list(rest);
  if (parts.size() != 2) throw Error(Errc::invalid_argument, "dataset must be synthetic:... or IMAGES,LABELS: '" + text + "'");
  d.images = parts[0];
  d.labels = parts[1];
  return d;
}

inline LabeledDataset load_dataset(const std::string& spec) {
  if (spec.empty()) throw Error(Errc::invalid_argument, "no dataset given (--data)");
  const DatasetSpec d = parse_dataset_spec(spec);
  LabeledDataset out = d.synthetic ? generate_synthetic(d.options) : load_idx(d.images, d.labels);
  out.validate();
  if (out.empty()) throw Error(Errc::empty_dataset, "dataset '" + spec + "' is empty");
  return out;
}

/// Index where the held-out tail starts.
inline std::size_t holdout_start(std::size_t n, double holdout) {
  const auto tail = static_cast<std::size_t>(std::floor(static_cast<double>(n) * holdout));
  return n - tail;
}

}  // namespace advm::cli
