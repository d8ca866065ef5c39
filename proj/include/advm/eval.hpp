#pragma once

// Transferability evaluation: success rates, surrogate x target matrices,
// one-parameter ablation sweeps and their CSV / markdown reports.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "advm/attacks.hpp"
#include "advm/data.hpp"
#include "advm/ensemble.hpp"
#include "advm/error.hpp"
#include "advm/hash.hpp"
#include "advm/model.hpp"
#include "advm/parallel.hpp"
#include "advm/text.hpp"

namespace advm {

/// Fraction of inputs whose predicted class differs from the true label.
template <typename C>
double attack_success_rate(const C& target, const std::vector<Tensor>& adv, const std::vector<std::size_t>& labels,
                           std::size_t jobs = 1) {
  if (adv.size() != labels.size())
    throw Error(Errc::length_mismatch, std::to_string(adv.size()) + " inputs vs " + std::to_string(labels.size()) + " labels");
  if (adv.empty()) return 0.0;
  std::vector<char> wrong(adv.size(), 0);
  parallel_for(adv.size(), jobs, [&](std::size_t i) { wrong[i] = target.predict(adv[i]) != labels[i]; });
  std::size_t k = 0;
  for (char w : wrong) k += static_cast<std::size_t>(w);
  return static_cast<double>(k) / static_cast<double>(adv.size());
}

/// A named attack source: one model or an equal-weight logit ensemble.
struct Surrogate {
  std::string id;
  std::vector<const Model*> models;
};

struct Target {
  std::string id;
  const Model* model = nullptr;
};

/// Ensemble surrogate ids join member ids with '+'.
inline std::string ensemble_id(const std::vector<std::string>& ids) {
  std::string s;
  for (const auto& id : ids) s += (s.empty() ? "" : "+") + id;
  return s;
}

/// A cell is white-box when the target is one of the surrogate's members.
inline bool is_white_box(const std::string& surrogate, const std::string& target) {
  std::stringstream ss(surrogate);
  std::string part;
  while (std::getline(ss, part, '+'))
    if (part == target) return true;
  return false;
}

struct TransferMatrix {
  std::vector<std::string> surrogates;
  std::vector<std::string> targets;
  std::vector<std::vector<double>> rate;         // [surrogate][target]
  std::vector<std::vector<std::size_t>> counts;  // examples behind each rate
  std::size_t n_examples = 0;
  std::string config_hash;
  std::uint64_t seed = 0;
};

struct EvalOptions {
  std::size_t jobs = 1;
  /// Score each target only on examples it classifies correctly when clean.
  bool only_correct = false;
};

/// Attacks every example of `data` on the given oracle; example i uses
/// example_rng(cfg.seed, i) regardless of `jobs`.
template <GradientOracle O>
std::vector<AttackResult> craft_adversarials(O& oracle, const LabeledDataset& data, const AttackConfig& cfg,
                                             std::size_t jobs = 1) {
  std::vector<AttackResult> out(data.size());
  parallel_for(data.size(), jobs, [&](std::size_t i) {
    out[i] = run_attack(oracle, data.images[i], data.labels[i], cfg, example_rng(cfg.seed, i));
  });
  return out;
}

inline std::vector<Tensor> adversarial_images(std::vector<AttackResult>&& results) {
  std::vector<Tensor> adv;
  adv.reserve(results.size());
  for (auto& r : results) adv.push_back(std::move(r.adversarial));
  return adv;
}

/// Success rate of `target` on adversarial inputs, optionally restricted to
/// examples it gets right on the clean data. Returns (rate, count).
inline std::pair<double, std::size_t> score_target(const Model& target, const LabeledDataset& clean,
                                                   const std::vector<Tensor>& adv, const EvalOptions& opt) {
  if (!opt.only_correct) return {attack_success_rate(target, adv, clean.labels, opt.jobs), adv.size()};
  std::vector<Tensor> kept;
  std::vector<std::size_t> labels;
  for (std::size_t i = 0; i < clean.size(); ++i)
    if (target.predict(clean.images[i]) == clean.labels[i]) {
      kept.push_back(adv[i]);
      labels.push_back(clean.labels[i]);
    }
  return {attack_success_rate(target, kept, labels, opt.jobs), kept.size()};
}

inline TransferMatrix transfer_matrix(const std::vector<Surrogate>& surrogates, const std::vector<Target>& targets,
                                      const LabeledDataset& data, const AttackConfig& cfg,
                                      const EvalOptions& opt = {}) {
  if (surrogates.empty() || targets.empty()) throw Error(Errc::invalid_argument, "need surrogates and targets");
  TransferMatrix m;
  m.n_examples = data.size();
  m.config_hash = config_hash(cfg);
  m.seed = cfg.seed;
  for (const auto& t : targets) m.targets.push_back(t.id);
  for (const auto& s : surrogates) {
    const Ensemble oracle = Ensemble::equal_weights(s.models);
    const auto adv = adversarial_images(craft_adversarials(oracle, data, cfg, opt.jobs));
    m.surrogates.push_back(s.id);
    auto& row = m.rate.emplace_back();
    auto& cnt = m.counts.emplace_back();
    for (const auto& t : targets) {
      const auto [rate, n] = score_target(*t.model, data, adv, opt);
      row.push_back(rate);
      cnt.push_back(n);
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Ablations

enum class AblationParam { sampling_method, eta, samples, mu, iters, eps };

inline AblationParam parse_ablation_param(const std::string& s) {
  static const std::map<std::string, AblationParam> names{
      {"sampling_method", AblationParam::sampling_method}, {"sampling", AblationParam::sampling_method},
      {"eta", AblationParam::eta},       {"samples", AblationParam::samples},
      {"mu", AblationParam::mu},         {"iters", AblationParam::iters},
      {"eps", AblationParam::eps}};
  const auto it = names.find(s);
  if (it == names.end()) throw Error(Errc::unknown_parameter, "cannot sweep '" + s + "'");
  return it->second;
}

inline const char* ablation_param_name(AblationParam p) {
  switch (p) {
    case AblationParam::sampling_method: return "sampling_method";
    case AblationParam::eta: return "eta";
    case AblationParam::samples: return "samples";
    case AblationParam::mu: return "mu";
    case AblationParam::iters: return "iters";
    case AblationParam::eps: return "eps";
  }
  return "?";
}

/// Returns `base` with one parameter set from its textual grid value.
inline AttackConfig with_parameter(AttackConfig cfg, AblationParam p, const std::string& value) {
  switch (p) {
    case AblationParam::sampling_method: cfg.sampling.method = parse_sampling(value); break;
    case AblationParam::eta: cfg.sampling.eta = parse_real(value); break;
    case AblationParam::samples: cfg.sampling.count = static_cast<std::size_t>(std::stoull(value)); break;
    case AblationParam::mu: cfg.mu = parse_real(value); break;
    case AblationParam::iters: cfg.iters = static_cast<std::size_t>(std::stoull(value)); break;
    case AblationParam::eps: cfg.eps = parse_real(value); break;
  }
  return cfg;
}

struct AblationResult {
  std::string parameter;
  std::vector<std::string> grid;       // sorted
  std::vector<TransferMatrix> points;  // one per grid value
  std::vector<std::string> targets;

  /// curve[t][g]: success rate of target t at grid point g.
  std::vector<std::vector<double>> curves() const {
    std::vector<std::vector<double>> c(targets.size(), std::vector<double>(points.size()));
    for (std::size_t g = 0; g < points.size(); ++g)
      for (std::size_t t = 0; t < targets.size(); ++t) c[t][g] = points[g].rate.front()[t];
    return c;
  }

  /// Mean over targets at each grid point, skipping white-box targets.
  std::vector<double> mean_transfer() const {
    std::vector<double> out;
    for (const auto& p : points) {
      double sum = 0.0;
      std::size_t n = 0;
      for (std::size_t t = 0; t < p.targets.size(); ++t)
        if (!is_white_box(p.surrogates.front(), p.targets[t])) {
          sum += p.rate.front()[t];
          ++n;
        }
      out.push_back(n ? sum / static_cast<double>(n) : 0.0);
    }
    return out;
  }
};

/// Numeric grids sort ascending; method names sort lexicographically.
inline std::vector<std::string> sorted_grid(AblationParam p, std::vector<std::string> grid) {
  if (p == AblationParam::sampling_method) {
    std::sort(grid.begin(), grid.end());
  } else {
    std::stable_sort(grid.begin(), grid.end(),
                     [](const std::string& a, const std::string& b) { return parse_real(a) < parse_real(b); });
  }
  return grid;
}

inline AblationResult ablation_sweep(AblationParam p, const std::vector<std::string>& grid, const AttackConfig& base,
                                     const Surrogate& surrogate, const std::vector<Target>& targets,
                                     const LabeledDataset& data, const EvalOptions& opt = {}) {
  if (grid.empty()) throw Error(Errc::invalid_argument, "empty ablation grid");
  AblationResult res;
  res.parameter = ablation_param_name(p);
  res.grid = sorted_grid(p, grid);
  for (const auto& t : targets) res.targets.push_back(t.id);
  for (const auto& value : res.grid)
    res.points.push_back(transfer_matrix({surrogate}, targets, data, with_parameter(base, p, value), opt));
  return res;
}

inline AblationResult ablation_sweep(const std::string& parameter, const std::vector<std::string>& grid,
                                     const AttackConfig& base, const Surrogate& surrogate,
                                     const std::vector<Target>& targets, const LabeledDataset& data,
                                     const EvalOptions& opt = {}) {
  return ablation_sweep(parse_ablation_param(parameter), grid, base, surrogate, targets, data, opt);
}

// ---------------------------------------------------------------------------
// Reports

enum class ReportFormat { csv, markdown };

inline ReportFormat parse_report_format(const std::string& s) {
  if (s == "csv") return ReportFormat::csv;
  if (s == "markdown" || s == "md") return ReportFormat::markdown;
  throw Error(Errc::invalid_argument, "unknown report format '" + s + "'");
}

inline std::string percent(double rate) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", 100.0 * rate);
  return buf;
}

inline std::string emit_report(const TransferMatrix& m, ReportFormat fmt) {
  std::string out;
  if (fmt == ReportFormat::csv) {
    out = "surrogate,target,rate,n,config_hash\n";
    for (std::size_t s = 0; s < m.surrogates.size(); ++s)
      for (std::size_t t = 0; t < m.targets.size(); ++t)
        out += m.surrogates[s] + "," + m.targets[t] + "," + exact_decimal(m.rate[s][t]) + "," +
               std::to_string(m.counts.empty() ? m.n_examples : m.counts[s][t]) + "," + m.config_hash + "\n";
    return out;
  }
  out = "| Surrogate |";
  for (const auto& t : m.targets) out += " " + t + " |";
  out += "\n|---|";
  for (std::size_t t = 0; t < m.targets.size(); ++t) out += "---|";
  out += "\n";
  for (std::size_t s = 0; s < m.surrogates.size(); ++s) {
    out += "| " + m.surrogates[s] + " |";
    for (std::size_t t = 0; t < m.targets.size(); ++t)
      out += " " + percent(m.rate[s][t]) + (is_white_box(m.surrogates[s], m.targets[t]) ? "*" : "") + " |";
    out += "\n";
  }
  out += "\n\\* white-box (target is a surrogate member). config " + m.config_hash + "\n";
  return out;
}

inline std::string emit_report(const AblationResult& a, ReportFormat fmt) {
  std::string out;
  if (fmt == ReportFormat::csv) {
    out = "parameter,value,target,rate,n,config_hash\n";
    for (std::size_t g = 0; g < a.points.size(); ++g) {
      const auto& p = a.points[g];
      for (std::size_t t = 0; t < p.targets.size(); ++t)
        out += a.parameter + "," + a.grid[g] + "," + p.targets[t] + "," + exact_decimal(p.rate[0][t]) + "," +
               std::to_string(p.counts[0][t]) + "," + p.config_hash + "\n";
    }
    return out;
  }
  out = "| " + a.parameter + " |";
  for (const auto& t : a.targets) out += " " + t + " |";
  out += "\n|---|";
  for (std::size_t t = 0; t < a.targets.size(); ++t) out += "---|";
  out += "\n";
  for (std::size_t g = 0; g < a.points.size(); ++g) {
    const auto& p = a.points[g];
    out += "| " + a.grid[g] + " |";
    for (std::size_t t = 0; t < p.targets.size(); ++t)
      out += " " + percent(p.rate[0][t]) + (is_white_box(p.surrogates[0], p.targets[t]) ? "*" : "") + " |";
    out += "\n";
  }
  return out;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace detail

/// Inverse of emit_report(matrix, csv). Surrogate and target order follow
/// first appearance.
inline TransferMatrix parse_matrix_csv(const std::string& text) {
  std::stringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "surrogate,target,rate,n,config_hash")
    throw Error(Errc::corrupt_file, "missing transfer-matrix CSV header");
  TransferMatrix m;
  std::map<std::pair<std::string, std::string>, std::pair<double, std::size_t>> cells;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c = detail::split_csv_line(line);
    if (c.size() != 5) throw Error(Errc::corrupt_file, "bad CSV row: " + line);
    if (std::find(m.surrogates.begin(), m.surrogates.end(), c[0]) == m.surrogates.end()) m.surrogates.push_back(c[0]);
    if (std::find(m.targets.begin(), m.targets.end(), c[1]) == m.targets.end()) m.targets.push_back(c[1]);
    const std::size_t n = std::stoull(c[3]);
    cells[{c[0], c[1]}] = {std::stod(c[2]), n};
    m.n_examples = std::max(m.n_examples, n);
    m.config_hash = c[4];
  }
  for (const auto& s : m.surrogates) {
    auto& row = m.rate.emplace_back();
    auto& cnt = m.counts.emplace_back();
    for (const auto& t : m.targets) {
      const auto it = cells.find({s, t});
      if (it == cells.end()) throw Error(Errc::corrupt_file, "missing cell " + s + "," + t);
      row.push_back(it->second.first);
      cnt.push_back(it->second.second);
    }
  }
  return m;
}

}  // namespace advm
