// advm: train models, craft adversarial examples, and measure transfer.
//
//   advm train  --arch smallcnn --data synthetic:4x200x28 --out cnn.json
//   advm attack --attack emi-fgsm --surrogate cnn.json --data ... --adv adv/
//   advm eval   --adv adv/ --targets cnn.json,mlp.json --out matrix.csv
//   advm ablate --param eta --grid 1,3,7 --surrogate cnn.json --targets ...
//   advm report --in matrix.csv

#include <CLI11.hpp>

#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "advm/eval.hpp"
#include "advm/model_io.hpp"
#include "advm/tensor_io.hpp"
#include "advm/train.hpp"
#include "run_config.hpp"

namespace fs = std::filesystem;
using namespace advm;
using namespace advm::cli;

namespace {

constexpr const char* kManifest = "manifest.json";

std::string tmp_suffix() { return ".tmp-" + std::to_string(::getpid()); }

/// Writes `bytes` next to `path` and renames it into place.
void write_atomic(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + tmp_suffix();
  try {
    write_file_bytes(tmp, bytes);
    fs::rename(tmp, path);
  } catch (...) {
    std::error_code ec;
    fs::remove(tmp, ec);
    throw;
  }
}

void emit(const std::string& out, const std::string& text) {
  if (out.empty() || out == "-") std::cout << text << std::flush;
  else write_atomic(out, text);
}

/// "id=path" or a plain path whose stem becomes the id.
std::pair<std::string, std::string> model_ref(const std::string& ref) {
  if (const auto eq = ref.find('='); eq != std::string::npos) return {ref.substr(0, eq), ref.substr(eq + 1)};
  return {fs::path(ref).stem().string(), ref};
}

struct LoadedModels {
  std::vector<std::string> ids;
  std::vector<std::unique_ptr<Model>> models;
};

LoadedModels load_models(const std::vector<std::string>& refs, const char* what) {
  if (refs.empty()) throw Error(Errc::invalid_argument, std::string("no ") + what + " models given");
  LoadedModels out;
  for (const auto& ref : refs) {
    const auto [id, path] = model_ref(ref);
    out.ids.push_back(id);
    out.models.push_back(std::make_unique<Model>(load_model(path)));
  }
  return out;
}

Surrogate surrogate_of(const LoadedModels& m) {
  Surrogate s{ensemble_id(m.ids), {}};
  for (const auto& p : m.models) s.models.push_back(p.get());
  return s;
}

std::vector<Target> targets_of(const LoadedModels& m) {
  std::vector<Target> t;
  for (std::size_t i = 0; i < m.ids.size(); ++i) t.push_back({m.ids[i], m.models[i].get()});
  return t;
}

/// Held-out examples to attack: the dataset tail, optionally subsampled.
LabeledDataset attack_set(const RunConfig& c) {
  const LabeledDataset all = load_dataset(c.data);
  LabeledDataset tail = slice(all, holdout_start(all.size(), c.holdout), all.size());
  if (tail.empty()) throw Error(Errc::empty_dataset, "held-out split is empty; raise --holdout");
  if (c.limit > 0 && c.limit < tail.size()) tail = subsample(tail, c.limit, c.seed);
  return tail;
}

// ---------------------------------------------------------------------------

int run_train(RunConfig& c) {
  if (c.out.empty()) throw Error(Errc::invalid_argument, "train needs --out");
  const LabeledDataset all = load_dataset(c.data);
  const std::size_t cut = holdout_start(all.size(), c.holdout);
  const LabeledDataset train = slice(all, 0, cut), test = slice(all, cut, all.size());

  ModelSpec spec = c.model;
  spec.input = all.image_shape();
  spec.classes = all.class_count;
  spec.seed = c.seed;
  TrainOptions opt = c.train;
  opt.seed = c.seed;
  const TrainResult r = train_sgd(spec, train, opt);

  const nlohmann::json metrics = {{"train_acc", r.train_accuracy},
                                  {"test_acc", test.empty() ? 0.0 : accuracy(r.model, test)},
                                  {"seed", c.seed},
                                  {"config_hash", run_config_hash(c)}};
  nlohmann::json j = model_to_json(r.model);
  j["meta"] = metrics;
  write_atomic(c.out, j.dump(1) + "\n");
  std::cout << metrics.dump() << "\n";
  return 0;
}

int run_attack(RunConfig& c) {
  if (c.adv_dir.empty()) throw Error(Errc::invalid_argument, "attack needs --adv DIR");
  const LoadedModels sur = load_models(c.surrogates, "surrogate");
  const Surrogate s = surrogate_of(sur);
  const LabeledDataset data = attack_set(c);
  const AttackConfig cfg = attack_config(c);
  const Ensemble oracle = Ensemble::equal_weights(s.models);
  const auto results = craft_adversarials(oracle, data, cfg, c.eval.jobs);

  const fs::path dir = c.adv_dir;
  const fs::path tmp = dir.string() + tmp_suffix();
  std::error_code ec;
  fs::remove_all(tmp, ec);
  try {
    fs::create_directories(tmp);
    nlohmann::json examples = nlohmann::json::array();
    std::size_t wb = 0;
    for (std::size_t i = 0; i < results.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "%05zu", i);
      const std::string adv = std::string("adv_") + name + ".emtn", clean = std::string("clean_") + name + ".emtn";
      save_tensor(tmp / adv, results[i].adversarial);
      save_tensor(tmp / clean, data.images[i]);
      wb += results[i].white_box_success;
      examples.push_back({{"adv", adv}, {"clean", clean}, {"label", data.labels[i]},
                          {"white_box_success", results[i].white_box_success}});
    }
    const nlohmann::json manifest = {
        {"format", "advm-adversarial-set"},
        {"version", 1},
        {"surrogate", s.id},
        {"class_count", data.class_count},
        {"attack_config_hash", config_hash(cfg)},
        {"config_hash", run_config_hash(c)},
        {"config", canonical_run_config(c)},
        {"seed", c.seed},
        {"examples", examples}};
    write_file_bytes(tmp / kManifest, manifest.dump(1) + "\n");
    if (fs::exists(dir)) fs::remove_all(dir);
    if (dir.has_parent_path()) fs::create_directories(dir.parent_path());
    fs::rename(tmp, dir);
    std::cout << "{\"examples\":" << results.size() << ",\"white_box_rate\":"
              << exact_decimal(results.empty() ? 0.0 : static_cast<double>(wb) / static_cast<double>(results.size()))
              << ",\"config_hash\":\"" << run_config_hash(c) << "\"}\n";
  } catch (...) {
    fs::remove_all(tmp, ec);
    throw;
  }
  return 0;
}

int run_eval(RunConfig& c) {
  if (c.adv_dir.empty()) throw Error(Errc::invalid_argument, "eval needs --adv DIR");
  const fs::path dir = c.adv_dir;
  if (!fs::exists(dir / kManifest)) throw Error(Errc::empty_dataset, "no adversarial examples in " + dir.string());
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_file_bytes(dir / kManifest));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::corrupt_file, std::string("manifest: ") + e.what());
  }
  LabeledDataset clean;
  std::vector<Tensor> adv;
  try {
    if (manifest.at("format") != "advm-adversarial-set") throw Error(Errc::corrupt_file, "not an adversarial set");
    clean.class_count = manifest.at("class_count").get<std::size_t>();
    for (const auto& e : manifest.at("examples")) {
      adv.push_back(load_tensor(dir / e.at("adv").get<std::string>()));
      clean.images.push_back(load_tensor(dir / e.at("clean").get<std::string>()));
      clean.labels.push_back(e.at("label").get<std::size_t>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::corrupt_file, std::string("manifest: ") + e.what());
  }
  if (adv.empty()) throw Error(Errc::empty_dataset, "no adversarial examples in " + dir.string());

  const LoadedModels tgt = load_models(c.targets, "target");
  TransferMatrix m;
  m.surrogates = {manifest.at("surrogate").get<std::string>()};
  m.targets = tgt.ids;
  m.n_examples = adv.size();
  m.config_hash = manifest.at("attack_config_hash").get<std::string>();
  m.seed = manifest.value("seed", std::uint64_t{0});
  auto& row = m.rate.emplace_back();
  auto& cnt = m.counts.emplace_back();
  for (const auto& model : tgt.models) {
    const auto [rate, n] = score_target(*model, clean, adv, c.eval);
    row.push_back(rate);
    cnt.push_back(n);
  }
  emit(c.out, emit_report(m, c.format));
  return 0;
}

int run_ablate(RunConfig& c) {
  if (c.param.empty()) throw Error(Errc::invalid_argument, "ablate needs --param");
  const LoadedModels sur = load_models(c.surrogates, "surrogate");
  const LoadedModels tgt = load_models(c.targets, "target");
  const LabeledDataset data = attack_set(c);
  const auto res = ablation_sweep(c.param, c.grid, attack_config(c), surrogate_of(sur), targets_of(tgt), data, c.eval);
  emit(c.out, emit_report(res, c.format));
  return 0;
}

int run_report(RunConfig& c) {
  if (c.in.empty()) throw Error(Errc::invalid_argument, "report needs --in CSV");
  emit(c.out, emit_report(parse_matrix_csv(read_file_bytes(c.in)), c.format));
  return 0;
}

// ---------------------------------------------------------------------------
// Command line

struct Flag {
  const char* name;
  const char* help;
  bool is_switch = false;
};

const std::vector<Flag> kDataFlags = {
    {"--data", "dataset: synthetic:CxNxS[xCH][:noise=..,contrast=..,jitter=..,amp=..,seed=..] or IMAGES,LABELS"},
    {"--holdout", "fraction of the dataset tail held out from training (default 0.2)"},
};

const std::vector<Flag> kAttackFlags = {
    {"--attack", "fgsm, i-fgsm, mi-fgsm, ni-fgsm, pi-fgsm, emi-fgsm, eni-fgsm, eri-fgsm"},
    {"--eps", "L-inf budget, e.g. 16/255"},
    {"--iters", "iterations T"},
    {"--mu", "momentum decay"},
    {"--eta", "sampling radius"},
    {"--samples", "samples per step N"},
    {"--sampling", "linear, uniform or gaussian"},
    {"--normalize-sample-dir", "sample along alpha * d / mean|d| instead of the raw direction", true},
    {"--transforms", "comma list of dim, tim, sim (or dts, none)"},
    {"--dim-prob", "DIM probability"},
    {"--dim-resize-low", "DIM smallest resize side"},
    {"--dim-pad-to", "DIM padded side"},
    {"--tim-kernel-size", "TIM kernel size (odd)"},
    {"--tim-sigma", "TIM Gaussian sigma"},
    {"--sim-copies", "SIM scale copies"},
    {"--limit", "attack a random subset of this many held-out examples"},
    {"--surrogate", "surrogate model files, comma separated (several form an ensemble)"},
};

const std::vector<Flag> kEvalFlags = {
    {"--targets", "target model files, comma separated; ids are file stems or id=path"},
    {"--only-correct", "score each target only on examples it classifies correctly", true},
    {"--format", "csv or markdown"},
};

const std::vector<Flag> kTrainFlags = {
    {"--arch", "logistic, mlp or smallcnn"},
    {"--hidden", "mlp hidden widths, comma separated"},
    {"--conv-channels", "smallcnn channels per conv stage"},
    {"--kernel", "smallcnn kernel size"},
    {"--epochs", "training epochs"},
    {"--lr", "learning rate"},
    {"--batch", "minibatch size"},
    {"--momentum", "SGD momentum"},
};

struct Command {
  CLI::App* app = nullptr;
  std::map<std::string, std::string> values;  // flag -> text
  std::map<std::string, CLI::Option*> options;
  std::string config_path;
};

void add_flags(Command& cmd, const std::vector<Flag>& flags) {
  for (const auto& f : flags) {
    if (f.is_switch) {
      cmd.options[f.name] = cmd.app->add_flag(f.name, f.help);
    } else {
      cmd.options[f.name] = cmd.app->add_option(f.name, cmd.values[f.name], f.help);
    }
  }
}

void add_common(Command& cmd) {
  cmd.app->add_option("--config", cmd.config_path, "flat key = value config file");
  add_flags(cmd, {{"--seed", "global seed (default $ADVM_SEED or 0)"},
                  {"--jobs", "worker threads; results do not depend on it"},
                  {"--out", "output file (default stdout)"}});
}

RunConfig resolve(const std::string& name, Command& cmd) {
  RunConfig c = default_config();
  c.command = name;
  if (name == "report") c.format = ReportFormat::markdown;
  if (!cmd.config_path.empty()) apply_config_text(c, read_file_bytes(cmd.config_path));
  for (const auto& [flag, opt] : cmd.options) {
    if (opt->count() == 0) continue;
    const auto it = cmd.values.find(flag);
    apply_setting(c, key_for_flag(flag), it == cmd.values.end() ? "1" : it->second);
  }
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Transfer-based adversarial attacks on small image classifiers"};
  app.require_subcommand(1);
  std::map<std::string, Command> commands;
  auto sub = [&](const std::string& name, const std::string& help) -> Command& {
    Command& cmd = commands[name];
    cmd.app = app.add_subcommand(name, help);
    add_common(cmd);
    return cmd;
  };

  Command& train = sub("train", "train a classifier and write a model file");
  add_flags(train, kDataFlags);
  add_flags(train, kTrainFlags);

  Command& attack = sub("attack", "craft adversarial examples into a directory");
  add_flags(attack, kDataFlags);
  add_flags(attack, kAttackFlags);
  add_flags(attack, {{"--adv", "output directory"}});

  Command& eval = sub("eval", "score target models on an adversarial directory");
  add_flags(eval, kEvalFlags);
  add_flags(eval, {{"--adv", "adversarial directory written by attack"}});

  Command& ablate = sub("ablate", "sweep one attack parameter");
  add_flags(ablate, kDataFlags);
  add_flags(ablate, kAttackFlags);
  add_flags(ablate, kEvalFlags);
  add_flags(ablate, {{"--param", "sampling, eta, samples, mu, iters or eps"}, {"--grid", "comma separated values"}});

  Command& report = sub("report", "render a transfer-matrix CSV");
  add_flags(report, {{"--in", "CSV written by eval"}, {"--format", "markdown (default) or csv"}});

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    for (auto& [name, cmd] : commands) {
      if (!cmd.app->parsed()) continue;
      RunConfig c = resolve(name, cmd);
      if (name == "train") return run_train(c);
      if (name == "attack") return run_attack(c);
      if (name == "eval") return run_eval(c);
      if (name == "ablate") return run_ablate(c);
      return run_report(c);
    }
  } catch (const Error& e) {
    std::cerr << "advm: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "advm: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
