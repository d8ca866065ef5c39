#pragma once

// Model files are UTF-8 JSON:
//
//   {
//     "format": "advm-model",
//     "version": 1,
//     "spec": {"arch": "smallcnn", "input": [h, w, c], "classes": 10,
//              "hidden": [...], "conv_channels": [...], "kernel": 3,
//              "activation": "relu", "seed": 1},
//     "tensors": [
//       {"name": "layer0.weight", "shape": [...], "data": [...]},
//       {"name": "layer0.bias",   "shape": [...], "blob": "m0.layer0.bias.emtn"},
//       ...
//     ]
//   }
//
// Tensors appear in layer order, weight before bias. "data" holds decimal
// numbers in shortest round-trip form; "blob" names an EMTN1 file relative to
// the model file. The writer always emits "data".

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "advm/error.hpp"
#include "advm/model.hpp"
#include "advm/tensor_io.hpp"

namespace advm {

inline constexpr int kModelFileVersion = 1;

inline nlohmann::json spec_to_json(const ModelSpec& s) {
  return {{"arch", arch_name(s.arch)},
          {"input", {s.input.height, s.input.width, s.input.channels}},
          {"classes", s.classes},
          {"hidden", s.hidden},
          {"conv_channels", s.conv_channels},
          {"kernel", s.kernel},
          {"activation", s.activation},
          {"seed", s.seed}};
}

inline ModelSpec spec_from_json(const nlohmann::json& j) {
  ModelSpec s;
  s.arch = parse_arch(j.at("arch").get<std::string>());
  const auto in = j.at("input").get<std::vector<std::size_t>>();
  if (in.size() != 3) throw Error(Errc::corrupt_file, "input shape must have three entries");
  s.input = Shape{in[0], in[1], in[2]};
  s.classes = j.at("classes").get<std::size_t>();
  s.hidden = j.at("hidden").get<std::vector<std::size_t>>();
  s.conv_channels = j.at("conv_channels").get<std::vector<std::size_t>>();
  s.kernel = j.at("kernel").get<std::size_t>();
  s.activation = j.at("activation").get<std::string>();
  if (s.activation != "relu") throw Error(Errc::corrupt_file, "unsupported activation " + s.activation);
  s.seed = j.at("seed").get<std::uint64_t>();
  return s;
}

inline nlohmann::json model_to_json(const Model& m) {
  nlohmann::json tensors = nlohmann::json::array();
  const auto& layers = m.layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    std::visit(
        [&](const auto& l) {
          using L = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<L, DenseLayer>) {
            tensors.push_back({{"name", "layer" + std::to_string(i) + ".weight"}, {"shape", {l.out, l.in}}, {"data", l.weight}});
            tensors.push_back({{"name", "layer" + std::to_string(i) + ".bias"}, {"shape", {l.out}}, {"data", l.bias}});
          } else if constexpr (std::is_same_v<L, ConvLayer>) {
            tensors.push_back({{"name", "layer" + std::to_string(i) + ".weight"},
                               {"shape", {l.out_channels, l.kernel, l.kernel, l.in_channels}},
                               {"data", l.weight}});
            tensors.push_back({{"name", "layer" + std::to_string(i) + ".bias"}, {"shape", {l.out_channels}}, {"data", l.bias}});
          }
        },
        layers[i]);
  }
  return {{"format", "advm-model"}, {"version", kModelFileVersion}, {"spec", spec_to_json(m.spec())}, {"tensors", tensors}};
}

inline std::string serialize_model(const Model& m) { return model_to_json(m).dump(1) + "\n"; }

inline Model model_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
  try {
    if (j.at("format").get<std::string>() != "advm-model") throw Error(Errc::corrupt_file, "not an advm model");
    const int version = j.at("version").get<int>();
    if (version != kModelFileVersion) throw Error(Errc::version_mismatch, "model file version " + std::to_string(version));
    const ModelSpec spec = spec_from_json(j.at("spec"));
    const auto& tensors = j.at("tensors");
    if (tensors.size() % 2 != 0) throw Error(Errc::corrupt_file, "tensors must come in weight/bias pairs");
    auto read = [&](const nlohmann::json& t) {
      if (t.contains("blob"))
        return decode_emtn(read_file_bytes(base_dir / t.at("blob").get<std::string>())).data;
      return t.at("data").get<std::vector<double>>();
    };
    std::vector<std::pair<std::vector<double>, std::vector<double>>> params;
    for (std::size_t i = 0; i < tensors.size(); i += 2) params.emplace_back(read(tensors[i]), read(tensors[i + 1]));
    return Model::from_params(spec, std::move(params));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::corrupt_file, e.what());
  }
}

inline Model parse_model(const std::string& text, const std::filesystem::path& base_dir = {}) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::corrupt_file, e.what());
  }
  return model_from_json(j, base_dir);
}

inline void save_model(const Model& m, const std::filesystem::path& path) {
  write_file_bytes(path, serialize_model(m));
}

inline Model load_model(const std::filesystem::path& path) {
  return parse_model(read_file_bytes(path), path.parent_path());
}

}  // namespace advm
