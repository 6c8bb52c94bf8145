#include "neurospike/checkpoint.hpp"

#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "neurospike/ntsr.hpp"
#include "neurospike/spiking.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace neurospike {

namespace {

std::string sanitize(const std::string& name) {
  std::string out;
  for (char c : name) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-') ? c : '_';
  return out;
}

}  // namespace

void save_checkpoint(const std::string& dir,
                     const std::vector<std::pair<std::string, const Tensor<float>*>>& tensors,
                     const std::map<std::string, double>& metadata) {
  fs::create_directories(dir);
  json index;
  index["tensors"] = json::object();
  for (const auto& [name, tensor] : tensors) {
    const std::string file = sanitize(name) + ".ntsr";
    write_ntsr((fs::path(dir) / file).string(), tensor->shape(), tensor->data());
    index["tensors"][name] = {{"file", file}, {"shape", tensor->shape()}};
  }
  index["metadata"] = metadata;
  std::ofstream out(fs::path(dir) / "index.json", std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint index in " + dir);
  out << index.dump(2) << "\n";
}

void save_csnn_checkpoint(const std::string& dir, CsnnModel<float>& model) {
  save_checkpoint(dir,
                  {{"conv1.kernels", &model.conv1.kernels},
                   {"conv1.bias", &model.conv1.bias},
                   {"conv2.kernels", &model.conv2.kernels},
                   {"conv2.bias", &model.conv2.bias},
                   {"fc.weight", &model.fc.weight},
                   {"fc.bias", &model.fc.bias}},
                  {{"beta", model.cfg.beta},
                   {"theta", model.cfg.theta},
                   {"k", model.cfg.k},
                   {"steps", static_cast<double>(model.cfg.steps)},
                   {"in_h", static_cast<double>(model.in_h)},
                   {"in_w", static_cast<double>(model.in_w)},
                   {"conv1_filters", static_cast<double>(model.cfg.conv1_filters)},
                   {"conv2_filters", static_cast<double>(model.cfg.conv2_filters)},
                   {"kernel", static_cast<double>(model.cfg.kernel)}});
}

CsnnModel<float> load_csnn_checkpoint(const std::string& dir) {
  Checkpoint ckpt = load_checkpoint(dir);
  auto meta = [&](const std::string& key) {
    auto it = ckpt.metadata.find(key);
    if (it == ckpt.metadata.end())
      throw std::runtime_error("checkpoint: missing metadata '" + key + "'");
    return it->second;
  };
  CsnnConfig cfg;
  cfg.beta = meta("beta");
  cfg.theta = meta("theta");
  cfg.k = meta("k");
  cfg.steps = static_cast<int>(meta("steps"));
  cfg.conv1_filters = static_cast<int>(meta("conv1_filters"));
  cfg.conv2_filters = static_cast<int>(meta("conv2_filters"));
  cfg.kernel = static_cast<int>(meta("kernel"));
  Rng rng(0);
  CsnnModel<float> model(static_cast<int>(meta("in_h")), static_cast<int>(meta("in_w")), cfg, rng);
  auto assign = [&](const std::string& name, Tensor<float>& dst) {
    auto it = ckpt.tensors.find(name);
    if (it == ckpt.tensors.end())
      throw std::runtime_error("checkpoint: missing tensor '" + name + "'");
    if (it->second.shape() != dst.shape())
      throw std::runtime_error("checkpoint: tensor '" + name + "' shape mismatch");
    std::copy(it->second.data(), it->second.data() + it->second.size(), dst.data());
  };
  assign("conv1.kernels", model.conv1.kernels);
  assign("conv1.bias", model.conv1.bias);
  assign("conv2.kernels", model.conv2.kernels);
  assign("conv2.bias", model.conv2.bias);
  assign("fc.weight", model.fc.weight);
  assign("fc.bias", model.fc.bias);
  return model;
}

Checkpoint load_checkpoint(const std::string& dir) {
  std::ifstream in(fs::path(dir) / "index.json");
  if (!in) throw std::runtime_error("no checkpoint index in " + dir);
  json index;
  in >> index;

  Checkpoint ckpt;
  for (auto& [name, entry] : index.at("tensors").items()) {
    std::vector<int> shape;
    std::vector<float> data;
    read_ntsr((fs::path(dir) / entry.at("file").get<std::string>()).string(), shape, data);
    const auto declared = entry.at("shape").get<std::vector<int>>();
    if (shape != declared)
      throw std::runtime_error("checkpoint tensor '" + name + "' shape mismatch");
    ckpt.tensors.emplace(name, Tensor<float>::of(shape, std::move(data)));
  }
  if (index.contains("metadata"))
    for (auto& [k, v] : index.at("metadata").items()) ckpt.metadata[k] = v.get<double>();
  return ckpt;
}

}  // namespace neurospike
