#include "sde/io/checkpoint.hpp"

#include <torch/serialize.h>

#include <fstream>
#include <iterator>
#include <map>

#include "sde/errors.hpp"
#include "sde/tensor_utils.hpp"

namespace sde::io {

namespace fs = std::filesystem;

void save_tensor_archive(const fs::path& path, const NamedTensors& tensors) {
  c10::Dict<std::string, at::Tensor> dict;
  for (const auto& [name, t] : tensors) {
    if (dict.contains(name)) throw ContractViolation("duplicate archive entry " + name);
    dict.insert(name, t.detach().to(torch::kCPU).contiguous());
  }
  const auto bytes = torch::pickle_save(c10::IValue(dict));
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError("write failed: " + path.string());
}

NamedTensors load_tensor_archive(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("checkpoint not found: " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  c10::IValue value;
  try {
    value = torch::pickle_load(bytes);
  } catch (const c10::Error& e) {
    throw IoError("unreadable tensor archive " + path.string() + ": " + e.what_without_backtrace());
  }
  if (!value.isGenericDict()) throw IoError("tensor archive has unexpected layout: " + path.string());
  NamedTensors out;
  for (const auto& entry : value.toGenericDict()) {
    out.emplace_back(entry.key().toStringRef(), entry.value().toTensor());
  }
  return out;
}

std::string content_hash(const NamedTensors& tensors) {
  std::string blob;
  std::vector<torch::Tensor> values;
  for (const auto& [name, t] : tensors) {
    blob += name + '|' + std::string(c10::toString(t.scalar_type())) + '|' + shape_string(t) + ';';
    values.push_back(t);
  }
  return sha256_hex(blob + tensors_hash(values));
}

fs::path sidecar_path(const fs::path& checkpoint) { return fs::path(checkpoint.string() + ".json"); }

void save_checkpoint(const fs::path& path, const NamedTensors& tensors, CheckpointMeta meta) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  save_tensor_archive(path, tensors);
  meta.content_hash = content_hash(tensors);
  nlohmann::json j = {{"kind", meta.kind},       {"config", meta.config}, {"config_hash", meta.config_hash},
                      {"seed", meta.seed},       {"step", meta.step},     {"content_hash", meta.content_hash},
                      {"extra", meta.extra}};
  std::ofstream os(sidecar_path(path));
  if (!os) throw IoError("cannot write checkpoint sidecar for " + path.string());
  os << j.dump(2) << '\n';
}

Checkpoint load_checkpoint(const fs::path& path) {
  Checkpoint ck;
  ck.tensors = load_tensor_archive(path);
  std::ifstream is(sidecar_path(path));
  if (!is) throw IoError("checkpoint sidecar missing: " + sidecar_path(path).string());
  nlohmann::json j;
  try {
    is >> j;
    ck.meta.kind = j.at("kind").get<std::string>();
    ck.meta.config = j.at("config");
    ck.meta.config_hash = j.at("config_hash").get<std::string>();
    ck.meta.seed = j.at("seed").get<uint64_t>();
    ck.meta.step = j.at("step").get<int64_t>();
    ck.meta.content_hash = j.at("content_hash").get<std::string>();
    ck.meta.extra = j.value("extra", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad checkpoint sidecar " + sidecar_path(path).string() + ": " + e.what());
  }
  if (content_hash(ck.tensors) != ck.meta.content_hash) {
    throw IoError("checkpoint content hash mismatch: " + path.string());
  }
  return ck;
}

NamedTensors Checkpoint::section(const std::string& prefix) const {
  NamedTensors out;
  for (const auto& [name, t] : tensors) {
    if (name.rfind(prefix, 0) == 0) out.emplace_back(name.substr(prefix.size()), t);
  }
  return out;
}

void load_into(torch::nn::Module& module, const NamedTensors& source) {
  std::map<std::string, torch::Tensor> lookup(source.begin(), source.end());
  torch::NoGradGuard no_grad;
  auto copy = [&](const std::string& name, torch::Tensor& dst) {
    auto it = lookup.find(name);
    if (it == lookup.end()) throw IoError("checkpoint lacks tensor " + name);
    if (it->second.sizes() != dst.sizes()) {
      throw IoError("checkpoint tensor " + name + " has shape " + shape_string(it->second) + ", expected " +
                    shape_string(dst));
    }
    dst.copy_(it->second);
  };
  for (auto& item : module.named_parameters(true)) copy(item.key(), item.value());
  for (auto& item : module.named_buffers(true)) copy(item.key(), item.value());
}

NamedTensors module_tensors(const torch::nn::Module& module, const std::string& prefix) {
  NamedTensors out;
  for (const auto& item : module.named_parameters(true)) out.emplace_back(prefix + item.key(), item.value());
  for (const auto& item : module.named_buffers(true)) out.emplace_back(prefix + item.key(), item.value());
  return out;
}

}  // namespace sde::io
