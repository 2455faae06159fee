#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <utility>
#include <vector>

namespace sde::io {

using NamedTensors = std::vector<std::pair<std::string, torch::Tensor>>;

/// Ordered name -> tensor archive in torch's pickle format.
void save_tensor_archive(const std::filesystem::path& path, const NamedTensors& tensors);
NamedTensors load_tensor_archive(const std::filesystem::path& path);

/// Digest over names, dtypes, shapes and bytes, in order.
std::string content_hash(const NamedTensors& tensors);

/// JSON sidecar stored next to every checkpoint as "<path>.json".
struct CheckpointMeta {
  std::string kind;  // "tokenizer" or "vlm"
  nlohmann::json config;
  std::string config_hash;
  uint64_t seed = 0;
  int64_t step = 0;
  std::string content_hash;  // filled in by save_checkpoint
  nlohmann::json extra = nlohmann::json::object();
};

std::filesystem::path sidecar_path(const std::filesystem::path& checkpoint);

void save_checkpoint(const std::filesystem::path& path, const NamedTensors& tensors, CheckpointMeta meta);

struct Checkpoint {
  NamedTensors tensors;
  CheckpointMeta meta;

  /// Entries whose name starts with `prefix`, with the prefix removed.
  NamedTensors section(const std::string& prefix) const;
};

/// Throws IoError if either file is missing or the content hash disagrees.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Copies `source` into the same-named parameters and buffers of `module`.
/// Throws IoError on missing names or shape mismatches.
void load_into(torch::nn::Module& module, const NamedTensors& source);

/// Parameters then buffers of `module`, prefixed.
NamedTensors module_tensors(const torch::nn::Module& module, const std::string& prefix = "");

}  // namespace sde::io
