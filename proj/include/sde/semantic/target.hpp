#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace sde::semantic {

/// Frozen teacher feature grid T, shape [B, h, w, d_sem] (or [h, w, d_sem]
/// for a single image). Never carries gradient.
struct SemanticTarget {
  torch::Tensor features;
  std::string source_id;

  int64_t feature_dim() const { return features.size(-1); }
  int64_t grid_h() const { return features.size(-3); }
  int64_t grid_w() const { return features.size(-2); }
};

/// Checks finiteness, the expected grid, and that no position has a zero
/// feature vector. Throws ContractViolation / InvalidInput.
void validate_target(const SemanticTarget& target, int64_t grid_h, int64_t grid_w);

/// One precomputed-target file: magic "SDESEM01", u32-LE h, w, d_sem, then
/// h*w*d_sem f32-LE values in (i, j, c) row-major order.
void write_semantic_file(const std::filesystem::path& path, const torch::Tensor& features);
torch::Tensor read_semantic_file(const std::filesystem::path& path);

struct TargetManifestEntry {
  std::string image_id;
  std::filesystem::path target_path;
};

/// JSON-lines manifest: one {"image_id", "target_path"} object per line.
/// Relative target paths resolve against the manifest's directory.
struct TargetManifest {
  std::vector<TargetManifestEntry> entries;
  int64_t grid_h = 0;
  int64_t grid_w = 0;
  int64_t feature_dim = 0;

  static TargetManifest load(const std::filesystem::path& path, int64_t grid_h, int64_t grid_w,
                             int64_t feature_dim);
  void save(const std::filesystem::path& path) const;

  /// Every referenced file exists and decodes to the declared shape.
  void validate() const;
};

}  // namespace sde::semantic
