#pragma once

#include <torch/torch.h>

#include <map>
#include <span>
#include <string>
#include <vector>

namespace sde::eval {

struct PatchLocation {
  std::string image_id;
  int64_t i = 0;  // grid row
  int64_t j = 0;  // grid column
  bool operator==(const PatchLocation&) const = default;
};

/// code -> every patch carrying it, in (image, row, column) order.
using CodeIndex = std::map<int64_t, std::vector<PatchLocation>>;

/// codes: [B, h, w]; image_ids.size() == B.
CodeIndex group_codes(const torch::Tensor& codes, std::span<const std::string> image_ids);

/// Tiles up to `max_patches` pixel crops of `code` (patch side `patch`) into a
/// square mosaic [3, S, S]. `images` are indexed in the same order as the ids
/// used to build `index`.
torch::Tensor code_mosaic(const torch::Tensor& images, std::span<const std::string> image_ids,
                          const CodeIndex& index, int64_t code, int64_t patch, int64_t max_patches = 64);

}  // namespace sde::eval
