#pragma once

#include <torch/torch.h>

#include <filesystem>

namespace sde::io {

/// Decodes any PNG (gray, palette, alpha, 16-bit) to RGB float [3, H, W] in [0, 1].
torch::Tensor read_png(const std::filesystem::path& path);

/// Writes a [3, H, W] image in [0, 1] as 8-bit RGB; values are clamped and rounded.
void write_png(const std::filesystem::path& path, const torch::Tensor& image);

}  // namespace sde::io
