#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <string>
#include <vector>

namespace sde::data {

/// Procedural labelled images: one coloured shape per image on a noisy
/// background. The class is the shape; colours, position and size are random,
/// so class identity is not recoverable from colour statistics alone.
struct ToyDataset {
  torch::Tensor images;  // [N, 3, S, S] float32 in [0, 1]
  std::vector<int64_t> labels;
  std::vector<std::string> captions;
  std::vector<std::string> image_ids;

  int64_t size() const { return static_cast<int64_t>(labels.size()); }
};

constexpr int64_t kToyClasses = 10;

const std::vector<std::string>& toy_class_names();

ToyDataset make_toy_dataset(int64_t count, int64_t image_size, uint64_t seed);

}  // namespace sde::data
