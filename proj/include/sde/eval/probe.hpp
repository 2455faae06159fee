#pragma once

#include <torch/torch.h>

#include <nlohmann/json.hpp>
#include <string>
#include <vector>

namespace sde::eval {

struct ProbeOptions {
  double train_fraction = 0.7;
  int64_t iterations = 500;
  double lr = 0.05;
  double weight_decay = 1e-4;
  uint64_t seed = 0;
};

/// Trains a softmax-regression classifier on standardized `features` ([N, D])
/// over a seeded train split and returns held-out accuracy in [0, 1].
/// Throws InvalidInput if the labels hold fewer than two classes.
double linear_probe(const torch::Tensor& features, const std::vector<int64_t>& labels, const ProbeOptions& options);

/// Mean over the grid of the codebook rows selected by `codes` ([B, h, w]):
/// [B, d] probe features.
torch::Tensor mean_pooled_embeddings(const torch::Tensor& entries, const torch::Tensor& codes);

struct ProbeReport {
  double accuracy_sde = 0.0;
  double accuracy_baseline = 0.0;
  std::string dataset_id;
  int64_t num_classes = 0;
};

void to_json(nlohmann::json& j, const ProbeReport& r);

}  // namespace sde::eval
