#pragma once

#include <torch/torch.h>

#include <vector>

#include "sde/nn/layers.hpp"

namespace sde::adversarial {

/// LPIPS-style distance on a frozen convolutional trunk. Each layer's
/// activations are unit-normalized across channels at every spatial position;
/// the loss is the weighted sum over layers of the mean squared distance
/// between the normalized maps.
class PerceptualNet {
 public:
  /// Freezes `trunk`. Layer weights default to equal shares summing to one.
  explicit PerceptualNet(nn::ConvTrunk trunk, std::vector<double> layer_weights = {});

  /// Randomly initialized trunk with the given seed; used when the semantic
  /// provider has no trunk of its own.
  static PerceptualNet random(uint64_t seed, std::vector<int64_t> channels = {16, 32, 64});

  const nn::ConvTrunk& trunk() const { return trunk_; }
  const std::vector<double>& layer_weights() const { return weights_; }

  /// Moves the trunk to the given dtype (gradient checks run in double).
  void to(torch::Dtype dtype);

 private:
  nn::ConvTrunk trunk_;
  std::vector<double> weights_;
};

/// x, y: [B, 3, H, W]. Symmetric, zero for identical inputs, differentiable in
/// both arguments. Throws ContractViolation on shape mismatch.
torch::Tensor perceptual_loss(const PerceptualNet& net, const torch::Tensor& x, const torch::Tensor& y);

}  // namespace sde::adversarial
