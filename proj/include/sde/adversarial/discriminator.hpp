#pragma once

#include <torch/torch.h>

#include <cstdint>

namespace sde::adversarial {

/// PatchGAN: stride-2 4x4 convolutions (base, 2*base, 4*base channels) with
/// LeakyReLU(0.2), then a 1x1 conv to one logit per patch.
class PatchDiscriminatorImpl : public torch::nn::Module {
 public:
  explicit PatchDiscriminatorImpl(int64_t base_channels = 64, int64_t num_layers = 3, uint64_t seed = 0);

  /// images [B, 3, H, W] -> logits [B, 1, H / 2^L, W / 2^L], at least 1x1
  /// (smaller inputs are upsampled first).
  torch::Tensor forward(const torch::Tensor& images);

 private:
  torch::nn::ModuleList convs_;
  torch::nn::Conv2d head_{nullptr};
};
TORCH_MODULE(PatchDiscriminator);

struct GanLosses {
  torch::Tensor disc;  // mean relu(1 - D(real)) + mean relu(1 + D(sg[fake]))
  torch::Tensor gen;   // -mean D(fake)
};

/// Hinge losses. Only `gen` carries gradient back into `fake`; `disc` sees a
/// detached copy of it.
GanLosses gan_losses(PatchDiscriminatorImpl& disc, const torch::Tensor& real, const torch::Tensor& fake);

/// Hinge losses from precomputed logits (the pure formula).
GanLosses hinge_losses(const torch::Tensor& logits_real, const torch::Tensor& logits_fake_detached,
                       const torch::Tensor& logits_fake);

}  // namespace sde::adversarial
