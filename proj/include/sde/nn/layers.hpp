#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <vector>

namespace sde::nn {

/// Deterministic re-initialization of every parameter of `module` from `seed`:
/// matrices and kernels U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero,
/// 1-D scale vectors one. Independent of torch's global RNG.
void seeded_init(torch::nn::Module& module, uint64_t seed);

/// Stack of stride-2 3x3 convolutions with ReLU, one per entry of `channels`.
/// Input images are [B, 3, H, W] in [0, 1]. Shared by the frozen-net semantic
/// provider, the perceptual loss and the rFID feature extractor.
class ConvTrunkImpl : public torch::nn::Module {
 public:
  explicit ConvTrunkImpl(std::vector<int64_t> channels = {16, 32, 64});

  /// Activations after every layer, shallowest first.
  std::vector<torch::Tensor> features(const torch::Tensor& images);
  torch::Tensor forward(const torch::Tensor& images);

  int64_t out_channels() const { return channels_.back(); }
  const std::vector<int64_t>& channels() const { return channels_; }

 private:
  std::vector<int64_t> channels_;
  torch::nn::ModuleList convs_;
};
TORCH_MODULE(ConvTrunk);

/// Per-layer key/value history for incremental decoding.
struct KVCache {
  std::vector<torch::Tensor> keys;
  std::vector<torch::Tensor> values;
  int64_t length() const { return keys.empty() || !keys[0].defined() ? 0 : keys[0].size(2); }
};

/// Pre-norm transformer block: x + Attn(LN(x)), then x + MLP(LN(x)).
class TransformerBlockImpl : public torch::nn::Module {
 public:
  TransformerBlockImpl(int64_t width, int64_t heads, int64_t mlp_ratio = 4);

  /// x: [B, T, C].
  torch::Tensor forward(const torch::Tensor& x, bool causal);

  /// Causal attention over the cached prefix plus the new positions in `x`.
  /// Appends this layer's keys and values to `keys`/`values`.
  torch::Tensor forward_cached(const torch::Tensor& x, torch::Tensor& keys, torch::Tensor& values);

 private:
  torch::Tensor attend(const torch::Tensor& q, const torch::Tensor& k, const torch::Tensor& v, int64_t offset,
                       bool causal) const;

  int64_t width_;
  int64_t heads_;
  torch::nn::LayerNorm ln1_{nullptr}, ln2_{nullptr};
  torch::nn::Linear qkv_{nullptr}, proj_{nullptr}, fc1_{nullptr}, fc2_{nullptr};
};
TORCH_MODULE(TransformerBlock);

}  // namespace sde::nn
