#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "sde/nn/layers.hpp"
#include "sde/semantic/target.hpp"

namespace sde::semantic {

/// Per-image side information a provider may need besides the pixels.
struct SampleRef {
  std::string image_id;
  std::optional<int64_t> label;
};

/// Source of frozen semantic targets. Implementations are read-only after
/// construction and safe to share between threads.
class SemanticProvider {
 public:
  virtual ~SemanticProvider() = default;

  virtual std::string source_id() const = 0;
  virtual int64_t feature_dim() const = 0;

  /// images: [B, 3, H, W] in [0, 1]; refs.size() == B. Returns [B, h, w, d_sem].
  virtual SemanticTarget provide(const torch::Tensor& images, std::span<const SampleRef> refs) const = 0;

  /// Named tensors that define the provider, for checkpoints and freeze checks.
  virtual std::vector<std::pair<std::string, torch::Tensor>> state() const = 0;

  /// Convolutional trunk for perceptual and rFID features, if the provider has one.
  virtual nn::ConvTrunk trunk() const { return nullptr; }

  std::string parameter_hash() const;
};

/// Reads precomputed per-image grids listed in a TargetManifest.
class FileProvider final : public SemanticProvider {
 public:
  explicit FileProvider(TargetManifest manifest);

  std::string source_id() const override { return "file"; }
  int64_t feature_dim() const override { return manifest_.feature_dim; }
  SemanticTarget provide(const torch::Tensor& images, std::span<const SampleRef> refs) const override;
  std::vector<std::pair<std::string, torch::Tensor>> state() const override { return {}; }

 private:
  TargetManifest manifest_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Broadcasts a fixed N(0, 1) embedding of the image's class label to every
/// grid position.
class ClassEmbeddingProvider final : public SemanticProvider {
 public:
  ClassEmbeddingProvider(int64_t num_classes, int64_t feature_dim, int64_t grid_h, int64_t grid_w, uint64_t seed);
  /// Restores a provider from a stored [C, d_sem] table.
  ClassEmbeddingProvider(torch::Tensor table, int64_t grid_h, int64_t grid_w);

  std::string source_id() const override { return "class-embedding"; }
  int64_t feature_dim() const override { return table_.size(1); }
  SemanticTarget provide(const torch::Tensor& images, std::span<const SampleRef> refs) const override;
  std::vector<std::pair<std::string, torch::Tensor>> state() const override;

  const torch::Tensor& table() const { return table_; }

 private:
  torch::Tensor table_;
  int64_t grid_h_;
  int64_t grid_w_;
};

/// Small conv net: trunk, 1x1 projection to d_sem, classifier head on the
/// pooled projection. Trained once on labels, then frozen.
class FrozenNetImpl : public torch::nn::Module {
 public:
  FrozenNetImpl(std::vector<int64_t> trunk_channels, int64_t feature_dim, int64_t num_classes, uint64_t seed);

  /// [B, d_sem, h', w'] feature map before pooling to the target grid.
  torch::Tensor feature_map(const torch::Tensor& images);
  torch::Tensor logits(const torch::Tensor& images);

  nn::ConvTrunk trunk{nullptr};
  torch::nn::Conv2d project{nullptr};
  torch::nn::Linear classifier{nullptr};
};
TORCH_MODULE(FrozenNet);

struct FrozenNetTrainOptions {
  int64_t steps = 300;
  int64_t batch_size = 32;
  double lr = 1e-3;
  uint64_t seed = 0;
};

/// Supervised training of a FrozenNet on (images [N, 3, H, W], labels [N]).
/// Returns the final training-batch accuracy.
double train_frozen_net(FrozenNetImpl& net, const torch::Tensor& images, const torch::Tensor& labels,
                        const FrozenNetTrainOptions& options);

class FrozenNetProvider final : public SemanticProvider {
 public:
  /// Takes ownership of `net` and freezes all of its parameters.
  FrozenNetProvider(FrozenNet net, int64_t grid_h, int64_t grid_w);

  std::string source_id() const override { return "frozen-net"; }
  int64_t feature_dim() const override;
  SemanticTarget provide(const torch::Tensor& images, std::span<const SampleRef> refs) const override;
  std::vector<std::pair<std::string, torch::Tensor>> state() const override;
  nn::ConvTrunk trunk() const override { return net_->trunk; }

  const FrozenNet& net() const { return net_; }

 private:
  mutable FrozenNet net_;
  int64_t grid_h_;
  int64_t grid_w_;
};

}  // namespace sde::semantic
