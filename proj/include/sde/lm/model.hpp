#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <nlohmann/json.hpp>

#include "sde/lm/vocab.hpp"
#include "sde/nn/layers.hpp"

namespace sde::lm {

struct ARConfig {
  int64_t width = 256;
  int64_t layers = 4;
  int64_t heads = 4;
  int64_t context = 1024;
  int64_t mlp_ratio = 4;

  void validate() const;
};

void to_json(nlohmann::json& j, const ARConfig& c);
void from_json(const nlohmann::json& j, ARConfig& c);

/// Decoder-only transformer over a flat id space of `vocab_size` ids with
/// learned positions and an untied, bias-free output head.
class ARModelImpl : public torch::nn::Module {
 public:
  ARModelImpl(ARConfig config, int64_t vocab_size, uint64_t seed);

  /// ids: [B, T] int64 -> logits [B, T, vocab_size].
  torch::Tensor forward(const torch::Tensor& ids);

  /// Runs `ids` ([B, T]) after the positions already held in `cache`, extends
  /// the cache and returns logits for the new positions.
  torch::Tensor forward_cached(const torch::Tensor& ids, nn::KVCache& cache);

  const ARConfig& config() const { return config_; }
  int64_t vocab_size() const { return vocab_size_; }

  torch::nn::Embedding tok_emb{nullptr};
  torch::Tensor pos_emb;
  torch::nn::ModuleList blocks;
  torch::nn::LayerNorm ln_f{nullptr};
  torch::nn::Linear head{nullptr};

 private:
  torch::Tensor run(const torch::Tensor& ids, int64_t offset, nn::KVCache* cache);

  ARConfig config_;
  int64_t vocab_size_;
};
TORCH_MODULE(ARModel);

/// Builds a model over layout.total() ids. With a base model (vocabulary of
/// layout.text_vocab() rows) every transformer weight and the text rows of the
/// embedding and head are copied; otherwise the text rows come from a fresh
/// seeded init. New embedding rows are drawn N(0, 0.02^2) from `seed`; new
/// head rows start at zero so text-only logits are unchanged.
ARModel extend_embeddings(const ARModelImpl* base, const ARConfig& config, const VocabLayout& layout,
                          uint64_t seed);

}  // namespace sde::lm
