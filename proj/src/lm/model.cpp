#include "sde/lm/model.hpp"

#include "sde/errors.hpp"
#include "sde/tensor_utils.hpp"

namespace sde::lm {

void ARConfig::validate() const {
  if (width <= 0 || layers <= 0 || heads <= 0 || context <= 1 || mlp_ratio <= 0) {
    throw ConfigError("lm config: dimensions must be positive");
  }
  if (width % heads != 0) throw ConfigError("lm config: width must be divisible by heads");
}

void to_json(nlohmann::json& j, const ARConfig& c) {
  j = {{"width", c.width}, {"layers", c.layers}, {"heads", c.heads}, {"context", c.context},
       {"mlp_ratio", c.mlp_ratio}};
}

void from_json(const nlohmann::json& j, ARConfig& c) {
  ARConfig d;
  c.width = j.value("width", d.width);
  c.layers = j.value("layers", d.layers);
  c.heads = j.value("heads", d.heads);
  c.context = j.value("context", d.context);
  c.mlp_ratio = j.value("mlp_ratio", d.mlp_ratio);
}

ARModelImpl::ARModelImpl(ARConfig config, int64_t vocab_size, uint64_t seed)
    : config_(config), vocab_size_(vocab_size) {
  config_.validate();
  if (vocab_size <= 0) throw ConfigError("lm vocab size must be positive");
  tok_emb = register_module("tok_emb", torch::nn::Embedding(vocab_size, config_.width));
  pos_emb = register_parameter("pos_emb", torch::zeros({config_.context, config_.width}));
  blocks = register_module("blocks", torch::nn::ModuleList());
  for (int64_t i = 0; i < config_.layers; ++i) {
    blocks->push_back(nn::TransformerBlock(config_.width, config_.heads, config_.mlp_ratio));
  }
  ln_f = register_module("ln_f", torch::nn::LayerNorm(torch::nn::LayerNormOptions({config_.width})));
  head = register_module("head", torch::nn::Linear(torch::nn::LinearOptions(config_.width, vocab_size).bias(false)));

  nn::seeded_init(*this, seed);
  torch::NoGradGuard no_grad;
  auto gen = seeded_generator(derive_seed(seed, 1));
  tok_emb->weight.copy_(torch::randn(tok_emb->weight.sizes(), gen, torch::kFloat32) * 0.02);
  pos_emb.copy_(torch::randn(pos_emb.sizes(), gen, torch::kFloat32) * 0.02);
  head->weight.copy_(torch::randn(head->weight.sizes(), gen, torch::kFloat32) * 0.02);
}

torch::Tensor ARModelImpl::run(const torch::Tensor& ids, int64_t offset, nn::KVCache* cache) {
  if (ids.dim() != 2) throw ContractViolation("lm forward: ids must be [B, T], got " + shape_string(ids));
  const auto t = ids.size(1);
  if (offset + t > config_.context) {
    throw InvalidInput("sequence of " + std::to_string(offset + t) + " exceeds context " +
                       std::to_string(config_.context));
  }
  if (ids.numel() > 0 && (ids.min().item<int64_t>() < 0 || ids.max().item<int64_t>() >= vocab_size_)) {
    throw InvalidInput("token id outside [0, " + std::to_string(vocab_size_) + ")");
  }
  auto x = tok_emb->forward(ids) + pos_emb.slice(0, offset, offset + t).unsqueeze(0);
  if (cache != nullptr && cache->keys.size() != blocks->size()) {
    cache->keys.assign(blocks->size(), torch::Tensor());
    cache->values.assign(blocks->size(), torch::Tensor());
  }
  for (std::size_t i = 0; i < blocks->size(); ++i) {
    auto blk = blocks[i]->as<nn::TransformerBlock>();
    x = cache ? blk->forward_cached(x, cache->keys[i], cache->values[i]) : blk->forward(x, /*causal=*/true);
  }
  return head->forward(ln_f->forward(x));
}

torch::Tensor ARModelImpl::forward(const torch::Tensor& ids) { return run(ids, 0, nullptr); }

torch::Tensor ARModelImpl::forward_cached(const torch::Tensor& ids, nn::KVCache& cache) {
  return run(ids, cache.length(), &cache);
}

ARModel extend_embeddings(const ARModelImpl* base, const ARConfig& config, const VocabLayout& layout,
                          uint64_t seed) {
  ARModel model(config, layout.total(), seed);
  const auto n = layout.text_vocab();
  torch::NoGradGuard no_grad;
  if (base != nullptr) {
    if (base->vocab_size() != n) {
      throw ContractViolation("extend_embeddings: base vocabulary " + std::to_string(base->vocab_size()) +
                              " differs from text vocabulary " + std::to_string(n));
    }
    auto dst = model->named_parameters(true);
    for (const auto& item : base->named_parameters(true)) {
      auto* target = dst.find(item.key());
      if (target == nullptr || (item.key() != "tok_emb.weight" && item.key() != "head.weight" &&
                                target->sizes() != item.value().sizes())) {
        throw ContractViolation("extend_embeddings: base parameter " + item.key() + " does not fit");
      }
      if (item.key() == "tok_emb.weight" || item.key() == "head.weight") {
        target->slice(0, 0, n).copy_(item.value());
      } else {
        target->copy_(item.value());
      }
    }
  }
  auto gen = seeded_generator(derive_seed(seed, 2));
  auto fresh = torch::randn({layout.total() - n, config.width}, gen, torch::kFloat32) * 0.02;
  model->tok_emb->weight.slice(0, n, layout.total()).copy_(fresh);
  model->head->weight.slice(0, n, layout.total()).zero_();
  return model;
}

}  // namespace sde::lm
