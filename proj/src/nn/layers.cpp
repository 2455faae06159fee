#include "sde/nn/layers.hpp"

#include <cmath>
#include <limits>

#include "sde/errors.hpp"
#include "sde/tensor_utils.hpp"

namespace sde::nn {

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

void seeded_init(torch::nn::Module& module, uint64_t seed) {
  auto gen = seeded_generator(seed);
  torch::NoGradGuard no_grad;
  for (auto& item : module.named_parameters(/*recurse=*/true)) {
    auto& p = item.value();
    const auto& name = item.key();
    if (ends_with(name, "bias")) {
      p.zero_();
    } else if (p.dim() == 1) {
      p.fill_(1.0);
    } else {
      const int64_t fan_in = p.numel() / p.size(0);
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      p.copy_(torch::rand(p.sizes(), gen, p.scalar_type()) * (2.0 * bound) - bound);
    }
  }
}

ConvTrunkImpl::ConvTrunkImpl(std::vector<int64_t> channels) : channels_(std::move(channels)) {
  if (channels_.empty()) throw ContractViolation("ConvTrunk: need at least one layer");
  convs_ = register_module("convs", torch::nn::ModuleList());
  int64_t in = 3;
  for (const auto c : channels_) {
    convs_->push_back(torch::nn::Conv2d(torch::nn::Conv2dOptions(in, c, 3).stride(2).padding(1)));
    in = c;
  }
}

std::vector<torch::Tensor> ConvTrunkImpl::features(const torch::Tensor& images) {
  std::vector<torch::Tensor> out;
  auto h = images * 2.0 - 1.0;
  for (const auto& m : *convs_) {
    h = torch::relu(m->as<torch::nn::Conv2d>()->forward(h));
    out.push_back(h);
  }
  return out;
}

torch::Tensor ConvTrunkImpl::forward(const torch::Tensor& images) { return features(images).back(); }

TransformerBlockImpl::TransformerBlockImpl(int64_t width, int64_t heads, int64_t mlp_ratio)
    : width_(width), heads_(heads) {
  if (width % heads != 0) throw ContractViolation("TransformerBlock: width must be divisible by heads");
  ln1_ = register_module("ln1", torch::nn::LayerNorm(torch::nn::LayerNormOptions({width})));
  ln2_ = register_module("ln2", torch::nn::LayerNorm(torch::nn::LayerNormOptions({width})));
  qkv_ = register_module("qkv", torch::nn::Linear(width, 3 * width));
  proj_ = register_module("proj", torch::nn::Linear(width, width));
  fc1_ = register_module("fc1", torch::nn::Linear(width, mlp_ratio * width));
  fc2_ = register_module("fc2", torch::nn::Linear(mlp_ratio * width, width));
}

torch::Tensor TransformerBlockImpl::attend(const torch::Tensor& q, const torch::Tensor& k, const torch::Tensor& v,
                                           int64_t offset, bool causal) const {
  // q: [B, H, Tq, Dh], k/v: [B, H, Tk, Dh]; query t sits at absolute position offset + t.
  const auto head_dim = q.size(-1);
  auto scores = torch::matmul(q, k.transpose(-2, -1)) / std::sqrt(static_cast<double>(head_dim));
  if (causal) {
    const auto tq = q.size(2);
    const auto tk = k.size(2);
    auto qpos = torch::arange(offset, offset + tq, torch::kLong).unsqueeze(1);
    auto kpos = torch::arange(0, tk, torch::kLong).unsqueeze(0);
    auto future = kpos.gt(qpos).to(scores.device());
    scores = scores.masked_fill(future, -std::numeric_limits<double>::infinity());
  }
  return torch::matmul(torch::softmax(scores, -1), v);
}

torch::Tensor TransformerBlockImpl::forward(const torch::Tensor& x, bool causal) {
  const auto b = x.size(0);
  const auto t = x.size(1);
  const auto dh = width_ / heads_;
  auto qkv = qkv_->forward(ln1_->forward(x)).view({b, t, 3, heads_, dh}).permute({2, 0, 3, 1, 4});
  auto att = attend(qkv[0], qkv[1], qkv[2], 0, causal);
  att = att.transpose(1, 2).reshape({b, t, width_});
  auto h = x + proj_->forward(att);
  return h + fc2_->forward(torch::gelu(fc1_->forward(ln2_->forward(h))));
}

torch::Tensor TransformerBlockImpl::forward_cached(const torch::Tensor& x, torch::Tensor& keys,
                                                   torch::Tensor& values) {
  const auto b = x.size(0);
  const auto t = x.size(1);
  const auto dh = width_ / heads_;
  auto qkv = qkv_->forward(ln1_->forward(x)).view({b, t, 3, heads_, dh}).permute({2, 0, 3, 1, 4});
  const int64_t offset = keys.defined() ? keys.size(2) : 0;
  keys = keys.defined() ? torch::cat({keys, qkv[1]}, 2) : qkv[1].contiguous();
  values = values.defined() ? torch::cat({values, qkv[2]}, 2) : qkv[2].contiguous();
  auto att = attend(qkv[0], keys, values, offset, /*causal=*/true);
  att = att.transpose(1, 2).reshape({b, t, width_});
  auto h = x + proj_->forward(att);
  return h + fc2_->forward(torch::gelu(fc1_->forward(ln2_->forward(h))));
}

}  // namespace sde::nn
