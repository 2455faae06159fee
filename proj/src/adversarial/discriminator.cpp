#include "sde/adversarial/discriminator.hpp"

#include <algorithm>

#include "sde/errors.hpp"
#include "sde/nn/layers.hpp"
#include "sde/tensor_utils.hpp"

namespace sde::adversarial {

PatchDiscriminatorImpl::PatchDiscriminatorImpl(int64_t base_channels, int64_t num_layers, uint64_t seed) {
  if (base_channels <= 0 || num_layers <= 0) throw ContractViolation("PatchDiscriminator: sizes must be positive");
  convs_ = register_module("convs", torch::nn::ModuleList());
  int64_t in = 3;
  int64_t out = base_channels;
  for (int64_t i = 0; i < num_layers; ++i) {
    convs_->push_back(torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 4).stride(2).padding(1)));
    in = out;
    out *= 2;
  }
  head_ = register_module("head", torch::nn::Conv2d(torch::nn::Conv2dOptions(in, 1, 1)));
  nn::seeded_init(*this, seed);
}

torch::Tensor PatchDiscriminatorImpl::forward(const torch::Tensor& images) {
  auto h = images * 2.0 - 1.0;
  // Inputs smaller than the receptive stride are upsampled so every image
  // yields at least one patch logit.
  const int64_t need = int64_t{1} << convs_->size();
  if (h.size(2) < need || h.size(3) < need) {
    namespace F = torch::nn::functional;
    h = F::interpolate(h, F::InterpolateFuncOptions()
                              .size(std::vector<int64_t>{std::max(h.size(2), need), std::max(h.size(3), need)})
                              .mode(torch::kNearest));
  }
  for (const auto& m : *convs_) {
    h = torch::leaky_relu(m->as<torch::nn::Conv2d>()->forward(h), 0.2);
  }
  return head_->forward(h);
}

GanLosses hinge_losses(const torch::Tensor& logits_real, const torch::Tensor& logits_fake_detached,
                       const torch::Tensor& logits_fake) {
  GanLosses out;
  out.disc = torch::relu(1.0 - logits_real).mean() + torch::relu(1.0 + logits_fake_detached).mean();
  out.gen = -logits_fake.mean();
  return out;
}

GanLosses gan_losses(PatchDiscriminatorImpl& disc, const torch::Tensor& real, const torch::Tensor& fake) {
  require_same_shape(real, fake, "gan_losses");
  auto logits_real = disc.forward(real.detach());
  auto logits_fake_detached = disc.forward(fake.detach());
  auto logits_fake = disc.forward(fake);
  return hinge_losses(logits_real, logits_fake_detached, logits_fake);
}

}  // namespace sde::adversarial
