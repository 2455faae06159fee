#include "sde/adversarial/perceptual.hpp"

#include "sde/errors.hpp"
#include "sde/tensor_utils.hpp"

namespace sde::adversarial {

PerceptualNet::PerceptualNet(nn::ConvTrunk trunk, std::vector<double> layer_weights)
    : trunk_(std::move(trunk)), weights_(std::move(layer_weights)) {
  const auto layers = trunk_->channels().size();
  if (weights_.empty()) weights_.assign(layers, 1.0 / static_cast<double>(layers));
  if (weights_.size() != layers) throw ContractViolation("PerceptualNet: one weight per trunk layer required");
  freeze(*trunk_);
  trunk_->eval();
}

PerceptualNet PerceptualNet::random(uint64_t seed, std::vector<int64_t> channels) {
  nn::ConvTrunk trunk(std::move(channels));
  nn::seeded_init(*trunk, seed);
  return PerceptualNet(trunk);
}

void PerceptualNet::to(torch::Dtype dtype) { trunk_->to(dtype); }

torch::Tensor perceptual_loss(const PerceptualNet& net, const torch::Tensor& x, const torch::Tensor& y) {
  require_same_shape(x, y, "perceptual_loss");
  auto trunk = net.trunk();
  auto fx = trunk->features(x);
  auto fy = trunk->features(y);
  auto total = torch::zeros({}, x.options());
  // Inside the sqrt so all-zero activation vectors keep a finite gradient.
  constexpr double kEps = 1e-10;
  for (std::size_t l = 0; l < fx.size(); ++l) {
    auto nx = fx[l] / (fx[l].pow(2).sum(1, /*keepdim=*/true) + kEps).sqrt();
    auto ny = fy[l] / (fy[l].pow(2).sum(1, /*keepdim=*/true) + kEps).sqrt();
    auto per_position = (nx - ny).pow(2).sum(1);  // [B, h, w]
    total = total + net.layer_weights()[l] * per_position.mean();
  }
  return total;
}

}  // namespace sde::adversarial
