#include "sde/tokenizer/model.hpp"

#include <cmath>
#include <numeric>

#include "sde/errors.hpp"
#include "sde/tensor_utils.hpp"

namespace sde::tokenizer {

namespace {

torch::nn::Conv2d conv(int64_t in, int64_t out, int64_t k, int64_t stride = 1) {
  const int64_t pad = k == 4 ? 1 : k / 2;
  return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, k).stride(stride).padding(pad));
}

torch::nn::GroupNorm group_norm(int64_t channels) {
  return torch::nn::GroupNorm(torch::nn::GroupNormOptions(std::gcd<int64_t>(channels, 8), channels));
}

torch::Tensor unit_rows(const torch::Tensor& t) {
  return t / (t.pow(2).sum(-1, /*keepdim=*/true) + 1e-12).sqrt();
}

void check_finite_term(const torch::Tensor& t, const char* name) {
  if (!all_finite(t)) throw TrainingDivergence(name);
}

}  // namespace

// ---------------------------------------------------------------- encoder / decoder

EncoderImpl::EncoderImpl(const SDEConfig& config) {
  const auto& ch = config.enc_channels;
  conv_in_ = register_module("conv_in", conv(3, ch.front(), 3));
  down_ = register_module("down", torch::nn::ModuleList());
  res_ = register_module("res", torch::nn::ModuleList());
  norm_ = register_module("norm", torch::nn::ModuleList());
  int64_t in = ch.front();
  for (const auto c : ch) {
    down_->push_back(conv(in, c, 4, 2));
    res_->push_back(conv(c, c, 3));
    norm_->push_back(group_norm(c));
    in = c;
  }
  norm_out_ = register_module("norm_out", group_norm(in));
  conv_out_ = register_module("conv_out", conv(in, config.enc_width, 3));
}

torch::Tensor EncoderImpl::forward(const torch::Tensor& images) {
  auto h = torch::silu(conv_in_->forward(images * 2.0 - 1.0));
  for (std::size_t i = 0; i < down_->size(); ++i) {
    h = down_[i]->as<torch::nn::Conv2d>()->forward(h);
    h = h + res_[i]->as<torch::nn::Conv2d>()->forward(torch::silu(norm_[i]->as<torch::nn::GroupNorm>()->forward(h)));
  }
  return conv_out_->forward(torch::silu(norm_out_->forward(h)));
}

ImageDecoderImpl::ImageDecoderImpl(const SDEConfig& config) {
  std::vector<int64_t> ch(config.enc_channels.rbegin(), config.enc_channels.rend());
  conv_in_ = register_module("conv_in", conv(config.code_dim, ch.front(), 3));
  up_ = register_module("up", torch::nn::ModuleList());
  res_ = register_module("res", torch::nn::ModuleList());
  norm_ = register_module("norm", torch::nn::ModuleList());
  int64_t in = ch.front();
  for (const auto c : ch) {
    up_->push_back(conv(in, c, 3));
    res_->push_back(conv(c, c, 3));
    norm_->push_back(group_norm(c));
    in = c;
  }
  norm_out_ = register_module("norm_out", group_norm(in));
  conv_out_ = register_module("conv_out", conv(in, 3, 3));
}

torch::Tensor ImageDecoderImpl::forward(const torch::Tensor& codes_chw) {
  auto h = conv_in_->forward(codes_chw);
  namespace F = torch::nn::functional;
  for (std::size_t i = 0; i < up_->size(); ++i) {
    h = F::interpolate(h, F::InterpolateFuncOptions().scale_factor(std::vector<double>{2.0, 2.0}).mode(torch::kNearest));
    h = up_[i]->as<torch::nn::Conv2d>()->forward(h);
    h = h + res_[i]->as<torch::nn::Conv2d>()->forward(torch::silu(norm_[i]->as<torch::nn::GroupNorm>()->forward(h)));
  }
  return torch::sigmoid(conv_out_->forward(torch::silu(norm_out_->forward(h))));
}

SemanticDecoderImpl::SemanticDecoderImpl(const SDEConfig& config) {
  const auto grid = config.grid_size();
  in_ = register_module("in", torch::nn::Linear(config.code_dim, config.sem_width));
  pos_ = register_parameter("pos", torch::zeros({grid * grid, config.sem_width}));
  blocks_ = register_module("blocks", torch::nn::ModuleList());
  for (int64_t i = 0; i < config.sem_layers; ++i) {
    blocks_->push_back(nn::TransformerBlock(config.sem_width, config.sem_heads));
  }
  ln_ = register_module("ln", torch::nn::LayerNorm(torch::nn::LayerNormOptions({config.sem_width})));
  head_ = register_module("head", torch::nn::Linear(config.sem_width, config.sem_dim));
}

torch::Tensor SemanticDecoderImpl::forward(const torch::Tensor& zq) {
  const auto b = zq.size(0);
  const auto h = zq.size(1);
  const auto w = zq.size(2);
  if (h * w != pos_.size(0)) throw ContractViolation("semantic decoder: grid does not match positional table");
  auto x = in_->forward(zq.reshape({b, h * w, zq.size(3)})) + pos_.unsqueeze(0);
  for (const auto& blk : *blocks_) x = blk->as<nn::TransformerBlock>()->forward(x, /*causal=*/false);
  auto out = head_->forward(ln_->forward(x));
  return out.reshape({b, h, w, out.size(-1)});
}

// ---------------------------------------------------------------- SDE model

SDEModelImpl::SDEModelImpl(SDEConfig config, uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  encoder = register_module("encoder", Encoder(config_));
  sem_proj = register_module("sem_proj", torch::nn::Linear(config_.sem_dim, config_.enc_width));
  to_code = register_module("to_code", torch::nn::Linear(config_.enc_width, config_.code_dim));
  sem_decoder = register_module("sem_decoder", SemanticDecoder(config_));
  decoder = register_module("decoder", ImageDecoder(config_));

  nn::seeded_init(*encoder, derive_seed(seed, 1));
  nn::seeded_init(*sem_proj, derive_seed(seed, 2));
  nn::seeded_init(*to_code, derive_seed(seed, 3));
  nn::seeded_init(*sem_decoder, derive_seed(seed, 4));
  nn::seeded_init(*decoder, derive_seed(seed, 5));
  {
    torch::NoGradGuard no_grad;
    auto gen = seeded_generator(derive_seed(seed, 6));
    auto pos = sem_decoder->named_parameters(false)["pos"];
    pos.copy_(torch::randn(pos.sizes(), gen, pos.scalar_type()) * 0.02);
    if (!config_.fusion) {
      sem_proj->weight.zero_();
      sem_proj->bias.zero_();
      sem_proj->weight.set_requires_grad(false);
      sem_proj->bias.set_requires_grad(false);
    }
  }
  // Registered last so the codebook seed stream is independent of layer sizes.
  codebook = register_module("codebook", vq::Codebook(config_.codebook_size, config_.code_dim, derive_seed(seed, 7)));
}

std::vector<torch::Tensor> SDEModelImpl::trainable_parameters() const {
  std::vector<torch::Tensor> out;
  for (const auto& p : parameters(true)) {
    if (p.requires_grad()) out.push_back(p);
  }
  return out;
}

torch::Tensor SDEModelImpl::code_entries() const {
  const auto& e = codebook->entries();
  return config_.codebook_l2_norm ? unit_rows(e) : e;
}

torch::Tensor SDEModelImpl::encode_plain(const torch::Tensor& images) {
  validate_images(images, config_);
  auto features = encoder->forward(images).permute({0, 2, 3, 1});
  auto z = to_code->forward(features);
  return config_.codebook_l2_norm ? unit_rows(z) : z;
}

torch::Tensor SDEModelImpl::encode_fused(const torch::Tensor& images, const semantic::SemanticTarget& target) {
  validate_images(images, config_);
  auto features = encoder->forward(images).permute({0, 2, 3, 1});  // [B, h, w, enc_width]
  semantic::validate_target(target, features.size(1), features.size(2));
  if (target.features.dim() != 4 || target.features.size(0) != images.size(0)) {
    throw ContractViolation("encode_fused: target batch " + shape_string(target.features) +
                            " does not match images " + shape_string(images));
  }
  if (target.feature_dim() != config_.sem_dim) {
    throw ContractViolation("encode_fused: target d_sem " + std::to_string(target.feature_dim()) +
                            " differs from configured " + std::to_string(config_.sem_dim));
  }
  auto t = target.features.detach().to(features.scalar_type());
  auto z = to_code->forward(features + sem_proj->forward(t));
  return config_.codebook_l2_norm ? unit_rows(z) : z;
}

torch::Tensor SDEModelImpl::tokenize(const torch::Tensor& images, const semantic::SemanticTarget& target) {
  torch::NoGradGuard no_grad;
  auto z = encode_fused(images, target);
  auto grid_shape = z.sizes().vec();
  grid_shape.pop_back();
  require_finite(z, "tokenize features");
  return vq::nearest_codes(z.reshape({-1, config_.code_dim}), code_entries()).reshape(grid_shape);
}

torch::Tensor SDEModelImpl::decode(const torch::Tensor& zq) { return decoder->forward(zq.permute({0, 3, 1, 2})); }

torch::Tensor SDEModelImpl::decode_semantic(const torch::Tensor& zq) { return sem_decoder->forward(zq); }

torch::Tensor SDEModelImpl::reconstruct(const torch::Tensor& codes) {
  auto grid = codes.dim() == 2 ? codes.unsqueeze(0) : codes;
  if (grid.dim() != 3 || grid.size(1) != config_.grid_size() || grid.size(2) != config_.grid_size()) {
    throw ContractViolation("reconstruct: expected a " + std::to_string(config_.grid_size()) + "x" +
                            std::to_string(config_.grid_size()) + " code grid, got " + shape_string(codes));
  }
  torch::NoGradGuard no_grad;
  codebook->lookup(grid);  // range check
  auto entries = code_entries();
  auto zq = entries.index_select(0, grid.reshape({-1}).to(torch::kLong))
                .reshape({grid.size(0), grid.size(1), grid.size(2), entries.size(1)});
  return decode(zq).clamp(0.0, 1.0);
}

// ---------------------------------------------------------------- losses

void validate_images(const torch::Tensor& images, const SDEConfig& config) {
  if (images.dim() != 4 || images.size(1) != 3) {
    throw ContractViolation("images must be [B, 3, H, W], got " + shape_string(images));
  }
  if (images.size(2) % config.downsample != 0 || images.size(3) % config.downsample != 0) {
    throw ContractViolation("image size must be divisible by the downsample factor " +
                            std::to_string(config.downsample));
  }
  if (images.size(2) != config.image_size || images.size(3) != config.image_size) {
    throw ContractViolation("images must be " + std::to_string(config.image_size) + "x" +
                            std::to_string(config.image_size) + ", got " + shape_string(images));
  }
  require_finite(images, "images");
  auto d = images.detach();
  if (d.min().item<double>() < 0.0 || d.max().item<double>() > 1.0) {
    throw InvalidInput("images must be normalized to [0, 1]");
  }
}

torch::Tensor semantic_loss(const torch::Tensor& decoded, const torch::Tensor& target) {
  require_same_shape(decoded, target, "semantic_loss");
  auto t = target.detach();
  auto dot = (decoded * t).sum(-1);
  auto denom = decoded.norm(2, -1) * t.norm(2, -1) + 1e-8;
  auto cos = torch::clamp(dot / denom, -1.0, 1.0);
  return (1.0 - cos).mean();
}

double LossReport::identity_residual() const {
  return std::abs(l_total - (w_sem * l_sem + l_l2 + l_perceptual + lambda_g * l_gen + l_vq));
}

void to_json(nlohmann::json& j, const LossReport& r) {
  j = nlohmann::json{{"l_sem", r.l_sem},     {"l_l2", r.l_l2},       {"l_perceptual", r.l_perceptual},
                     {"l_gen", r.l_gen},     {"l_vq", r.l_vq},       {"l_total", r.l_total},
                     {"lambda_g", r.lambda_g}, {"w_sem", r.w_sem}};
}

LossBreakdown total_loss(SDEModelImpl& model, const torch::Tensor& images, const semantic::SemanticTarget& target,
                         const adversarial::PerceptualNet& perceptual, adversarial::PatchDiscriminatorImpl* disc,
                         int64_t step, int64_t disc_start) {
  if (step < 0) throw ContractViolation("total_loss: step must be non-negative");
  const auto& cfg = model.config();
  LossBreakdown out;

  auto z = model.encode_fused(images, target);
  out.features = z;
  out.quantization = vq::quantize(z, model.code_entries(), cfg.beta);
  const auto& q = out.quantization;

  // Image branch: standard straight-through, the codebook learns from L_vq.
  out.reconstruction = model.decode(vq::straight_through(z, q.quantized));

  // Semantic branch: forward value z_q, gradient reaches both the codebook
  // rows and (straight-through) the encoder.
  auto t = target.features.detach().to(z.scalar_type());
  if (cfg.w_sem > 0.0) {
    auto sem_in = q.quantized + (z - z.detach());
    out.sem = semantic_loss(model.decode_semantic(sem_in), t);
  } else {
    torch::NoGradGuard no_grad;
    out.sem = semantic_loss(model.decode_semantic(q.quantized.detach()), t);
  }

  out.l2 = (out.reconstruction - images).pow(2).mean();
  out.perceptual = adversarial::perceptual_loss(perceptual, images, out.reconstruction);

  const bool adversarial_on = disc != nullptr && step >= disc_start;
  const double lambda = adversarial_on ? cfg.lambda_g : 0.0;
  out.gen = adversarial_on ? -disc->forward(out.reconstruction).mean() : torch::zeros({}, images.options());

  out.vq = vq::vq_loss(q);
  out.total = cfg.w_sem * out.sem + out.l2 + out.perceptual + lambda * out.gen + out.vq;

  check_finite_term(out.sem, "l_sem");
  check_finite_term(out.l2, "l_l2");
  check_finite_term(out.perceptual, "l_perceptual");
  check_finite_term(out.gen, "l_gen");
  check_finite_term(out.vq, "l_vq");
  check_finite_term(out.total, "l_total");

  auto& r = out.report;
  r.l_sem = out.sem.item<double>();
  r.l_l2 = out.l2.item<double>();
  r.l_perceptual = out.perceptual.item<double>();
  r.l_gen = out.gen.item<double>();
  r.l_vq = out.vq.item<double>();
  r.l_total = out.total.item<double>();
  r.lambda_g = lambda;
  r.w_sem = cfg.w_sem;
  return out;
}

}  // namespace sde::tokenizer
