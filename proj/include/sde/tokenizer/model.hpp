#pragma once

#include <torch/torch.h>

#include <optional>

#include "sde/adversarial/discriminator.hpp"
#include "sde/adversarial/perceptual.hpp"
#include "sde/nn/layers.hpp"
#include "sde/semantic/target.hpp"
#include "sde/tokenizer/config.hpp"
#include "sde/vq/codebook.hpp"
#include "sde/vq/quantizer.hpp"

namespace sde::tokenizer {

/// Convolutional encoder: [B, 3, H, W] -> [B, enc_width, H/f, W/f].
class EncoderImpl : public torch::nn::Module {
 public:
  explicit EncoderImpl(const SDEConfig& config);
  torch::Tensor forward(const torch::Tensor& images);

 private:
  torch::nn::Conv2d conv_in_{nullptr}, conv_out_{nullptr};
  torch::nn::ModuleList down_, res_, norm_;
  torch::nn::GroupNorm norm_out_{nullptr};
};
TORCH_MODULE(Encoder);

/// Mirrored decoder: [B, d, h, w] -> [B, 3, h*f, w*f] in (0, 1).
class ImageDecoderImpl : public torch::nn::Module {
 public:
  explicit ImageDecoderImpl(const SDEConfig& config);
  torch::Tensor forward(const torch::Tensor& codes_chw);

 private:
  torch::nn::Conv2d conv_in_{nullptr}, conv_out_{nullptr};
  torch::nn::ModuleList up_, res_, norm_;
  torch::nn::GroupNorm norm_out_{nullptr};
};
TORCH_MODULE(ImageDecoder);

/// Transformer over the quantized grid with learned positions and a linear head
/// into teacher-feature space.
class SemanticDecoderImpl : public torch::nn::Module {
 public:
  explicit SemanticDecoderImpl(const SDEConfig& config);
  /// zq: [B, h, w, d] -> [B, h, w, d_sem]
  torch::Tensor forward(const torch::Tensor& zq);

 private:
  torch::nn::Linear in_{nullptr}, head_{nullptr};
  torch::Tensor pos_;
  torch::nn::ModuleList blocks_;
  torch::nn::LayerNorm ln_{nullptr};
};
TORCH_MODULE(SemanticDecoder);

class SDEModelImpl : public torch::nn::Module {
 public:
  SDEModelImpl(SDEConfig config, uint64_t seed);

  const SDEConfig& config() const { return config_; }

  /// Pre-quantization features z = to_code(Enc(x) + P_sem(T)), shape
  /// [B, H/f, W/f, d], unit-normalized when codebook_l2_norm is set. Throws
  /// ContractViolation if T's grid differs from the encoder grid.
  torch::Tensor encode_fused(const torch::Tensor& images, const semantic::SemanticTarget& target);

  /// to_code(Enc(x)) without the semantic term.
  torch::Tensor encode_plain(const torch::Tensor& images);

  /// Codes only: encode_fused followed by nearest-entry search. [B, h, w].
  torch::Tensor tokenize(const torch::Tensor& images, const semantic::SemanticTarget& target);

  /// Decodes a code grid [B, h, w] (or [h, w]) to images clamped to [0, 1].
  torch::Tensor reconstruct(const torch::Tensor& codes);

  /// Image decoder on (straight-through) quantized features [B, h, w, d].
  torch::Tensor decode(const torch::Tensor& zq);

  /// Semantic decoder on quantized features [B, h, w, d].
  torch::Tensor decode_semantic(const torch::Tensor& zq);

  /// The entry table quantization runs against: the raw codebook, or its
  /// row-normalized view when codebook_l2_norm is set.
  torch::Tensor code_entries() const;

  /// Parameters updated by the tokenizer optimizer (excludes pinned ones).
  std::vector<torch::Tensor> trainable_parameters() const;

  Encoder encoder{nullptr};
  torch::nn::Linear sem_proj{nullptr};
  torch::nn::Linear to_code{nullptr};
  vq::Codebook codebook{nullptr};
  SemanticDecoder sem_decoder{nullptr};
  ImageDecoder decoder{nullptr};

 private:
  SDEConfig config_;
};
TORCH_MODULE(SDEModel);

/// Mean over positions of (1 - cos(decoded, T)). decoded and T are
/// [..., d_sem]; T never receives gradient. Epsilon 1e-8 in the denominator.
torch::Tensor semantic_loss(const torch::Tensor& decoded, const torch::Tensor& target);

/// Plain-number view of one loss evaluation.
struct LossReport {
  double l_sem = 0.0;
  double l_l2 = 0.0;
  double l_perceptual = 0.0;
  double l_gen = 0.0;
  double l_vq = 0.0;
  double l_total = 0.0;
  double lambda_g = 0.0;  // 0 whenever the adversarial term is inactive
  double w_sem = 1.0;

  /// |l_total - (w_sem*l_sem + l_l2 + l_perceptual + lambda_g*l_gen + l_vq)|
  double identity_residual() const;
};

void to_json(nlohmann::json& j, const LossReport& r);

/// Everything produced by one forward pass of the tokenizer objective.
struct LossBreakdown {
  torch::Tensor sem, l2, perceptual, gen, vq, total;
  torch::Tensor features;        // pre-quantization z
  torch::Tensor reconstruction;  // x_hat
  vq::QuantizationResult quantization;
  LossReport report;
};

/// Full tokenizer objective for one batch. `disc` may be null when
/// `step < disc_start`. Throws TrainingDivergence naming the first
/// non-finite term.
LossBreakdown total_loss(SDEModelImpl& model, const torch::Tensor& images, const semantic::SemanticTarget& target,
                         const adversarial::PerceptualNet& perceptual, adversarial::PatchDiscriminatorImpl* disc,
                         int64_t step, int64_t disc_start);

/// Checks images are [B, 3, S, S] with S == config.image_size and values in [0, 1].
void validate_images(const torch::Tensor& images, const SDEConfig& config);

}  // namespace sde::tokenizer
