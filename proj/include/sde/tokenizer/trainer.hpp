#pragma once

#include <torch/torch.h>

#include <memory>
#include <optional>

#include "sde/adversarial/discriminator.hpp"
#include "sde/adversarial/perceptual.hpp"
#include "sde/optim/adamw.hpp"
#include "sde/semantic/target.hpp"
#include "sde/tokenizer/model.hpp"
#include "sde/vq/codebook_stats.hpp"

namespace sde::tokenizer {

struct TrainBatch {
  torch::Tensor images;  // [B, 3, S, S]
  semantic::SemanticTarget target;
};

/// Result of one optimizer step.
struct StepReport {
  LossReport loss;
  double lr = 0.0;
  std::optional<double> disc_loss;  // set when the discriminator was updated
  int64_t restarted_codes = 0;
};

/// Owns the tokenizer and discriminator optimizers. Single writer: only this
/// object mutates the model, codebook and discriminator during training.
class TokenizerTrainer {
 public:
  /// `disc_start` < 0 resolves to 20% of `optim.total_steps`.
  TokenizerTrainer(SDEModel model, adversarial::PatchDiscriminator disc, adversarial::PerceptualNet perceptual,
                   optim::OptimConfig optim, uint64_t seed = 0);

  /// One AdamW update of the tokenizer from l_total at the scheduled learning
  /// rate, followed (when step >= disc_start) by one discriminator update
  /// from the hinge loss. Throws TrainingDivergence on non-finite losses or
  /// gradients; in that case no parameter has been changed.
  StepReport train_step(const TrainBatch& batch, int64_t step);

  int64_t disc_start() const { return disc_start_; }
  const SDEModel& model() const { return model_; }
  const adversarial::PatchDiscriminator& discriminator() const { return disc_; }
  const adversarial::PerceptualNet& perceptual() const { return perceptual_; }

  optim::NamedTensors optimizer_state() ;
  void load_optimizer_state(const optim::NamedTensors& state);

 private:
  SDEModel model_;
  adversarial::PatchDiscriminator disc_;
  adversarial::PerceptualNet perceptual_;
  optim::OptimConfig optim_;
  uint64_t seed_;
  int64_t disc_start_;
  torch::optim::AdamW gen_opt_;
  torch::optim::AdamW disc_opt_;
  vq::CodeUsageCounter usage_;
};

}  // namespace sde::tokenizer
