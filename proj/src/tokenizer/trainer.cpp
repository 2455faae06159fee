#include "sde/tokenizer/trainer.hpp"

#include "sde/errors.hpp"
#include "sde/tensor_utils.hpp"

namespace sde::tokenizer {

namespace {

int64_t resolve_disc_start(int64_t configured, int64_t total_steps) {
  return configured >= 0 ? configured : total_steps / 5;
}

optim::NamedTensors named(const torch::nn::Module& m, bool trainable_only) {
  optim::NamedTensors out;
  for (const auto& item : m.named_parameters(true)) {
    if (!trainable_only || item.value().requires_grad()) out.emplace_back(item.key(), item.value());
  }
  return out;
}

bool grads_finite(const std::vector<torch::Tensor>& params) {
  for (const auto& p : params) {
    if (p.grad().defined() && !all_finite(p.grad())) return false;
  }
  return true;
}

}  // namespace

TokenizerTrainer::TokenizerTrainer(SDEModel model, adversarial::PatchDiscriminator disc,
                                   adversarial::PerceptualNet perceptual, optim::OptimConfig optim, uint64_t seed)
    : model_(std::move(model)),
      disc_(std::move(disc)),
      perceptual_(std::move(perceptual)),
      optim_(optim),
      seed_(seed),
      disc_start_(resolve_disc_start(model_->config().disc_start, optim.total_steps)),
      gen_opt_(optim::make_adamw(model_->trainable_parameters(), optim)),
      disc_opt_(optim::make_adamw(disc_->parameters(), optim)),
      usage_(model_->config().codebook_size) {}

StepReport TokenizerTrainer::train_step(const TrainBatch& batch, int64_t step) {
  if (batch.images.numel() == 0 || batch.images.size(0) == 0) throw ContractViolation("train_step: empty batch");
  StepReport report;
  report.lr = optim::cosine_warmup_lr(optim_, step);
  optim::set_lr(gen_opt_, report.lr);
  optim::set_lr(disc_opt_, report.lr);

  model_->train();
  gen_opt_.zero_grad();
  disc_opt_.zero_grad();
  auto out = total_loss(*model_, batch.images, batch.target, perceptual_, disc_.get(), step, disc_start_);
  out.total.backward();
  const auto gen_params = model_->trainable_parameters();
  if (!grads_finite(gen_params)) throw TrainingDivergence("tokenizer gradient");

  if (step >= disc_start_) {
    // Discriminator gradients from the generator pass are discarded here.
    disc_opt_.zero_grad();
    auto logits_real = disc_->forward(batch.images.detach());
    auto logits_fake = disc_->forward(out.reconstruction.detach());
    auto losses = adversarial::hinge_losses(logits_real, logits_fake, logits_fake);
    if (!all_finite(losses.disc)) throw TrainingDivergence("l_disc");
    losses.disc.backward();
    if (!grads_finite(disc_->parameters())) throw TrainingDivergence("discriminator gradient");
    gen_opt_.step();
    disc_opt_.step();
    report.disc_loss = losses.disc.item<double>();
  } else {
    gen_opt_.step();
  }

  const auto& cfg = model_->config();
  if (cfg.dead_code_restart) {
    usage_.add(out.quantization.codes);
    if ((step + 1) % cfg.dead_code_interval == 0) {
      auto features = out.features.detach().reshape({-1, cfg.code_dim});
      report.restarted_codes =
          vq::restart_dead_codes(*model_->codebook, usage_.histogram(), features, derive_seed(seed_, step));
      usage_ = vq::CodeUsageCounter(cfg.codebook_size);
    }
  }

  report.loss = out.report;
  return report;
}

optim::NamedTensors TokenizerTrainer::optimizer_state() {
  auto out = optim::export_adamw_state(gen_opt_, named(*model_, true), "gen_opt.");
  auto d = optim::export_adamw_state(disc_opt_, named(*disc_, false), "disc_opt.");
  out.insert(out.end(), d.begin(), d.end());
  return out;
}

void TokenizerTrainer::load_optimizer_state(const optim::NamedTensors& state) {
  optim::import_adamw_state(gen_opt_, named(*model_, true), state, "gen_opt.");
  optim::import_adamw_state(disc_opt_, named(*disc_, false), state, "disc_opt.");
}

}  // namespace sde::tokenizer
