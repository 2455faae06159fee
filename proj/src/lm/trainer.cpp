#include "sde/lm/trainer.hpp"

#include <random>

#include "sde/errors.hpp"
#include "sde/tensor_utils.hpp"

namespace sde::lm {
namespace {

optim::NamedTensors named_params(const torch::nn::Module& m) {
  optim::NamedTensors out;
  for (const auto& item : m.named_parameters(true)) out.emplace_back(item.key(), item.value());
  return out;
}

}  // namespace

std::vector<std::size_t> batch_indices(uint64_t seed, int64_t step, std::size_t corpus_size, int64_t batch_size) {
  if (corpus_size == 0) throw InvalidInput("empty training corpus");
  std::mt19937_64 rng(derive_seed(seed, static_cast<uint64_t>(step)));
  std::uniform_int_distribution<std::size_t> pick(0, corpus_size - 1);
  std::vector<std::size_t> out(static_cast<std::size_t>(batch_size));
  for (auto& i : out) i = pick(rng);
  return out;
}

LmTrainer::LmTrainer(ARModel model, VocabLayout layout, optim::OptimConfig optim, uint64_t seed, int64_t batch_size)
    : model_(std::move(model)),
      layout_(layout),
      optim_(optim),
      seed_(seed),
      batch_size_(batch_size),
      opt_(optim::make_adamw(model_->parameters(), optim)) {
  if (batch_size <= 0) throw ConfigError("lm batch size must be positive");
}

LmStepReport LmTrainer::train_step(std::span<const SequenceSample> corpus, int64_t step) {
  std::vector<SequenceSample> picked;
  for (auto i : batch_indices(seed_, step, corpus.size(), batch_size_)) picked.push_back(corpus[i]);
  const auto batch = collate(picked, layout_);

  LmStepReport report;
  report.lr = optim::cosine_warmup_lr(optim_, step);
  optim::set_lr(opt_, report.lr);
  model_->train();
  opt_.zero_grad();
  const auto t = batch.ids.size(1);
  auto logits = model_->forward(batch.ids.slice(1, 0, t - 1));
  auto loss = lm_loss_from_logits(logits, batch);
  if (!all_finite(loss.loss)) throw TrainingDivergence("lm_loss");
  loss.loss.backward();
  for (const auto& p : model_->parameters()) {
    if (p.grad().defined() && !all_finite(p.grad())) throw TrainingDivergence("lm gradient");
  }
  opt_.step();
  report.loss = loss.loss.item<double>();
  report.recompute = masked_ce_recompute(logits, batch);
  report.per_kind = loss.per_kind;
  return report;
}

optim::NamedTensors LmTrainer::optimizer_state() {
  return optim::export_adamw_state(opt_, named_params(*model_), "opt.");
}

void LmTrainer::load_optimizer_state(const optim::NamedTensors& state) {
  optim::import_adamw_state(opt_, named_params(*model_), state, "opt.");
}

}  // namespace sde::lm
