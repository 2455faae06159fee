#pragma once

#include <torch/torch.h>

#include <map>
#include <span>

#include "sde/lm/objective.hpp"
#include "sde/optim/adamw.hpp"

namespace sde::lm {

struct LmStepReport {
  double loss = 0.0;
  double recompute = 0.0;  // masked_ce_recompute on the same logits
  std::map<SampleKind, double> per_kind;
  double lr = 0.0;
};

/// Indices of the samples used at `step`; a pure function of its arguments so
/// resumed runs see the same batches.
std::vector<std::size_t> batch_indices(uint64_t seed, int64_t step, std::size_t corpus_size, int64_t batch_size);

class LmTrainer {
 public:
  LmTrainer(ARModel model, VocabLayout layout, optim::OptimConfig optim, uint64_t seed, int64_t batch_size);

  LmStepReport train_step(std::span<const SequenceSample> corpus, int64_t step);

  const ARModel& model() const { return model_; }
  optim::NamedTensors optimizer_state();
  void load_optimizer_state(const optim::NamedTensors& state);

 private:
  ARModel model_;
  VocabLayout layout_;
  optim::OptimConfig optim_;
  uint64_t seed_;
  int64_t batch_size_;
  torch::optim::AdamW opt_;
};

}  // namespace sde::lm
