#pragma once

#include <torch/torch.h>

#include <map>
#include <span>

#include "sde/lm/model.hpp"
#include "sde/lm/sequence.hpp"

namespace sde::lm {

/// Right-padded batch. mask is false on padding.
struct LmBatch {
  torch::Tensor ids;   // [B, T] int64
  torch::Tensor mask;  // [B, T] bool
  std::vector<SampleKind> kinds;
};

/// Pads every sample to the longest one with layout.pad().
LmBatch collate(std::span<const SequenceSample> samples, const VocabLayout& layout);

struct LmLoss {
  torch::Tensor loss;                       // mean over all target positions
  std::map<SampleKind, double> per_kind;    // mean over each kind's target positions
  int64_t targets = 0;
};

/// Mean next-token cross-entropy over positions t with mask[t + 1] set,
/// predicting ids[t + 1]. Throws EmptyTargetError if no position qualifies.
LmLoss lm_loss_from_logits(const torch::Tensor& logits, const LmBatch& batch);
LmLoss lm_loss(ARModelImpl& model, const LmBatch& batch);

/// Sample-by-sample recompute of the same quantity with log-softmax, used as a
/// runtime cross-check in training logs.
double masked_ce_recompute(const torch::Tensor& logits, const LmBatch& batch);

}  // namespace sde::lm
