#include "sde/lm/objective.hpp"

#include "sde/errors.hpp"
#include "sde/tensor_utils.hpp"

namespace sde::lm {

LmBatch collate(std::span<const SequenceSample> samples, const VocabLayout& layout) {
  if (samples.empty()) throw InvalidInput("collate: empty batch");
  std::size_t longest = 0;
  for (const auto& s : samples) {
    if (s.ids.size() != s.loss_mask.size()) throw ContractViolation("collate: mask/ids length mismatch");
    longest = std::max(longest, s.ids.size());
  }
  const auto b = static_cast<int64_t>(samples.size());
  const auto t = static_cast<int64_t>(longest);
  LmBatch batch;
  batch.ids = torch::full({b, t}, layout.pad(), torch::kLong);
  batch.mask = torch::zeros({b, t}, torch::kBool);
  auto ids = batch.ids.accessor<int64_t, 2>();
  auto mask = batch.mask.accessor<bool, 2>();
  for (int64_t i = 0; i < b; ++i) {
    const auto& s = samples[static_cast<std::size_t>(i)];
    for (std::size_t p = 0; p < s.ids.size(); ++p) {
      ids[i][static_cast<int64_t>(p)] = s.ids[p];
      mask[i][static_cast<int64_t>(p)] = s.loss_mask[p] != 0;
    }
    batch.kinds.push_back(s.kind);
  }
  return batch;
}

LmLoss lm_loss_from_logits(const torch::Tensor& logits, const LmBatch& batch) {
  const auto t = batch.ids.size(1);
  if (t < 2) throw EmptyTargetError("lm_loss: sequences shorter than two tokens");
  if (logits.size(0) != batch.ids.size(0) || logits.size(1) < t - 1) {
    throw ContractViolation("lm_loss: logits " + shape_string(logits) + " do not cover ids " +
                            shape_string(batch.ids));
  }
  auto pred = logits.slice(1, 0, t - 1);
  auto targets = batch.ids.slice(1, 1, t);
  auto sel = batch.mask.slice(1, 1, t);
  const auto count = sel.sum().item<int64_t>();
  if (count == 0) throw EmptyTargetError("lm_loss: no target positions in batch");

  auto per_pos = torch::nn::functional::cross_entropy(
      pred.reshape({-1, pred.size(-1)}), targets.reshape({-1}),
      torch::nn::functional::CrossEntropyFuncOptions().reduction(torch::kNone));
  per_pos = per_pos.view_as(targets);
  auto selected = sel.to(per_pos.scalar_type());

  LmLoss out;
  out.targets = count;
  out.loss = (per_pos * selected).sum() / static_cast<double>(count);
  auto detached = (per_pos * selected).detach().sum(1);
  auto counts = sel.sum(1);
  std::map<SampleKind, std::pair<double, int64_t>> acc;
  for (int64_t i = 0; i < batch.ids.size(0); ++i) {
    auto& slot = acc[batch.kinds.at(static_cast<std::size_t>(i))];
    slot.first += detached[i].item<double>();
    slot.second += counts[i].item<int64_t>();
  }
  for (const auto& [kind, v] : acc) {
    if (v.second > 0) out.per_kind[kind] = v.first / static_cast<double>(v.second);
  }
  return out;
}

LmLoss lm_loss(ARModelImpl& model, const LmBatch& batch) {
  const auto t = batch.ids.size(1);
  if (t < 2) throw EmptyTargetError("lm_loss: sequences shorter than two tokens");
  return lm_loss_from_logits(model.forward(batch.ids.slice(1, 0, t - 1)), batch);
}

double masked_ce_recompute(const torch::Tensor& logits, const LmBatch& batch) {
  torch::NoGradGuard no_grad;
  auto logp = torch::log_softmax(logits.detach().to(torch::kFloat64), -1);
  auto lp = logp.accessor<double, 3>();
  auto ids = batch.ids.accessor<int64_t, 2>();
  auto mask = batch.mask.accessor<bool, 2>();
  double total = 0.0;
  int64_t count = 0;
  for (int64_t b = 0; b < batch.ids.size(0); ++b) {
    for (int64_t t = 0; t + 1 < batch.ids.size(1); ++t) {
      if (!mask[b][t + 1]) continue;
      total -= lp[b][t][ids[b][t + 1]];
      ++count;
    }
  }
  if (count == 0) throw EmptyTargetError("masked_ce_recompute: no target positions");
  return total / static_cast<double>(count);
}

}  // namespace sde::lm
