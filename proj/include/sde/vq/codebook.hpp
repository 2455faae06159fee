#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <vector>

namespace sde::vq {

/// Learned discrete vocabulary: K entries of dimension d stored as a [K, d]
/// parameter. K and d are fixed at construction.
class CodebookImpl : public torch::nn::Module {
 public:
  /// Entries drawn uniformly from [-1/K, 1/K] using `seed`.
  CodebookImpl(int64_t num_entries, int64_t dim, uint64_t seed);

  int64_t size() const noexcept { return num_entries_; }
  int64_t dim() const noexcept { return dim_; }

  const torch::Tensor& entries() const noexcept { return entries_; }
  torch::Tensor& entries() noexcept { return entries_; }

  /// Embedding lookup for an integer grid of any shape; result has a trailing
  /// dimension d. Gradients flow into the selected rows. Throws InvalidInput
  /// for codes outside [0, K).
  torch::Tensor lookup(const torch::Tensor& codes) const;

 private:
  int64_t num_entries_;
  int64_t dim_;
  torch::Tensor entries_;
};
TORCH_MODULE(Codebook);

/// Replaces entries whose usage count is zero with randomly chosen rows of
/// `features` ([N, d]). Returns the number of restarted entries. Used only when
/// dead-code restart is switched on in the tokenizer config.
int64_t restart_dead_codes(CodebookImpl& codebook, const std::vector<uint64_t>& usage_counts,
                           const torch::Tensor& features, uint64_t seed);

}  // namespace sde::vq
