#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <span>
#include <vector>

namespace sde::vq {

struct CodebookStats {
  double usage_fraction = 0.0;  // distinct codes seen / K
  double perplexity = 1.0;      // exp(entropy), natural log
};

/// Streaming histogram of code usage.
class CodeUsageCounter {
 public:
  explicit CodeUsageCounter(int64_t num_entries);

  /// Accepts an integer tensor of any shape. Throws InvalidInput on codes
  /// outside [0, K); in that case the counter is left unchanged.
  void add(const torch::Tensor& codes);
  void add(std::span<const int64_t> codes);

  const std::vector<uint64_t>& histogram() const noexcept { return counts_; }
  uint64_t total() const noexcept { return total_; }
  int64_t num_entries() const noexcept { return static_cast<int64_t>(counts_.size()); }

  /// Throws InvalidInput if nothing has been added.
  CodebookStats stats() const;

 private:
  std::vector<uint64_t> counts_;
  uint64_t total_ = 0;
};

CodebookStats codebook_stats(const std::vector<torch::Tensor>& code_grids, int64_t num_entries);

}  // namespace sde::vq
