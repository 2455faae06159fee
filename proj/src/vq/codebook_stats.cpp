#include "sde/vq/codebook_stats.hpp"

#include <cmath>

#include "sde/errors.hpp"

namespace sde::vq {

CodeUsageCounter::CodeUsageCounter(int64_t num_entries) {
  if (num_entries <= 0) throw ContractViolation("CodeUsageCounter: K must be positive");
  counts_.assign(static_cast<std::size_t>(num_entries), 0);
}

void CodeUsageCounter::add(std::span<const int64_t> codes) {
  const auto k = static_cast<int64_t>(counts_.size());
  for (const auto c : codes) {
    if (c < 0 || c >= k) {
      throw InvalidInput("codebook_stats: code " + std::to_string(c) + " outside [0, " + std::to_string(k) + ")");
    }
  }
  for (const auto c : codes) ++counts_[static_cast<std::size_t>(c)];
  total_ += codes.size();
}

void CodeUsageCounter::add(const torch::Tensor& codes) {
  auto flat = codes.detach().to(torch::kCPU, torch::kLong).contiguous().reshape({-1});
  add(std::span<const int64_t>(flat.data_ptr<int64_t>(), static_cast<std::size_t>(flat.numel())));
}

CodebookStats CodeUsageCounter::stats() const {
  if (total_ == 0) throw InvalidInput("codebook_stats: no codes observed");
  CodebookStats s;
  std::size_t distinct = 0;
  double entropy = 0.0;
  const auto n = static_cast<double>(total_);
  for (const auto c : counts_) {
    if (c == 0) continue;
    ++distinct;
    const double p = static_cast<double>(c) / n;
    entropy -= p * std::log(p);
  }
  s.usage_fraction = static_cast<double>(distinct) / static_cast<double>(counts_.size());
  s.perplexity = std::exp(entropy);
  return s;
}

CodebookStats codebook_stats(const std::vector<torch::Tensor>& code_grids, int64_t num_entries) {
  CodeUsageCounter counter(num_entries);
  for (const auto& g : code_grids) counter.add(g);
  return counter.stats();
}

}  // namespace sde::vq
