#include "sde/vq/codebook.hpp"

#include <random>

#include "sde/errors.hpp"
#include "sde/tensor_utils.hpp"

namespace sde::vq {

CodebookImpl::CodebookImpl(int64_t num_entries, int64_t dim, uint64_t seed)
    : num_entries_(num_entries), dim_(dim) {
  if (num_entries <= 0 || dim <= 0) {
    throw ContractViolation("codebook: K and d must be positive");
  }
  auto gen = seeded_generator(seed);
  const double bound = 1.0 / static_cast<double>(num_entries);
  auto init = torch::rand({num_entries, dim}, gen, torch::kFloat32) * (2.0 * bound) - bound;
  entries_ = register_parameter("entries", init);
}

torch::Tensor CodebookImpl::lookup(const torch::Tensor& codes) const {
  if (codes.numel() > 0) {
    const auto lo = codes.min().item<int64_t>();
    const auto hi = codes.max().item<int64_t>();
    if (lo < 0 || hi >= num_entries_) {
      throw InvalidInput("codebook lookup: code out of range [0, " + std::to_string(num_entries_) + ")");
    }
  }
  auto flat = codes.reshape({-1}).to(torch::kLong);
  auto rows = entries_.index_select(0, flat);
  auto out_shape = codes.sizes().vec();
  out_shape.push_back(dim_);
  return rows.reshape(out_shape);
}

int64_t restart_dead_codes(CodebookImpl& codebook, const std::vector<uint64_t>& usage_counts,
                           const torch::Tensor& features, uint64_t seed) {
  if (static_cast<int64_t>(usage_counts.size()) != codebook.size()) {
    throw ContractViolation("restart_dead_codes: usage histogram has wrong length");
  }
  if (features.dim() != 2 || features.size(1) != codebook.dim() || features.size(0) == 0) {
    throw ContractViolation("restart_dead_codes: features must be [N, d] with N > 0");
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int64_t> pick(0, features.size(0) - 1);
  auto src = features.detach().to(codebook.entries().scalar_type());
  int64_t restarted = 0;
  torch::NoGradGuard no_grad;
  for (int64_t k = 0; k < codebook.size(); ++k) {
    if (usage_counts[static_cast<std::size_t>(k)] != 0) continue;
    codebook.entries()[k].copy_(src[pick(rng)]);
    ++restarted;
  }
  return restarted;
}

}  // namespace sde::vq
