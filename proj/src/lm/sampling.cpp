#include "sde/lm/sampling.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "sde/errors.hpp"

namespace sde::lm {
namespace {

int64_t draw(const torch::Tensor& visual_logits, const SamplerConfig& cfg, std::mt19937_64& rng) {
  auto logits = visual_logits.to(torch::kFloat64).contiguous();
  const double* l = logits.data_ptr<double>();
  const auto n = logits.numel();
  if (cfg.temperature <= 0.0 || cfg.top_k == 1) {
    return static_cast<int64_t>(std::max_element(l, l + n) - l);
  }
  std::vector<int64_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::size_t keep = order.size();
  if (cfg.top_k > 0 && cfg.top_k < n) {
    keep = static_cast<std::size_t>(cfg.top_k);
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(),
                      [&](int64_t a, int64_t b) { return l[a] > l[b] || (l[a] == l[b] && a < b); });
    order.resize(keep);
  }
  double top = -std::numeric_limits<double>::infinity();
  for (auto i : order) top = std::max(top, l[i]);
  std::vector<double> weights;
  weights.reserve(keep);
  for (auto i : order) weights.push_back(std::exp((l[i] - top) / cfg.temperature));
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
  return order[pick(rng)];
}

}  // namespace

std::vector<int64_t> generate_image_tokens(ARModelImpl& model, std::span<const int64_t> prompt_ids,
                                           const VocabLayout& layout, int64_t grid_len,
                                           const SamplerConfig& sampler) {
  if (grid_len <= 0) throw InvalidInput("generate: grid_len must be positive");
  if (model.vocab_size() != layout.total()) throw ContractViolation("generate: model vocabulary != layout");
  std::vector<int64_t> prompt(prompt_ids.begin(), prompt_ids.end());
  if (prompt.empty()) prompt.push_back(layout.bos());
  for (auto id : prompt) {
    if (layout.is_visual(id) || id == layout.eoi()) throw InvalidInput("generate: prompt must end at or before soi");
  }
  if (prompt.back() != layout.soi()) prompt.push_back(layout.soi());
  if (static_cast<int64_t>(prompt.size()) + grid_len > model.config().context) {
    throw InvalidInput("generate: prompt plus image exceeds model context");
  }

  torch::NoGradGuard no_grad;
  model.eval();
  std::mt19937_64 rng(sampler.seed);
  nn::KVCache cache;
  auto logits = model.forward_cached(torch::tensor(prompt, torch::kLong).unsqueeze(0), cache);
  std::vector<int64_t> codes;
  codes.reserve(static_cast<std::size_t>(grid_len));
  for (int64_t i = 0; i < grid_len; ++i) {
    auto visual = logits[0][-1].slice(0, layout.visual_base(), layout.total());
    const int64_t code = draw(visual, sampler, rng);
    codes.push_back(code);
    if (i + 1 < grid_len) {
      logits = model.forward_cached(torch::tensor({layout.visual_id(code)}, torch::kLong).unsqueeze(0), cache);
    }
  }
  // The closing eoi is forced, so there is nothing left to sample.
  return codes;
}

std::vector<int64_t> generation_prompt(std::string_view instruction, std::string_view caption,
                                       const VocabLayout& layout) {
  std::vector<int64_t> out{layout.bos()};
  for (auto id : encode_bytes(instruction)) out.push_back(id);
  for (auto id : encode_bytes(caption)) out.push_back(id);
  out.push_back(layout.soi());
  return out;
}

}  // namespace sde::lm
