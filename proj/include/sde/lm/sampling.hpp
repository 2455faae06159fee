#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sde/lm/model.hpp"

namespace sde::lm {

struct SamplerConfig {
  double temperature = 1.0;  // <= 0 selects greedy decoding
  int64_t top_k = 0;         // 0 keeps every visual id; 1 is greedy
  uint64_t seed = 0;
};

/// Feeds `prompt_ids`, appends soi unless the prompt already ends with it,
/// then draws exactly `grid_len` ids restricted to the visual range and closes
/// with eoi. Returns the codes (id - visual_base). Inference only; safe to call
/// concurrently on a frozen model with distinct seeds.
std::vector<int64_t> generate_image_tokens(ARModelImpl& model, std::span<const int64_t> prompt_ids,
                                           const VocabLayout& layout, int64_t grid_len,
                                           const SamplerConfig& sampler);

/// Prompt for caption-conditioned generation: [bos] instruction caption [soi].
std::vector<int64_t> generation_prompt(std::string_view instruction, std::string_view caption,
                                       const VocabLayout& layout);

}  // namespace sde::lm
