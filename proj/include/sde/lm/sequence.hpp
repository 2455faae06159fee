#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sde/lm/vocab.hpp"

namespace sde::lm {

enum class SampleKind : uint32_t { kUnderstanding = 0, kGeneration = 1 };

/// One training sequence. loss_mask[t] marks ids[t] as a prediction target.
struct SequenceSample {
  std::vector<int64_t> ids;
  std::vector<uint8_t> loss_mask;
  SampleKind kind = SampleKind::kUnderstanding;

  std::size_t size() const { return ids.size(); }
  bool operator==(const SequenceSample&) const = default;
};

/// [bos] text [soi] visual(codes) [eoi] response [eos]; the mask covers the
/// response and the final eos.
SequenceSample assemble_understanding(std::span<const int64_t> text_ids, std::span<const int64_t> codes,
                                      std::span<const int64_t> response_ids, const VocabLayout& layout);

/// [bos] system caption [soi] visual(codes) [eoi] [eos]; the mask covers soi,
/// the visual span, eoi and eos.
SequenceSample assemble_generation(std::span<const int64_t> system_ids, std::span<const int64_t> caption_ids,
                                   std::span<const int64_t> codes, const VocabLayout& layout);

/// Pretraining mode: every position after bos becomes a target.
void use_full_mask(SequenceSample& sample);

/// Fixed set of image-generation instructions the system text is drawn from.
const std::vector<std::string>& generation_instructions();
const std::string& pick_instruction(std::mt19937_64& rng);

/// Returns every framing/mask/range problem found; empty means valid.
/// `grid_len` is the number of visual ids each soi..eoi span must hold.
std::vector<std::string> validate_sample(const SequenceSample& sample, const VocabLayout& layout, int64_t grid_len);

/// Problems across a whole corpus, prefixed with the record index.
std::vector<std::string> validate_corpus(std::span<const SequenceSample> samples, const VocabLayout& layout,
                                         int64_t grid_len);

/// Codes of the first soi..eoi span, or empty if there is none.
std::vector<int64_t> extract_codes(const SequenceSample& sample, const VocabLayout& layout);

}  // namespace sde::lm
