#include "sde/lm/sequence.hpp"

#include <string>

#include "sde/errors.hpp"

namespace sde::lm {
namespace {

void check_text(std::span<const int64_t> ids, const VocabLayout& layout, const char* what) {
  for (int64_t id : ids) {
    if (!layout.is_text(id)) {
      throw InvalidInput(std::string(what) + " id " + std::to_string(id) + " is not a text id");
    }
  }
}

void push(SequenceSample& s, int64_t id, bool target) {
  s.ids.push_back(id);
  s.loss_mask.push_back(target ? 1 : 0);
}

void push_visual(SequenceSample& s, std::span<const int64_t> codes, const VocabLayout& layout, bool target) {
  push(s, layout.soi(), target);
  for (int64_t id : layout.visual_ids(codes)) push(s, id, target);
  push(s, layout.eoi(), target);
}

}  // namespace

SequenceSample assemble_understanding(std::span<const int64_t> text_ids, std::span<const int64_t> codes,
                                      std::span<const int64_t> response_ids, const VocabLayout& layout) {
  check_text(text_ids, layout, "prompt");
  check_text(response_ids, layout, "response");
  SequenceSample s;
  s.kind = SampleKind::kUnderstanding;
  push(s, layout.bos(), false);
  for (int64_t id : text_ids) push(s, id, false);
  push_visual(s, codes, layout, false);
  for (int64_t id : response_ids) push(s, id, true);
  push(s, layout.eos(), true);
  return s;
}

SequenceSample assemble_generation(std::span<const int64_t> system_ids, std::span<const int64_t> caption_ids,
                                   std::span<const int64_t> codes, const VocabLayout& layout) {
  check_text(system_ids, layout, "system");
  check_text(caption_ids, layout, "caption");
  SequenceSample s;
  s.kind = SampleKind::kGeneration;
  push(s, layout.bos(), false);
  for (int64_t id : system_ids) push(s, id, false);
  for (int64_t id : caption_ids) push(s, id, false);
  push_visual(s, codes, layout, true);
  push(s, layout.eos(), true);
  return s;
}

void use_full_mask(SequenceSample& sample) {
  for (std::size_t t = 0; t < sample.loss_mask.size(); ++t) sample.loss_mask[t] = t == 0 ? 0 : 1;
}

const std::vector<std::string>& generation_instructions() {
  static const std::vector<std::string> kInstructions{
      "Please generate an image.",
      "Show me a photo.",
      "Draw a picture of the following.",
      "Create an image that matches this description.",
      "Render the scene described below.",
      "Generate a picture.",
      "Make an image of this.",
      "Paint what the caption says.",
  };
  return kInstructions;
}

const std::string& pick_instruction(std::mt19937_64& rng) {
  const auto& all = generation_instructions();
  std::uniform_int_distribution<std::size_t> pick(0, all.size() - 1);
  return all[pick(rng)];
}

std::vector<std::string> validate_sample(const SequenceSample& sample, const VocabLayout& layout, int64_t grid_len) {
  std::vector<std::string> problems;
  const auto& ids = sample.ids;
  if (ids.size() != sample.loss_mask.size()) {
    problems.push_back("mask length " + std::to_string(sample.loss_mask.size()) + " != ids length " +
                       std::to_string(ids.size()));
  }
  if (ids.empty()) {
    problems.emplace_back("empty sequence");
    return problems;
  }
  if (ids.front() != layout.bos()) problems.emplace_back("sequence does not start with bos");
  if (ids.back() != layout.eos()) problems.emplace_back("sequence does not end with eos");

  bool inside = false;
  int64_t run = 0;
  int64_t spans = 0;
  for (std::size_t t = 0; t < ids.size(); ++t) {
    const int64_t id = ids[t];
    const std::string at = " at " + std::to_string(t);
    if (id < 0 || id >= layout.total()) {
      problems.push_back("id " + std::to_string(id) + " out of range" + at);
      continue;
    }
    if (id == layout.soi()) {
      if (inside) problems.push_back("nested soi" + at);
      inside = true;
      run = 0;
    } else if (id == layout.eoi()) {
      if (!inside) {
        problems.push_back("eoi without soi" + at);
      } else if (run != grid_len) {
        problems.push_back("visual span holds " + std::to_string(run) + " ids, expected " +
                           std::to_string(grid_len) + at);
      }
      inside = false;
      ++spans;
    } else if (layout.is_visual(id)) {
      if (!inside) problems.push_back("visual id outside soi..eoi" + at);
      ++run;
    } else if (inside) {
      problems.push_back("non-visual id " + std::to_string(id) + " inside visual span" + at);
    } else if (id == layout.pad()) {
      problems.push_back("pad inside stored sample" + at);
    }
    if (t < sample.loss_mask.size() && sample.loss_mask[t] > 1) {
      problems.push_back("mask value not boolean" + at);
    }
  }
  if (inside) problems.emplace_back("unterminated visual span (missing eoi)");
  if (spans == 0) problems.emplace_back("no visual span");
  if (!sample.loss_mask.empty() && sample.loss_mask.front() != 0) problems.emplace_back("bos marked as target");
  bool any = false;
  for (auto m : sample.loss_mask) any = any || m != 0;
  if (!any) problems.emplace_back("no target positions");
  return problems;
}

std::vector<std::string> validate_corpus(std::span<const SequenceSample> samples, const VocabLayout& layout,
                                         int64_t grid_len) {
  std::vector<std::string> problems;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    for (auto& p : validate_sample(samples[i], layout, grid_len)) {
      problems.push_back("record " + std::to_string(i) + ": " + p);
    }
  }
  return problems;
}

std::vector<int64_t> extract_codes(const SequenceSample& sample, const VocabLayout& layout) {
  std::vector<int64_t> codes;
  bool inside = false;
  for (int64_t id : sample.ids) {
    if (id == layout.soi()) {
      inside = true;
    } else if (id == layout.eoi()) {
      if (inside) return codes;
    } else if (inside && layout.is_visual(id)) {
      codes.push_back(layout.code_of(id));
    }
  }
  return inside ? codes : std::vector<int64_t>{};
}

}  // namespace sde::lm
