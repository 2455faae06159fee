#include "sde/lm/vocab.hpp"

#include <string>

#include "sde/errors.hpp"

namespace sde::lm {

VocabLayout::VocabLayout(int64_t text_vocab, int64_t codebook_size)
    : text_vocab_(text_vocab), codebook_size_(codebook_size) {
  if (text_vocab <= 0 || codebook_size <= 0) {
    throw InvalidInput("vocab layout needs positive text vocab and codebook size");
  }
}

int64_t VocabLayout::visual_id(int64_t code) const {
  if (code < 0 || code >= codebook_size_) {
    throw InvalidInput("code " + std::to_string(code) + " outside [0, " + std::to_string(codebook_size_) + ")");
  }
  return visual_base() + code;
}

int64_t VocabLayout::code_of(int64_t id) const {
  if (!is_visual(id)) {
    throw InvalidInput("id " + std::to_string(id) + " is not a visual id");
  }
  return id - visual_base();
}

std::vector<int64_t> VocabLayout::visual_ids(std::span<const int64_t> codes) const {
  std::vector<int64_t> out;
  out.reserve(codes.size());
  for (int64_t c : codes) out.push_back(visual_id(c));
  return out;
}

std::vector<int64_t> encode_bytes(std::string_view text) {
  std::vector<int64_t> out;
  out.reserve(text.size());
  for (unsigned char ch : text) out.push_back(static_cast<int64_t>(ch));
  return out;
}

std::string decode_bytes(std::span<const int64_t> ids) {
  std::string out;
  for (int64_t id : ids) {
    if (id >= 0 && id < kByteVocab) out.push_back(static_cast<char>(static_cast<unsigned char>(id)));
  }
  return out;
}

}  // namespace sde::lm
