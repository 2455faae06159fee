#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sde::lm {

/// Unified id space: text ids [0, N), then bos, eos, pad, soi, eoi, then K
/// visual ids starting at visual_base() = N + 5.
class VocabLayout {
 public:
  VocabLayout(int64_t text_vocab, int64_t codebook_size);

  int64_t text_vocab() const noexcept { return text_vocab_; }
  int64_t codebook_size() const noexcept { return codebook_size_; }

  int64_t bos() const noexcept { return text_vocab_; }
  int64_t eos() const noexcept { return text_vocab_ + 1; }
  int64_t pad() const noexcept { return text_vocab_ + 2; }
  int64_t soi() const noexcept { return text_vocab_ + 3; }
  int64_t eoi() const noexcept { return text_vocab_ + 4; }
  int64_t visual_base() const noexcept { return text_vocab_ + 5; }
  int64_t total() const noexcept { return text_vocab_ + 5 + codebook_size_; }

  bool is_text(int64_t id) const noexcept { return id >= 0 && id < text_vocab_; }
  bool is_special(int64_t id) const noexcept { return id >= bos() && id < visual_base(); }
  bool is_visual(int64_t id) const noexcept { return id >= visual_base() && id < total(); }

  /// Throws InvalidInput for codes outside [0, K).
  int64_t visual_id(int64_t code) const;
  /// Throws InvalidInput for ids outside the visual range.
  int64_t code_of(int64_t id) const;

  std::vector<int64_t> visual_ids(std::span<const int64_t> codes) const;

 private:
  int64_t text_vocab_;
  int64_t codebook_size_;
};

/// Byte-level text tokenizer (N = 256): one id per UTF-8 byte.
constexpr int64_t kByteVocab = 256;
std::vector<int64_t> encode_bytes(std::string_view text);
/// Concatenates the text ids of `ids` back into bytes; other ids are skipped.
std::string decode_bytes(std::span<const int64_t> ids);

}  // namespace sde::lm
