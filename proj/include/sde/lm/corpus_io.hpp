#pragma once

#include <filesystem>
#include <vector>

#include "sde/lm/sequence.hpp"

namespace sde::lm {

/// Tokenized-corpus cache ("SDETOK01"): u32-LE record count, then per record
/// u32-LE kind, u32-LE length, length u32-LE ids, and the loss mask packed
/// LSB-first into ceil(length / 8) bytes.
void write_token_cache(const std::filesystem::path& path, std::span<const SequenceSample> samples);
std::vector<SequenceSample> read_token_cache(const std::filesystem::path& path);

}  // namespace sde::lm
