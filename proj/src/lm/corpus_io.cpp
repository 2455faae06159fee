#include "sde/lm/corpus_io.hpp"

#include <fstream>
#include <limits>

#include "sde/errors.hpp"
#include "sde/io/binary.hpp"

namespace sde::lm {
namespace {
constexpr char kMagic[] = "SDETOK01";
}

void write_token_cache(const std::filesystem::path& path, std::span<const SequenceSample> samples) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os.write(kMagic, 8);
  io::write_u32_le(os, static_cast<uint32_t>(samples.size()));
  for (const auto& s : samples) {
    if (s.ids.size() != s.loss_mask.size()) throw ContractViolation("write_token_cache: mask/ids length mismatch");
    io::write_u32_le(os, static_cast<uint32_t>(s.kind));
    io::write_u32_le(os, static_cast<uint32_t>(s.ids.size()));
    for (int64_t id : s.ids) {
      if (id < 0 || id > std::numeric_limits<uint32_t>::max()) throw InvalidInput("token id does not fit in u32");
      io::write_u32_le(os, static_cast<uint32_t>(id));
    }
    std::vector<char> packed((s.ids.size() + 7) / 8, 0);
    for (std::size_t t = 0; t < s.loss_mask.size(); ++t) {
      if (s.loss_mask[t]) packed[t / 8] = static_cast<char>(packed[t / 8] | (1u << (t % 8)));
    }
    os.write(packed.data(), static_cast<std::streamsize>(packed.size()));
  }
  if (!os) throw IoError("write failed: " + path.string());
}

std::vector<SequenceSample> read_token_cache(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("token cache not found: " + path.string());
  io::expect_magic(is, kMagic);
  const uint32_t count = io::read_u32_le(is);
  std::vector<SequenceSample> out;
  out.reserve(count);
  for (uint32_t r = 0; r < count; ++r) {
    SequenceSample s;
    const uint32_t kind = io::read_u32_le(is);
    if (kind > 1) throw IoError("bad record kind " + std::to_string(kind));
    s.kind = static_cast<SampleKind>(kind);
    const uint32_t len = io::read_u32_le(is);
    s.ids.resize(len);
    for (auto& id : s.ids) id = io::read_u32_le(is);
    std::vector<char> packed((len + 7) / 8);
    if (!is.read(packed.data(), static_cast<std::streamsize>(packed.size()))) throw IoError("truncated mask");
    s.loss_mask.resize(len);
    for (uint32_t t = 0; t < len; ++t) {
      s.loss_mask[t] = (static_cast<unsigned char>(packed[t / 8]) >> (t % 8)) & 1u;
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace sde::lm
