#include "sde/eval/grouping.hpp"

#include <cmath>
#include <unordered_map>

#include "sde/errors.hpp"

namespace sde::eval {

CodeIndex group_codes(const torch::Tensor& codes, std::span<const std::string> image_ids) {
  if (codes.dim() != 3 || codes.size(0) != static_cast<int64_t>(image_ids.size())) {
    throw InvalidInput("group_codes: codes must be [B, h, w] with one id per image");
  }
  auto c = codes.to(torch::kCPU, torch::kLong).contiguous();
  auto a = c.accessor<int64_t, 3>();
  CodeIndex index;
  for (int64_t b = 0; b < c.size(0); ++b) {
    for (int64_t i = 0; i < c.size(1); ++i) {
      for (int64_t j = 0; j < c.size(2); ++j) {
        index[a[b][i][j]].push_back({image_ids[static_cast<std::size_t>(b)], i, j});
      }
    }
  }
  return index;
}

torch::Tensor code_mosaic(const torch::Tensor& images, std::span<const std::string> image_ids,
                          const CodeIndex& index, int64_t code, int64_t patch, int64_t max_patches) {
  auto it = index.find(code);
  if (it == index.end() || it->second.empty()) throw LookupError("code " + std::to_string(code) + " never used");
  std::unordered_map<std::string, int64_t> row;
  for (std::size_t k = 0; k < image_ids.size(); ++k) row.emplace(image_ids[k], static_cast<int64_t>(k));

  const auto count = std::min<int64_t>(max_patches, static_cast<int64_t>(it->second.size()));
  const auto side = static_cast<int64_t>(std::ceil(std::sqrt(static_cast<double>(count))));
  auto mosaic = torch::zeros({3, side * patch, side * patch}, torch::kFloat32);
  for (int64_t k = 0; k < count; ++k) {
    const auto& loc = it->second[static_cast<std::size_t>(k)];
    auto r = row.find(loc.image_id);
    if (r == row.end()) throw LookupError("image " + loc.image_id + " missing from mosaic source");
    auto crop = images[r->second]
                    .slice(1, loc.i * patch, (loc.i + 1) * patch)
                    .slice(2, loc.j * patch, (loc.j + 1) * patch);
    const auto y = (k / side) * patch;
    const auto x = (k % side) * patch;
    mosaic.slice(1, y, y + patch).slice(2, x, x + patch).copy_(crop);
  }
  return mosaic;
}

}  // namespace sde::eval
