#include "sde/data/toy_dataset.hpp"

#include <array>
#include <cmath>
#include <random>

#include "sde/errors.hpp"

namespace sde::data {

namespace {

struct NamedColor {
  const char* name;
  std::array<float, 3> rgb;
};

constexpr std::array<NamedColor, 8> kPalette{{
    {"red", {0.85f, 0.15f, 0.15f}},
    {"green", {0.2f, 0.7f, 0.25f}},
    {"blue", {0.15f, 0.25f, 0.85f}},
    {"yellow", {0.9f, 0.85f, 0.2f}},
    {"cyan", {0.2f, 0.8f, 0.85f}},
    {"magenta", {0.8f, 0.2f, 0.75f}},
    {"white", {0.92f, 0.92f, 0.92f}},
    {"black", {0.08f, 0.08f, 0.08f}},
}};

bool inside(int64_t shape, double u, double v) {
  const double r = std::sqrt(u * u + v * v);
  const double box = std::max(std::abs(u), std::abs(v));
  switch (shape) {
    case 0:  // circle
      return r <= 1.0;
    case 1:  // square
      return box <= 0.85;
    case 2:  // triangle, apex up
      return v >= -0.8 && v <= 0.9 && std::abs(u) <= (0.9 - v) * 0.55;
    case 3:  // plus
      return (std::abs(u) <= 0.3 && std::abs(v) <= 1.0) || (std::abs(v) <= 0.3 && std::abs(u) <= 1.0);
    case 4:  // ring
      return r >= 0.55 && r <= 1.0;
    case 5:  // diamond
      return std::abs(u) + std::abs(v) <= 1.0;
    case 6:  // horizontal bar
      return std::abs(v) <= 0.3 && std::abs(u) <= 1.0;
    case 7:  // vertical bar
      return std::abs(u) <= 0.3 && std::abs(v) <= 1.0;
    case 8: {  // checkerboard patch
      if (box > 1.0) return false;
      const auto a = static_cast<int64_t>(std::floor((u + 1.0) * 1.5));
      const auto b = static_cast<int64_t>(std::floor((v + 1.0) * 1.5));
      return (a + b) % 2 == 0;
    }
    case 9:  // hollow frame
      return box >= 0.6 && box <= 1.0;
    default:
      return false;
  }
}

}  // namespace

const std::vector<std::string>& toy_class_names() {
  static const std::vector<std::string> names{"circle", "square", "triangle", "plus",     "ring",
                                              "diamond", "horizontal bar", "vertical bar", "checkerboard", "frame"};
  return names;
}

ToyDataset make_toy_dataset(int64_t count, int64_t image_size, uint64_t seed) {
  if (count <= 0 || image_size < 8) throw ContractViolation("make_toy_dataset: need count > 0 and size >= 8");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> color_pick(0, static_cast<int>(kPalette.size()) - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<float> noise(0.0f, 0.03f);

  ToyDataset ds;
  ds.images = torch::empty({count, 3, image_size, image_size}, torch::kFloat32);
  auto acc = ds.images.accessor<float, 4>();
  const auto s = static_cast<double>(image_size);

  for (int64_t n = 0; n < count; ++n) {
    const int64_t label = n % kToyClasses;
    const int bg = color_pick(rng);
    int fg = color_pick(rng);
    while (fg == bg) fg = color_pick(rng);
    const double radius = s * (0.22 + 0.16 * unit(rng));
    const double cx = radius + (s - 2.0 * radius) * unit(rng);
    const double cy = radius + (s - 2.0 * radius) * unit(rng);

    for (int64_t y = 0; y < image_size; ++y) {
      for (int64_t x = 0; x < image_size; ++x) {
        const double u = (static_cast<double>(x) + 0.5 - cx) / radius;
        const double v = (static_cast<double>(y) + 0.5 - cy) / radius;
        const auto& rgb = inside(label, u, v) ? kPalette[fg].rgb : kPalette[bg].rgb;
        for (int c = 0; c < 3; ++c) {
          acc[n][c][y][x] = std::clamp(rgb[c] + noise(rng), 0.0f, 1.0f);
        }
      }
    }
    ds.labels.push_back(label);
    ds.captions.push_back(std::string("a ") + kPalette[fg].name + " " + toy_class_names()[label] + " on a " +
                          kPalette[bg].name + " background");
    ds.image_ids.push_back("toy_" + std::to_string(n));
  }
  return ds;
}

}  // namespace sde::data
