#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace sde::io {

struct DatasetRecord {
  std::filesystem::path image_path;
  std::optional<std::string> caption;
  std::optional<int64_t> label;
  std::optional<std::filesystem::path> target_path;

  /// Stable id used by providers and code indices: the image file stem.
  std::string image_id() const { return image_path.stem().string(); }
};

/// JSON-lines manifest; relative paths resolve against the manifest's directory.
struct DatasetManifest {
  std::vector<DatasetRecord> records;

  /// Throws ConfigError if the manifest or any referenced image is missing.
  static DatasetManifest load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  std::vector<int64_t> labels() const;  // throws ConfigError if a record has no label
};

/// True when SDE_DETERMINISTIC=1.
bool deterministic_mode();

/// Decodes every image into [N, 3, H, W]. Images must share one size. Uses
/// worker threads unless `parallel` is false or deterministic mode is on; the
/// output order always follows the manifest.
torch::Tensor load_images(const DatasetManifest& manifest, bool parallel = true);

}  // namespace sde::io
