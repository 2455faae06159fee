#include "sde/io/dataset.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <future>
#include <nlohmann/json.hpp>
#include <thread>

#include "sde/errors.hpp"
#include "sde/io/png.hpp"

namespace sde::io {

namespace fs = std::filesystem;

DatasetManifest DatasetManifest::load(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("dataset manifest not found: " + path.string());
  const auto base = path.parent_path();
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };
  DatasetManifest m;
  std::string line;
  int64_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (!j.contains("image_path")) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": missing image_path");
    }
    DatasetRecord r;
    r.image_path = resolve(j.at("image_path").get<std::string>());
    if (!fs::exists(r.image_path)) throw ConfigError("image not found: " + r.image_path.string());
    if (j.contains("caption")) r.caption = j.at("caption").get<std::string>();
    if (j.contains("label")) r.label = j.at("label").get<int64_t>();
    if (j.contains("target_path")) r.target_path = resolve(j.at("target_path").get<std::string>());
    m.records.push_back(std::move(r));
  }
  if (m.records.empty()) throw ConfigError("dataset manifest is empty: " + path.string());
  return m;
}

void DatasetManifest::save(const fs::path& path) const {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  const auto base = path.parent_path();
  for (const auto& r : records) {
    nlohmann::json j;
    j["image_path"] = r.image_path.lexically_proximate(base).generic_string();
    if (r.caption) j["caption"] = *r.caption;
    if (r.label) j["label"] = *r.label;
    if (r.target_path) j["target_path"] = r.target_path->lexically_proximate(base).generic_string();
    os << j.dump() << '\n';
  }
  if (!os) throw IoError("write failed: " + path.string());
}

std::vector<int64_t> DatasetManifest::labels() const {
  std::vector<int64_t> out;
  for (const auto& r : records) {
    if (!r.label) throw ConfigError("record " + r.image_path.string() + " has no label");
    out.push_back(*r.label);
  }
  return out;
}

bool deterministic_mode() {
  const char* v = std::getenv("SDE_DETERMINISTIC");
  return v != nullptr && std::string(v) == "1";
}

torch::Tensor load_images(const DatasetManifest& manifest, bool parallel) {
  const auto n = manifest.records.size();
  std::vector<torch::Tensor> images(n);
  const auto workers = std::max<std::size_t>(1, std::min<std::size_t>(n, std::thread::hardware_concurrency()));
  if (!parallel || deterministic_mode() || workers == 1) {
    for (std::size_t i = 0; i < n; ++i) images[i] = read_png(manifest.records[i].image_path);
  } else {
    // Each worker fills a strided subset of slots, so order is fixed by index.
    std::vector<std::future<void>> jobs;
    for (std::size_t w = 0; w < workers; ++w) {
      jobs.push_back(std::async(std::launch::async, [&, w] {
        for (std::size_t i = w; i < n; i += workers) images[i] = read_png(manifest.records[i].image_path);
      }));
    }
    for (auto& j : jobs) j.get();
  }
  for (const auto& img : images) {
    if (img.sizes() != images.front().sizes()) throw InvalidInput("dataset images differ in size");
  }
  return torch::stack(images);
}

}  // namespace sde::io
