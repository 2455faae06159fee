#include "sde/semantic/target.hpp"

#include <fstream>
#include <nlohmann/json.hpp>

#include "sde/errors.hpp"
#include "sde/io/binary.hpp"
#include "sde/tensor_utils.hpp"

namespace sde::semantic {

namespace {
constexpr const char* kMagic = "SDESEM01";
}

void validate_target(const SemanticTarget& target, int64_t grid_h, int64_t grid_w) {
  const auto& f = target.features;
  if (!f.defined() || f.dim() < 3) throw ContractViolation("semantic target: expected [..., h, w, d_sem]");
  if (f.size(-3) != grid_h || f.size(-2) != grid_w) {
    throw ContractViolation("semantic target: grid " + shape_string(f) + " does not match " +
                            std::to_string(grid_h) + "x" + std::to_string(grid_w));
  }
  require_finite(f, "semantic target");
  auto norms = f.detach().norm(2, -1);
  if (norms.eq(0).any().item<bool>()) throw InvalidInput("semantic target: zero feature vector at some position");
}

void write_semantic_file(const std::filesystem::path& path, const torch::Tensor& features) {
  if (features.dim() != 3) throw ContractViolation("write_semantic_file: expected [h, w, d_sem]");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os.write(kMagic, 8);
  io::write_u32_le(os, static_cast<uint32_t>(features.size(0)));
  io::write_u32_le(os, static_cast<uint32_t>(features.size(1)));
  io::write_u32_le(os, static_cast<uint32_t>(features.size(2)));
  auto data = features.detach().to(torch::kCPU, torch::kFloat32).contiguous();
  const float* p = data.data_ptr<float>();
  for (int64_t i = 0; i < data.numel(); ++i) io::write_f32_le(os, p[i]);
  if (!os) throw IoError("write failed: " + path.string());
}

torch::Tensor read_semantic_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw LookupError("semantic target file not found: " + path.string());
  io::expect_magic(is, kMagic);
  const int64_t h = io::read_u32_le(is);
  const int64_t w = io::read_u32_le(is);
  const int64_t d = io::read_u32_le(is);
  auto out = torch::empty({h, w, d}, torch::kFloat32);
  float* p = out.data_ptr<float>();
  for (int64_t i = 0; i < out.numel(); ++i) p[i] = io::read_f32_le(is);
  return out;
}

TargetManifest TargetManifest::load(const std::filesystem::path& path, int64_t grid_h, int64_t grid_w,
                                    int64_t feature_dim) {
  std::ifstream is(path);
  if (!is) throw LookupError("target manifest not found: " + path.string());
  TargetManifest m;
  m.grid_h = grid_h;
  m.grid_w = grid_w;
  m.feature_dim = feature_dim;
  const auto base = path.parent_path();
  std::string line;
  while (std::getline(is, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto j = nlohmann::json::parse(line);
    TargetManifestEntry e;
    e.image_id = j.at("image_id").get<std::string>();
    std::filesystem::path p = j.at("target_path").get<std::string>();
    e.target_path = p.is_absolute() ? p : base / p;
    m.entries.push_back(std::move(e));
  }
  return m;
}

void TargetManifest::save(const std::filesystem::path& path) const {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  for (const auto& e : entries) {
    nlohmann::json j{{"image_id", e.image_id}, {"target_path", e.target_path.string()}};
    os << j.dump() << '\n';
  }
}

void TargetManifest::validate() const {
  for (const auto& e : entries) {
    if (!std::filesystem::exists(e.target_path)) {
      throw LookupError("target for " + e.image_id + " missing: " + e.target_path.string());
    }
    auto t = read_semantic_file(e.target_path);
    if (t.size(0) != grid_h || t.size(1) != grid_w || t.size(2) != feature_dim) {
      throw ContractViolation("target for " + e.image_id + " has shape " + shape_string(t));
    }
  }
}

}  // namespace sde::semantic
