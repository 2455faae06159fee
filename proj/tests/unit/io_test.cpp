#include <gtest/gtest.h>
#include <torch/torch.h>

#include <filesystem>
#include <fstream>

#include "sde/errors.hpp"
#include "sde/io/checkpoint.hpp"
#include "sde/io/dataset.hpp"
#include "sde/io/png.hpp"
#include "sde/tensor_utils.hpp"
#include "fixtures.hpp"

using namespace sde;
namespace fs = std::filesystem;

namespace {

fs::path fresh(const std::string& name) {
  auto d = fs::temp_directory_path() / ("sde_unit_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

}  // namespace

TEST(Png, RoundTripIsExactOnEightBitValues) {
  auto dir = fresh("png");
  auto img = torch::randint(0, 256, {3, 5, 7}, seeded_generator(1)).to(torch::kFloat32) / 255.0;
  io::write_png(dir / "a.png", img);
  auto back = io::read_png(dir / "a.png");
  EXPECT_EQ(back.sizes(), img.sizes());
  EXPECT_LE((back - img).abs().max().item<double>(), 1e-6);
}

TEST(Png, MissingOrCorruptFileIsAnIoError) {
  auto dir = fresh("png_bad");
  EXPECT_THROW(io::read_png(dir / "missing.png"), IoError);
  std::ofstream(dir / "bad.png") << "not a png";
  EXPECT_THROW(io::read_png(dir / "bad.png"), IoError);
}

TEST(Manifest, LoadSaveAndImageOrder) {
  auto dir = fresh("manifest");
  io::DatasetManifest m;
  for (int i = 0; i < 5; ++i) {
    auto img = torch::full({3, 4, 4}, i / 8.0);
    io::write_png(dir / ("img" + std::to_string(i) + ".png"), img);
    m.records.push_back({"img" + std::to_string(i) + ".png", "caption " + std::to_string(i), i % 2, std::nullopt});
  }
  m.save(dir / "manifest.jsonl");
  auto loaded = io::DatasetManifest::load(dir / "manifest.jsonl");
  ASSERT_EQ(loaded.records.size(), 5u);
  EXPECT_EQ(loaded.records[3].image_id(), "img3");
  EXPECT_EQ(loaded.records[3].caption, "caption 3");
  EXPECT_EQ(loaded.labels(), (std::vector<int64_t>{0, 1, 0, 1, 0}));
  auto parallel = io::load_images(loaded, true);
  auto serial = io::load_images(loaded, false);
  EXPECT_TRUE(torch::equal(parallel, serial));
  for (int i = 0; i < 5; ++i) EXPECT_NEAR(parallel[i].mean().item<double>(), std::round(i / 8.0 * 255) / 255, 1e-6);
}

TEST(Manifest, MissingFilesAreConfigErrors) {
  auto dir = fresh("manifest_bad");
  EXPECT_THROW(io::DatasetManifest::load(dir / "none.jsonl"), ConfigError);
  std::ofstream(dir / "m.jsonl") << R"({"image_path": "ghost.png"})" << "\n";
  EXPECT_THROW(io::DatasetManifest::load(dir / "m.jsonl"), ConfigError);
}

TEST(Checkpoint, RoundTripAndHashCheck) {
  auto dir = fresh("ckpt");
  io::NamedTensors t{{"b.weight", torch::randn({3, 2}, seeded_generator(1))},
                     {"a.count", torch::tensor({7}, torch::kLong)},
                     {"c.scalar", torch::tensor(2.5, torch::kFloat64)}};
  io::CheckpointMeta meta;
  meta.kind = "tokenizer";
  meta.config = {{"x", 1}};
  meta.step = 42;
  io::save_checkpoint(dir / "m.ckpt", t, meta);
  auto ck = io::load_checkpoint(dir / "m.ckpt");
  ASSERT_EQ(ck.tensors.size(), 3u);
  for (std::size_t i = 0; i < t.size(); ++i) {
    EXPECT_EQ(ck.tensors[i].first, t[i].first);
    EXPECT_TRUE(torch::equal(ck.tensors[i].second, t[i].second));
  }
  EXPECT_EQ(ck.meta.step, 42);
  EXPECT_EQ(ck.meta.content_hash, io::content_hash(t));
  EXPECT_EQ(ck.section("b.").front().first, "weight");

  auto sidecar = nlohmann::json::parse(std::ifstream(io::sidecar_path(dir / "m.ckpt")));
  sidecar["content_hash"] = "0";
  std::ofstream(io::sidecar_path(dir / "m.ckpt")) << sidecar.dump();
  EXPECT_THROW(io::load_checkpoint(dir / "m.ckpt"), IoError);
  EXPECT_THROW(io::load_checkpoint(dir / "absent.ckpt"), IoError);
}

TEST(Checkpoint, ModuleTensorsLoadBack) {
  torch::nn::Linear a(3, 2), b(3, 2);
  io::load_into(*b, io::module_tensors(*a));
  EXPECT_EQ(parameter_hash(*a), parameter_hash(*b));
  torch::nn::Linear c(4, 2);
  EXPECT_THROW(io::load_into(*c, io::module_tensors(*a)), IoError);
}

TEST(Hashing, ContentHashSeesNamesAndValues) {
  auto x = torch::ones({2});
  EXPECT_NE(io::content_hash({{"a", x}}), io::content_hash({{"b", x}}));
  EXPECT_NE(io::content_hash({{"a", x}}), io::content_hash({{"a", x * 2}}));
  EXPECT_NE(io::content_hash({{"a", x}}), io::content_hash({{"a", x.to(torch::kFloat64)}}));
  EXPECT_EQ(sha256_hex(std::string("abc")), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
