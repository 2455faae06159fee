#include <gtest/gtest.h>
#include <torch/torch.h>

#include <filesystem>
#include <fstream>

#include "sde/errors.hpp"
#include "sde/semantic/providers.hpp"
#include "sde/semantic/target.hpp"
#include "sde/tensor_utils.hpp"
#include "fixtures.hpp"

using namespace sde;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  auto d = fs::temp_directory_path() / ("sde_unit_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

}  // namespace

TEST(SemanticFile, RoundTripIsBitExact) {
  auto dir = temp_dir("semfile");
  auto grid = torch::randn({3, 4, 5}, seeded_generator(1));
  semantic::write_semantic_file(dir / "a.sem", grid);
  EXPECT_TRUE(torch::equal(semantic::read_semantic_file(dir / "a.sem"), grid));
  EXPECT_EQ(fs::file_size(dir / "a.sem"), 8u + 12u + 3u * 4 * 5 * 4);
}

TEST(SemanticFile, RejectsBadMagicAndTruncation) {
  auto dir = temp_dir("semfile_bad");
  {
    std::ofstream os(dir / "bad.sem", std::ios::binary);
    os << "NOTMAGIC";
  }
  EXPECT_THROW(semantic::read_semantic_file(dir / "bad.sem"), IoError);
  semantic::write_semantic_file(dir / "ok.sem", torch::ones({2, 2, 2}));
  fs::resize_file(dir / "ok.sem", fs::file_size(dir / "ok.sem") - 4);
  EXPECT_THROW(semantic::read_semantic_file(dir / "ok.sem"), IoError);
}

TEST(ClassEmbedding, BroadcastsTheLabelRow) {
  semantic::ClassEmbeddingProvider p(5, 6, 3, 4, 7);
  auto images = support::random_images(2, 16, 1);
  std::vector<semantic::SampleRef> refs{{"a", 3}, {"b", 0}};
  auto t = p.provide(images, refs);
  EXPECT_EQ(t.features.sizes(), (std::vector<int64_t>{2, 3, 4, 6}));
  for (int64_t i = 0; i < 3; ++i)
    for (int64_t j = 0; j < 4; ++j) {
      EXPECT_TRUE(torch::equal(t.features[0][i][j], p.table()[3]));
      EXPECT_TRUE(torch::equal(t.features[1][i][j], p.table()[0]));
    }
  EXPECT_EQ(t.source_id, "class-embedding");
  EXPECT_FALSE(t.features.requires_grad());
}

TEST(ClassEmbedding, RequiresLabelsInRange) {
  semantic::ClassEmbeddingProvider p(5, 6, 3, 4, 7);
  auto images = support::random_images(1, 16, 1);
  std::vector<semantic::SampleRef> missing{{"a", std::nullopt}};
  std::vector<semantic::SampleRef> out_of_range{{"a", 5}};
  EXPECT_ANY_THROW(p.provide(images, missing));
  EXPECT_ANY_THROW(p.provide(images, out_of_range));
}

TEST(ClassEmbedding, SeededTableIsReproducible) {
  semantic::ClassEmbeddingProvider a(4, 8, 2, 2, 1), b(4, 8, 2, 2, 1);
  EXPECT_EQ(a.parameter_hash(), b.parameter_hash());
  semantic::ClassEmbeddingProvider restored(a.table().clone(), 2, 2);
  EXPECT_EQ(restored.parameter_hash(), a.parameter_hash());
}

TEST(FileProvider, ReturnsStoredGridsAndReportsMissingIds) {
  auto dir = temp_dir("fileprov");
  auto g0 = torch::randn({2, 2, 3}, seeded_generator(2));
  auto g1 = torch::randn({2, 2, 3}, seeded_generator(3));
  semantic::write_semantic_file(dir / "x.sem", g0);
  semantic::write_semantic_file(dir / "y.sem", g1);
  semantic::TargetManifest m;
  m.grid_h = 2;
  m.grid_w = 2;
  m.feature_dim = 3;
  m.entries = {{"x", "x.sem"}, {"y", "y.sem"}};
  m.save(dir / "targets.jsonl");
  auto loaded = semantic::TargetManifest::load(dir / "targets.jsonl", 2, 2, 3);
  loaded.validate();
  semantic::FileProvider p(loaded);
  auto images = support::random_images(2, 16, 4);
  std::vector<semantic::SampleRef> refs{{"y", std::nullopt}, {"x", std::nullopt}};
  auto t = p.provide(images, refs);
  EXPECT_TRUE(torch::equal(t.features[0], g1));
  EXPECT_TRUE(torch::equal(t.features[1], g0));
  std::vector<semantic::SampleRef> unknown{{"z", std::nullopt}};
  EXPECT_THROW(p.provide(images.slice(0, 0, 1), unknown), LookupError);
}

TEST(FileProvider, ShapeMismatchIsAContractViolation) {
  auto dir = temp_dir("fileprov_shape");
  semantic::write_semantic_file(dir / "x.sem", torch::ones({3, 3, 3}));
  semantic::TargetManifest m;
  m.grid_h = 2;
  m.grid_w = 2;
  m.feature_dim = 3;
  m.entries = {{"x", dir / "x.sem"}};
  semantic::FileProvider p(m);
  std::vector<semantic::SampleRef> refs{{"x", std::nullopt}};
  EXPECT_THROW(p.provide(support::random_images(1, 16, 1), refs), ContractViolation);
}

TEST(FrozenNet, DeterministicAndSensitiveToPixels) {
  semantic::FrozenNet net(std::vector<int64_t>{4, 8}, 6, 3, 5);
  semantic::FrozenNetProvider p(net, 2, 2);
  auto images = support::random_images(1, 16, 9);
  auto copy = images.clone();
  copy[0][1][5][7] = 1.0f - copy[0][1][5][7].item<float>();
  std::vector<semantic::SampleRef> refs{{"a", std::nullopt}};
  auto t1 = p.provide(images, refs);
  auto t2 = p.provide(images, refs);
  auto t3 = p.provide(copy, refs);
  EXPECT_TRUE(torch::equal(t1.features, t2.features));
  EXPECT_FALSE(torch::equal(t1.features, t3.features));
  EXPECT_EQ(t1.features.sizes(), (std::vector<int64_t>{1, 2, 2, 6}));
  for (const auto& prm : p.net()->parameters()) EXPECT_FALSE(prm.requires_grad());
}

TEST(FrozenNet, TrainingLearnsSeparableLabels) {
  semantic::FrozenNet net(std::vector<int64_t>{4, 8}, 6, 2, 5);
  auto images = torch::zeros({16, 3, 16, 16});
  std::vector<int64_t> labels;
  for (int64_t i = 0; i < 16; ++i) {
    images[i].fill_(i % 2 ? 0.9 : 0.1);
    labels.push_back(i % 2);
  }
  semantic::FrozenNetTrainOptions opts;
  opts.steps = 60;
  opts.batch_size = 16;
  opts.lr = 1e-2;
  EXPECT_GE(semantic::train_frozen_net(*net, images, torch::tensor(labels), opts), 0.99);
}

TEST(ValidateTarget, RejectsZeroVectorsAndWrongGrid) {
  semantic::SemanticTarget t{torch::ones({1, 2, 2, 3}), "x"};
  EXPECT_NO_THROW(semantic::validate_target(t, 2, 2));
  EXPECT_THROW(semantic::validate_target(t, 3, 2), ContractViolation);
  t.features[0][1][1].zero_();
  EXPECT_ANY_THROW(semantic::validate_target(t, 2, 2));
  t.features[0][1][1][0] = std::numeric_limits<float>::infinity();
  EXPECT_THROW(semantic::validate_target(t, 2, 2), InvalidInput);
}
