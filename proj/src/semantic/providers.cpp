#include "sde/semantic/providers.hpp"

#include <random>

#include "sde/errors.hpp"
#include "sde/tensor_utils.hpp"

namespace sde::semantic {

namespace {

void require_batch(const torch::Tensor& images, std::span<const SampleRef> refs) {
  if (images.dim() != 4 || images.size(1) != 3) {
    throw ContractViolation("provide: images must be [B, 3, H, W], got " + shape_string(images));
  }
  if (static_cast<int64_t>(refs.size()) != images.size(0)) {
    throw ContractViolation("provide: one SampleRef per image required");
  }
}

}  // namespace

std::string SemanticProvider::parameter_hash() const {
  std::vector<torch::Tensor> tensors;
  for (const auto& [name, t] : state()) tensors.push_back(t);
  return tensors_hash(tensors);
}

// ---------------------------------------------------------------- file

FileProvider::FileProvider(TargetManifest manifest) : manifest_(std::move(manifest)) {
  for (std::size_t i = 0; i < manifest_.entries.size(); ++i) index_.emplace(manifest_.entries[i].image_id, i);
}

SemanticTarget FileProvider::provide(const torch::Tensor& images, std::span<const SampleRef> refs) const {
  require_batch(images, refs);
  std::vector<torch::Tensor> grids;
  grids.reserve(refs.size());
  for (const auto& ref : refs) {
    auto it = index_.find(ref.image_id);
    if (it == index_.end()) throw LookupError("no precomputed target for image " + ref.image_id);
    auto t = read_semantic_file(manifest_.entries[it->second].target_path);
    if (t.size(0) != manifest_.grid_h || t.size(1) != manifest_.grid_w || t.size(2) != manifest_.feature_dim) {
      throw ContractViolation("precomputed target for " + ref.image_id + " has shape " + shape_string(t));
    }
    grids.push_back(t);
  }
  return {torch::stack(grids).to(images.scalar_type()), source_id()};
}

// ---------------------------------------------------------------- class embedding

ClassEmbeddingProvider::ClassEmbeddingProvider(int64_t num_classes, int64_t feature_dim, int64_t grid_h,
                                               int64_t grid_w, uint64_t seed)
    : grid_h_(grid_h), grid_w_(grid_w) {
  if (num_classes <= 0 || feature_dim <= 0 || grid_h <= 0 || grid_w <= 0) {
    throw ContractViolation("ClassEmbeddingProvider: sizes must be positive");
  }
  auto gen = seeded_generator(seed);
  table_ = torch::randn({num_classes, feature_dim}, gen, torch::kFloat32);
}

ClassEmbeddingProvider::ClassEmbeddingProvider(torch::Tensor table, int64_t grid_h, int64_t grid_w)
    : table_(std::move(table)), grid_h_(grid_h), grid_w_(grid_w) {
  if (table_.dim() != 2) throw ContractViolation("ClassEmbeddingProvider: table must be [C, d_sem]");
}

SemanticTarget ClassEmbeddingProvider::provide(const torch::Tensor& images, std::span<const SampleRef> refs) const {
  require_batch(images, refs);
  std::vector<int64_t> labels;
  labels.reserve(refs.size());
  for (const auto& ref : refs) {
    if (!ref.label) throw LookupError("class-embedding provider: image " + ref.image_id + " has no label");
    if (*ref.label < 0 || *ref.label >= table_.size(0)) {
      throw InvalidInput("class-embedding provider: label " + std::to_string(*ref.label) + " out of range");
    }
    labels.push_back(*ref.label);
  }
  auto idx = torch::tensor(labels, torch::kLong);
  auto rows = table_.index_select(0, idx);  // [B, d]
  auto grid = rows.view({-1, 1, 1, table_.size(1)}).expand({-1, grid_h_, grid_w_, -1}).contiguous();
  return {grid.to(images.scalar_type()), source_id()};
}

std::vector<std::pair<std::string, torch::Tensor>> ClassEmbeddingProvider::state() const {
  return {{"table", table_}};
}

// ---------------------------------------------------------------- frozen net

FrozenNetImpl::FrozenNetImpl(std::vector<int64_t> trunk_channels, int64_t feature_dim, int64_t num_classes,
                             uint64_t seed) {
  trunk = register_module("trunk", nn::ConvTrunk(std::move(trunk_channels)));
  project = register_module(
      "project", torch::nn::Conv2d(torch::nn::Conv2dOptions(trunk->out_channels(), feature_dim, 1)));
  classifier = register_module("classifier", torch::nn::Linear(feature_dim, num_classes));
  nn::seeded_init(*this, seed);
  // Nonzero bias keeps every projected feature vector away from the origin.
  torch::NoGradGuard no_grad;
  project->bias.fill_(0.1);
}

torch::Tensor FrozenNetImpl::feature_map(const torch::Tensor& images) {
  return project->forward(trunk->forward(images));
}

torch::Tensor FrozenNetImpl::logits(const torch::Tensor& images) {
  auto pooled = feature_map(images).mean({2, 3});
  return classifier->forward(torch::relu(pooled));
}

double train_frozen_net(FrozenNetImpl& net, const torch::Tensor& images, const torch::Tensor& labels,
                        const FrozenNetTrainOptions& options) {
  if (images.size(0) != labels.size(0) || images.size(0) == 0) {
    throw ContractViolation("train_frozen_net: images and labels must be non-empty and aligned");
  }
  torch::optim::Adam opt(net.parameters(), torch::optim::AdamOptions(options.lr));
  std::mt19937_64 rng(options.seed);
  const int64_t n = images.size(0);
  std::uniform_int_distribution<int64_t> pick(0, n - 1);
  double acc = 0.0;
  for (int64_t step = 0; step < options.steps; ++step) {
    std::vector<int64_t> idx(static_cast<std::size_t>(std::min(options.batch_size, n)));
    for (auto& i : idx) i = pick(rng);
    auto sel = torch::tensor(idx, torch::kLong);
    auto x = images.index_select(0, sel);
    auto y = labels.index_select(0, sel).to(torch::kLong);
    auto logits = net.logits(x);
    auto loss = torch::nn::functional::cross_entropy(logits, y);
    opt.zero_grad();
    loss.backward();
    opt.step();
    acc = logits.argmax(1).eq(y).to(torch::kFloat64).mean().item<double>();
  }
  return acc;
}

FrozenNetProvider::FrozenNetProvider(FrozenNet net, int64_t grid_h, int64_t grid_w)
    : net_(std::move(net)), grid_h_(grid_h), grid_w_(grid_w) {
  freeze(*net_);
  net_->eval();
}

int64_t FrozenNetProvider::feature_dim() const { return net_->project->options.out_channels(); }

SemanticTarget FrozenNetProvider::provide(const torch::Tensor& images, std::span<const SampleRef> refs) const {
  require_batch(images, refs);
  torch::NoGradGuard no_grad;
  auto x = images.to(net_->project->weight.scalar_type());
  auto fmap = net_->feature_map(x);
  auto pooled = torch::adaptive_avg_pool2d(fmap, {grid_h_, grid_w_});
  return {pooled.permute({0, 2, 3, 1}).contiguous().to(images.scalar_type()), source_id()};
}

std::vector<std::pair<std::string, torch::Tensor>> FrozenNetProvider::state() const {
  std::vector<std::pair<std::string, torch::Tensor>> out;
  for (const auto& item : net_->named_parameters(true)) out.emplace_back(item.key(), item.value());
  return out;
}

}  // namespace sde::semantic
