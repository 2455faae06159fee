#include "sde/app/pipeline.hpp"

#include <fstream>
#include <random>

#include "sde/errors.hpp"
#include "sde/io/checkpoint.hpp"
#include "sde/io/dataset.hpp"
#include "sde/io/png.hpp"
#include "sde/lm/corpus_io.hpp"
#include "sde/lm/trainer.hpp"
#include "sde/tensor_utils.hpp"
#include "sde/tokenizer/trainer.hpp"

namespace sde::app {

namespace fs = std::filesystem;

namespace {

// Seed streams for the independently initialized pieces of an experiment.
enum Stream : uint64_t {
  kModelStream = 10,
  kPerceptualStream = 11,
  kDiscStream = 12,
  kClassTableStream = 13,
  kFrozenNetStream = 14,
  kTokenizerTrainStream = 15,
  kCorpusStream = 16,
  kVlmInitStream = 20,
  kVlmTrainStream = 21,
};

std::span<const semantic::SampleRef> refs_of(const Dataset& data, int64_t begin, int64_t end) {
  return std::span<const semantic::SampleRef>(data.refs).subspan(static_cast<std::size_t>(begin),
                                                                  static_cast<std::size_t>(end - begin));
}

io::NamedTensors prefixed(const std::vector<std::pair<std::string, torch::Tensor>>& in, const std::string& prefix) {
  io::NamedTensors out;
  for (const auto& [name, t] : in) out.emplace_back(prefix + name, t);
  return out;
}

void append(io::NamedTensors& dst, const io::NamedTensors& src) { dst.insert(dst.end(), src.begin(), src.end()); }

}  // namespace

// ---------------------------------------------------------------- datasets

std::vector<std::string> Dataset::image_ids() const {
  std::vector<std::string> out;
  for (const auto& r : refs) out.push_back(r.image_id);
  return out;
}

std::vector<int64_t> Dataset::labels() const {
  std::vector<int64_t> out;
  for (const auto& r : refs) {
    if (!r.label) throw ConfigError("image " + r.image_id + " has no label");
    out.push_back(*r.label);
  }
  return out;
}

Dataset Dataset::slice(int64_t begin, int64_t end) const {
  Dataset out;
  out.images = images.slice(0, begin, end);
  out.refs.assign(refs.begin() + begin, refs.begin() + end);
  out.captions.assign(captions.begin() + begin, captions.begin() + end);
  return out;
}

Dataset load_dataset(const fs::path& manifest_path) {
  const auto manifest = io::DatasetManifest::load(manifest_path);
  Dataset d;
  d.images = io::load_images(manifest);
  for (const auto& r : manifest.records) {
    d.refs.push_back({r.image_id(), r.label});
    d.captions.push_back(r.caption.value_or(""));
  }
  return d;
}

Dataset from_toy(const data::ToyDataset& toy) {
  Dataset d;
  d.images = toy.images;
  for (int64_t i = 0; i < toy.size(); ++i) {
    d.refs.push_back({toy.image_ids[static_cast<std::size_t>(i)], toy.labels[static_cast<std::size_t>(i)]});
  }
  d.captions = toy.captions;
  return d;
}

fs::path write_toy_dataset(const fs::path& dir, int64_t count, int64_t image_size, uint64_t seed) {
  fs::create_directories(dir / "images");
  const auto toy = data::make_toy_dataset(count, image_size, seed);
  io::DatasetManifest manifest;
  for (int64_t i = 0; i < toy.size(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    io::DatasetRecord r;
    r.image_path = dir / "images" / (toy.image_ids[k] + ".png");
    io::write_png(r.image_path, toy.images[i]);
    r.caption = toy.captions[k];
    r.label = toy.labels[k];
    manifest.records.push_back(std::move(r));
  }
  const auto path = dir / "manifest.jsonl";
  manifest.save(path);
  return path;
}

std::shared_ptr<semantic::SemanticProvider> make_provider(const ExperimentConfig& config, const Dataset& data) {
  const auto& tok = config.tokenizer;
  const auto grid = tok.grid_size();
  const auto& p = config.provider;
  if (p.kind == "class-embedding") {
    return std::make_shared<semantic::ClassEmbeddingProvider>(p.num_classes, tok.sem_dim, grid, grid,
                                                              derive_seed(config.seed, kClassTableStream));
  }
  if (p.kind == "frozen-net") {
    semantic::FrozenNet net(tok.perceptual_channels, tok.sem_dim, p.num_classes,
                            derive_seed(config.seed, kFrozenNetStream));
    semantic::FrozenNetTrainOptions opts;
    opts.steps = p.frozen_net_steps;
    opts.seed = derive_seed(config.seed, kFrozenNetStream);
    semantic::train_frozen_net(*net, data.images, torch::tensor(data.labels(), torch::kLong), opts);
    return std::make_shared<semantic::FrozenNetProvider>(net, grid, grid);
  }
  if (p.kind == "file") {
    return std::make_shared<semantic::FileProvider>(
        semantic::TargetManifest::load(p.target_manifest, grid, grid, tok.sem_dim));
  }
  throw ConfigError("unknown provider kind '" + p.kind + "'");
}

// ---------------------------------------------------------------- tokenizer

namespace {

std::shared_ptr<adversarial::PerceptualNet> perceptual_for(const ExperimentConfig& config,
                                                           const semantic::SemanticProvider& provider) {
  if (auto trunk = provider.trunk()) return std::make_shared<adversarial::PerceptualNet>(trunk);
  return std::make_shared<adversarial::PerceptualNet>(adversarial::PerceptualNet::random(
      derive_seed(config.seed, kPerceptualStream), config.tokenizer.perceptual_channels));
}

optim::OptimConfig schedule_for(optim::OptimConfig c, int64_t total_steps) {
  c.total_steps = total_steps;
  return c;
}

}  // namespace

TokenizerBundle make_tokenizer(const ExperimentConfig& config, const Dataset& data) {
  TokenizerBundle b;
  b.config = config;
  b.model = tokenizer::SDEModel(config.tokenizer, derive_seed(config.seed, kModelStream));
  b.disc = adversarial::PatchDiscriminator(config.tokenizer.disc_channels, config.tokenizer.disc_layers,
                                           derive_seed(config.seed, kDiscStream));
  b.provider = make_provider(config, data);
  b.perceptual = perceptual_for(config, *b.provider);
  return b;
}

std::vector<nlohmann::json> train_tokenizer(TokenizerBundle& bundle, const Dataset& data, int64_t until,
                                            const LogFn& log) {
  const auto& cfg = bundle.config;
  tokenizer::TokenizerTrainer trainer(bundle.model, bundle.disc, *bundle.perceptual,
                                      schedule_for(cfg.tokenizer_optim, cfg.tokenizer_steps),
                                      derive_seed(cfg.seed, kTokenizerTrainStream));
  trainer.load_optimizer_state(bundle.optimizer_state);
  const auto provider_hash = bundle.provider->parameter_hash();

  std::vector<nlohmann::json> curve;
  const auto stream = derive_seed(cfg.seed, kTokenizerTrainStream);
  for (int64_t step = bundle.step; step < until; ++step) {
    const auto idx = lm::batch_indices(stream, step, static_cast<std::size_t>(data.size()), cfg.tokenizer_batch);
    std::vector<int64_t> rows(idx.begin(), idx.end());
    std::vector<semantic::SampleRef> refs;
    for (auto i : idx) refs.push_back(data.refs[i]);
    auto images = data.images.index_select(0, torch::tensor(rows, torch::kLong));
    tokenizer::TrainBatch batch{images, bundle.provider->provide(images, refs)};
    const auto report = trainer.train_step(batch, step);

    nlohmann::json rec = report.loss;
    rec["step"] = step;
    rec["lr"] = report.lr;
    if (report.disc_loss) rec["l_disc"] = *report.disc_loss;
    curve.push_back(rec);
    bundle.step = step + 1;
    if (log && (step % cfg.log_every == 0 || step + 1 == until)) log(rec);
  }
  if (bundle.provider->parameter_hash() != provider_hash) {
    throw ContractViolation("semantic provider changed during tokenizer training");
  }
  bundle.optimizer_state = trainer.optimizer_state();
  return curve;
}

void save_tokenizer(const fs::path& path, const TokenizerBundle& bundle) {
  io::NamedTensors tensors = io::module_tensors(*bundle.model, "model.");
  append(tensors, io::module_tensors(*bundle.disc, "disc."));
  append(tensors, prefixed(bundle.provider->state(), "provider."));
  if (!bundle.provider->trunk()) append(tensors, io::module_tensors(*bundle.perceptual->trunk(), "perceptual."));
  append(tensors, prefixed(bundle.optimizer_state, "optim."));

  io::CheckpointMeta meta;
  meta.kind = "tokenizer";
  meta.config = bundle.config;
  meta.config_hash = config_hash(bundle.config);
  meta.seed = bundle.config.seed;
  meta.step = bundle.step;
  meta.extra = {{"provider", bundle.provider->source_id()},
                {"provider_hash", bundle.provider->parameter_hash()},
                {"grid", bundle.config.tokenizer.grid_size()}};
  io::save_checkpoint(path, tensors, meta);
}

TokenizerBundle load_tokenizer(const fs::path& path) {
  const auto ck = io::load_checkpoint(path);
  if (ck.meta.kind != "tokenizer") throw IoError(path.string() + " is not a tokenizer checkpoint");
  TokenizerBundle b;
  b.config = ck.meta.config.get<ExperimentConfig>();
  const auto& tok = b.config.tokenizer;
  const auto grid = tok.grid_size();
  b.model = tokenizer::SDEModel(tok, 0);
  io::load_into(*b.model, ck.section("model."));
  b.disc = adversarial::PatchDiscriminator(tok.disc_channels, tok.disc_layers, 0);
  io::load_into(*b.disc, ck.section("disc."));

  const auto provider_state = ck.section("provider.");
  const auto& kind = b.config.provider.kind;
  if (kind == "class-embedding") {
    if (provider_state.empty()) throw IoError("checkpoint lacks the class embedding table");
    b.provider = std::make_shared<semantic::ClassEmbeddingProvider>(provider_state.front().second, grid, grid);
  } else if (kind == "frozen-net") {
    semantic::FrozenNet net(tok.perceptual_channels, tok.sem_dim, b.config.provider.num_classes, 0);
    io::load_into(*net, provider_state);
    b.provider = std::make_shared<semantic::FrozenNetProvider>(net, grid, grid);
  } else {
    b.provider = std::make_shared<semantic::FileProvider>(
        semantic::TargetManifest::load(b.config.provider.target_manifest, grid, grid, tok.sem_dim));
  }
  if (b.provider->parameter_hash() != ck.meta.extra.value("provider_hash", std::string())) {
    throw IoError("restored semantic provider does not match the checkpoint");
  }
  if (auto provider_trunk = b.provider->trunk()) {
    b.perceptual = std::make_shared<adversarial::PerceptualNet>(provider_trunk);
  } else {
    nn::ConvTrunk trunk(tok.perceptual_channels);
    io::load_into(*trunk, ck.section("perceptual."));
    b.perceptual = std::make_shared<adversarial::PerceptualNet>(trunk);
  }
  b.step = ck.meta.step;
  b.optimizer_state = ck.section("optim.");
  return b;
}

torch::Tensor tokenize(TokenizerBundle& bundle, const Dataset& data, int64_t batch) {
  bundle.model->eval();
  std::vector<torch::Tensor> parts;
  for (int64_t begin = 0; begin < data.size(); begin += batch) {
    const auto end = std::min(data.size(), begin + batch);
    auto images = data.images.slice(0, begin, end);
    parts.push_back(bundle.model->tokenize(images, bundle.provider->provide(images, refs_of(data, begin, end))));
  }
  return torch::cat(parts);
}

torch::Tensor reconstruct(TokenizerBundle& bundle, const torch::Tensor& codes, int64_t batch) {
  bundle.model->eval();
  torch::NoGradGuard no_grad;
  std::vector<torch::Tensor> parts;
  for (int64_t begin = 0; begin < codes.size(0); begin += batch) {
    parts.push_back(bundle.model->reconstruct(codes.slice(0, begin, std::min(codes.size(0), begin + batch))));
  }
  return torch::cat(parts);
}

// ---------------------------------------------------------------- language model

std::vector<lm::SequenceSample> build_corpus(const torch::Tensor& codes, std::span<const std::string> captions,
                                             const lm::VocabLayout& layout, uint64_t seed) {
  if (codes.dim() != 3 || codes.size(0) != static_cast<int64_t>(captions.size())) {
    throw InvalidInput("build_corpus: codes must be [N, h, w] with one caption per image");
  }
  std::mt19937_64 rng(derive_seed(seed, kCorpusStream));
  const auto prompt = lm::encode_bytes(kDescribePrompt);
  auto flat = codes.reshape({codes.size(0), -1}).to(torch::kLong).contiguous();
  std::vector<lm::SequenceSample> out;
  for (int64_t i = 0; i < flat.size(0); ++i) {
    const auto* p = flat[i].data_ptr<int64_t>();
    std::vector<int64_t> grid(p, p + flat.size(1));
    const auto caption = lm::encode_bytes(captions[static_cast<std::size_t>(i)]);
    out.push_back(lm::assemble_understanding(prompt, grid, caption, layout));
    out.push_back(lm::assemble_generation(lm::encode_bytes(lm::pick_instruction(rng)), caption, grid, layout));
  }
  return out;
}

void save_token_cache(const fs::path& path, std::span<const lm::SequenceSample> samples,
                      const nlohmann::json& meta) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  lm::write_token_cache(path, samples);
  std::ofstream os(io::sidecar_path(path));
  if (!os) throw IoError("cannot write cache sidecar for " + path.string());
  os << meta.dump(2) << '\n';
}

lm::VocabLayout vocab_layout(const ExperimentConfig& config) {
  return lm::VocabLayout(lm::kByteVocab, config.tokenizer.codebook_size);
}

VlmBundle make_vlm(const ExperimentConfig& config) {
  VlmBundle b;
  b.config = config;
  b.model = lm::extend_embeddings(nullptr, config.lm, vocab_layout(config), derive_seed(config.seed, kVlmInitStream));
  return b;
}

std::vector<nlohmann::json> train_vlm(VlmBundle& bundle, std::span<const lm::SequenceSample> corpus, int64_t until,
                                      const LogFn& log) {
  const auto& cfg = bundle.config;
  lm::LmTrainer trainer(bundle.model, vocab_layout(cfg), schedule_for(cfg.lm_optim, std::max<int64_t>(1, cfg.lm_steps)),
                        derive_seed(cfg.seed, kVlmTrainStream), cfg.lm_batch);
  trainer.load_optimizer_state(bundle.optimizer_state);
  std::vector<nlohmann::json> curve;
  for (int64_t step = bundle.step; step < until; ++step) {
    const auto r = trainer.train_step(corpus, step);
    nlohmann::json rec = {{"step", step}, {"loss", r.loss}, {"recompute", r.recompute}, {"lr", r.lr}};
    for (const auto& [kind, v] : r.per_kind) {
      rec[kind == lm::SampleKind::kUnderstanding ? "loss_understanding" : "loss_generation"] = v;
    }
    curve.push_back(rec);
    bundle.step = step + 1;
    if (log && (step % cfg.log_every == 0 || step + 1 == until)) log(rec);
  }
  bundle.optimizer_state = trainer.optimizer_state();
  return curve;
}

void save_vlm(const fs::path& path, const VlmBundle& bundle) {
  io::NamedTensors tensors = io::module_tensors(*bundle.model, "model.");
  append(tensors, prefixed(bundle.optimizer_state, "optim."));
  io::CheckpointMeta meta;
  meta.kind = "vlm";
  meta.config = bundle.config;
  meta.config_hash = config_hash(bundle.config);
  meta.seed = bundle.config.seed;
  meta.step = bundle.step;
  meta.extra = {{"vocab_total", bundle.model->vocab_size()}};
  io::save_checkpoint(path, tensors, meta);
}

VlmBundle load_vlm(const fs::path& path) {
  const auto ck = io::load_checkpoint(path);
  if (ck.meta.kind != "vlm") throw IoError(path.string() + " is not a VLM checkpoint");
  VlmBundle b;
  b.config = ck.meta.config.get<ExperimentConfig>();
  b.model = lm::ARModel(b.config.lm, vocab_layout(b.config).total(), 0);
  io::load_into(*b.model, ck.section("model."));
  b.step = ck.meta.step;
  b.optimizer_state = ck.section("optim.");
  return b;
}

}  // namespace sde::app
