#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <functional>
#include <memory>
#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sde/adversarial/discriminator.hpp"
#include "sde/adversarial/perceptual.hpp"
#include "sde/app/experiment.hpp"
#include "sde/data/toy_dataset.hpp"
#include "sde/lm/model.hpp"
#include "sde/lm/sequence.hpp"
#include "sde/optim/adamw.hpp"
#include "sde/semantic/providers.hpp"
#include "sde/tokenizer/model.hpp"

namespace sde::app {

/// Images plus per-image side information, in manifest order.
struct Dataset {
  torch::Tensor images;  // [N, 3, S, S]
  std::vector<semantic::SampleRef> refs;
  std::vector<std::string> captions;  // empty strings where the manifest has none

  int64_t size() const { return static_cast<int64_t>(refs.size()); }
  std::vector<std::string> image_ids() const;
  /// Throws ConfigError if any record lacks a label.
  std::vector<int64_t> labels() const;
  Dataset slice(int64_t begin, int64_t end) const;
};

Dataset load_dataset(const std::filesystem::path& manifest);
Dataset from_toy(const data::ToyDataset& toy);

/// Writes PNGs plus manifest.jsonl into `dir`; returns the manifest path.
std::filesystem::path write_toy_dataset(const std::filesystem::path& dir, int64_t count, int64_t image_size,
                                        uint64_t seed);

/// Builds the configured semantic provider; frozen-net trains on `data` first.
std::shared_ptr<semantic::SemanticProvider> make_provider(const ExperimentConfig& config, const Dataset& data);

using LogFn = std::function<void(const nlohmann::json&)>;

struct TokenizerBundle {
  ExperimentConfig config;
  tokenizer::SDEModel model{nullptr};
  adversarial::PatchDiscriminator disc{nullptr};
  std::shared_ptr<semantic::SemanticProvider> provider;
  std::shared_ptr<adversarial::PerceptualNet> perceptual;
  int64_t step = 0;
  optim::NamedTensors optimizer_state;
};

TokenizerBundle make_tokenizer(const ExperimentConfig& config, const Dataset& data);

/// Trains until bundle.step == `until`. Batches depend only on (seed, step),
/// so a resumed run continues the original sequence. Returns one JSON record
/// per step; `log` sees every log_every-th record and the last one.
std::vector<nlohmann::json> train_tokenizer(TokenizerBundle& bundle, const Dataset& data, int64_t until,
                                            const LogFn& log = {});

void save_tokenizer(const std::filesystem::path& path, const TokenizerBundle& bundle);
TokenizerBundle load_tokenizer(const std::filesystem::path& path);

/// Codes [N, h, w] for every image, in chunks of `batch`.
torch::Tensor tokenize(TokenizerBundle& bundle, const Dataset& data, int64_t batch = 32);
torch::Tensor reconstruct(TokenizerBundle& bundle, const torch::Tensor& codes, int64_t batch = 32);

/// Understanding and generation samples for every image. Understanding asks
/// for a description and targets the caption; generation targets the codes.
std::vector<lm::SequenceSample> build_corpus(const torch::Tensor& codes, std::span<const std::string> captions,
                                             const lm::VocabLayout& layout, uint64_t seed);

inline constexpr const char* kDescribePrompt = "Describe the image.";

/// Token cache plus its JSON sidecar ("<path>.json": config hash, seed, grid).
void save_token_cache(const std::filesystem::path& path, std::span<const lm::SequenceSample> samples,
                      const nlohmann::json& meta);

struct VlmBundle {
  ExperimentConfig config;
  lm::ARModel model{nullptr};
  int64_t step = 0;
  optim::NamedTensors optimizer_state;
};

lm::VocabLayout vocab_layout(const ExperimentConfig& config);
VlmBundle make_vlm(const ExperimentConfig& config);

/// Same resume contract as train_tokenizer.
std::vector<nlohmann::json> train_vlm(VlmBundle& bundle, std::span<const lm::SequenceSample> corpus, int64_t until,
                                      const LogFn& log = {});

void save_vlm(const std::filesystem::path& path, const VlmBundle& bundle);
VlmBundle load_vlm(const std::filesystem::path& path);

}  // namespace sde::app
