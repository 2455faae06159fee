#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>

#include "sde/lm/model.hpp"
#include "sde/optim/schedule.hpp"
#include "sde/tokenizer/config.hpp"

namespace sde::app {

struct ProviderConfig {
  std::string kind = "class-embedding";  // class-embedding | frozen-net | file
  int64_t num_classes = 10;
  std::filesystem::path target_manifest;  // file provider only
  int64_t frozen_net_steps = 300;
};

struct ExperimentConfig {
  uint64_t seed = 0;
  std::filesystem::path train_manifest;
  ProviderConfig provider;

  tokenizer::SDEConfig tokenizer;
  optim::OptimConfig tokenizer_optim;
  int64_t tokenizer_steps = 2000;
  int64_t tokenizer_batch = 8;

  lm::ARConfig lm;
  optim::OptimConfig lm_optim;
  int64_t lm_steps = 200;
  int64_t lm_batch = 8;

  int64_t log_every = 50;

  /// Throws ConfigError on inconsistent values or missing referenced files.
  void validate() const;
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);

/// Parses a JSON config; relative paths resolve against the file's directory.
ExperimentConfig load_experiment(const std::filesystem::path& path);

/// SHA-256 of the canonical JSON form.
std::string config_hash(const ExperimentConfig& c);

}  // namespace sde::app
