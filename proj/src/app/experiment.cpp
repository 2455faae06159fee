#include "sde/app/experiment.hpp"

#include <fstream>

#include "sde/errors.hpp"
#include "sde/tensor_utils.hpp"

namespace sde::app {

namespace fs = std::filesystem;

void ExperimentConfig::validate() const {
  tokenizer.validate();
  lm.validate();
  if (tokenizer_steps <= 0 || tokenizer_batch <= 0) throw ConfigError("tokenizer steps and batch must be positive");
  if (lm_steps < 0 || lm_batch <= 0) throw ConfigError("lm steps must be non-negative and batch positive");
  if (log_every <= 0) throw ConfigError("log_every must be positive");
  if (provider.kind != "class-embedding" && provider.kind != "frozen-net" && provider.kind != "file") {
    throw ConfigError("unknown provider kind '" + provider.kind + "'");
  }
  if (provider.num_classes < 1) throw ConfigError("provider.num_classes must be positive");
  if (train_manifest.empty() || !fs::exists(train_manifest)) {
    throw ConfigError("train_manifest not found: " + train_manifest.string());
  }
  if (provider.kind == "file" && (provider.target_manifest.empty() || !fs::exists(provider.target_manifest))) {
    throw ConfigError("provider.target_manifest not found: " + provider.target_manifest.string());
  }
}

void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  j = {{"seed", c.seed},
       {"train_manifest", c.train_manifest.generic_string()},
       {"provider",
        {{"kind", c.provider.kind},
         {"num_classes", c.provider.num_classes},
         {"target_manifest", c.provider.target_manifest.generic_string()},
         {"frozen_net_steps", c.provider.frozen_net_steps}}},
       {"tokenizer", c.tokenizer},
       {"tokenizer_optim", c.tokenizer_optim},
       {"tokenizer_steps", c.tokenizer_steps},
       {"tokenizer_batch", c.tokenizer_batch},
       {"lm", c.lm},
       {"lm_optim", c.lm_optim},
       {"lm_steps", c.lm_steps},
       {"lm_batch", c.lm_batch},
       {"log_every", c.log_every}};
}

void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  ExperimentConfig d;
  c.seed = j.value("seed", d.seed);
  c.train_manifest = j.value("train_manifest", std::string());
  if (j.contains("provider")) {
    const auto& p = j.at("provider");
    c.provider.kind = p.value("kind", d.provider.kind);
    c.provider.num_classes = p.value("num_classes", d.provider.num_classes);
    c.provider.target_manifest = p.value("target_manifest", std::string());
    c.provider.frozen_net_steps = p.value("frozen_net_steps", d.provider.frozen_net_steps);
  }
  c.tokenizer = j.value("tokenizer", d.tokenizer);
  c.tokenizer_optim = j.value("tokenizer_optim", d.tokenizer_optim);
  c.tokenizer_steps = j.value("tokenizer_steps", d.tokenizer_steps);
  c.tokenizer_batch = j.value("tokenizer_batch", d.tokenizer_batch);
  c.lm = j.value("lm", d.lm);
  c.lm_optim = j.value("lm_optim", d.lm_optim);
  c.lm_steps = j.value("lm_steps", d.lm_steps);
  c.lm_batch = j.value("lm_batch", d.lm_batch);
  c.log_every = j.value("log_every", d.log_every);
}

ExperimentConfig load_experiment(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config not found: " + path.string());
  ExperimentConfig c;
  try {
    c = nlohmann::json::parse(is).get<ExperimentConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("bad config " + path.string() + ": " + e.what());
  }
  const auto base = path.parent_path();
  auto resolve = [&](fs::path& p) {
    if (!p.empty() && p.is_relative()) p = base / p;
  };
  resolve(c.train_manifest);
  resolve(c.provider.target_manifest);
  c.validate();
  return c;
}

std::string config_hash(const ExperimentConfig& c) { return sha256_hex(nlohmann::json(c).dump()); }

}  // namespace sde::app
