#pragma once

#include <cstdint>
#include <nlohmann/json.hpp>
#include <vector>

namespace sde::tokenizer {

struct SDEConfig {
  int64_t codebook_size = 512;  // K
  int64_t code_dim = 8;         // d
  int64_t downsample = 8;       // f, a power of two
  double beta = 0.25;
  double w_sem = 1.0;
  double lambda_g = 0.5;
  /// First step at which the adversarial term is active. Negative means
  /// "20% of the run's total steps", resolved by the trainer.
  int64_t disc_start = -1;
  int64_t sem_dim = 64;  // d_sem
  int64_t image_size = 64;

  /// Channels of the encoder's downsampling stages, one per factor of two in
  /// `downsample`. The decoder mirrors them.
  std::vector<int64_t> enc_channels = {32, 64, 64};
  int64_t enc_width = 64;  // feature width at which T and z are summed

  /// When false the semantic projection is pinned at zero and never trained,
  /// so encoding degenerates to plain VQ.
  bool fusion = true;

  int64_t sem_width = 128;
  int64_t sem_layers = 2;
  int64_t sem_heads = 4;

  int64_t disc_channels = 64;
  int64_t disc_layers = 3;
  std::vector<int64_t> perceptual_channels = {16, 32, 64};

  /// Quantize unit-normalized features against unit-normalized entries.
  bool codebook_l2_norm = true;

  bool dead_code_restart = false;
  int64_t dead_code_interval = 200;

  int64_t grid_size() const { return image_size / downsample; }

  /// Throws ConfigError describing the first violated constraint.
  void validate() const;
};

void to_json(nlohmann::json& j, const SDEConfig& c);
void from_json(const nlohmann::json& j, SDEConfig& c);

}  // namespace sde::tokenizer
