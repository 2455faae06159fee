#include "sde/tokenizer/config.hpp"

#include "sde/errors.hpp"

namespace sde::tokenizer {

namespace {

bool is_power_of_two(int64_t v) { return v > 0 && (v & (v - 1)) == 0; }

int64_t log2_exact(int64_t v) {
  int64_t n = 0;
  while (v > 1) {
    v >>= 1;
    ++n;
  }
  return n;
}

}  // namespace

void SDEConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("tokenizer config: " + what); };
  if (codebook_size <= 0) fail("codebook_size must be positive");
  if (code_dim <= 0) fail("code_dim must be positive");
  if (!is_power_of_two(downsample) || downsample < 2) fail("downsample must be a power of two >= 2");
  if (beta < 0.0) fail("beta must be non-negative");
  if (w_sem < 0.0) fail("w_sem must be non-negative");
  if (lambda_g < 0.0) fail("lambda_g must be non-negative");
  if (sem_dim <= 0) fail("sem_dim must be positive");
  if (image_size <= 0 || image_size % downsample != 0) fail("image_size must be a positive multiple of downsample");
  if (static_cast<int64_t>(enc_channels.size()) != log2_exact(downsample)) {
    fail("enc_channels needs one entry per factor of two in downsample");
  }
  for (auto c : enc_channels) {
    if (c <= 0) fail("enc_channels must be positive");
  }
  if (enc_width <= 0) fail("enc_width must be positive");
  if (sem_width <= 0 || sem_layers <= 0 || sem_heads <= 0 || sem_width % sem_heads != 0) {
    fail("semantic decoder width must be positive and divisible by sem_heads");
  }
  if (disc_channels <= 0 || disc_layers <= 0) fail("discriminator sizes must be positive");
  if (perceptual_channels.empty()) fail("perceptual_channels must be non-empty");
  if (dead_code_interval <= 0) fail("dead_code_interval must be positive");
}

void to_json(nlohmann::json& j, const SDEConfig& c) {
  j = nlohmann::json{{"codebook_size", c.codebook_size},
                     {"code_dim", c.code_dim},
                     {"downsample", c.downsample},
                     {"beta", c.beta},
                     {"w_sem", c.w_sem},
                     {"lambda_g", c.lambda_g},
                     {"disc_start", c.disc_start},
                     {"sem_dim", c.sem_dim},
                     {"image_size", c.image_size},
                     {"enc_channels", c.enc_channels},
                     {"enc_width", c.enc_width},
                     {"fusion", c.fusion},
                     {"sem_width", c.sem_width},
                     {"sem_layers", c.sem_layers},
                     {"sem_heads", c.sem_heads},
                     {"disc_channels", c.disc_channels},
                     {"disc_layers", c.disc_layers},
                     {"perceptual_channels", c.perceptual_channels},
                     {"codebook_l2_norm", c.codebook_l2_norm},
                     {"dead_code_restart", c.dead_code_restart},
                     {"dead_code_interval", c.dead_code_interval}};
}

void from_json(const nlohmann::json& j, SDEConfig& c) {
  // Missing keys keep their defaults.
  auto get = [&j](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  get("codebook_size", c.codebook_size);
  get("code_dim", c.code_dim);
  get("downsample", c.downsample);
  get("beta", c.beta);
  get("w_sem", c.w_sem);
  get("lambda_g", c.lambda_g);
  get("disc_start", c.disc_start);
  get("sem_dim", c.sem_dim);
  get("image_size", c.image_size);
  get("enc_channels", c.enc_channels);
  get("enc_width", c.enc_width);
  get("fusion", c.fusion);
  get("sem_width", c.sem_width);
  get("sem_layers", c.sem_layers);
  get("sem_heads", c.sem_heads);
  get("disc_channels", c.disc_channels);
  get("disc_layers", c.disc_layers);
  get("perceptual_channels", c.perceptual_channels);
  get("codebook_l2_norm", c.codebook_l2_norm);
  get("dead_code_restart", c.dead_code_restart);
  get("dead_code_interval", c.dead_code_interval);
}

}  // namespace sde::tokenizer
