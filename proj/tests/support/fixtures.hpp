#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <vector>

#include "sde/semantic/providers.hpp"
#include "sde/tokenizer/config.hpp"

namespace sde::support {

/// 16x16 images, K = 8, d = 4: small enough for finite differences.
inline tokenizer::SDEConfig mini_config() {
  tokenizer::SDEConfig c;
  c.image_size = 16;
  c.downsample = 4;
  c.enc_channels = {4, 6};
  c.enc_width = 8;
  c.codebook_size = 8;
  c.code_dim = 4;
  c.sem_dim = 6;
  c.sem_width = 8;
  c.sem_layers = 1;
  c.sem_heads = 2;
  c.disc_channels = 4;
  c.disc_layers = 2;
  c.perceptual_channels = {4, 4};
  c.disc_start = 0;
  return c;
}

inline torch::Tensor random_images(int64_t n, int64_t size, uint64_t seed, torch::Dtype dtype = torch::kFloat32) {
  torch::Generator gen = at::make_generator<at::CPUGeneratorImpl>(seed);
  return torch::rand({n, 3, size, size}, gen, dtype);
}

inline std::vector<semantic::SampleRef> labelled_refs(int64_t n, int64_t classes) {
  std::vector<semantic::SampleRef> refs;
  for (int64_t i = 0; i < n; ++i) refs.push_back({"img" + std::to_string(i), i % classes});
  return refs;
}

}  // namespace sde::support
