#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <string>
#include <vector>

namespace sde {

/// True when every element of `t` is finite. Empty tensors count as finite.
bool all_finite(const torch::Tensor& t);

/// Throws InvalidInput naming `what` if `t` contains NaN or Inf.
void require_finite(const torch::Tensor& t, const std::string& what);

/// Throws ContractViolation when the two shapes differ.
void require_same_shape(const torch::Tensor& a, const torch::Tensor& b, const std::string& what);

std::string shape_string(const torch::Tensor& t);

/// SHA-256 hex digest of a byte buffer.
std::string sha256_hex(const void* data, std::size_t size);
std::string sha256_hex(const std::string& bytes);

/// Digest over the raw bytes of every named parameter and buffer of a module,
/// in registration order. Used for freeze and determinism checks.
std::string parameter_hash(const torch::nn::Module& module);

/// Digest over a list of tensors (contiguous CPU copies).
std::string tensors_hash(const std::vector<torch::Tensor>& tensors);

/// Marks all parameters of `module` as not requiring grad.
void freeze(torch::nn::Module& module);

}  // namespace sde

namespace sde {

/// CPU generator with a fixed seed; all seeded initialization goes through this.
torch::Generator seeded_generator(uint64_t seed);

}  // namespace sde

namespace sde {

/// SplitMix64 mix of (seed, stream); gives each submodule its own seed.
uint64_t derive_seed(uint64_t seed, uint64_t stream);

}  // namespace sde
