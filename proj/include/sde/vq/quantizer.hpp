#pragma once

#include <torch/torch.h>

#include "sde/vq/codebook.hpp"

namespace sde::vq {

struct QuantizationResult {
  /// int64 grid with the leading shape of the input, entries in [0, K).
  torch::Tensor codes;
  /// Codebook rows selected by `codes`, shape of the input. Carries gradient to
  /// the codebook only (no straight-through substitution applied yet).
  torch::Tensor quantized;
  /// mean over positions of ||sg[z] - z_q||^2
  torch::Tensor codebook_loss;
  /// mean over positions of ||z - sg[z_q]||^2
  torch::Tensor commitment_loss;
  double beta = 0.25;
};

/// Index of the nearest entry for every row of `flat` ([N, d]) under squared
/// Euclidean distance. Ties resolve to the lowest index.
torch::Tensor nearest_codes(const torch::Tensor& flat, const torch::Tensor& entries);

/// Snaps each trailing-dimension vector of `z` (shape [..., d]) to its nearest
/// codebook entry and computes both VQ loss terms: squared distance summed
/// over d, averaged over positions.
///
/// Throws ContractViolation when z's last dimension differs from the codebook
/// dimension, InvalidInput when z contains non-finite values.
QuantizationResult quantize(const torch::Tensor& z, const CodebookImpl& codebook, double beta = 0.25);

/// Same as above against an explicit [K, d] entry table (for example the
/// l2-normalized view of a codebook). Gradients reach whatever `entries` was
/// computed from.
QuantizationResult quantize(const torch::Tensor& z, const torch::Tensor& entries, double beta = 0.25);

/// Forward value is `zq`; the backward pass hands the incoming gradient to `z`
/// unchanged.
torch::Tensor straight_through(const torch::Tensor& z, const torch::Tensor& zq);

/// codebook_loss + beta * commitment_loss.
torch::Tensor vq_loss(const QuantizationResult& result);

}  // namespace sde::vq
