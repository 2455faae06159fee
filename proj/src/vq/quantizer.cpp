#include "sde/vq/quantizer.hpp"

#include <limits>

#include "sde/errors.hpp"
#include "sde/tensor_utils.hpp"

namespace sde::vq {

torch::Tensor nearest_codes(const torch::Tensor& flat, const torch::Tensor& entries) {
  if (flat.dim() != 2 || entries.dim() != 2 || flat.size(1) != entries.size(1)) {
    throw ContractViolation("nearest_codes: expected [N, d] and [K, d], got " + shape_string(flat) + " and " +
                            shape_string(entries));
  }
  auto z = flat.detach().to(torch::kCPU, torch::kFloat64).contiguous();
  auto e = entries.detach().to(torch::kCPU, torch::kFloat64).contiguous();
  const int64_t n = z.size(0);
  const int64_t k = e.size(0);
  const int64_t d = z.size(1);
  const double* zp = z.data_ptr<double>();
  const double* ep = e.data_ptr<double>();

  auto codes = torch::empty({n}, torch::kLong);
  auto* cp = codes.data_ptr<int64_t>();
  for (int64_t i = 0; i < n; ++i) {
    const double* zi = zp + i * d;
    double best = std::numeric_limits<double>::infinity();
    int64_t best_k = 0;
    for (int64_t j = 0; j < k; ++j) {
      const double* ej = ep + j * d;
      double dist = 0.0;
      for (int64_t c = 0; c < d; ++c) {
        const double diff = zi[c] - ej[c];
        dist += diff * diff;
      }
      // Strict comparison keeps the lowest index on ties.
      if (dist < best) {
        best = dist;
        best_k = j;
      }
    }
    cp[i] = best_k;
  }
  return codes;
}

QuantizationResult quantize(const torch::Tensor& z, const CodebookImpl& codebook, double beta) {
  return quantize(z, codebook.entries(), beta);
}

QuantizationResult quantize(const torch::Tensor& z, const torch::Tensor& entries, double beta) {
  if (entries.dim() != 2) throw ContractViolation("quantize: entries must be [K, d]");
  const auto d = entries.size(1);
  if (z.dim() < 1 || z.size(-1) != d) {
    throw ContractViolation("quantize: feature dimension " + shape_string(z) + " does not match codebook d=" +
                            std::to_string(d));
  }
  if (beta < 0.0) throw ContractViolation("quantize: beta must be non-negative");
  require_finite(z, "quantize input");

  auto grid_shape = z.sizes().vec();
  grid_shape.pop_back();

  auto flat_codes = nearest_codes(z.reshape({-1, d}), entries);
  auto codes = flat_codes.reshape(grid_shape).to(z.device());
  auto out_shape = grid_shape;
  out_shape.push_back(d);
  auto zq = entries.index_select(0, flat_codes.to(entries.device())).reshape(out_shape).to(z.scalar_type());

  QuantizationResult result;
  result.codes = codes;
  result.quantized = zq;
  result.codebook_loss = (z.detach() - zq).pow(2).sum(-1).mean();
  result.commitment_loss = (z - zq.detach()).pow(2).sum(-1).mean();
  result.beta = beta;
  return result;
}

torch::Tensor straight_through(const torch::Tensor& z, const torch::Tensor& zq) {
  require_same_shape(z, zq, "straight_through");
  return zq.detach() + (z - z.detach());
}

torch::Tensor vq_loss(const QuantizationResult& result) {
  return result.codebook_loss + result.beta * result.commitment_loss;
}

}  // namespace sde::vq
