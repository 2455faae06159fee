#pragma once

// Independent reference computations used as test oracles. These deliberately
// avoid the library code paths they check.

#include <torch/torch.h>

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "sde/lm/objective.hpp"

namespace sde::support {

/// Exhaustive nearest entry by vectorized squared distance; torch's argmin
/// returns the first minimum, which is the lowest index on ties.
inline torch::Tensor brute_force_codes(const torch::Tensor& flat, const torch::Tensor& entries) {
  auto z = flat.to(torch::kFloat64);
  auto e = entries.to(torch::kFloat64);
  auto dist = (z.unsqueeze(1) - e.unsqueeze(0)).pow(2).sum(-1);
  return dist.argmin(1);
}

/// Masked next-token cross-entropy, recomputed position by position with a
/// scalar log-sum-exp in long double.
inline double masked_ce_oracle(const torch::Tensor& logits, const lm::LmBatch& batch) {
  auto l = logits.detach().to(torch::kFloat64).contiguous();
  auto ids = batch.ids.contiguous();
  auto mask = batch.mask.contiguous();
  const auto b_n = ids.size(0);
  const auto t_n = ids.size(1);
  const auto v = l.size(2);
  long double total = 0.0L;
  int64_t count = 0;
  for (int64_t b = 0; b < b_n; ++b) {
    for (int64_t t = 0; t + 1 < t_n; ++t) {
      if (!mask[b][t + 1].item<bool>()) continue;
      const double* row = l[b][t].data_ptr<double>();
      long double top = -std::numeric_limits<long double>::infinity();
      for (int64_t k = 0; k < v; ++k) top = std::max<long double>(top, row[k]);
      long double sum = 0.0L;
      for (int64_t k = 0; k < v; ++k) sum += std::exp(static_cast<long double>(row[k]) - top);
      const auto target = ids[b][t + 1].item<int64_t>();
      total += (top + std::log(sum)) - row[target];
      ++count;
    }
  }
  return count == 0 ? std::numeric_limits<double>::quiet_NaN() : static_cast<double>(total / count);
}

/// SSIM by explicit loops over non-overlapping 8x8 windows of the channel-mean
/// grayscale image.
inline double ssim_oracle(const torch::Tensor& x, const torch::Tensor& y) {
  auto gx = x.to(torch::kFloat64).mean(0).contiguous();
  auto gy = y.to(torch::kFloat64).mean(0).contiguous();
  auto a = gx.accessor<double, 2>();
  auto b = gy.accessor<double, 2>();
  const double c1 = 0.01 * 0.01;
  const double c2 = 0.03 * 0.03;
  const int64_t win = 8;
  double total = 0.0;
  int64_t windows = 0;
  for (int64_t i0 = 0; i0 + win <= gx.size(0); i0 += win) {
    for (int64_t j0 = 0; j0 + win <= gx.size(1); j0 += win) {
      double ma = 0, mb = 0;
      for (int64_t i = i0; i < i0 + win; ++i)
        for (int64_t j = j0; j < j0 + win; ++j) ma += a[i][j], mb += b[i][j];
      ma /= win * win;
      mb /= win * win;
      double va = 0, vb = 0, cov = 0;
      for (int64_t i = i0; i < i0 + win; ++i) {
        for (int64_t j = j0; j < j0 + win; ++j) {
          va += (a[i][j] - ma) * (a[i][j] - ma);
          vb += (b[i][j] - mb) * (b[i][j] - mb);
          cov += (a[i][j] - ma) * (b[i][j] - mb);
        }
      }
      va /= win * win;
      vb /= win * win;
      cov /= win * win;
      total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++windows;
    }
  }
  return total / static_cast<double>(windows);
}

/// Central difference of `f` with respect to element `index` of `param`
/// (modified in place and restored).
inline double central_difference(torch::Tensor param, int64_t index, double h, const std::function<double()>& f) {
  torch::NoGradGuard no_grad;
  auto flat = param.view({-1});
  const double orig = flat[index].item<double>();
  flat[index].fill_(orig + h);
  const double up = f();
  flat[index].fill_(orig - h);
  const double down = f();
  flat[index].fill_(orig);
  return (up - down) / (2.0 * h);
}

/// |a - n| / max(|a|, |n|, floor).
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

}  // namespace sde::support
