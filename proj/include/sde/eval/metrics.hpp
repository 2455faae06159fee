#pragma once

#include <torch/torch.h>

#include <functional>
#include <nlohmann/json.hpp>
#include <optional>

namespace sde::eval {

/// 10 log10(1 / MSE) over the whole tensor; +inf when MSE is zero.
double psnr(const torch::Tensor& x, const torch::Tensor& y);

/// Per-image PSNR averaged over the batch dimension. Identical pairs
/// contribute +inf, so the mean is +inf if any pair is identical.
double mean_psnr(const torch::Tensor& x, const torch::Tensor& y);

/// Mean PSNR of `images` against uniform noise images drawn from `seed`.
double random_image_baseline_psnr(const torch::Tensor& images, uint64_t seed);

inline constexpr int64_t kSsimWindow = 8;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

/// SSIM of two [3, H, W] (or [B, 3, H, W], averaged) images in [0, 1]:
/// channel-mean grayscale, non-overlapping 8x8 windows, population
/// statistics per window, mean over windows.
double ssim(const torch::Tensor& x, const torch::Tensor& y);

using FeatureExtractor = std::function<torch::Tensor(const torch::Tensor&)>;

/// Frechet distance between Gaussian fits of extractor features ([N, D]
/// per set); 1e-6 I is added to each covariance.
double rfid(const torch::Tensor& real, const torch::Tensor& recon, const FeatureExtractor& extractor);

/// Distance from precomputed feature matrices.
double frechet_distance(const torch::Tensor& features_a, const torch::Tensor& features_b);

struct ReconMetrics {
  double psnr = 0.0;
  double ssim = 0.0;
  std::optional<double> rfid;
};

void to_json(nlohmann::json& j, const ReconMetrics& m);

}  // namespace sde::eval
