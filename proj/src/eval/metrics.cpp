#include "sde/eval/metrics.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>

#include "sde/errors.hpp"
#include "sde/tensor_utils.hpp"

namespace sde::eval {
namespace {

double psnr_from_mse(double mse) {
  return mse == 0.0 ? std::numeric_limits<double>::infinity() : 10.0 * std::log10(1.0 / mse);
}

using Matrix = Eigen::MatrixXd;

Matrix to_eigen(const torch::Tensor& t) {
  auto c = t.detach().to(torch::kCPU, torch::kFloat64).contiguous();
  Matrix m(c.size(0), c.size(1));
  auto a = c.accessor<double, 2>();
  for (int64_t i = 0; i < c.size(0); ++i) {
    for (int64_t j = 0; j < c.size(1); ++j) m(i, j) = a[i][j];
  }
  return m;
}

Matrix sqrt_psd(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m);
  auto vals = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * vals.asDiagonal() * es.eigenvectors().transpose();
}

double ssim_single(const torch::Tensor& x, const torch::Tensor& y) {
  auto gx = x.to(torch::kFloat64).mean(0);
  auto gy = y.to(torch::kFloat64).mean(0);
  const auto h = gx.size(0);
  const auto w = gx.size(1);
  if (h < kSsimWindow || w < kSsimWindow) throw InvalidInput("ssim: image smaller than the 8x8 window");
  const auto nh = h / kSsimWindow;
  const auto nw = w / kSsimWindow;
  // [nh, 8, nw, 8] -> [nh, nw, 64]
  auto win = [&](const torch::Tensor& g) {
    return g.slice(0, 0, nh * kSsimWindow)
        .slice(1, 0, nw * kSsimWindow)
        .reshape({nh, kSsimWindow, nw, kSsimWindow})
        .permute({0, 2, 1, 3})
        .reshape({nh, nw, kSsimWindow * kSsimWindow});
  };
  auto a = win(gx);
  auto b = win(gy);
  auto mu_a = a.mean(-1);
  auto mu_b = b.mean(-1);
  auto var_a = (a - mu_a.unsqueeze(-1)).pow(2).mean(-1);
  auto var_b = (b - mu_b.unsqueeze(-1)).pow(2).mean(-1);
  auto cov = ((a - mu_a.unsqueeze(-1)) * (b - mu_b.unsqueeze(-1))).mean(-1);
  auto num = (2 * mu_a * mu_b + kSsimC1) * (2 * cov + kSsimC2);
  auto den = (mu_a.pow(2) + mu_b.pow(2) + kSsimC1) * (var_a + var_b + kSsimC2);
  return (num / den).mean().item<double>();
}

}  // namespace

double psnr(const torch::Tensor& x, const torch::Tensor& y) {
  require_same_shape(x, y, "psnr");
  return psnr_from_mse((x.to(torch::kFloat64) - y.to(torch::kFloat64)).pow(2).mean().item<double>());
}

double mean_psnr(const torch::Tensor& x, const torch::Tensor& y) {
  require_same_shape(x, y, "mean_psnr");
  if (x.dim() < 2 || x.size(0) == 0) throw InvalidInput("mean_psnr: expected a non-empty batch");
  double total = 0.0;
  for (int64_t i = 0; i < x.size(0); ++i) total += psnr(x[i], y[i]);
  return total / static_cast<double>(x.size(0));
}

double random_image_baseline_psnr(const torch::Tensor& images, uint64_t seed) {
  auto gen = seeded_generator(seed);
  auto noise = torch::rand(images.sizes(), gen, torch::kFloat32);
  return mean_psnr(images.to(torch::kFloat32), noise);
}

double ssim(const torch::Tensor& x, const torch::Tensor& y) {
  require_same_shape(x, y, "ssim");
  if (x.dim() == 3) return ssim_single(x, y);
  if (x.dim() != 4 || x.size(0) == 0) throw InvalidInput("ssim: expected [3, H, W] or [B, 3, H, W]");
  double total = 0.0;
  for (int64_t i = 0; i < x.size(0); ++i) total += ssim_single(x[i], y[i]);
  return total / static_cast<double>(x.size(0));
}

double frechet_distance(const torch::Tensor& features_a, const torch::Tensor& features_b) {
  if (features_a.dim() != 2 || features_b.dim() != 2 || features_a.size(1) != features_b.size(1)) {
    throw InvalidInput("frechet_distance: expected [N, D] feature matrices with equal D");
  }
  if (features_a.size(0) < 2 || features_b.size(0) < 2) throw InvalidInput("rfid: need at least two images per set");
  const Matrix a = to_eigen(features_a);
  const Matrix b = to_eigen(features_b);
  const Eigen::VectorXd mu_a = a.colwise().mean();
  const Eigen::VectorXd mu_b = b.colwise().mean();
  const auto d = a.cols();
  auto cov = [d](const Matrix& m, const Eigen::VectorXd& mu) {
    const Matrix c = m.rowwise() - mu.transpose();
    Matrix s = (c.transpose() * c) / static_cast<double>(m.rows() - 1);
    s += 1e-6 * Matrix::Identity(d, d);
    return s;
  };
  const Matrix sa = cov(a, mu_a);
  const Matrix sb = cov(b, mu_b);
  // sqrt(Sa Sb) has the same trace as sqrt(Sa^1/2 Sb Sa^1/2), which is symmetric.
  const Matrix ra = sqrt_psd(sa);
  const Matrix mid = ra * sb * ra;
  const double tr_sqrt = sqrt_psd(0.5 * (mid + mid.transpose())).trace();
  return (mu_a - mu_b).squaredNorm() + sa.trace() + sb.trace() - 2.0 * tr_sqrt;
}

double rfid(const torch::Tensor& real, const torch::Tensor& recon, const FeatureExtractor& extractor) {
  require_same_shape(real, recon, "rfid");
  torch::NoGradGuard no_grad;
  return frechet_distance(extractor(real), extractor(recon));
}

void to_json(nlohmann::json& j, const ReconMetrics& m) {
  j = {{"psnr", std::isinf(m.psnr) ? nlohmann::json("inf") : nlohmann::json(m.psnr)}, {"ssim", m.ssim}};
  if (m.rfid) j["rfid"] = *m.rfid;
}

}  // namespace sde::eval
