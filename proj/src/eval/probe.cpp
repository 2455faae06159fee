#include "sde/eval/probe.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <set>

#include "sde/errors.hpp"
#include "sde/tensor_utils.hpp"

namespace sde::eval {

double linear_probe(const torch::Tensor& features, const std::vector<int64_t>& labels, const ProbeOptions& options) {
  if (features.dim() != 2 || features.size(0) != static_cast<int64_t>(labels.size())) {
    throw InvalidInput("linear_probe: features must be [N, D] with one label per row");
  }
  const std::set<int64_t> classes(labels.begin(), labels.end());
  if (classes.size() < 2) throw InvalidInput("linear_probe: need at least two classes");
  if (*classes.begin() < 0) throw InvalidInput("linear_probe: labels must be non-negative");
  const int64_t num_classes = *classes.rbegin() + 1;

  const auto n = static_cast<int64_t>(labels.size());
  std::vector<int64_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(options.seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = std::clamp<int64_t>(static_cast<int64_t>(options.train_fraction * n), 1, n - 1);

  torch::NoGradGuard outer;
  auto idx = torch::tensor(order, torch::kLong);
  auto x = features.detach().to(torch::kFloat64).index_select(0, idx);
  auto y = torch::tensor(labels, torch::kLong).index_select(0, idx);
  auto x_train = x.slice(0, 0, n_train);
  auto x_test = x.slice(0, n_train, n);
  auto mean = x_train.mean(0, true);
  auto std = x_train.std(0, /*unbiased=*/false, true).clamp_min(1e-8);
  x_train = (x_train - mean) / std;
  x_test = (x_test - mean) / std;
  auto y_train = y.slice(0, 0, n_train);
  auto y_test = y.slice(0, n_train, n);

  auto w = torch::zeros({x.size(1), num_classes}, torch::kFloat64).requires_grad_(true);
  auto b = torch::zeros({num_classes}, torch::kFloat64).requires_grad_(true);
  torch::optim::Adam opt({w, b}, torch::optim::AdamOptions(options.lr));
  for (int64_t it = 0; it < options.iterations; ++it) {
    torch::AutoGradMode enable(true);
    opt.zero_grad();
    auto logits = torch::matmul(x_train, w) + b;
    auto loss = torch::nn::functional::cross_entropy(logits, y_train) + options.weight_decay * w.pow(2).sum();
    loss.backward();
    opt.step();
  }
  auto pred = (torch::matmul(x_test, w) + b).argmax(1);
  return pred.eq(y_test).to(torch::kFloat64).mean().item<double>();
}

torch::Tensor mean_pooled_embeddings(const torch::Tensor& entries, const torch::Tensor& codes) {
  if (codes.dim() != 3) throw InvalidInput("mean_pooled_embeddings: codes must be [B, h, w]");
  torch::NoGradGuard no_grad;
  auto rows = entries.detach().index_select(0, codes.reshape({-1}).to(torch::kLong));
  return rows.reshape({codes.size(0), codes.size(1) * codes.size(2), entries.size(1)}).mean(1);
}

void to_json(nlohmann::json& j, const ProbeReport& r) {
  j = {{"accuracy_sde", r.accuracy_sde},
       {"accuracy_baseline", r.accuracy_baseline},
       {"dataset_id", r.dataset_id},
       {"num_classes", r.num_classes}};
}

}  // namespace sde::eval
