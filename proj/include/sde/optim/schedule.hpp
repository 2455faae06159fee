#pragma once

#include <cstdint>
#include <nlohmann/json.hpp>

namespace sde::optim {

struct OptimConfig {
  double lr = 1e-4;  // peak
  double beta1 = 0.9;
  double beta2 = 0.95;
  double eps = 1e-8;
  double weight_decay = 0.05;
  int64_t warmup_steps = 0;
  int64_t total_steps = 1;
  double min_lr_ratio = 0.0;  // floor of the cosine tail, as a fraction of lr
};

void to_json(nlohmann::json& j, const OptimConfig& c);
void from_json(const nlohmann::json& j, OptimConfig& c);

/// Linear warmup from 0 to the peak over `warmup_steps`, then cosine decay to
/// `min_lr_ratio * lr` at `total_steps`. Steps beyond the end stay at the floor.
double cosine_warmup_lr(const OptimConfig& config, int64_t step);

}  // namespace sde::optim
