#include "sde/optim/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace sde::optim {

double cosine_warmup_lr(const OptimConfig& c, int64_t step) {
  if (step < 0) step = 0;
  if (c.warmup_steps > 0 && step < c.warmup_steps) {
    return c.lr * static_cast<double>(step) / static_cast<double>(c.warmup_steps);
  }
  const double floor = c.min_lr_ratio * c.lr;
  const int64_t decay_steps = std::max<int64_t>(1, c.total_steps - c.warmup_steps);
  const double progress = std::min(1.0, static_cast<double>(step - c.warmup_steps) / static_cast<double>(decay_steps));
  return floor + (c.lr - floor) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

void to_json(nlohmann::json& j, const OptimConfig& c) {
  j = nlohmann::json{{"lr", c.lr},
                     {"beta1", c.beta1},
                     {"beta2", c.beta2},
                     {"eps", c.eps},
                     {"weight_decay", c.weight_decay},
                     {"warmup_steps", c.warmup_steps},
                     {"total_steps", c.total_steps},
                     {"min_lr_ratio", c.min_lr_ratio}};
}

void from_json(const nlohmann::json& j, OptimConfig& c) {
  auto get = [&j](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  get("lr", c.lr);
  get("beta1", c.beta1);
  get("beta2", c.beta2);
  get("eps", c.eps);
  get("weight_decay", c.weight_decay);
  get("warmup_steps", c.warmup_steps);
  get("total_steps", c.total_steps);
  get("min_lr_ratio", c.min_lr_ratio);
}

}  // namespace sde::optim
