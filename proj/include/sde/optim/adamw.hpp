#pragma once

#include <torch/torch.h>

#include <string>
#include <utility>
#include <vector>

#include "sde/optim/schedule.hpp"

namespace sde::optim {

using NamedTensors = std::vector<std::pair<std::string, torch::Tensor>>;

torch::optim::AdamW make_adamw(const std::vector<torch::Tensor>& params, const OptimConfig& config);

/// Sets the learning rate of every parameter group.
void set_lr(torch::optim::Optimizer& optimizer, double lr);

/// Moment estimates and step counts, keyed "<prefix><param name>.{exp_avg,exp_avg_sq,step}".
/// Parameters without state (never stepped) are skipped.
NamedTensors export_adamw_state(torch::optim::AdamW& optimizer, const NamedTensors& params,
                                const std::string& prefix);

/// Inverse of export_adamw_state. Entries missing from `state` leave the
/// corresponding parameter without optimizer state.
void import_adamw_state(torch::optim::AdamW& optimizer, const NamedTensors& params, const NamedTensors& state,
                        const std::string& prefix);

}  // namespace sde::optim
