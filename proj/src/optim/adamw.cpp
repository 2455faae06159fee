#include "sde/optim/adamw.hpp"

#include <map>

namespace sde::optim {

torch::optim::AdamW make_adamw(const std::vector<torch::Tensor>& params, const OptimConfig& config) {
  auto opts = torch::optim::AdamWOptions(config.lr)
                  .betas({config.beta1, config.beta2})
                  .eps(config.eps)
                  .weight_decay(config.weight_decay);
  return torch::optim::AdamW(params, opts);
}

void set_lr(torch::optim::Optimizer& optimizer, double lr) {
  for (auto& group : optimizer.param_groups()) group.options().set_lr(lr);
}

NamedTensors export_adamw_state(torch::optim::AdamW& optimizer, const NamedTensors& params,
                                const std::string& prefix) {
  NamedTensors out;
  auto& state = optimizer.state();
  for (const auto& [name, p] : params) {
    auto it = state.find(p.unsafeGetTensorImpl());
    if (it == state.end()) continue;
    auto& s = static_cast<torch::optim::AdamWParamState&>(*it->second);
    out.emplace_back(prefix + name + ".exp_avg", s.exp_avg().detach().clone());
    out.emplace_back(prefix + name + ".exp_avg_sq", s.exp_avg_sq().detach().clone());
    out.emplace_back(prefix + name + ".step", torch::tensor({s.step()}, torch::kLong));
  }
  return out;
}

void import_adamw_state(torch::optim::AdamW& optimizer, const NamedTensors& params, const NamedTensors& state,
                        const std::string& prefix) {
  std::map<std::string, torch::Tensor> lookup(state.begin(), state.end());
  auto& st = optimizer.state();
  for (const auto& [name, p] : params) {
    auto a = lookup.find(prefix + name + ".exp_avg");
    auto b = lookup.find(prefix + name + ".exp_avg_sq");
    auto s = lookup.find(prefix + name + ".step");
    if (a == lookup.end() || b == lookup.end() || s == lookup.end()) continue;
    auto ps = std::make_unique<torch::optim::AdamWParamState>();
    ps->exp_avg(a->second.clone().to(p.scalar_type()));
    ps->exp_avg_sq(b->second.clone().to(p.scalar_type()));
    ps->step(s->second.item<int64_t>());
    st[p.unsafeGetTensorImpl()] = std::move(ps);
  }
}

}  // namespace sde::optim
