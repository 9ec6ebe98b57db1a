#include "loglens/optim.hpp"

#include <cmath>

#include "loglens/errors.hpp"

namespace loglens {

void Optimizer::step(ParamSet& params) {
  for (auto& [name, t] : params.entries()) {
    if (t.requires_grad() && !t.has_grad()) {
      throw TrainingError("no gradient for trainable parameter '" + name + "'");
    }
  }

  double clip = 1.0;
  if (config_.clip_norm > 0) {
    double sq = 0.0;
    for (auto& [_, t] : params.entries())
      if (t.requires_grad())
        for (double g : t.grad()) sq += g * g;
    const double norm = std::sqrt(sq);
    if (norm > config_.clip_norm) clip = config_.clip_norm / norm;
  }

  ++steps_;
  const double t_pow1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
  const double t_pow2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));

  for (auto& [name, t] : params.entries()) {
    if (!t.requires_grad()) continue;
    auto value = t.mutable_data();
    const auto grad = t.grad();
    if (config_.kind == OptimizerKind::sgd) {
      for (std::size_t i = 0; i < value.size(); ++i) value[i] -= config_.lr * clip * grad[i];
      continue;
    }
    auto& mom = moments_[name];
    if (mom.m.empty()) {
      mom.m.assign(value.size(), 0.0);
      mom.v.assign(value.size(), 0.0);
    }
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = grad[i] * clip;
      mom.m[i] = config_.beta1 * mom.m[i] + (1.0 - config_.beta1) * g;
      mom.v[i] = config_.beta2 * mom.v[i] + (1.0 - config_.beta2) * g * g;
      const double m_hat = mom.m[i] / t_pow1;
      const double v_hat = mom.v[i] / t_pow2;
      value[i] -= config_.lr * m_hat / (std::sqrt(v_hat) + config_.eps);
    }
  }
}

}  // namespace loglens
