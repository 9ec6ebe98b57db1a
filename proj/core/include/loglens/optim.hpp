#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

#include "loglens/param_set.hpp"

namespace loglens {

enum class OptimizerKind { sgd, adam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Rescale the global gradient norm down to this value; 0 disables clipping.
  double clip_norm = 0.0;
};

/// Applies one update to every trainable parameter from its accumulated grad.
/// Adam keeps first/second moment state per parameter name.
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig config = {}) : config_(config) {}

  /// Throws TrainingError when a trainable parameter has no gradient buffer.
  void step(ParamSet& params);
  std::size_t steps() const { return steps_; }
  const OptimizerConfig& config() const { return config_; }

 private:
  struct Moments {
    std::vector<double> m, v;
  };
  OptimizerConfig config_;
  std::size_t steps_ = 0;
  std::unordered_map<std::string, Moments> moments_;
};

inline void optimize_step(ParamSet& params, Optimizer& optimizer) { optimizer.step(params); }

}  // namespace loglens
