#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace collusim::nn {

struct AdamConfig {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Bias-corrected first/second moment optimiser; `step` descends the given gradient.
class Adam {
 public:
  Adam(std::size_t n, AdamConfig config = {});

  void step(std::span<double> params, std::span<const double> grad);
  std::size_t steps() const { return t_; }
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  std::vector<double> m_, v_;
  std::size_t t_ = 0;
};

}  // namespace collusim::nn
