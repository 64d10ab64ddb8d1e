#pragma once

#include <cstdint>
#include <vector>

#include "gfv/tensor.hpp"

namespace gfv {

// AdamW with decoupled weight decay: each step applies
//   p *= 1 - lr * weight_decay
//   p -= lr * m_hat / (sqrt(v_hat) + eps)
// with bias-corrected first and second moments.
class AdamW {
 public:
  struct Config {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.95;
    double eps = 1e-8;
    double weight_decay = 0.05;
  };

  AdamW(std::vector<Tensor> params, Config cfg);

  // Parameters that received no gradient this step are left untouched,
  // weight decay included.
  void step();
  void zero_grad();

  const Config& config() const { return cfg_; }
  Config& config() { return cfg_; }
  uint64_t step_count() const { return t_; }
  void set_step_count(uint64_t t) { t_ = t; }
  size_t param_count() const { return params_.size(); }
  const std::vector<Tensor>& params() const { return params_; }
  std::vector<double>& moment1(size_t i) { return m_.at(i); }
  std::vector<double>& moment2(size_t i) { return v_.at(i); }

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  Config cfg_;
  uint64_t t_ = 0;
};

}  // namespace gfv
