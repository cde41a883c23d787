#pragma once

#include "matformer/nn/tensor.hpp"

namespace matformer::nn {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Global gradient-norm clip; 0 disables.
  double clip_norm = 0.0;
};

/// Adam with bias correction. Moments live next to the weights so an
/// interrupted run can resume exactly.
template <class T>
class Adam {
 public:
  Adam(const ParamSet<T>& params, AdamConfig config);

  void step(ParamSet<T>& params, const ParamSet<T>& grads);

  const AdamConfig& config() const { return config_; }
  void set_lr(double lr) { config_.lr = lr; }
  long steps() const { return steps_; }

  ParamSet<T>& first_moment() { return m_; }
  ParamSet<T>& second_moment() { return v_; }
  const ParamSet<T>& first_moment() const { return m_; }
  const ParamSet<T>& second_moment() const { return v_; }
  void set_steps(long steps) { steps_ = steps; }

 private:
  AdamConfig config_;
  ParamSet<T> m_, v_;
  long steps_ = 0;
};

/// Euclidean norm over every tensor of a gradient set.
template <class T>
double global_norm(const ParamSet<T>& grads);

extern template class Adam<float>;
extern template class Adam<double>;

}  // namespace matformer::nn
