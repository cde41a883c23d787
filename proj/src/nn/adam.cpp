#include "matformer/nn/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace matformer::nn {

template <class T>
double global_norm(const ParamSet<T>& grads) {
  double sq = 0;
  for (int i = 0; i < grads.size(); ++i) sq += grads.at(i).template cast<double>().squaredNorm();
  return std::sqrt(sq);
}

template <class T>
Adam<T>::Adam(const ParamSet<T>& params, AdamConfig config)
    : config_(config), m_(params.zeros_like()), v_(params.zeros_like()) {}

template <class T>
void Adam<T>::step(ParamSet<T>& params, const ParamSet<T>& grads) {
  if (grads.size() != params.size() || m_.size() != params.size()) throw std::invalid_argument("adam: tensor count mismatch");
  T clip = T(1);
  if (config_.clip_norm > 0) {
    const double n = global_norm(grads);
    if (!std::isfinite(n)) throw std::runtime_error("adam: non-finite gradient norm");
    if (n > config_.clip_norm) clip = static_cast<T>(config_.clip_norm / n);
  }
  ++steps_;
  const T b1 = static_cast<T>(config_.beta1), b2 = static_cast<T>(config_.beta2);
  const T c1 = static_cast<T>(1.0 - std::pow(config_.beta1, static_cast<double>(steps_)));
  const T c2 = static_cast<T>(1.0 - std::pow(config_.beta2, static_cast<double>(steps_)));
  const T lr = static_cast<T>(config_.lr), eps = static_cast<T>(config_.eps);
  for (int i = 0; i < params.size(); ++i) {
    auto& w = params.at(i);
    const auto& g = grads.at(i);
    if (g.rows() != w.rows() || g.cols() != w.cols()) {
      throw std::invalid_argument("adam: shape mismatch for " + params.names()[i]);
    }
    auto& m = m_.at(i);
    auto& v = v_.at(i);
    for (Eigen::Index k = 0; k < w.size(); ++k) {
      const T gk = g.data()[k] * clip;
      m.data()[k] = b1 * m.data()[k] + (T(1) - b1) * gk;
      v.data()[k] = b2 * v.data()[k] + (T(1) - b2) * gk * gk;
      const T mhat = m.data()[k] / c1;
      const T vhat = v.data()[k] / c2;
      w.data()[k] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

template double global_norm(const ParamSet<float>&);
template double global_norm(const ParamSet<double>&);
template class Adam<float>;
template class Adam<double>;

}  // namespace matformer::nn
