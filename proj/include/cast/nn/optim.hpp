#pragma once

#include <vector>

#include "cast/nn/tensor.hpp"

namespace cast::nn {

struct AdamWConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

template <typename T>
struct OptimState {
  std::vector<Mat<T>> m;
  std::vector<Mat<T>> v;
  long long t = 0;
};

template <typename T>
OptimState<T> make_optim_state(const ParamSet<T>& params) {
  OptimState<T> s;
  for (const auto& p : params) {
    s.m.push_back(Mat<T>::Zero(p.value.rows(), p.value.cols()));
    s.v.push_back(Mat<T>::Zero(p.value.rows(), p.value.cols()));
  }
  return s;
}

// One decoupled-weight-decay step using the gradients stored in `params`.
template <typename T>
void adamw_step(ParamSet<T>& params, OptimState<T>& state, const AdamWConfig& cfg) {
  if (state.m.size() != params.size()) throw ShapeError("optimizer state does not match parameter count");
  ++state.t;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    auto& m = state.m[i];
    auto& v = state.v[i];
    if (m.rows() != p.value.rows() || m.cols() != p.value.cols() || p.grad.rows() != p.value.rows() ||
        p.grad.cols() != p.value.cols())
      throw ShapeError("shape mismatch for parameter '" + p.name + "'");
    const T lr = static_cast<T>(cfg.lr), wd = static_cast<T>(cfg.weight_decay), eps = static_cast<T>(cfg.eps);
    const T c1 = static_cast<T>(1.0 / bc1), c2 = static_cast<T>(1.0 / bc2);
    // plain coordinate loop in formula order, so rounding is reproducible
    T* pv = p.value.data();
    const T* gv = p.grad.data();
    T* mv = m.data();
    T* vv = v.data();
    for (Eigen::Index k = 0; k < p.value.size(); ++k) {
      const T g = gv[k];
      const T g2 = g * g;
      mv[k] = b1 * mv[k] + (T(1) - b1) * g;
      vv[k] = b2 * vv[k] + (T(1) - b2) * g2;
      const T mhat = mv[k] * c1;
      const T vhat = vv[k] * c2;
      pv[k] -= lr * (mhat / (std::sqrt(vhat) + eps)) + lr * wd * pv[k];
    }
  }
}

}  // namespace cast::nn
