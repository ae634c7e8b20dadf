#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "synthmatch/nn/tensor.hpp"

namespace synthmatch::nn {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
};

/// Adam with decoupled weight decay: p -= lr * wd * p, then the
/// bias-corrected Adam step. Decay skips parameters with decay == false.
template <class T>
class AdamW {
 public:
  AdamW(ParamList<T> params, AdamWConfig cfg) : params_(std::move(params)), cfg_(cfg) {
    for (auto* p : params_) {
      m_.emplace_back(p->value.size(), T(0));
      v_.emplace_back(p->value.size(), T(0));
    }
  }

  void step(double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    const T b1 = static_cast<T>(cfg_.beta1), b2 = static_cast<T>(cfg_.beta2);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& val = params_[i]->value.data;
      const auto& g = params_[i]->grad.data;
      auto& m = m_[i];
      auto& v = v_[i];
      const T decay = params_[i]->decay ? static_cast<T>(lr * cfg_.weight_decay) : T(0);
      for (std::size_t k = 0; k < val.size(); ++k) {
        val[k] -= decay * val[k];
        m[k] = b1 * m[k] + (T(1) - b1) * g[k];
        v[k] = b2 * v[k] + (T(1) - b2) * g[k] * g[k];
        const double mhat = static_cast<double>(m[k]) / bc1;
        const double vhat = static_cast<double>(v[k]) / bc2;
        val[k] -= static_cast<T>(lr * mhat / (std::sqrt(vhat) + cfg_.eps));
      }
    }
  }

  std::int64_t steps() const { return t_; }
  void set_steps(std::int64_t t) { t_ = t; }
  std::vector<std::vector<T>>& first_moments() { return m_; }
  std::vector<std::vector<T>>& second_moments() { return v_; }
  const AdamWConfig& config() const { return cfg_; }

 private:
  ParamList<T> params_;
  AdamWConfig cfg_;
  std::vector<std::vector<T>> m_, v_;
  std::int64_t t_ = 0;
};

/// Linear warm-up from 0 to peak over warmup_steps, then cosine decay to 0
/// at total_steps.
inline double warmup_cosine_lr(std::int64_t step, std::int64_t total_steps, std::int64_t warmup_steps, double peak_lr) {
  if (step < 0) return 0.0;
  if (step < warmup_steps) return peak_lr * static_cast<double>(step) / static_cast<double>(warmup_steps);
  if (total_steps <= warmup_steps) return peak_lr;
  double progress = static_cast<double>(step - warmup_steps) / static_cast<double>(total_steps - warmup_steps);
  progress = std::min(progress, 1.0);
  return peak_lr * 0.5 * (1.0 + std::cos(3.14159265358979323846 * progress));
}

template <class T>
double global_grad_norm(const ParamList<T>& params) {
  double acc = 0.0;
  for (auto* p : params)
    for (T g : p->grad.data) acc += static_cast<double>(g) * static_cast<double>(g);
  return std::sqrt(acc);
}

/// Rescales all gradients so their global L2 norm is at most max_norm.
/// Returns the norm before clipping.
template <class T>
double clip_grad_norm(const ParamList<T>& params, double max_norm) {
  const double norm = global_grad_norm(params);
  if (max_norm > 0.0 && norm > max_norm) scale_grads(params, static_cast<T>(max_norm / norm));
  return norm;
}

}  // namespace synthmatch::nn
