#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "synthmatch/error.hpp"

namespace synthmatch::nn {

/// Numerically stable softmax of one logit vector.
template <class T>
std::vector<T> softmax(std::span<const T> logits) {
  if (logits.empty()) return {};
  const T mx = *std::max_element(logits.begin(), logits.end());
  std::vector<T> p(logits.size());
  T sum = T(0);
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    sum += p[i];
  }
  for (auto& v : p) v /= sum;
  return p;
}

template <class T>
struct LossGrad {
  T loss = T(0);
  std::vector<T> grad;  // d loss / d logits
};

/// -sum_c target_c log softmax(z)_c, gradient softmax(z) - target.
template <class T>
LossGrad<T> cross_entropy(std::span<const T> logits, std::span<const double> target) {
  if (logits.size() != target.size())
    throw ShapeError("cross_entropy: " + std::to_string(logits.size()) + " logits vs " +
                     std::to_string(target.size()) + " target classes");
  const T mx = *std::max_element(logits.begin(), logits.end());
  T sum = T(0);
  for (T z : logits) sum += std::exp(z - mx);
  const T log_z = mx + std::log(sum);
  LossGrad<T> out;
  out.grad.resize(logits.size());
  for (std::size_t c = 0; c < logits.size(); ++c) {
    const T logp = logits[c] - log_z;
    if (target[c] != 0.0) out.loss -= static_cast<T>(target[c]) * logp;
    out.grad[c] = std::exp(logp) - static_cast<T>(target[c]);
  }
  return out;
}

/// (sum_c softmax(z)_c v_c - y)^2 where v_c is the decoded value of class c.
template <class T>
LossGrad<T> expected_value_mse(std::span<const T> logits, std::span<const double> class_values, double y) {
  if (logits.size() != class_values.size()) throw ShapeError("expected_value_mse: class value count mismatch");
  const auto p = softmax(logits);
  T yhat = T(0);
  for (std::size_t c = 0; c < p.size(); ++c) yhat += p[c] * static_cast<T>(class_values[c]);
  const T diff = yhat - static_cast<T>(y);
  LossGrad<T> out;
  out.loss = diff * diff;
  out.grad.resize(p.size());
  for (std::size_t c = 0; c < p.size(); ++c)
    out.grad[c] = T(2) * diff * p[c] * (static_cast<T>(class_values[c]) - yhat);
  return out;
}

}  // namespace synthmatch::nn
