#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "synthmatch/error.hpp"

namespace synthmatch::nn {

inline std::string shape_string(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

inline std::size_t shape_size(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

/// Dense row-major array. f64 for gradient checks, f32 for training.
template <class T>
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> s, T fill = T(0)) : shape(std::move(s)), data(shape_size(shape), fill) {}
  Tensor(std::vector<std::size_t> s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
    if (data.size() != shape_size(shape))
      throw ShapeError("tensor data of " + std::to_string(data.size()) + " elements does not fit shape " +
                       shape_string(shape));
  }

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t dim(std::size_t i) const { return shape.at(i); }
  std::span<T> span() { return data; }
  std::span<const T> span() const { return data; }
  T& operator[](std::size_t i) { return data[i]; }
  const T& operator[](std::size_t i) const { return data[i]; }
  void fill(T v) { std::fill(data.begin(), data.end(), v); }
  bool all_finite() const {
    for (const T& v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }

  template <class U>
  Tensor<U> cast() const {
    return Tensor<U>(shape, std::vector<U>(data.begin(), data.end()));
  }
};

template <class T>
void require_shape(const Tensor<T>& t, const std::vector<std::size_t>& expected, const char* where) {
  if (t.shape != expected)
    throw ShapeError(std::string(where) + ": expected shape " + shape_string(expected) + ", got " +
                     shape_string(t.shape));
}

template <class T>
struct Param {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
  bool decay = true;  // weight decay applies (off for biases)

  Param() = default;
  Param(std::string n, std::vector<std::size_t> shape, bool apply_decay = true)
      : name(std::move(n)), value(shape), grad(shape), decay(apply_decay) {}
};

template <class T>
using ParamList = std::vector<Param<T>*>;

template <class T>
void zero_grads(const ParamList<T>& params) {
  for (auto* p : params) p->grad.fill(T(0));
}

template <class T>
void scale_grads(const ParamList<T>& params, T factor) {
  for (auto* p : params)
    for (auto& g : p->grad.data) g *= factor;
}

template <class T>
std::size_t parameter_count(const ParamList<T>& params) {
  std::size_t n = 0;
  for (auto* p : params) n += p->value.size();
  return n;
}

}  // namespace synthmatch::nn
