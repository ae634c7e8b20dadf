#pragma once

// Single-example layers with exact analytic backward passes. Each layer
// caches what it needs from the last forward() call; backward() must follow
// the matching forward() and accumulates into parameter gradients.

#include <memory>
#include <random>
#include <string>
#include <vector>

#include "synthmatch/nn/tensor.hpp"
#include "synthmatch/pdc.hpp"

namespace synthmatch::nn {

using Rng = std::mt19937_64;

template <class T>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor<T> forward(const Tensor<T>& x) = 0;
  virtual Tensor<T> backward(const Tensor<T>& grad_out) = 0;
  virtual ParamList<T> params() { return {}; }
  virtual std::string kind() const = 0;
};

/// y = W x + b over the flattened input.
template <class T>
class Dense : public Layer<T> {
 public:
  Dense(std::string name, std::size_t in, std::size_t out, Rng& rng);
  Tensor<T> forward(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  ParamList<T> params() override { return {&weight_, &bias_}; }
  std::string kind() const override { return "dense"; }
  std::size_t in_features() const { return in_; }
  std::size_t out_features() const { return out_; }
  Param<T>& weight() { return weight_; }
  Param<T>& bias() { return bias_; }

 private:
  std::size_t in_, out_;
  Param<T> weight_, bias_;
  Tensor<T> input_;
};

/// Block-diagonal dense layer: input and output are split into the same
/// number of groups and output group g reads only input group g. Weights
/// outside the blocks are structurally zero and receive no gradient.
template <class T>
class MaskedDense : public Layer<T> {
 public:
  MaskedDense(std::string name, std::vector<std::size_t> in_groups, std::vector<std::size_t> out_groups, Rng& rng);
  Tensor<T> forward(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  ParamList<T> params() override { return {&weight_, &bias_}; }
  std::string kind() const override { return "masked_dense"; }

 private:
  std::vector<std::size_t> in_off_, out_off_;
  std::size_t in_, out_;
  Param<T> weight_, bias_;
  Tensor<T> input_;
};

struct Conv2dSpec {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t kernel_h = 3, kernel_w = 3;
  std::size_t stride_h = 1, stride_w = 1;
  std::size_t pad_h = 1, pad_w = 1;

  std::size_t out_h(std::size_t h) const { return (h + 2 * pad_h - kernel_h) / stride_h + 1; }
  std::size_t out_w(std::size_t w) const { return (w + 2 * pad_w - kernel_w) / stride_w + 1; }
};

/// C x H x W -> O x H' x W' cross-correlation with zero padding.
template <class T>
class Conv2d : public Layer<T> {
 public:
  Conv2d(std::string name, const Conv2dSpec& spec, Rng& rng);
  Tensor<T> forward(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  ParamList<T> params() override { return {&weight_, &bias_}; }
  std::string kind() const override { return "conv2d"; }
  const Conv2dSpec& spec() const { return spec_; }

 private:
  Conv2dSpec spec_;
  Param<T> weight_, bias_;
  Tensor<T> input_;
};

/// Prime-dilated convolution along axis 1 of a C x K x T input whose axis 1
/// is a log-frequency axis with the filter's bins per octave.
template <class T>
class PdcLayer : public Layer<T> {
 public:
  PdcLayer(std::string name, std::size_t channels, pdc::DilatedLocations locations, bool per_channel, Rng& rng);
  Tensor<T> forward(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  ParamList<T> params() override { return {&taps_}; }
  std::string kind() const override { return "pdc"; }
  const pdc::DilatedLocations& locations() const { return locations_; }
  Param<T>& taps() { return taps_; }

 private:
  std::size_t channels_;
  pdc::DilatedLocations locations_;
  bool per_channel_;
  Param<T> taps_;
  Tensor<T> input_;
};

template <class T>
class Relu : public Layer<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  std::string kind() const override { return "relu"; }

 private:
  Tensor<T> input_;
};

template <class T>
class Tanh : public Layer<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  std::string kind() const override { return "tanh"; }

 private:
  Tensor<T> output_;
};

/// Elman cell h_t = tanh(Wx x_t + Wh h_{t-1} + b) over a T x D sequence;
/// the output is the final hidden state.
template <class T>
class SimpleRnn : public Layer<T> {
 public:
  SimpleRnn(std::string name, std::size_t input_dim, std::size_t hidden, Rng& rng);
  Tensor<T> forward(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  ParamList<T> params() override { return {&wx_, &wh_, &bias_}; }
  std::string kind() const override { return "rnn"; }

 private:
  std::size_t input_dim_, hidden_;
  Param<T> wx_, wh_, bias_;
  Tensor<T> input_;
  std::vector<std::vector<T>> states_;  // h_0 .. h_T
};

template <class T>
class Sequential : public Layer<T> {
 public:
  Sequential() = default;
  Sequential& add(std::unique_ptr<Layer<T>> layer) {
    layers_.push_back(std::move(layer));
    return *this;
  }
  Tensor<T> forward(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  ParamList<T> params() override;
  std::string kind() const override { return "sequential"; }
  std::size_t size() const { return layers_.size(); }
  Layer<T>& at(std::size_t i) { return *layers_.at(i); }

 private:
  std::vector<std::unique_ptr<Layer<T>>> layers_;
};

extern template class Dense<float>;
extern template class Dense<double>;
extern template class MaskedDense<float>;
extern template class MaskedDense<double>;
extern template class Conv2d<float>;
extern template class Conv2d<double>;
extern template class PdcLayer<float>;
extern template class PdcLayer<double>;
extern template class Relu<float>;
extern template class Relu<double>;
extern template class Tanh<float>;
extern template class Tanh<double>;
extern template class SimpleRnn<float>;
extern template class SimpleRnn<double>;
extern template class Sequential<float>;
extern template class Sequential<double>;

}  // namespace synthmatch::nn
