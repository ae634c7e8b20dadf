#include "synthmatch/nn/layers.hpp"

#include <algorithm>
#include <cmath>

namespace synthmatch::nn {

namespace {

template <class T>
void init_uniform(Tensor<T>& t, double bound, Rng& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : t.data) v = static_cast<T>(dist(rng));
}

// Output index range [lo, hi) along one axis so that o * stride - pad + k
// stays inside [0, n).
std::pair<std::size_t, std::size_t> valid_range(std::size_t n, std::size_t out, std::size_t stride, std::size_t pad,
                                                std::size_t k) {
  const auto first_in = static_cast<std::ptrdiff_t>(k) - static_cast<std::ptrdiff_t>(pad);
  std::ptrdiff_t lo = 0;
  if (first_in < 0) lo = (-first_in + static_cast<std::ptrdiff_t>(stride) - 1) / static_cast<std::ptrdiff_t>(stride);
  const std::ptrdiff_t last_ok = static_cast<std::ptrdiff_t>(n) - 1 - first_in;
  std::ptrdiff_t hi = last_ok < 0 ? 0 : last_ok / static_cast<std::ptrdiff_t>(stride) + 1;
  hi = std::min<std::ptrdiff_t>(hi, static_cast<std::ptrdiff_t>(out));
  if (hi < lo) hi = lo;
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

}  // namespace

// ---------------------------------------------------------------------------
// Dense

template <class T>
Dense<T>::Dense(std::string name, std::size_t in, std::size_t out, Rng& rng)
    : in_(in), out_(out), weight_(name + ".weight", {out, in}), bias_(name + ".bias", {out}, false) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  init_uniform(weight_.value, bound, rng);
  init_uniform(bias_.value, bound, rng);
}

template <class T>
Tensor<T> Dense<T>::forward(const Tensor<T>& x) {
  if (x.size() != in_)
    throw ShapeError("dense " + weight_.name + ": expected " + std::to_string(in_) + " inputs, got shape " +
                     shape_string(x.shape));
  input_ = x;
  Tensor<T> y({out_});
  const T* w = weight_.value.data.data();
  const T* xv = x.data.data();
  for (std::size_t o = 0; o < out_; ++o) {
    T acc = bias_.value[o];
    const T* row = w + o * in_;
    for (std::size_t i = 0; i < in_; ++i) acc += row[i] * xv[i];
    y[o] = acc;
  }
  return y;
}

template <class T>
Tensor<T> Dense<T>::backward(const Tensor<T>& grad_out) {
  if (grad_out.size() != out_) throw ShapeError("dense backward: gradient size mismatch");
  Tensor<T> gx(input_.shape);
  const T* w = weight_.value.data.data();
  T* gw = weight_.grad.data.data();
  const T* xv = input_.data.data();
  for (std::size_t o = 0; o < out_; ++o) {
    const T g = grad_out[o];
    bias_.grad[o] += g;
    if (g == T(0)) continue;
    const T* row = w + o * in_;
    T* grow = gw + o * in_;
    for (std::size_t i = 0; i < in_; ++i) {
      grow[i] += g * xv[i];
      gx[i] += g * row[i];
    }
  }
  return gx;
}

// ---------------------------------------------------------------------------
// MaskedDense

template <class T>
MaskedDense<T>::MaskedDense(std::string name, std::vector<std::size_t> in_groups, std::vector<std::size_t> out_groups,
                            Rng& rng)
    : in_(0), out_(0) {
  if (in_groups.size() != out_groups.size() || in_groups.empty())
    throw ShapeError("masked dense needs matching, non-empty group lists");
  in_off_.push_back(0);
  out_off_.push_back(0);
  for (std::size_t g = 0; g < in_groups.size(); ++g) {
    in_ += in_groups[g];
    out_ += out_groups[g];
    in_off_.push_back(in_);
    out_off_.push_back(out_);
  }
  weight_ = Param<T>(name + ".weight", {out_, in_});
  bias_ = Param<T>(name + ".bias", {out_}, false);
  for (std::size_t g = 0; g + 1 < in_off_.size(); ++g) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_groups[g]));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (std::size_t o = out_off_[g]; o < out_off_[g + 1]; ++o) {
      for (std::size_t i = in_off_[g]; i < in_off_[g + 1]; ++i) weight_.value[o * in_ + i] = static_cast<T>(dist(rng));
      bias_.value[o] = static_cast<T>(dist(rng));
    }
  }
}

template <class T>
Tensor<T> MaskedDense<T>::forward(const Tensor<T>& x) {
  if (x.size() != in_) throw ShapeError("masked dense: expected " + std::to_string(in_) + " inputs");
  input_ = x;
  Tensor<T> y({out_});
  for (std::size_t g = 0; g + 1 < in_off_.size(); ++g) {
    for (std::size_t o = out_off_[g]; o < out_off_[g + 1]; ++o) {
      T acc = bias_.value[o];
      const T* row = weight_.value.data.data() + o * in_;
      for (std::size_t i = in_off_[g]; i < in_off_[g + 1]; ++i) acc += row[i] * x[i];
      y[o] = acc;
    }
  }
  return y;
}

template <class T>
Tensor<T> MaskedDense<T>::backward(const Tensor<T>& grad_out) {
  if (grad_out.size() != out_) throw ShapeError("masked dense backward: gradient size mismatch");
  Tensor<T> gx(input_.shape);
  for (std::size_t g = 0; g + 1 < in_off_.size(); ++g) {
    for (std::size_t o = out_off_[g]; o < out_off_[g + 1]; ++o) {
      const T go = grad_out[o];
      bias_.grad[o] += go;
      const T* row = weight_.value.data.data() + o * in_;
      T* grow = weight_.grad.data.data() + o * in_;
      for (std::size_t i = in_off_[g]; i < in_off_[g + 1]; ++i) {
        grow[i] += go * input_[i];
        gx[i] += go * row[i];
      }
    }
  }
  return gx;
}

// ---------------------------------------------------------------------------
// Conv2d

template <class T>
Conv2d<T>::Conv2d(std::string name, const Conv2dSpec& spec, Rng& rng)
    : spec_(spec),
      weight_(name + ".weight", {spec.out_channels, spec.in_channels, spec.kernel_h, spec.kernel_w}),
      bias_(name + ".bias", {spec.out_channels}, false) {
  if (spec.stride_h == 0 || spec.stride_w == 0) throw ShapeError("conv2d stride must be positive");
  const double fan_in = static_cast<double>(spec.in_channels * spec.kernel_h * spec.kernel_w);
  const double bound = 1.0 / std::sqrt(fan_in);
  init_uniform(weight_.value, bound, rng);
  init_uniform(bias_.value, bound, rng);
}

template <class T>
Tensor<T> Conv2d<T>::forward(const Tensor<T>& x) {
  if (x.rank() != 3 || x.dim(0) != spec_.in_channels)
    throw ShapeError(weight_.name + ": expected " + std::to_string(spec_.in_channels) + " x H x W input, got " +
                     shape_string(x.shape));
  const std::size_t H = x.dim(1), W = x.dim(2);
  if (H + 2 * spec_.pad_h < spec_.kernel_h || W + 2 * spec_.pad_w < spec_.kernel_w)
    throw ShapeError(weight_.name + ": input smaller than kernel");
  const std::size_t OH = spec_.out_h(H), OW = spec_.out_w(W);
  input_ = x;
  Tensor<T> y({spec_.out_channels, OH, OW});
  const std::size_t C = spec_.in_channels, KH = spec_.kernel_h, KW = spec_.kernel_w;
  for (std::size_t o = 0; o < spec_.out_channels; ++o) {
    T* yo = y.data.data() + o * OH * OW;
    std::fill(yo, yo + OH * OW, bias_.value[o]);
    for (std::size_t c = 0; c < C; ++c) {
      const T* xc = x.data.data() + c * H * W;
      for (std::size_t i = 0; i < KH; ++i) {
        const auto [oh_lo, oh_hi] = valid_range(H, OH, spec_.stride_h, spec_.pad_h, i);
        for (std::size_t j = 0; j < KW; ++j) {
          const auto [ow_lo, ow_hi] = valid_range(W, OW, spec_.stride_w, spec_.pad_w, j);
          const T w = weight_.value[((o * C + c) * KH + i) * KW + j];
          for (std::size_t oh = oh_lo; oh < oh_hi; ++oh) {
            const std::size_t ih = oh * spec_.stride_h + i - spec_.pad_h;
            const T* xr = xc + ih * W;
            T* yr = yo + oh * OW;
            for (std::size_t ow = ow_lo; ow < ow_hi; ++ow) yr[ow] += w * xr[ow * spec_.stride_w + j - spec_.pad_w];
          }
        }
      }
    }
  }
  return y;
}

template <class T>
Tensor<T> Conv2d<T>::backward(const Tensor<T>& grad_out) {
  const std::size_t H = input_.dim(1), W = input_.dim(2);
  const std::size_t OH = spec_.out_h(H), OW = spec_.out_w(W);
  require_shape(grad_out, {spec_.out_channels, OH, OW}, "conv2d backward");
  Tensor<T> gx(input_.shape);
  const std::size_t C = spec_.in_channels, KH = spec_.kernel_h, KW = spec_.kernel_w;
  for (std::size_t o = 0; o < spec_.out_channels; ++o) {
    const T* go = grad_out.data.data() + o * OH * OW;
    T bsum = T(0);
    for (std::size_t k = 0; k < OH * OW; ++k) bsum += go[k];
    bias_.grad[o] += bsum;
    for (std::size_t c = 0; c < C; ++c) {
      const T* xc = input_.data.data() + c * H * W;
      T* gxc = gx.data.data() + c * H * W;
      for (std::size_t i = 0; i < KH; ++i) {
        const auto [oh_lo, oh_hi] = valid_range(H, OH, spec_.stride_h, spec_.pad_h, i);
        for (std::size_t j = 0; j < KW; ++j) {
          const auto [ow_lo, ow_hi] = valid_range(W, OW, spec_.stride_w, spec_.pad_w, j);
          const std::size_t widx = ((o * C + c) * KH + i) * KW + j;
          const T w = weight_.value[widx];
          T gw = T(0);
          for (std::size_t oh = oh_lo; oh < oh_hi; ++oh) {
            const std::size_t ih = oh * spec_.stride_h + i - spec_.pad_h;
            const T* xr = xc + ih * W;
            T* gxr = gxc + ih * W;
            const T* gr = go + oh * OW;
            for (std::size_t ow = ow_lo; ow < ow_hi; ++ow) {
              const std::size_t iw = ow * spec_.stride_w + j - spec_.pad_w;
              gw += gr[ow] * xr[iw];
              gxr[iw] += w * gr[ow];
            }
          }
          weight_.grad[widx] += gw;
        }
      }
    }
  }
  return gx;
}

// ---------------------------------------------------------------------------
// PdcLayer

template <class T>
PdcLayer<T>::PdcLayer(std::string name, std::size_t channels, pdc::DilatedLocations locations, bool per_channel,
                      Rng& rng)
    : channels_(channels),
      locations_(std::move(locations)),
      per_channel_(per_channel),
      taps_(name + ".taps", {per_channel ? channels : 1, locations_.size()}) {
  // Start near the identity: unit origin tap plus small dilated taps.
  const double bound = 1.0 / static_cast<double>(locations_.size());
  init_uniform(taps_.value, bound, rng);
  const auto origin = static_cast<std::size_t>(
      std::find(locations_.locations.begin(), locations_.locations.end(), 0) - locations_.locations.begin());
  for (std::size_t r = 0; r < taps_.value.dim(0); ++r) taps_.value[r * locations_.size() + origin] = T(1);
}

template <class T>
Tensor<T> PdcLayer<T>::forward(const Tensor<T>& x) {
  if (x.rank() != 3 || x.dim(0) != channels_)
    throw ShapeError(taps_.name + ": expected " + std::to_string(channels_) + " x K x T input, got " +
                     shape_string(x.shape));
  input_ = x;
  Tensor<T> y(x.shape);
  const pdc::Shape3 shape{x.dim(0), x.dim(1), x.dim(2)};
  pdc::pdc_forward<T>(x.span(), shape, taps_.value.span(), locations_, per_channel_, y.span());
  return y;
}

template <class T>
Tensor<T> PdcLayer<T>::backward(const Tensor<T>& grad_out) {
  require_shape(grad_out, input_.shape, "pdc backward");
  Tensor<T> gx(input_.shape);
  const pdc::Shape3 shape{input_.dim(0), input_.dim(1), input_.dim(2)};
  pdc::pdc_backward<T>(input_.span(), shape, taps_.value.span(), locations_, per_channel_, grad_out.span(), gx.span(),
                       taps_.grad.span());
  return gx;
}

// ---------------------------------------------------------------------------
// Elementwise

template <class T>
Tensor<T> Relu<T>::forward(const Tensor<T>& x) {
  input_ = x;
  Tensor<T> y(x.shape);
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
  return y;
}

template <class T>
Tensor<T> Relu<T>::backward(const Tensor<T>& grad_out) {
  require_shape(grad_out, input_.shape, "relu backward");
  Tensor<T> gx(input_.shape);
  for (std::size_t i = 0; i < gx.size(); ++i) gx[i] = input_[i] > T(0) ? grad_out[i] : T(0);
  return gx;
}

template <class T>
Tensor<T> Tanh<T>::forward(const Tensor<T>& x) {
  output_ = Tensor<T>(x.shape);
  for (std::size_t i = 0; i < x.size(); ++i) output_[i] = std::tanh(x[i]);
  return output_;
}

template <class T>
Tensor<T> Tanh<T>::backward(const Tensor<T>& grad_out) {
  require_shape(grad_out, output_.shape, "tanh backward");
  Tensor<T> gx(output_.shape);
  for (std::size_t i = 0; i < gx.size(); ++i) gx[i] = grad_out[i] * (T(1) - output_[i] * output_[i]);
  return gx;
}

// ---------------------------------------------------------------------------
// SimpleRnn

template <class T>
SimpleRnn<T>::SimpleRnn(std::string name, std::size_t input_dim, std::size_t hidden, Rng& rng)
    : input_dim_(input_dim),
      hidden_(hidden),
      wx_(name + ".wx", {hidden, input_dim}),
      wh_(name + ".wh", {hidden, hidden}),
      bias_(name + ".bias", {hidden}, false) {
  init_uniform(wx_.value, 1.0 / std::sqrt(static_cast<double>(input_dim)), rng);
  init_uniform(wh_.value, 0.5 / std::sqrt(static_cast<double>(hidden)), rng);
  init_uniform(bias_.value, 0.1, rng);
}

template <class T>
Tensor<T> SimpleRnn<T>::forward(const Tensor<T>& x) {
  if (x.rank() != 2 || x.dim(1) != input_dim_)
    throw ShapeError(wx_.name + ": expected T x " + std::to_string(input_dim_) + " sequence, got " +
                     shape_string(x.shape));
  input_ = x;
  const std::size_t steps = x.dim(0);
  states_.assign(steps + 1, std::vector<T>(hidden_, T(0)));
  for (std::size_t t = 0; t < steps; ++t) {
    const T* xt = x.data.data() + t * input_dim_;
    const auto& prev = states_[t];
    auto& cur = states_[t + 1];
    for (std::size_t h = 0; h < hidden_; ++h) {
      T acc = bias_.value[h];
      const T* rx = wx_.value.data.data() + h * input_dim_;
      for (std::size_t d = 0; d < input_dim_; ++d) acc += rx[d] * xt[d];
      const T* rh = wh_.value.data.data() + h * hidden_;
      for (std::size_t k = 0; k < hidden_; ++k) acc += rh[k] * prev[k];
      cur[h] = std::tanh(acc);
    }
  }
  return Tensor<T>({hidden_}, states_.back());
}

template <class T>
Tensor<T> SimpleRnn<T>::backward(const Tensor<T>& grad_out) {
  require_shape(grad_out, {hidden_}, "rnn backward");
  const std::size_t steps = input_.dim(0);
  Tensor<T> gx(input_.shape);
  std::vector<T> dh(grad_out.data), da(hidden_), dprev(hidden_);
  for (std::size_t t = steps; t-- > 0;) {
    const auto& cur = states_[t + 1];
    const auto& prev = states_[t];
    for (std::size_t h = 0; h < hidden_; ++h) da[h] = dh[h] * (T(1) - cur[h] * cur[h]);
    const T* xt = input_.data.data() + t * input_dim_;
    T* gxt = gx.data.data() + t * input_dim_;
    std::fill(dprev.begin(), dprev.end(), T(0));
    for (std::size_t h = 0; h < hidden_; ++h) {
      const T a = da[h];
      bias_.grad[h] += a;
      T* gwx = wx_.grad.data.data() + h * input_dim_;
      const T* rx = wx_.value.data.data() + h * input_dim_;
      for (std::size_t d = 0; d < input_dim_; ++d) {
        gwx[d] += a * xt[d];
        gxt[d] += a * rx[d];
      }
      T* gwh = wh_.grad.data.data() + h * hidden_;
      const T* rh = wh_.value.data.data() + h * hidden_;
      for (std::size_t k = 0; k < hidden_; ++k) {
        gwh[k] += a * prev[k];
        dprev[k] += a * rh[k];
      }
    }
    dh.swap(dprev);
  }
  return gx;
}

// ---------------------------------------------------------------------------
// Sequential

template <class T>
Tensor<T> Sequential<T>::forward(const Tensor<T>& x) {
  Tensor<T> cur = x;
  for (auto& l : layers_) cur = l->forward(cur);
  return cur;
}

template <class T>
Tensor<T> Sequential<T>::backward(const Tensor<T>& grad_out) {
  Tensor<T> cur = grad_out;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) cur = (*it)->backward(cur);
  return cur;
}

template <class T>
ParamList<T> Sequential<T>::params() {
  ParamList<T> out;
  for (auto& l : layers_)
    for (auto* p : l->params()) out.push_back(p);
  return out;
}

template class Dense<float>;
template class Dense<double>;
template class MaskedDense<float>;
template class MaskedDense<double>;
template class Conv2d<float>;
template class Conv2d<double>;
template class PdcLayer<float>;
template class PdcLayer<double>;
template class Relu<float>;
template class Relu<double>;
template class Tanh<float>;
template class Tanh<double>;
template class SimpleRnn<float>;
template class SimpleRnn<double>;
template class Sequential<float>;
template class Sequential<double>;

}  // namespace synthmatch::nn
