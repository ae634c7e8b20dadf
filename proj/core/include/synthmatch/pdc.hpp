#pragma once

// Prime-dilated convolution on log-frequency spectrograms.
//
// On a constant-Q axis with B bins per octave, harmonics n and m of any
// fundamental sit |B log2(m/n)| bins apart. Every integer n >= 2 factors
// uniquely into prime ratios r(p) = p / 2^s (s the largest integer with
// 2^s < p, so r(p) lies in (1, 2]); hence the distance from the fundamental
// to harmonic n is a non-negative integer combination of the distances
// B log2 r(p). A sparse filter with taps at the rounded distances of the
// first l primes therefore reaches every harmonic when stacked, while its
// receptive field stays within one octave (B + 1 taps, or 2B + 1 for the
// symmetric variant).

#include <boost/rational.hpp>

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "synthmatch/error.hpp"

namespace synthmatch::pdc {

using Rational = boost::rational<std::int64_t>;

bool is_prime(std::int64_t n);
/// The l smallest primes.
std::vector<std::int64_t> first_primes(std::size_t l);

/// s = max{s : 2^s < p}. Throws UserError for non-primes.
int ratio_shift(std::int64_t p);
/// r(p) = p / 2^s, exactly. r(2) = 2.
Rational prime_ratio(std::int64_t p);

struct PrimeRatioDecomposition {
  std::int64_t n = 0;
  std::map<std::int64_t, int> exponents;  // prime -> alpha

  /// Product of r(p)^alpha in exact arithmetic.
  Rational reconstruct() const;
  /// Sum of alpha * B * log2 r(p).
  double distance(int bins_per_octave) const;
};

/// n = prod r(p_i)^alpha_i. Each factor p^a contributes a to alpha_p and
/// a * s(p) to alpha_2.
PrimeRatioDecomposition prime_ratio_decompose(std::int64_t n);

/// |B log2(m / n)|: bin distance between harmonics n and m on a CQT axis.
double harmonic_distance(double n, double m, int bins_per_octave);

struct DilatedLocations {
  int bins_per_octave = 0;
  int num_primes = 0;
  bool symmetric = false;
  /// Ascending, distinct. Contains 0; within [0, B] or [-B, B].
  std::vector<int> locations;
  /// For each entry of `locations`, the primes that rounded onto it
  /// (empty for the origin tap). Negative locations mirror their partner.
  std::vector<std::vector<std::int64_t>> primes;

  std::size_t size() const { return locations.size(); }
  int receptive_field() const { return symmetric ? 2 * bins_per_octave + 1 : bins_per_octave + 1; }
  /// Position of location k inside the expanded filter.
  int expanded_index(int k) const { return symmetric ? k + bins_per_octave : k; }
};

/// k_0 = 0, k_j = argmin_k |k - B log2 r(p_j)| over the l smallest primes.
/// Exact .5 ties go to the smaller k; primes landing on the same k share one
/// entry. The symmetric variant adds k_{-j} = -k_j.
DilatedLocations dilated_locations(int bins_per_octave, int num_primes, bool symmetric);

/// Dense filter w with w[k_j] = v_j and zeros elsewhere.
std::vector<double> expand_filter(std::span<const double> v, const DilatedLocations& locs);

struct Shape3 {
  std::size_t channels = 0;
  std::size_t bins = 0;
  std::size_t frames = 0;
  std::size_t size() const { return channels * bins * frames; }
  friend bool operator==(const Shape3&, const Shape3&) = default;
};

/// Number of filter rows: one shared row, or one per channel.
inline std::size_t filter_rows(const Shape3& shape, bool per_channel) { return per_channel ? shape.channels : 1; }

/// out[c,k,t] = sum_j v[row(c), j] * x[c, k + loc_j, t], zero outside [0, K).
/// The asymmetric filter therefore reads bins k..k+B (upward, toward higher
/// harmonics). Data layout is (c * K + k) * T + t.
template <class T>
void pdc_forward(std::span<const T> x, const Shape3& shape, std::span<const T> v, const DilatedLocations& locs,
                 bool per_channel, std::span<T> out) {
  const std::size_t taps = locs.size();
  if (x.size() != shape.size() || out.size() != shape.size()) throw ShapeError("pdc_forward: array size mismatch");
  if (v.size() != taps * filter_rows(shape, per_channel)) throw ShapeError("pdc_forward: filter size mismatch");
  const auto bins = static_cast<std::ptrdiff_t>(shape.bins);
  const std::size_t frames = shape.frames;
  for (std::size_t c = 0; c < shape.channels; ++c) {
    const T* vrow = v.data() + (per_channel ? c * taps : 0);
    const T* xc = x.data() + c * shape.bins * frames;
    T* oc = out.data() + c * shape.bins * frames;
    for (std::ptrdiff_t k = 0; k < bins; ++k) {
      T* o = oc + k * frames;
      for (std::size_t t = 0; t < frames; ++t) o[t] = T(0);
      for (std::size_t j = 0; j < taps; ++j) {
        const std::ptrdiff_t src = k + locs.locations[j];
        if (src < 0 || src >= bins) continue;
        const T w = vrow[j];
        const T* xi = xc + src * static_cast<std::ptrdiff_t>(frames);
        for (std::size_t t = 0; t < frames; ++t) o[t] += w * xi[t];
      }
    }
  }
}

/// Exact gradients of pdc_forward. grad_x is overwritten; grad_v is
/// accumulated into (callers zero it when starting a fresh pass).
template <class T>
void pdc_backward(std::span<const T> x, const Shape3& shape, std::span<const T> v, const DilatedLocations& locs,
                  bool per_channel, std::span<const T> grad_out, std::span<T> grad_x, std::span<T> grad_v) {
  const std::size_t taps = locs.size();
  if (x.size() != shape.size() || grad_out.size() != shape.size() || grad_x.size() != shape.size())
    throw ShapeError("pdc_backward: array size mismatch");
  if (v.size() != taps * filter_rows(shape, per_channel) || grad_v.size() != v.size())
    throw ShapeError("pdc_backward: filter size mismatch");
  const auto bins = static_cast<std::ptrdiff_t>(shape.bins);
  const std::size_t frames = shape.frames;
  for (auto& g : grad_x) g = T(0);
  for (std::size_t c = 0; c < shape.channels; ++c) {
    const std::size_t row = per_channel ? c * taps : 0;
    const T* xc = x.data() + c * shape.bins * frames;
    const T* gc = grad_out.data() + c * shape.bins * frames;
    T* gxc = grad_x.data() + c * shape.bins * frames;
    for (std::ptrdiff_t k = 0; k < bins; ++k) {
      const T* g = gc + k * static_cast<std::ptrdiff_t>(frames);
      for (std::size_t j = 0; j < taps; ++j) {
        const std::ptrdiff_t src = k + locs.locations[j];
        if (src < 0 || src >= bins) continue;
        const T w = v[row + j];
        const T* xi = xc + src * static_cast<std::ptrdiff_t>(frames);
        T* gx = gxc + src * static_cast<std::ptrdiff_t>(frames);
        T acc = T(0);
        for (std::size_t t = 0; t < frames; ++t) {
          gx[t] += w * g[t];
          acc += g[t] * xi[t];
        }
        grad_v[row + j] += acc;
      }
    }
  }
}

/// A trainable filter bound to its locations: the value-level view used by
/// the CLI and tests. The network layer in nn/ stores the same vector.
struct PdcFilter {
  DilatedLocations locations;
  std::vector<double> v;
  bool per_channel = false;

  static PdcFilter zeros(DilatedLocations locs, std::size_t rows = 1);
  std::vector<double> expanded(std::size_t row = 0) const;
};

/// A C x K x T log-frequency array tagged with its bins-per-octave.
struct LogSpectrogram {
  Shape3 shape;
  int bins_per_octave = 0;
  std::vector<double> data;
};

/// Throws UserError when the input's B differs from the filter's.
LogSpectrogram pdc_conv_forward(const LogSpectrogram& x, const PdcFilter& filter);

struct PdcGradients {
  std::vector<double> grad_x;
  std::vector<double> grad_v;
};
PdcGradients pdc_conv_backward(const LogSpectrogram& x, const PdcFilter& filter, std::span<const double> upstream);

}  // namespace synthmatch::pdc
