#include "synthmatch/pdc.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace synthmatch::pdc {

bool is_prime(std::int64_t n) {
  if (n < 2) return false;
  for (std::int64_t d = 2; d * d <= n; ++d)
    if (n % d == 0) return false;
  return true;
}

std::vector<std::int64_t> first_primes(std::size_t l) {
  std::vector<std::int64_t> out;
  for (std::int64_t n = 2; out.size() < l; ++n)
    if (is_prime(n)) out.push_back(n);
  return out;
}

int ratio_shift(std::int64_t p) {
  if (!is_prime(p)) throw UserError("prime ratio needs a prime, got " + std::to_string(p));
  int s = 0;
  while ((std::int64_t{1} << (s + 1)) < p) ++s;
  return s;
}

Rational prime_ratio(std::int64_t p) { return Rational(p, std::int64_t{1} << ratio_shift(p)); }

Rational PrimeRatioDecomposition::reconstruct() const {
  Rational acc(1);
  for (const auto& [p, alpha] : exponents)
    for (int i = 0; i < alpha; ++i) acc *= prime_ratio(p);
  return acc;
}

double PrimeRatioDecomposition::distance(int bins_per_octave) const {
  double acc = 0.0;
  for (const auto& [p, alpha] : exponents) {
    const Rational r = prime_ratio(p);
    acc += alpha * harmonic_distance(static_cast<double>(r.denominator()), static_cast<double>(r.numerator()),
                                     bins_per_octave);
  }
  return acc;
}

PrimeRatioDecomposition prime_ratio_decompose(std::int64_t n) {
  if (n < 2) throw UserError("prime-ratio decomposition needs n >= 2, got " + std::to_string(n));
  PrimeRatioDecomposition d;
  d.n = n;
  std::int64_t rest = n;
  for (std::int64_t p = 2; p * p <= rest; ++p) {
    int a = 0;
    while (rest % p == 0) {
      rest /= p;
      ++a;
    }
    if (a > 0) {
      d.exponents[p] += a;
      if (p != 2) d.exponents[2] += a * ratio_shift(p);
    }
  }
  if (rest > 1) {
    d.exponents[rest] += 1;
    if (rest != 2) d.exponents[2] += ratio_shift(rest);
  }
  return d;
}

double harmonic_distance(double n, double m, int bins_per_octave) {
  if (!(n > 0.0) || !(m > 0.0)) throw UserError("harmonic distance needs positive harmonic numbers");
  return std::abs(bins_per_octave * std::log2(m / n));
}

DilatedLocations dilated_locations(int bins_per_octave, int num_primes, bool symmetric) {
  if (bins_per_octave < 1) throw UserError("bins per octave must be at least 1");
  if (num_primes < 1) throw UserError("number of primes must be at least 1");
  std::map<int, std::vector<std::int64_t>> by_location;
  by_location[0];
  for (std::int64_t p : first_primes(static_cast<std::size_t>(num_primes))) {
    const Rational r = prime_ratio(p);
    const double target = bins_per_octave * std::log2(static_cast<double>(r.numerator()) /
                                                      static_cast<double>(r.denominator()));
    // argmin over integers with ties toward the smaller k.
    const int k = static_cast<int>(std::ceil(target - 0.5));
    by_location[k].push_back(p);
  }
  DilatedLocations out;
  out.bins_per_octave = bins_per_octave;
  out.num_primes = num_primes;
  out.symmetric = symmetric;
  if (symmetric) {
    for (auto it = by_location.rbegin(); it != by_location.rend(); ++it) {
      if (it->first == 0) continue;
      out.locations.push_back(-it->first);
      out.primes.push_back(it->second);
    }
  }
  for (const auto& [k, primes] : by_location) {
    out.locations.push_back(k);
    out.primes.push_back(primes);
  }
  return out;
}

std::vector<double> expand_filter(std::span<const double> v, const DilatedLocations& locs) {
  if (v.size() != locs.size())
    throw ShapeError("expand_filter: |v| = " + std::to_string(v.size()) + " but there are " +
                     std::to_string(locs.size()) + " locations");
  std::vector<double> w(static_cast<std::size_t>(locs.receptive_field()), 0.0);
  for (std::size_t j = 0; j < v.size(); ++j) w[static_cast<std::size_t>(locs.expanded_index(locs.locations[j]))] = v[j];
  return w;
}

PdcFilter PdcFilter::zeros(DilatedLocations locs, std::size_t rows) {
  PdcFilter f;
  f.v.assign(locs.size() * rows, 0.0);
  f.per_channel = rows > 1;
  f.locations = std::move(locs);
  return f;
}

std::vector<double> PdcFilter::expanded(std::size_t row) const {
  const std::size_t taps = locations.size();
  return expand_filter(std::span<const double>(v).subspan(row * taps, taps), locations);
}

namespace {

void check_compatible(const LogSpectrogram& x, const PdcFilter& filter) {
  if (x.bins_per_octave != filter.locations.bins_per_octave)
    throw UserError("PDC filter built for B = " + std::to_string(filter.locations.bins_per_octave) +
                    " applied to a spectrogram with B = " + std::to_string(x.bins_per_octave));
  if (x.data.size() != x.shape.size()) throw ShapeError("log spectrogram data does not match its shape");
}

}  // namespace

LogSpectrogram pdc_conv_forward(const LogSpectrogram& x, const PdcFilter& filter) {
  check_compatible(x, filter);
  LogSpectrogram out{x.shape, x.bins_per_octave, std::vector<double>(x.shape.size())};
  pdc_forward<double>(x.data, x.shape, filter.v, filter.locations, filter.per_channel, out.data);
  return out;
}

PdcGradients pdc_conv_backward(const LogSpectrogram& x, const PdcFilter& filter, std::span<const double> upstream) {
  check_compatible(x, filter);
  PdcGradients g{std::vector<double>(x.shape.size()), std::vector<double>(filter.v.size(), 0.0)};
  pdc_backward<double>(x.data, x.shape, filter.v, filter.locations, filter.per_channel, upstream, g.grad_x, g.grad_v);
  return g;
}

}  // namespace synthmatch::pdc
