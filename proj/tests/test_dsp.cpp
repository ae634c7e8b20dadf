#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "support.hpp"
#include "synthmatch/dsp.hpp"
#include "synthmatch/error.hpp"

using namespace synthmatch;
using namespace synthmatch::dsp;

namespace {

std::size_t argmax_bin(const Spectrogram& s, std::size_t t) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < s.bins; ++k)
    if (s.at(0, k, t) > s.at(0, best, t)) best = k;
  return best;
}

bool all_zero(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; });
}

}  // namespace

TEST_CASE("stft shape, silence and peak bin") {
  AudioBuffer zero;
  zero.samples.assign(8000, 0.0);
  const auto z = stft_spectrogram(zero, 1024, 256);
  CHECK(z.bins == 513);
  CHECK(all_zero(z.data));

  const auto s = stft_spectrogram(testing::sine(1000.0, 16000), 1024, 256);
  const std::size_t k = argmax_bin(s, s.frames / 2);
  CHECK(k == 64);
  CHECK(std::abs(s.freq(k) - 1000.0) <= 16000.0 / 1024.0);
  CHECK_THROWS_AS(stft_spectrogram(testing::sine(1000.0, 500), 1024, 256), UserError);
  CHECK_THROWS_AS(stft_spectrogram(testing::sine(1000.0, 5000), 1000, 256), UserError);
}

TEST_CASE("stft energy matches the signal energy") {
  // Periodic Hann at hop N/4 overlaps to a constant 3/2 in w^2, so the
  // summed frame energies equal 1.5 * sum x^2 when the signal is zero near
  // both ends.
  const std::size_t N = 512, hop = N / 4;
  auto x = testing::noise(16 * N, 5);
  std::fill(x.samples.begin(), x.samples.begin() + N, 0.0);
  std::fill(x.samples.end() - static_cast<std::ptrdiff_t>(N), x.samples.end(), 0.0);
  const auto s = stft_spectrogram(x, N, hop);
  double spec = 0.0;
  for (std::size_t t = 0; t < s.frames; ++t)
    for (std::size_t k = 0; k < s.bins; ++k) {
      const double p = s.at(0, k, t) * s.at(0, k, t);
      spec += (k == 0 || k == s.bins - 1) ? p : 2.0 * p;
    }
  spec /= static_cast<double>(N);
  double energy = 0.0;
  for (double v : x.samples) energy += v * v;
  CHECK(spec / 1.5 == doctest::Approx(energy).epsilon(0.01));
}

TEST_CASE("mel filterbank and spectrogram") {
  MelConfig cfg;
  MelFilterbank bank(cfg, 16000);
  CHECK(bank.bands() == 64);
  for (std::size_t b = 0; b < bank.bands(); ++b) {
    const auto row = bank.row(b);
    CHECK(std::accumulate(row.begin(), row.end(), 0.0) > 0.0);
    if (b) CHECK(bank.centres_hz()[b] > bank.centres_hz()[b - 1]);
  }
  AudioBuffer zero;
  zero.samples.assign(8000, 0.0);
  CHECK(all_zero(mel_spectrogram(zero, cfg).data));
  const auto m = mel_spectrogram(testing::noise(16000, 9), cfg);
  for (std::size_t k = 0; k < m.bins; ++k) {
    double e = 0.0;
    for (std::size_t t = 0; t < m.frames; ++t) e += m.at(0, k, t);
    CHECK(e > 0.0);
  }
  CHECK(hz_to_mel(mel_to_hz(1234.5)) == doctest::Approx(1234.5).epsilon(1e-12));
}

TEST_CASE("cqt frequency map and tone placement") {
  CqtConfig cfg;
  CqtTransform cqt(cfg, 16000);
  CHECK(cqt.bin_frequency(0) == doctest::Approx(32.70).epsilon(1e-3));
  CHECK(cqt.bin_frequency(12) == doctest::Approx(2.0 * cqt.bin_frequency(0)).epsilon(1e-12));
  for (std::size_t k = 1; k < cfg.bins(); ++k)
    CHECK(cqt.bin_frequency(k) / cqt.bin_frequency(k - 1) == doctest::Approx(std::exp2(1.0 / 12.0)).epsilon(1e-12));

  const auto s = cqt.apply(testing::sine(cfg.f_min * std::exp2(7.0 / 12.0), 32000));
  CHECK(s.bins == 84);
  CHECK(argmax_bin(s, s.frames / 2) == 7);

  AudioBuffer zero;
  zero.samples.assign(16000, 0.0);
  CHECK(all_zero(cqt.apply(zero).data));

  CqtConfig too_high = cfg;
  too_high.num_octaves = 9;  // 32.7 * 512 > 8 kHz
  CHECK_THROWS_AS(CqtTransform(too_high, 16000), UserError);
}

TEST_CASE("mfcc of silence, identity and one-hop shift") {
  MfccConfig cfg;
  AudioBuffer zero;
  zero.samples.assign(8000, 0.0);
  const auto z = mfcc(zero, cfg);
  CHECK(z.n_mfcc == 13);
  for (std::size_t c = 0; c < z.n_mfcc; ++c)
    for (std::size_t t = 1; t < z.frames; ++t) CHECK(z.at(c, t) == z.at(c, 0));

  const auto x = testing::noise(16000, 3);
  CHECK(mfcc(x, cfg) == mfcc(x, cfg));

  AudioBuffer shifted = x;
  shifted.samples.insert(shifted.samples.begin(), cfg.mel.hop, 0.0);
  shifted.samples.resize(x.size());
  const auto a = mfcc(x, cfg), b = mfcc(shifted, cfg);
  double worst = 0.0;
  for (std::size_t c = 0; c < a.n_mfcc; ++c)
    for (std::size_t t = 2; t + 2 < a.frames; ++t) worst = std::max(worst, std::abs(b.at(c, t + 1) - a.at(c, t)));
  CHECK(worst < 1e-9);
}

TEST_CASE("mfccd basics") {
  const auto a = testing::noise(16000, 1);
  const auto b = testing::sine(440.0, 16000);
  CHECK(mfccd(a, a) == 0.0);
  CHECK(std::abs(mfccd(a, b) - mfccd(b, a)) < 1e-9);
  AudioBuffer silence;
  silence.samples.assign(16000, 0.0);
  CHECK(mfccd(silence, b) > 0.0);
  AudioBuffer other_rate = b;
  other_rate.sample_rate = 22050;
  CHECK_THROWS_AS(mfccd(a, other_rate), UserError);
  // The shorter signal is zero-padded.
  AudioBuffer shorter = b;
  shorter.samples.resize(12000);
  AudioBuffer padded = shorter;
  padded.samples.resize(16000, 0.0);
  CHECK(mfccd(shorter, b) == mfccd(padded, b));
}

TEST_CASE("statistical tracks") {
  AudioBuffer dc;
  dc.samples.assign(8192, 0.3);
  const auto d = statistical_features(dc, 1024, 512);
  for (double z : d.zero_crossing_rate) CHECK(z == 0.0);

  const auto s = statistical_features(testing::sine(1000.0, 16384), 1024, 512);
  CHECK(s.amplitude_envelope.size() == s.frames());
  CHECK(s.zero_crossing_rate.size() == s.frames());
  CHECK(s.wiener_entropy.size() == s.frames());
  for (std::size_t t = 1; t + 1 < s.frames(); ++t) CHECK(s.rms_energy[t] == doctest::Approx(std::sqrt(0.5)).epsilon(1e-3));

  // Periodogram flatness of white noise has expectation exp(-gamma) ~ 0.5615,
  // so single frames can fall under 0.5; the per-seed means do not.
  double noise_min = 1.0, noise_sum = 0.0, seed_mean_min = 1.0, sine_max = 0.0;
  std::size_t noise_frames = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto n = statistical_features(testing::noise(4096, seed), 1024, 1024);
    double mean = 0.0;
    for (double w : n.wiener_entropy) {
      noise_min = std::min(noise_min, w);
      noise_sum += w;
      mean += w / static_cast<double>(n.frames());
      ++noise_frames;
    }
    seed_mean_min = std::min(seed_mean_min, mean);
    const double hz = 200.0 + 30.0 * static_cast<double>(seed);
    const auto p = statistical_features(testing::sine(hz, 4096), 1024, 1024);
    for (double w : p.wiener_entropy) sine_max = std::max(sine_max, w);
  }
  const double noise_mean = noise_sum / static_cast<double>(noise_frames);
  MESSAGE("wiener entropy: noise frame min " << noise_min << ", mean " << noise_mean << ", sine max " << sine_max);
  CHECK(noise_mean == doctest::Approx(std::exp(-0.57721566490153286)).epsilon(0.02));
  CHECK(seed_mean_min > 0.5);
  CHECK(sine_max < 0.1);
  for (double z : s.zero_crossing_rate) CHECK((z >= 0.0 && z <= 1.0));
}
