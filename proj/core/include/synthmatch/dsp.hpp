#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "synthmatch/synth.hpp"

namespace synthmatch::dsp {

/// Real-to-complex FFT of a fixed power-of-two size. Each instance owns its
/// plan and buffers; use one instance per thread.
class RealFft {
 public:
  explicit RealFft(std::size_t size);
  ~RealFft();
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;
  RealFft(RealFft&&) noexcept;
  RealFft& operator=(RealFft&&) noexcept;

  std::size_t size() const { return size_; }
  std::size_t bins() const { return size_ / 2 + 1; }
  /// `input` may be shorter than size(); the remainder is zero.
  void forward(std::span<const double> input, std::span<std::complex<double>> output);

 private:
  struct Impl;
  std::size_t size_;
  std::unique_ptr<Impl> impl_;
};

bool is_power_of_two(std::size_t n);
/// Periodic Hann window.
std::vector<double> hann_window(std::size_t n);

enum class SpectrogramKind { stft, mel, cqt };

/// C x K x T non-negative array with a strictly increasing bin -> Hz map.
struct Spectrogram {
  SpectrogramKind kind = SpectrogramKind::stft;
  std::size_t channels = 1;
  std::size_t bins = 0;
  std::size_t frames = 0;
  std::vector<double> data;       // index (c * bins + k) * frames + t
  std::vector<double> bin_hz;     // freq_map(k)
  std::size_t hop = 0;
  std::size_t window = 0;
  int bins_per_octave = 0;        // set for log-frequency spectrograms

  double at(std::size_t c, std::size_t k, std::size_t t) const { return data[(c * bins + k) * frames + t]; }
  double& at(std::size_t c, std::size_t k, std::size_t t) { return data[(c * bins + k) * frames + t]; }
  double freq(std::size_t k) const { return bin_hz.at(k); }
};

std::size_t frame_count(std::size_t length, std::size_t window, std::size_t hop);

/// Hann-windowed magnitude STFT, frames starting at sample 0, no padding.
Spectrogram stft_spectrogram(const AudioBuffer& audio, std::size_t window, std::size_t hop);

struct MelConfig {
  std::size_t bands = 64;
  std::size_t window = 1024;
  std::size_t hop = 256;
  double f_min = 0.0;
  double f_max = 0.0;  // 0 means Nyquist
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Triangular HTK-mel filterbank over an rfft of `window` points.
class MelFilterbank {
 public:
  MelFilterbank(const MelConfig& cfg, int sample_rate);
  std::size_t bands() const { return centres_.size(); }
  const std::vector<double>& centres_hz() const { return centres_; }
  /// Row `band` over fft bins.
  std::span<const double> row(std::size_t band) const;
  std::size_t fft_bins() const { return fft_bins_; }
  void apply(std::span<const double> power, std::span<double> out) const;

 private:
  std::size_t fft_bins_;
  std::vector<double> weights_;  // bands x fft_bins
  std::vector<std::size_t> lo_, hi_;
  std::vector<double> centres_;
};

/// Mel power spectrogram.
Spectrogram mel_spectrogram(const AudioBuffer& audio, const MelConfig& cfg);

struct CqtConfig {
  double f_min = 32.703195662574829;  // C1
  int bins_per_octave = 12;
  int num_octaves = 7;
  std::size_t hop = 2048;

  std::size_t bins() const { return static_cast<std::size_t>(bins_per_octave * num_octaves); }
  void validate(int sample_rate) const;
};

/// Direct constant-Q kernel transform: per-bin Hann-windowed complex
/// exponentials of length Q * sr / f_k, applied as sparse spectral kernels to
/// centred FFT frames. Output magnitudes; freq_map(k) = f_min * 2^(k/B).
class CqtTransform {
 public:
  CqtTransform(const CqtConfig& cfg, int sample_rate);
  Spectrogram apply(const AudioBuffer& audio) const;
  const CqtConfig& config() const { return cfg_; }
  std::size_t fft_size() const { return fft_size_; }
  double bin_frequency(std::size_t k) const;

 private:
  struct SparseKernel {
    std::size_t first = 0;
    std::vector<std::complex<double>> values;  // conjugated, normalized
  };
  CqtConfig cfg_;
  int sample_rate_;
  std::size_t fft_size_;
  std::vector<SparseKernel> kernels_;
};

Spectrogram cqt_chromagram(const AudioBuffer& audio, const CqtConfig& cfg);

struct MfccConfig {
  std::size_t n_mfcc = 13;
  MelConfig mel{};
  double log_floor = 1e-10;
};

struct MfccMatrix {
  std::size_t n_mfcc = 0;
  std::size_t frames = 0;
  std::vector<double> coeffs;  // index c * frames + t

  double at(std::size_t c, std::size_t t) const { return coeffs[c * frames + t]; }
  friend bool operator==(const MfccMatrix&, const MfccMatrix&) = default;
};

/// Reusable MFCC pipeline (filterbank, DCT table and FFT plan built once).
class MfccExtractor {
 public:
  MfccExtractor(const MfccConfig& cfg, int sample_rate);
  MfccMatrix operator()(const AudioBuffer& audio);
  MfccMatrix operator()(std::span<const double> samples);
  const MfccConfig& config() const { return cfg_; }
  int sample_rate() const { return sample_rate_; }

 private:
  MfccConfig cfg_;
  int sample_rate_;
  MelFilterbank bank_;
  RealFft fft_;
  std::vector<double> window_;
  std::vector<double> dct_;  // n_mfcc x bands, orthonormal DCT-II
};

MfccMatrix mfcc(const AudioBuffer& audio, const MfccConfig& cfg);

/// Mean over frames of the squared Euclidean distance between MFCC columns.
/// Both matrices must have the same shape.
double mfccd(const MfccMatrix& a, const MfccMatrix& b);
/// Audio-level metric. Equal sample rates required; the shorter signal is
/// zero-padded to the longer length.
double mfccd(const AudioBuffer& a, const AudioBuffer& b, const MfccConfig& cfg = {});

struct StatTracks {
  std::size_t frame = 0;
  std::size_t hop = 0;
  std::vector<double> amplitude_envelope;
  std::vector<double> rms_energy;
  std::vector<double> zero_crossing_rate;
  std::vector<double> wiener_entropy;

  std::size_t frames() const { return rms_energy.size(); }
};

/// Per-frame envelope (max |x|), RMS, zero-crossing rate and spectral
/// flatness. `frame` must be a power of two.
StatTracks statistical_features(const AudioBuffer& audio, std::size_t frame, std::size_t hop);

}  // namespace synthmatch::dsp
