#include "synthmatch/dsp.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>

#include "synthmatch/error.hpp"

namespace synthmatch::dsp {

namespace {

// FFTW's planner is not thread-safe; execution of distinct plans is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

void require_audio(const AudioBuffer& audio, std::size_t window) {
  if (audio.sample_rate <= 0) throw UserError("audio has no sample rate");
  if (audio.samples.size() < window)
    throw UserError("audio of " + std::to_string(audio.samples.size()) + " samples is shorter than one window (" +
                    std::to_string(window) + ")");
}

void require_window(std::size_t window, std::size_t hop) {
  if (!is_power_of_two(window)) throw UserError("window must be a power of two, got " + std::to_string(window));
  if (hop == 0 || hop > window) throw UserError("hop must be in 1..window");
}

}  // namespace

// ---------------------------------------------------------------------------
// RealFft

struct RealFft::Impl {
  double* in = nullptr;
  fftw_complex* out = nullptr;
  fftw_plan plan = nullptr;
};

RealFft::RealFft(std::size_t size) : size_(size), impl_(std::make_unique<Impl>()) {
  if (!is_power_of_two(size)) throw UserError("FFT size must be a power of two");
  std::lock_guard lock(planner_mutex());
  impl_->in = fftw_alloc_real(size);
  impl_->out = fftw_alloc_complex(size / 2 + 1);
  impl_->plan = fftw_plan_dft_r2c_1d(static_cast<int>(size), impl_->in, impl_->out, FFTW_ESTIMATE);
}

RealFft::~RealFft() {
  if (!impl_) return;
  std::lock_guard lock(planner_mutex());
  if (impl_->plan) fftw_destroy_plan(impl_->plan);
  fftw_free(impl_->in);
  fftw_free(impl_->out);
}

RealFft::RealFft(RealFft&&) noexcept = default;
RealFft& RealFft::operator=(RealFft&&) noexcept = default;

void RealFft::forward(std::span<const double> input, std::span<std::complex<double>> output) {
  if (input.size() > size_) throw ShapeError("FFT input longer than transform size");
  if (output.size() < bins()) throw ShapeError("FFT output buffer too small");
  std::copy(input.begin(), input.end(), impl_->in);
  std::fill(impl_->in + input.size(), impl_->in + size_, 0.0);
  fftw_execute(impl_->plan);
  for (std::size_t k = 0; k < bins(); ++k) output[k] = {impl_->out[k][0], impl_->out[k][1]};
}

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

std::vector<double> hann_window(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / static_cast<double>(n));
  return w;
}

std::size_t frame_count(std::size_t length, std::size_t window, std::size_t hop) {
  if (length < window) return 0;
  return 1 + (length - window) / hop;
}

// ---------------------------------------------------------------------------
// STFT

namespace {

// Power (or magnitude) spectra of Hann-windowed frames, frame-major.
std::vector<double> frame_spectra(std::span<const double> x, std::size_t window, std::size_t hop, bool power,
                                  RealFft& fft, const std::vector<double>& w, std::size_t& frames) {
  frames = frame_count(x.size(), window, hop);
  const std::size_t bins = window / 2 + 1;
  std::vector<double> out(frames * bins);
  std::vector<double> buf(window);
  std::vector<std::complex<double>> spec(bins);
  for (std::size_t t = 0; t < frames; ++t) {
    const std::size_t start = t * hop;
    for (std::size_t i = 0; i < window; ++i) buf[i] = x[start + i] * w[i];
    fft.forward(buf, spec);
    for (std::size_t k = 0; k < bins; ++k) out[t * bins + k] = power ? std::norm(spec[k]) : std::abs(spec[k]);
  }
  return out;
}

}  // namespace

Spectrogram stft_spectrogram(const AudioBuffer& audio, std::size_t window, std::size_t hop) {
  require_window(window, hop);
  require_audio(audio, window);
  RealFft fft(window);
  const auto w = hann_window(window);
  std::size_t frames = 0;
  const auto mags = frame_spectra(audio.samples, window, hop, false, fft, w, frames);
  Spectrogram s;
  s.kind = SpectrogramKind::stft;
  s.bins = window / 2 + 1;
  s.frames = frames;
  s.hop = hop;
  s.window = window;
  s.data.resize(s.bins * frames);
  for (std::size_t t = 0; t < frames; ++t)
    for (std::size_t k = 0; k < s.bins; ++k) s.at(0, k, t) = mags[t * s.bins + k];
  s.bin_hz.resize(s.bins);
  for (std::size_t k = 0; k < s.bins; ++k) s.bin_hz[k] = static_cast<double>(k) * audio.sample_rate / window;
  return s;
}

// ---------------------------------------------------------------------------
// Mel

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

MelFilterbank::MelFilterbank(const MelConfig& cfg, int sample_rate) : fft_bins_(cfg.window / 2 + 1) {
  if (cfg.bands == 0) throw UserError("mel filterbank needs at least one band");
  require_window(cfg.window, cfg.hop);
  const double nyquist = sample_rate / 2.0;
  const double f_max = cfg.f_max > 0.0 ? cfg.f_max : nyquist;
  if (cfg.f_min < 0.0 || f_max <= cfg.f_min || f_max > nyquist) throw UserError("invalid mel frequency range");
  const double m_lo = hz_to_mel(cfg.f_min), m_hi = hz_to_mel(f_max);
  std::vector<double> edges(cfg.bands + 2);
  for (std::size_t i = 0; i < edges.size(); ++i)
    edges[i] = mel_to_hz(m_lo + (m_hi - m_lo) * static_cast<double>(i) / static_cast<double>(cfg.bands + 1));
  weights_.assign(cfg.bands * fft_bins_, 0.0);
  lo_.assign(cfg.bands, fft_bins_);
  hi_.assign(cfg.bands, 0);
  centres_.resize(cfg.bands);
  const double bin_hz = static_cast<double>(sample_rate) / static_cast<double>(cfg.window);
  for (std::size_t b = 0; b < cfg.bands; ++b) {
    const double left = edges[b], centre = edges[b + 1], right = edges[b + 2];
    centres_[b] = centre;
    for (std::size_t k = 0; k < fft_bins_; ++k) {
      const double f = static_cast<double>(k) * bin_hz;
      double v = 0.0;
      if (f > left && f <= centre) v = (f - left) / (centre - left);
      else if (f > centre && f < right) v = (right - f) / (right - centre);
      if (v > 0.0) {
        weights_[b * fft_bins_ + k] = v;
        lo_[b] = std::min(lo_[b], k);
        hi_[b] = std::max(hi_[b], k + 1);
      }
    }
    if (lo_[b] >= hi_[b]) {
      // Band narrower than one FFT bin: fall back to the nearest bin.
      const auto k = static_cast<std::size_t>(std::lround(centre / bin_hz));
      weights_[b * fft_bins_ + std::min(k, fft_bins_ - 1)] = 1.0;
      lo_[b] = std::min(k, fft_bins_ - 1);
      hi_[b] = lo_[b] + 1;
    }
  }
}

std::span<const double> MelFilterbank::row(std::size_t band) const {
  return std::span<const double>(weights_).subspan(band * fft_bins_, fft_bins_);
}

void MelFilterbank::apply(std::span<const double> power, std::span<double> out) const {
  for (std::size_t b = 0; b < bands(); ++b) {
    double acc = 0.0;
    const double* w = weights_.data() + b * fft_bins_;
    for (std::size_t k = lo_[b]; k < hi_[b]; ++k) acc += w[k] * power[k];
    out[b] = acc;
  }
}

Spectrogram mel_spectrogram(const AudioBuffer& audio, const MelConfig& cfg) {
  require_window(cfg.window, cfg.hop);
  require_audio(audio, cfg.window);
  MelFilterbank bank(cfg, audio.sample_rate);
  RealFft fft(cfg.window);
  const auto w = hann_window(cfg.window);
  std::size_t frames = 0;
  const auto power = frame_spectra(audio.samples, cfg.window, cfg.hop, true, fft, w, frames);
  Spectrogram s;
  s.kind = SpectrogramKind::mel;
  s.bins = cfg.bands;
  s.frames = frames;
  s.hop = cfg.hop;
  s.window = cfg.window;
  s.data.resize(s.bins * frames);
  s.bin_hz = bank.centres_hz();
  std::vector<double> row(cfg.bands);
  for (std::size_t t = 0; t < frames; ++t) {
    bank.apply(std::span<const double>(power).subspan(t * bank.fft_bins(), bank.fft_bins()), row);
    for (std::size_t b = 0; b < cfg.bands; ++b) s.at(0, b, t) = row[b];
  }
  return s;
}

// ---------------------------------------------------------------------------
// CQT

void CqtConfig::validate(int sample_rate) const {
  if (!(f_min > 0.0)) throw UserError("CQT f_min must be positive");
  if (bins_per_octave < 1) throw UserError("CQT bins_per_octave must be at least 1");
  if (num_octaves < 1) throw UserError("CQT num_octaves must be at least 1");
  if (hop == 0) throw UserError("CQT hop must be positive");
  if (f_min * std::exp2(num_octaves) > sample_rate / 2.0)
    throw UserError("CQT range f_min * 2^num_octaves exceeds the Nyquist frequency");
}

CqtTransform::CqtTransform(const CqtConfig& cfg, int sample_rate) : cfg_(cfg), sample_rate_(sample_rate) {
  cfg_.validate(sample_rate);
  const double q = 1.0 / (std::exp2(1.0 / cfg_.bins_per_octave) - 1.0);
  const auto longest = static_cast<std::size_t>(std::ceil(q * sample_rate / cfg_.f_min));
  fft_size_ = 1;
  while (fft_size_ < longest) fft_size_ <<= 1;

  const std::size_t n = fft_size_;
  fftw_complex* buf = nullptr;
  fftw_plan plan = nullptr;
  {
    std::lock_guard lock(planner_mutex());
    buf = fftw_alloc_complex(n);
    plan = fftw_plan_dft_1d(static_cast<int>(n), buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
  }
  constexpr double kSparsity = 0.0054;
  kernels_.resize(cfg_.bins());
  for (std::size_t k = 0; k < cfg_.bins(); ++k) {
    const double fk = bin_frequency(k);
    const auto len = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(q * sample_rate / fk)));
    std::fill(reinterpret_cast<double*>(buf), reinterpret_cast<double*>(buf + n), 0.0);
    std::vector<double> win(len);
    double wsum = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
      win[i] = len == 1 ? 1.0 : 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / static_cast<double>(len - 1));
      wsum += win[i];
    }
    const std::size_t offset = n / 2 - len / 2;
    for (std::size_t i = 0; i < len; ++i) {
      const double arg = 2.0 * std::numbers::pi * fk * (static_cast<double>(i) - static_cast<double>(len / 2)) /
                         sample_rate;
      buf[offset + i][0] = win[i] / wsum * std::cos(arg);
      buf[offset + i][1] = win[i] / wsum * std::sin(arg);
    }
    fftw_execute(plan);
    // Keep the positive-frequency band above the sparsity threshold.
    double peak = 0.0;
    for (std::size_t j = 0; j <= n / 2; ++j) peak = std::max(peak, std::hypot(buf[j][0], buf[j][1]));
    std::size_t first = n / 2 + 1, last = 0;
    for (std::size_t j = 0; j <= n / 2; ++j) {
      if (std::hypot(buf[j][0], buf[j][1]) >= kSparsity * peak) {
        first = std::min(first, j);
        last = j;
      }
    }
    auto& kern = kernels_[k];
    kern.first = first;
    for (std::size_t j = first; j <= last; ++j)
      kern.values.emplace_back(buf[j][0] / static_cast<double>(n), -buf[j][1] / static_cast<double>(n));
  }
  std::lock_guard lock(planner_mutex());
  fftw_destroy_plan(plan);
  fftw_free(buf);
}

double CqtTransform::bin_frequency(std::size_t k) const {
  return cfg_.f_min * std::exp2(static_cast<double>(k) / cfg_.bins_per_octave);
}

Spectrogram CqtTransform::apply(const AudioBuffer& audio) const {
  if (audio.sample_rate != sample_rate_) throw UserError("CQT built for a different sample rate");
  if (audio.samples.empty()) throw UserError("CQT of empty audio");
  Spectrogram s;
  s.kind = SpectrogramKind::cqt;
  s.bins = cfg_.bins();
  s.frames = audio.samples.size() / cfg_.hop + 1;
  s.hop = cfg_.hop;
  s.window = fft_size_;
  s.bins_per_octave = cfg_.bins_per_octave;
  s.data.assign(s.bins * s.frames, 0.0);
  s.bin_hz.resize(s.bins);
  for (std::size_t k = 0; k < s.bins; ++k) s.bin_hz[k] = bin_frequency(k);

  RealFft fft(fft_size_);
  std::vector<double> frame(fft_size_);
  std::vector<std::complex<double>> spec(fft.bins());
  const auto half = static_cast<std::ptrdiff_t>(fft_size_ / 2);
  const auto len = static_cast<std::ptrdiff_t>(audio.samples.size());
  for (std::size_t t = 0; t < s.frames; ++t) {
    const auto centre = static_cast<std::ptrdiff_t>(t * cfg_.hop);
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(fft_size_); ++i) {
      const auto src = centre - half + i;
      frame[static_cast<std::size_t>(i)] = (src >= 0 && src < len) ? audio.samples[static_cast<std::size_t>(src)] : 0.0;
    }
    fft.forward(frame, spec);
    for (std::size_t k = 0; k < s.bins; ++k) {
      const auto& kern = kernels_[k];
      std::complex<double> acc{0.0, 0.0};
      for (std::size_t j = 0; j < kern.values.size(); ++j) acc += spec[kern.first + j] * kern.values[j];
      s.at(0, k, t) = std::abs(acc);
    }
  }
  return s;
}

Spectrogram cqt_chromagram(const AudioBuffer& audio, const CqtConfig& cfg) {
  return CqtTransform(cfg, audio.sample_rate).apply(audio);
}

// ---------------------------------------------------------------------------
// MFCC

MfccExtractor::MfccExtractor(const MfccConfig& cfg, int sample_rate)
    : cfg_(cfg),
      sample_rate_(sample_rate),
      bank_(cfg.mel, sample_rate),
      fft_(cfg.mel.window),
      window_(hann_window(cfg.mel.window)) {
  if (cfg.n_mfcc == 0 || cfg.n_mfcc > cfg.mel.bands) throw UserError("n_mfcc must be in 1..mel bands");
  if (!(cfg.log_floor > 0.0)) throw UserError("MFCC log floor must be positive");
  const std::size_t m = cfg.mel.bands;
  dct_.resize(cfg.n_mfcc * m);
  for (std::size_t c = 0; c < cfg.n_mfcc; ++c) {
    const double scale = c == 0 ? std::sqrt(1.0 / m) : std::sqrt(2.0 / m);
    for (std::size_t b = 0; b < m; ++b)
      dct_[c * m + b] = scale * std::cos(std::numbers::pi * c * (2.0 * b + 1.0) / (2.0 * m));
  }
}

MfccMatrix MfccExtractor::operator()(const AudioBuffer& audio) {
  if (audio.sample_rate != sample_rate_) throw UserError("MFCC extractor built for a different sample rate");
  return (*this)(std::span<const double>(audio.samples));
}

MfccMatrix MfccExtractor::operator()(std::span<const double> samples) {
  const std::size_t window = cfg_.mel.window;
  if (samples.size() < window) throw UserError("audio is shorter than one MFCC window");
  std::size_t frames = 0;
  const auto power = frame_spectra(samples, window, cfg_.mel.hop, true, fft_, window_, frames);
  const std::size_t m = cfg_.mel.bands;
  MfccMatrix out;
  out.n_mfcc = cfg_.n_mfcc;
  out.frames = frames;
  out.coeffs.assign(cfg_.n_mfcc * frames, 0.0);
  std::vector<double> mel(m);
  for (std::size_t t = 0; t < frames; ++t) {
    bank_.apply(std::span<const double>(power).subspan(t * bank_.fft_bins(), bank_.fft_bins()), mel);
    for (double& v : mel) v = std::log(std::max(v, cfg_.log_floor));
    for (std::size_t c = 0; c < cfg_.n_mfcc; ++c) {
      double acc = 0.0;
      for (std::size_t b = 0; b < m; ++b) acc += dct_[c * m + b] * mel[b];
      out.coeffs[c * frames + t] = acc;
    }
  }
  return out;
}

MfccMatrix mfcc(const AudioBuffer& audio, const MfccConfig& cfg) {
  MfccExtractor ex(cfg, audio.sample_rate);
  return ex(audio);
}

double mfccd(const MfccMatrix& a, const MfccMatrix& b) {
  if (a.n_mfcc != b.n_mfcc || a.frames != b.frames) throw ShapeError("MFCC matrices differ in shape");
  if (a.frames == 0) return 0.0;
  double total = 0.0;
  for (std::size_t t = 0; t < a.frames; ++t) {
    double d2 = 0.0;
    for (std::size_t c = 0; c < a.n_mfcc; ++c) {
      const double d = a.at(c, t) - b.at(c, t);
      d2 += d * d;
    }
    total += d2;
  }
  return total / static_cast<double>(a.frames);
}

double mfccd(const AudioBuffer& a, const AudioBuffer& b, const MfccConfig& cfg) {
  if (a.sample_rate != b.sample_rate)
    throw UserError("MFCCD needs equal sample rates (" + std::to_string(a.sample_rate) + " vs " +
                    std::to_string(b.sample_rate) + ")");
  const std::size_t n = std::max(a.samples.size(), b.samples.size());
  std::vector<double> pa(a.samples), pb(b.samples);
  pa.resize(n, 0.0);
  pb.resize(n, 0.0);
  MfccExtractor ex(cfg, a.sample_rate);
  return mfccd(ex(pa), ex(pb));
}

// ---------------------------------------------------------------------------
// Statistical tracks

StatTracks statistical_features(const AudioBuffer& audio, std::size_t frame, std::size_t hop) {
  require_window(frame, hop);
  require_audio(audio, frame);
  StatTracks st;
  st.frame = frame;
  st.hop = hop;
  const std::size_t frames = frame_count(audio.samples.size(), frame, hop);
  st.amplitude_envelope.resize(frames);
  st.rms_energy.resize(frames);
  st.zero_crossing_rate.resize(frames);
  st.wiener_entropy.resize(frames);
  RealFft fft(frame);
  const auto w = hann_window(frame);
  std::vector<double> buf(frame);
  std::vector<std::complex<double>> spec(fft.bins());
  constexpr double kPowerFloor = 1e-12;
  for (std::size_t t = 0; t < frames; ++t) {
    const double* x = audio.samples.data() + t * hop;
    double peak = 0.0, energy = 0.0;
    std::size_t crossings = 0;
    for (std::size_t i = 0; i < frame; ++i) {
      peak = std::max(peak, std::abs(x[i]));
      energy += x[i] * x[i];
      if (i > 0 && ((x[i] >= 0.0) != (x[i - 1] >= 0.0))) ++crossings;
      buf[i] = x[i] * w[i];
    }
    st.amplitude_envelope[t] = peak;
    st.rms_energy[t] = std::sqrt(energy / static_cast<double>(frame));
    st.zero_crossing_rate[t] = static_cast<double>(crossings) / static_cast<double>(frame - 1);
    fft.forward(buf, spec);
    double log_sum = 0.0, sum = 0.0;
    for (const auto& c : spec) {
      const double p = std::norm(c) + kPowerFloor;
      log_sum += std::log(p);
      sum += p;
    }
    const double n = static_cast<double>(spec.size());
    const double flatness = std::exp(log_sum / n) / (sum / n);
    st.wiener_entropy[t] = std::clamp(flatness, 0.0, 1.0);
  }
  return st;
}

}  // namespace synthmatch::dsp
