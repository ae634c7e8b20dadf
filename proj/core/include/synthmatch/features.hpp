#pragma once

// Multi-modal feature bundle and the fixed-size, log-compressed arrays the
// estimator consumes.

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "synthmatch/dsp.hpp"
#include "synthmatch/synth.hpp"

namespace synthmatch {

struct FeatureConfig {
  int sample_rate = 16000;
  std::size_t stft_window = 512;
  std::size_t stft_hop = 512;
  std::size_t stft_pool = 4;  // frames averaged per model time step
  dsp::MelConfig mel{};
  std::size_t mel_pool = 8;
  dsp::CqtConfig cqt{};
  dsp::MfccConfig mfcc{};
  std::size_t mfcc_pool = 8;
  std::size_t stats_frame = 1024;
  std::size_t stats_hop = 1024;
  std::size_t wave_decimation = 64;
  std::size_t wave_frame = 50;
  double log_eps = 1e-6;

  void validate() const;
};

struct FeatureBundle {
  dsp::Spectrogram stft;
  dsp::Spectrogram mel;
  dsp::Spectrogram cqt;
  dsp::MfccMatrix mfcc;
  dsp::StatTracks stats;
  std::vector<double> raw_frames;  // block-averaged waveform
};

/// Keeps the FFT plans, filterbanks and CQT kernels alive between calls.
/// Not thread-safe; use one per thread.
class FeatureExtractor {
 public:
  explicit FeatureExtractor(const FeatureConfig& cfg);
  FeatureBundle operator()(const AudioBuffer& audio);
  const FeatureConfig& config() const { return cfg_; }

 private:
  FeatureConfig cfg_;
  dsp::CqtTransform cqt_;
  dsp::MfccExtractor mfcc_;
};

FeatureBundle extract_bundle(const AudioBuffer& audio, const FeatureConfig& cfg);

/// Array sizes of each modality after pooling.
struct InputShapes {
  std::size_t stft_bins = 0, stft_frames = 0;
  std::size_t mel_bins = 0, mel_frames = 0;
  std::size_t cqt_bins = 0, cqt_frames = 0;
  int cqt_bins_per_octave = 12;
  std::size_t mfcc_coeffs = 0, mfcc_frames = 0;
  std::size_t stat_tracks = 4, stat_frames = 0;
  std::size_t wave_steps = 0, wave_frame = 0;

  friend bool operator==(const InputShapes&, const InputShapes&) = default;
};

/// Shapes implied by a feature config for audio of `num_samples` samples.
InputShapes input_shapes(const FeatureConfig& cfg, std::size_t num_samples);

enum class Modality { stft, mel, cqt, mfcc, stats, wave };
inline constexpr Modality kAllModalities[] = {Modality::stft, Modality::mel,   Modality::cqt,
                                              Modality::mfcc, Modality::stats, Modality::wave};
std::string modality_name(Modality m);

/// Row-major arrays:
///   stft, mel, cqt  bins x frames (log magnitude / log power)
///   mfcc            frames x coeffs (a sequence)
///   stats           tracks x frames
///   wave            steps x frame
template <class T>
struct ModelInput {
  std::vector<T> stft, mel, cqt, mfcc, stats, wave;

  std::vector<T>& get(Modality m);
  const std::vector<T>& get(Modality m) const;

  template <class U>
  ModelInput<U> cast() const {
    ModelInput<U> out;
    for (Modality m : kAllModalities) {
      const auto& src = get(m);
      out.get(m).assign(src.begin(), src.end());
    }
    return out;
  }
};

ModelInput<float> to_model_input(const FeatureBundle& bundle, const FeatureConfig& cfg, const InputShapes& shapes);

/// Per-row standardization fitted on training inputs. Rows are frequency
/// bins, MFCC coefficients, statistics tracks and waveform frame positions.
class Normalizer {
 public:
  struct RowStats {
    std::vector<double> mean, stdev;
  };

  Normalizer() = default;
  static Normalizer fit(const std::vector<const ModelInput<float>*>& inputs, const InputShapes& shapes);
  void apply(ModelInput<float>& input) const;
  const RowStats& stats(Modality m) const;
  RowStats& stats(Modality m);

 private:
  RowStats stft_, mel_, cqt_, mfcc_, stats_, wave_;
};

}  // namespace synthmatch
