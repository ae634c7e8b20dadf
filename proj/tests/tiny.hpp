#pragma once

// Small model and short note so estimator tests run in milliseconds.

#include <random>

#include "synthmatch/estimator.hpp"
#include "synthmatch/features.hpp"

namespace testing {

/// Half a second at 120 bpm: 8000 samples at 16 kHz.
inline synthmatch::MidiNote short_note() {
  synthmatch::MidiNote n;
  n.sustain_beats = 0.5;
  n.total_beats = 1.0;
  return n;
}

inline synthmatch::ModelConfig tiny_model() {
  synthmatch::ModelConfig c;
  c.conv1_channels = 2;
  c.conv2_channels = 3;
  c.conv_dim = 8;
  c.seq_dim = 4;
  c.stats_track_dim = 2;
  c.group_hidden = 6;
  c.head_hidden = 5;
  return c;
}

inline synthmatch::ModelInput<float> features_of(const synthmatch::AudioBuffer& audio,
                                                 const synthmatch::FeatureConfig& cfg = {}) {
  const auto shapes = synthmatch::input_shapes(cfg, audio.size());
  return synthmatch::to_model_input(synthmatch::extract_bundle(audio, cfg), cfg, shapes);
}

template <class T>
synthmatch::ModelInput<T> random_input(const synthmatch::InputShapes& s, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  synthmatch::ModelInput<T> in;
  auto fill = [&](std::vector<T>& v, std::size_t count) {
    v.resize(count);
    for (auto& x : v) x = static_cast<T>(n(rng));
  };
  fill(in.stft, s.stft_bins * s.stft_frames);
  fill(in.mel, s.mel_bins * s.mel_frames);
  fill(in.cqt, s.cqt_bins * s.cqt_frames);
  fill(in.mfcc, s.mfcc_coeffs * s.mfcc_frames);
  fill(in.stats, s.stat_tracks * s.stat_frames);
  fill(in.wave, s.wave_steps * s.wave_frame);
  return in;
}

}  // namespace testing
