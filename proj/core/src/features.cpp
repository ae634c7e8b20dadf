#include "synthmatch/features.hpp"

#include <algorithm>
#include <cmath>

#include "synthmatch/error.hpp"

namespace synthmatch {

void FeatureConfig::validate() const {
  if (sample_rate < 8000) throw UserError("features.sample_rate must be at least 8000");
  if (!dsp::is_power_of_two(stft_window)) throw UserError("features.stft_window must be a power of two");
  if (stft_hop == 0 || stft_hop > stft_window) throw UserError("features.stft_hop must be in 1..stft_window");
  if (stft_pool == 0 || mel_pool == 0 || mfcc_pool == 0) throw UserError("features pooling factors must be >= 1");
  if (stats_frame == 0 || stats_hop == 0) throw UserError("features.stats_frame and stats_hop must be >= 1");
  if (wave_decimation == 0 || wave_frame == 0) throw UserError("features.wave_* must be >= 1");
  if (mfcc.n_mfcc == 0 || mfcc.n_mfcc > mfcc.mel.bands) throw UserError("features.mfcc.n_mfcc must be in 1..bands");
  cqt.validate(sample_rate);
}

FeatureExtractor::FeatureExtractor(const FeatureConfig& cfg)
    : cfg_(cfg), cqt_((cfg.validate(), cfg.cqt), cfg.sample_rate), mfcc_(cfg.mfcc, cfg.sample_rate) {}

FeatureBundle FeatureExtractor::operator()(const AudioBuffer& audio) {
  if (audio.sample_rate != cfg_.sample_rate)
    throw UserError("audio sample rate " + std::to_string(audio.sample_rate) + " does not match features.sample_rate " +
                    std::to_string(cfg_.sample_rate));
  FeatureBundle b;
  b.stft = dsp::stft_spectrogram(audio, cfg_.stft_window, cfg_.stft_hop);
  b.mel = dsp::mel_spectrogram(audio, cfg_.mel);
  b.cqt = cqt_.apply(audio);
  b.mfcc = mfcc_(audio);
  b.stats = dsp::statistical_features(audio, cfg_.stats_frame, cfg_.stats_hop);
  const std::size_t blocks = audio.size() / cfg_.wave_decimation;
  b.raw_frames.assign(blocks, 0.0);
  for (std::size_t i = 0; i < blocks; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < cfg_.wave_decimation; ++j) acc += audio.samples[i * cfg_.wave_decimation + j];
    b.raw_frames[i] = acc / static_cast<double>(cfg_.wave_decimation);
  }
  return b;
}

FeatureBundle extract_bundle(const AudioBuffer& audio, const FeatureConfig& cfg) {
  FeatureExtractor ex(cfg);
  return ex(audio);
}

InputShapes input_shapes(const FeatureConfig& cfg, std::size_t num_samples) {
  InputShapes s;
  s.stft_bins = cfg.stft_window / 2 + 1;
  s.stft_frames = dsp::frame_count(num_samples, cfg.stft_window, cfg.stft_hop) / cfg.stft_pool;
  s.mel_bins = cfg.mel.bands;
  const std::size_t mel_frames = dsp::frame_count(num_samples, cfg.mel.window, cfg.mel.hop);
  s.mel_frames = mel_frames / cfg.mel_pool;
  s.cqt_bins = cfg.cqt.bins();
  s.cqt_frames = num_samples / cfg.cqt.hop + 1;
  s.cqt_bins_per_octave = cfg.cqt.bins_per_octave;
  s.mfcc_coeffs = cfg.mfcc.n_mfcc;
  s.mfcc_frames = dsp::frame_count(num_samples, cfg.mfcc.mel.window, cfg.mfcc.mel.hop) / cfg.mfcc_pool;
  s.stat_frames = dsp::frame_count(num_samples, cfg.stats_frame, cfg.stats_hop);
  s.wave_frame = cfg.wave_frame;
  s.wave_steps = (num_samples / cfg.wave_decimation) / cfg.wave_frame;
  if (s.stft_frames == 0 || s.mel_frames == 0 || s.mfcc_frames == 0 || s.stat_frames == 0)
    throw UserError("audio of " + std::to_string(num_samples) + " samples is too short for the feature config");
  return s;
}

std::string modality_name(Modality m) {
  switch (m) {
    case Modality::stft: return "stft";
    case Modality::mel: return "mel";
    case Modality::cqt: return "cqt";
    case Modality::mfcc: return "mfcc";
    case Modality::stats: return "stats";
    case Modality::wave: return "wave";
  }
  return "?";
}

template <class T>
std::vector<T>& ModelInput<T>::get(Modality m) {
  switch (m) {
    case Modality::stft: return stft;
    case Modality::mel: return mel;
    case Modality::cqt: return cqt;
    case Modality::mfcc: return mfcc;
    case Modality::stats: return stats;
    case Modality::wave: return wave;
  }
  throw Error("bad modality");
}

template <class T>
const std::vector<T>& ModelInput<T>::get(Modality m) const {
  return const_cast<ModelInput<T>*>(this)->get(m);
}

template struct ModelInput<float>;
template struct ModelInput<double>;

namespace {

// Averages groups of `pool` frames of a bins x frames array, then log-compresses.
std::vector<float> pool_log(const dsp::Spectrogram& s, std::size_t pool, std::size_t out_frames, double eps) {
  if (s.frames < out_frames * pool)
    throw ShapeError("spectrogram has " + std::to_string(s.frames) + " frames, need " +
                     std::to_string(out_frames * pool));
  std::vector<float> out(s.bins * out_frames);
  for (std::size_t k = 0; k < s.bins; ++k)
    for (std::size_t t = 0; t < out_frames; ++t) {
      double acc = 0.0;
      for (std::size_t j = 0; j < pool; ++j) acc += s.at(0, k, t * pool + j);
      out[k * out_frames + t] = static_cast<float>(std::log(acc / static_cast<double>(pool) + eps));
    }
  return out;
}

struct RowLayout {
  std::size_t rows;
  std::size_t cols;
  bool row_major;  // true: element (r, c) at r * cols + c; false: at c * rows + r
};

RowLayout layout_of(Modality m, const InputShapes& s) {
  switch (m) {
    case Modality::stft: return {s.stft_bins, s.stft_frames, true};
    case Modality::mel: return {s.mel_bins, s.mel_frames, true};
    case Modality::cqt: return {s.cqt_bins, s.cqt_frames, true};
    case Modality::mfcc: return {s.mfcc_coeffs, s.mfcc_frames, false};
    case Modality::stats: return {s.stat_tracks, s.stat_frames, true};
    case Modality::wave: return {s.wave_frame, s.wave_steps, false};
  }
  return {0, 0, true};
}

}  // namespace

ModelInput<float> to_model_input(const FeatureBundle& b, const FeatureConfig& cfg, const InputShapes& s) {
  ModelInput<float> in;
  in.stft = pool_log(b.stft, cfg.stft_pool, s.stft_frames, cfg.log_eps);
  in.mel = pool_log(b.mel, cfg.mel_pool, s.mel_frames, cfg.log_eps);
  in.cqt = pool_log(b.cqt, 1, s.cqt_frames, cfg.log_eps);

  if (b.mfcc.frames < s.mfcc_frames * cfg.mfcc_pool || b.mfcc.n_mfcc != s.mfcc_coeffs)
    throw ShapeError("mfcc matrix does not match the model input shape");
  in.mfcc.assign(s.mfcc_frames * s.mfcc_coeffs, 0.0f);
  for (std::size_t t = 0; t < s.mfcc_frames; ++t)
    for (std::size_t c = 0; c < s.mfcc_coeffs; ++c) {
      double acc = 0.0;
      for (std::size_t j = 0; j < cfg.mfcc_pool; ++j) acc += b.mfcc.at(c, t * cfg.mfcc_pool + j);
      in.mfcc[t * s.mfcc_coeffs + c] = static_cast<float>(acc / static_cast<double>(cfg.mfcc_pool));
    }

  if (b.stats.frames() != s.stat_frames) throw ShapeError("statistics tracks do not match the model input shape");
  in.stats.reserve(4 * s.stat_frames);
  for (const auto* track : {&b.stats.amplitude_envelope, &b.stats.rms_energy, &b.stats.zero_crossing_rate,
                            &b.stats.wiener_entropy})
    for (double v : *track) in.stats.push_back(static_cast<float>(v));

  const std::size_t n = s.wave_steps * s.wave_frame;
  if (b.raw_frames.size() < n) throw ShapeError("waveform frames do not match the model input shape");
  in.wave.assign(b.raw_frames.begin(), b.raw_frames.begin() + static_cast<std::ptrdiff_t>(n));
  return in;
}

const Normalizer::RowStats& Normalizer::stats(Modality m) const { return const_cast<Normalizer*>(this)->stats(m); }

Normalizer::RowStats& Normalizer::stats(Modality m) {
  switch (m) {
    case Modality::stft: return stft_;
    case Modality::mel: return mel_;
    case Modality::cqt: return cqt_;
    case Modality::mfcc: return mfcc_;
    case Modality::stats: return stats_;
    case Modality::wave: return wave_;
  }
  throw Error("bad modality");
}

Normalizer Normalizer::fit(const std::vector<const ModelInput<float>*>& inputs, const InputShapes& shapes) {
  if (inputs.empty()) throw UserError("cannot fit input normalization on an empty training set");
  Normalizer n;
  for (Modality m : kAllModalities) {
    const RowLayout lay = layout_of(m, shapes);
    std::vector<double> sum(lay.rows, 0.0), sq(lay.rows, 0.0);
    for (const auto* in : inputs) {
      const auto& v = in->get(m);
      if (v.size() != lay.rows * lay.cols) throw ShapeError(modality_name(m) + " input has the wrong size");
      for (std::size_t i = 0; i < v.size(); ++i) {
        const std::size_t r = lay.row_major ? i / lay.cols : i % lay.rows;
        sum[r] += v[i];
        sq[r] += static_cast<double>(v[i]) * v[i];
      }
    }
    auto& st = n.stats(m);
    st.mean.resize(lay.rows);
    st.stdev.resize(lay.rows);
    const double count = static_cast<double>(inputs.size() * lay.cols);
    for (std::size_t r = 0; r < lay.rows; ++r) {
      st.mean[r] = sum[r] / count;
      const double var = std::max(0.0, sq[r] / count - st.mean[r] * st.mean[r]);
      st.stdev[r] = std::max(std::sqrt(var), 1e-3);
    }
  }
  return n;
}

void Normalizer::apply(ModelInput<float>& input) const {
  for (Modality m : kAllModalities) {
    auto& v = input.get(m);
    const auto& st = stats(m);
    if (v.empty()) continue;
    const std::size_t rows = st.mean.size();
    if (rows == 0 || v.size() % rows != 0) throw ShapeError(modality_name(m) + " input does not match normalization");
    const std::size_t cols = v.size() / rows;
    const bool row_major = m == Modality::stft || m == Modality::mel || m == Modality::cqt || m == Modality::stats;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const std::size_t r = row_major ? i / cols : i % rows;
      v[i] = static_cast<float>((v[i] - st.mean[r]) / st.stdev[r]);
    }
  }
}

}  // namespace synthmatch
