#include "synthmatch/pipeline.hpp"

#include <algorithm>

#include "synthmatch/error.hpp"
#include "synthmatch/io.hpp"

namespace synthmatch {

namespace fs = std::filesystem;

PreparedDataset prepare_dataset(const fs::path& dir, const FeatureConfig& features,
                                const ProgressCallback& progress) {
  features.validate();
  PreparedDataset d;
  d.dir = dir;
  d.manifest = read_manifest(dir);
  d.space = make_space(d.manifest.config.space);
  d.features = features;
  if (d.manifest.sample_rate != features.sample_rate)
    throw UserError("dataset sample rate " + std::to_string(d.manifest.sample_rate) +
                    " differs from features.sample_rate " + std::to_string(features.sample_rate));
  d.shapes = input_shapes(features, d.manifest.note.num_samples(features.sample_rate));

  FeatureExtractor extract(features);
  const std::size_t total = d.manifest.count(Split::train) + d.manifest.count(Split::val);
  std::size_t done = 0;
  for (const auto& r : d.manifest.records) {
    if (r.split == Split::test) continue;
    PreparedSplit& s = r.split == Split::train ? d.train : d.val;
    s.ids.push_back(r.id);
    s.presets.push_back(read_preset(dir / r.preset_path));
    s.weights.push_back(r.weights_path ? read_weights(dir / *r.weights_path, *d.space) : std::vector<double>{});
    const AudioBuffer audio = read_wav(dir / r.audio_path);
    s.inputs.push_back(to_model_input(extract(audio), features, d.shapes));
    if (progress) progress("features", ++done, total);
  }
  if (d.train.inputs.empty()) throw UserError(dir.string() + ": dataset has no training records");

  std::vector<const ModelInput<float>*> fit_on;
  for (const auto& in : d.train.inputs) fit_on.push_back(&in);
  d.normalizer = Normalizer::fit(fit_on, d.shapes);
  for (auto& in : d.train.inputs) d.normalizer.apply(in);
  for (auto& in : d.val.inputs) d.normalizer.apply(in);
  return d;
}

std::vector<Example> make_examples(const PreparedSplit& split, const LossConfig& loss, bool use_weights) {
  std::vector<Example> out;
  out.reserve(split.ids.size());
  for (std::size_t i = 0; i < split.ids.size(); ++i) {
    const auto w = use_weights ? normalize_weights(split.weights[i]) : std::vector<double>{};
    out.push_back({split.ids[i], split.inputs[i], make_target(split.presets[i], loss, w)});
  }
  return out;
}

Estimator train_estimator(const PreparedDataset& data, const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                          std::uint64_t seed, const std::string& config_hash, const EpochCallback& on_epoch) {
  model_cfg.validate();
  Estimator e;
  e.features = data.features;
  e.model_cfg = model_cfg;
  e.train_cfg = train_cfg;
  e.note = data.manifest.note;
  e.normalizer = data.normalizer;
  e.seed = seed;
  e.config_hash = config_hash;
  e.model = std::make_unique<Model<float>>(model_cfg, data.shapes, data.space, seed);
  const auto tr = make_examples(data.train, train_cfg.loss, train_cfg.use_weights);
  const auto va = make_examples(data.val, train_cfg.loss, train_cfg.use_weights);
  e.history = train(*e.model, tr, va, train_cfg, seed, on_epoch);
  return e;
}

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

TestEvaluation evaluate_test_split(Estimator& est, const fs::path& dir, std::uint64_t seed) {
  const auto manifest = read_manifest(dir);
  const SpacePtr space = est.model->space();
  const int sr = est.features.sample_rate;
  dsp::MfccExtractor mfcc(est.features.mfcc, sr);
  DatasetRng rng(seed ^ 0x7e57ULL);
  TestEvaluation t;
  for (const auto& r : manifest.records) {
    if (r.split != Split::test) continue;
    const AudioBuffer target = read_wav(dir / r.audio_path);
    const auto target_mfcc = mfcc(target);
    auto score = [&](const Preset& p) {
      AudioBuffer a = quantize_f32(render(p, est.note, sr));
      a.samples.resize(target.size(), 0.0);
      return dsp::mfccd(target_mfcc, mfcc(a));
    };
    t.ids.push_back(r.id);
    t.estimated.push_back(score(est.estimate(target)));
    t.random.push_back(score(sample_random_preset(space, rng)));
  }
  t.median_estimated = median(t.estimated);
  t.median_random = median(t.random);
  return t;
}

}  // namespace synthmatch
