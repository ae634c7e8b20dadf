#include "synthmatch/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>

#include "json_io.hpp"
#include "synthmatch/io.hpp"
#include "synthmatch/nn/loss.hpp"

namespace synthmatch {

using nn::Tensor;

bool ModelConfig::enabled(Modality m) const {
  const auto it = modalities.find(modality_name(m));
  return it != modalities.end() && it->second;
}

void ModelConfig::validate() const {
  for (const auto& [name, on] : modalities) {
    (void)on;
    const bool known = std::any_of(std::begin(kAllModalities), std::end(kAllModalities),
                                   [&](Modality m) { return modality_name(m) == name; });
    if (!known) throw UserError("model.modalities: unknown modality '" + name + "'");
  }
  if (std::none_of(std::begin(kAllModalities), std::end(kAllModalities), [&](Modality m) { return enabled(m); }))
    throw UserError("model.modalities: at least one modality must be enabled");
  if (conv1_channels == 0 || conv2_channels == 0 || conv_dim == 0 || seq_dim == 0 || stats_track_dim == 0 ||
      group_hidden == 0 || head_hidden == 0)
    throw UserError("model dimensions must be >= 1");
  if (pdc.num_primes < 1) throw UserError("model.pdc.num_primes must be >= 1");
}

ModelConfig ModelConfig::profile(const std::string& name) {
  ModelConfig c;
  if (name == "desk") return c;
  if (name == "large") {
    c.conv1_channels = 32;
    c.conv2_channels = 64;
    c.conv_dim = 512;
    c.seq_dim = 128;
    c.stats_track_dim = 32;
    c.group_hidden = 64;
    c.head_hidden = 64;
    return c;
  }
  throw UserError("unknown model profile '" + name + "' (expected desk or large)");
}

// ---------------------------------------------------------------------------
// Model

template <class T>
std::unique_ptr<nn::Sequential<T>> Model<T>::conv_branch(const std::string& name, std::size_t bins,
                                                         std::size_t frames, bool cqt, nn::Rng& rng) {
  auto net = std::make_unique<nn::Sequential<T>>();
  const std::size_t sh = cqt ? 1 : 2;
  nn::Conv2dSpec c1{1, cfg_.conv1_channels, 3, 3, sh, 2, 1, 1};
  nn::Conv2dSpec c2{cfg_.conv1_channels, cfg_.conv2_channels, 3, 3, sh, 2, 1, 1};
  const bool with_pdc = cqt && cfg_.pdc.enabled;
  const auto locs = pdc::dilated_locations(shapes_.cqt_bins_per_octave, cfg_.pdc.num_primes, cfg_.pdc.symmetric);
  net->add(std::make_unique<nn::Conv2d<T>>(name + ".conv1", c1, rng));
  if (with_pdc)
    net->add(std::make_unique<nn::PdcLayer<T>>(name + ".pdc1", c1.out_channels, locs, cfg_.pdc.per_channel, rng));
  net->add(std::make_unique<nn::Relu<T>>());
  net->add(std::make_unique<nn::Conv2d<T>>(name + ".conv2", c2, rng));
  if (with_pdc)
    net->add(std::make_unique<nn::PdcLayer<T>>(name + ".pdc2", c2.out_channels, locs, cfg_.pdc.per_channel, rng));
  net->add(std::make_unique<nn::Relu<T>>());
  const std::size_t flat = c2.out_channels * c2.out_h(c1.out_h(bins)) * c2.out_w(c1.out_w(frames));
  net->add(std::make_unique<nn::Dense<T>>(name + ".fc", flat, cfg_.conv_dim, rng));
  net->add(std::make_unique<nn::Relu<T>>());
  return net;
}

template <class T>
Model<T>::Model(const ModelConfig& cfg, const InputShapes& shapes, SpacePtr space, std::uint64_t seed)
    : cfg_(cfg), shapes_(shapes), space_(std::move(space)) {
  cfg_.validate();
  if (space_->free_indices().empty()) throw UserError("parameter space '" + space_->id() + "' has no free parameters");
  nn::Rng rng(seed);
  for (Modality m : kAllModalities) {
    if (!cfg_.enabled(m)) continue;
    Branch b;
    b.modality = m;
    switch (m) {
      case Modality::stft:
        b.net = conv_branch("stft", shapes_.stft_bins, shapes_.stft_frames, false, rng);
        b.out_dim = cfg_.conv_dim;
        break;
      case Modality::mel:
        b.net = conv_branch("mel", shapes_.mel_bins, shapes_.mel_frames, false, rng);
        b.out_dim = cfg_.conv_dim;
        break;
      case Modality::cqt:
        b.net = conv_branch("cqt", shapes_.cqt_bins, shapes_.cqt_frames, true, rng);
        b.out_dim = cfg_.conv_dim;
        break;
      case Modality::mfcc:
        b.net = std::make_unique<nn::Sequential<T>>();
        b.net->add(std::make_unique<nn::SimpleRnn<T>>("mfcc.rnn", shapes_.mfcc_coeffs, cfg_.seq_dim, rng));
        b.out_dim = cfg_.seq_dim;
        break;
      case Modality::wave:
        b.net = std::make_unique<nn::Sequential<T>>();
        b.net->add(std::make_unique<nn::SimpleRnn<T>>("wave.rnn", shapes_.wave_frame, cfg_.seq_dim, rng));
        b.out_dim = cfg_.seq_dim;
        break;
      case Modality::stats: {
        static const char* names[] = {"envelope", "rms", "zcr", "wiener"};
        for (std::size_t i = 0; i < shapes_.stat_tracks; ++i) {
          auto t = std::make_unique<nn::Sequential<T>>();
          t->add(std::make_unique<nn::Dense<T>>(std::string("stats.") + names[i % 4], shapes_.stat_frames,
                                                cfg_.stats_track_dim, rng));
          t->add(std::make_unique<nn::Relu<T>>());
          b.tracks.push_back(std::move(t));
        }
        b.out_dim = cfg_.stats_track_dim * shapes_.stat_tracks;
        break;
      }
    }
    b.offset = global_dim_;
    global_dim_ += b.out_dim;
    branches_.push_back(std::move(b));
  }

  groups_ = space_->free_groups();
  const std::size_t G = groups_.size();
  const std::size_t gh = cfg_.group_hidden;
  trunk_ = std::make_unique<nn::Dense<T>>("trunk", global_dim_, G * gh, rng);
  split_ = std::make_unique<nn::MaskedDense<T>>("split", std::vector<std::size_t>(G, gh),
                                                std::vector<std::size_t>(G, gh), rng);
  for (std::size_t i : space_->free_indices()) {
    const auto& d = space_->descriptor(i);
    const auto g = static_cast<std::size_t>(std::find(groups_.begin(), groups_.end(), d.group) - groups_.begin());
    head_group_.push_back(g);
    auto h = std::make_unique<nn::Sequential<T>>();
    h->add(std::make_unique<nn::Dense<T>>("head." + d.name + ".fc1", gh, cfg_.head_hidden, rng));
    h->add(std::make_unique<nn::Relu<T>>());
    h->add(std::make_unique<nn::Dense<T>>("head." + d.name + ".fc2", cfg_.head_hidden,
                                          static_cast<std::size_t>(d.class_count), rng));
    heads_.push_back(std::move(h));
  }
}

namespace {

template <class T>
Tensor<T> input_tensor(const std::vector<T>& data, std::vector<std::size_t> shape, const std::string& what) {
  if (data.size() != nn::shape_size(shape))
    throw ShapeError(what + " input has " + std::to_string(data.size()) + " values, model expects " +
                     nn::shape_string(shape));
  return Tensor<T>(std::move(shape), data);
}

}  // namespace

template <class T>
std::vector<Tensor<T>> Model<T>::forward(const ModelInput<T>& input) {
  Tensor<T> global({global_dim_});
  for (auto& b : branches_) {
    const auto& data = input.get(b.modality);
    const std::string what = modality_name(b.modality);
    Tensor<T> out;
    switch (b.modality) {
      case Modality::stft:
        out = b.net->forward(input_tensor(data, {1, shapes_.stft_bins, shapes_.stft_frames}, what));
        break;
      case Modality::mel:
        out = b.net->forward(input_tensor(data, {1, shapes_.mel_bins, shapes_.mel_frames}, what));
        break;
      case Modality::cqt:
        out = b.net->forward(input_tensor(data, {1, shapes_.cqt_bins, shapes_.cqt_frames}, what));
        break;
      case Modality::mfcc:
        out = b.net->forward(input_tensor(data, {shapes_.mfcc_frames, shapes_.mfcc_coeffs}, what));
        break;
      case Modality::wave:
        out = b.net->forward(input_tensor(data, {shapes_.wave_steps, shapes_.wave_frame}, what));
        break;
      case Modality::stats: {
        const std::size_t F = shapes_.stat_frames;
        if (data.size() != shapes_.stat_tracks * F) throw ShapeError("stats input does not match the model");
        out = Tensor<T>({b.out_dim});
        for (std::size_t i = 0; i < b.tracks.size(); ++i) {
          Tensor<T> x({F}, std::vector<T>(data.begin() + static_cast<std::ptrdiff_t>(i * F),
                                          data.begin() + static_cast<std::ptrdiff_t>((i + 1) * F)));
          const Tensor<T> y = b.tracks[i]->forward(x);
          std::copy(y.data.begin(), y.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(i * y.size()));
        }
        break;
      }
    }
    std::copy(out.data.begin(), out.data.end(), global.data.begin() + static_cast<std::ptrdiff_t>(b.offset));
  }
  local_ = trunk_act_.forward(trunk_->forward(global));
  const Tensor<T> split = split_act_.forward(split_->forward(local_));
  const std::size_t gh = cfg_.group_hidden;
  std::vector<Tensor<T>> logits;
  logits.reserve(heads_.size());
  for (std::size_t i = 0; i < heads_.size(); ++i) {
    const auto first = split.data.begin() + static_cast<std::ptrdiff_t>(head_group_[i] * gh);
    Tensor<T> x({gh}, std::vector<T>(first, first + static_cast<std::ptrdiff_t>(gh)));
    logits.push_back(heads_[i]->forward(x));
  }
  return logits;
}

template <class T>
void Model<T>::backward(const std::vector<Tensor<T>>& grad_logits) {
  if (grad_logits.size() != heads_.size())
    throw ShapeError("model backward: " + std::to_string(grad_logits.size()) + " logit gradients for " +
                     std::to_string(heads_.size()) + " heads");
  const std::size_t gh = cfg_.group_hidden;
  Tensor<T> gsplit({groups_.size() * gh});
  for (std::size_t i = 0; i < heads_.size(); ++i) {
    const Tensor<T> g = heads_[i]->backward(grad_logits[i]);
    T* dst = gsplit.data.data() + head_group_[i] * gh;
    for (std::size_t k = 0; k < gh; ++k) dst[k] += g[k];
  }
  local_grad_ = split_->backward(split_act_.backward(gsplit));
  const Tensor<T> gglobal = trunk_->backward(trunk_act_.backward(local_grad_));
  for (auto& b : branches_) {
    const auto first = gglobal.data.begin() + static_cast<std::ptrdiff_t>(b.offset);
    if (b.modality == Modality::stats) {
      const std::size_t d = cfg_.stats_track_dim;
      for (std::size_t i = 0; i < b.tracks.size(); ++i) {
        const auto f = first + static_cast<std::ptrdiff_t>(i * d);
        b.tracks[i]->backward(Tensor<T>({d}, std::vector<T>(f, f + static_cast<std::ptrdiff_t>(d))));
      }
    } else {
      b.net->backward(Tensor<T>({b.out_dim}, std::vector<T>(first, first + static_cast<std::ptrdiff_t>(b.out_dim))));
    }
  }
}

template <class T>
nn::ParamList<T> Model<T>::params() {
  nn::ParamList<T> out;
  auto append = [&](nn::ParamList<T> ps) { out.insert(out.end(), ps.begin(), ps.end()); };
  for (auto& b : branches_) {
    if (b.net) append(b.net->params());
    for (auto& t : b.tracks) append(t->params());
  }
  append(trunk_->params());
  append(split_->params());
  for (auto& h : heads_) append(h->params());
  return out;
}

template <class T>
std::size_t Model<T>::parameter_count() {
  return nn::parameter_count(params());
}

template class Model<float>;
template class Model<double>;

// ---------------------------------------------------------------------------
// Targets, weights, loss

std::vector<double> label_smooth(int class_index, int class_count, double sigma0) {
  if (class_count < 1) throw UserError("label_smooth: class count must be >= 1");
  if (class_index < 0 || class_index >= class_count)
    throw UserError("label_smooth: class " + std::to_string(class_index) + " outside 0.." +
                    std::to_string(class_count - 1));
  if (sigma0 < 0.0) throw UserError("label_smooth: sigma0 must be >= 0");
  std::vector<double> p(static_cast<std::size_t>(class_count), 0.0);
  if (sigma0 == 0.0) {
    p[static_cast<std::size_t>(class_index)] = 1.0;
    return p;
  }
  double sum = 0.0;
  for (int c = 0; c < class_count; ++c) {
    const double z = (c - class_index) / sigma0;
    p[static_cast<std::size_t>(c)] = std::exp(-0.5 * z * z);
    sum += p[static_cast<std::size_t>(c)];
  }
  for (auto& v : p) v /= sum;
  return p;
}

std::vector<double> gradient_weights(const Preset& preset, const MidiNote& note, int sample_rate,
                                     const dsp::MfccConfig& mfcc_cfg) {
  preset.validate();
  dsp::MfccExtractor mfcc(mfcc_cfg, sample_rate);
  const dsp::MfccMatrix base = mfcc(render(preset, note, sample_rate));
  const auto& space = preset.space();
  std::vector<double> weights;
  weights.reserve(space.free_indices().size());
  for (std::size_t i : space.free_indices()) {
    const int K = space.descriptor(i).class_count;
    const int c = preset.at(i);
    double acc = 0.0;
    int count = 0;
    for (int step : {-1, 1}) {
      const int moved = c + step;
      if (moved < 0 || moved >= K) continue;
      Preset q = preset;
      q.set(i, moved);
      const double d = dsp::mfccd(base, mfcc(render(q, note, sample_rate)));
      const double dtheta = 1.0 / static_cast<double>(K - 1);
      acc += d / (dtheta * dtheta);
      ++count;
    }
    weights.push_back(count ? acc / count : 0.0);
  }
  return weights;
}

std::vector<double> normalize_weights(std::vector<double> weights) {
  if (weights.empty()) return weights;
  const double mean = std::accumulate(weights.begin(), weights.end(), 0.0) / static_cast<double>(weights.size());
  if (!(mean > 0.0)) return weights;
  for (auto& w : weights) w /= mean;
  return weights;
}

Target make_target(const Preset& preset, const LossConfig& cfg, const std::vector<double>& weights) {
  const auto& space = preset.space();
  const auto& free = space.free_indices();
  if (!weights.empty() && weights.size() != free.size())
    throw ShapeError("target weights: " + std::to_string(weights.size()) + " values for " +
                     std::to_string(free.size()) + " free parameters");
  Target t;
  for (std::size_t i : free) {
    const auto& d = space.descriptor(i);
    const int c = preset.at(i);
    t.classes.push_back(c);
    const bool smooth = d.kind == ParamKind::continuous || cfg.smooth_categorical;
    t.dists.push_back(label_smooth(c, d.class_count, smooth ? cfg.sigma0 : 0.0));
  }
  t.weights = weights.empty() ? std::vector<double>(free.size(), 1.0) : weights;
  return t;
}

template <class T>
LossValue<T> compute_loss(const std::vector<Tensor<T>>& logits, const Target& target, const ParameterSpace& space,
                          LossMode mode) {
  const auto& free = space.free_indices();
  if (logits.size() != free.size() || target.classes.size() != free.size())
    throw ShapeError("loss: logits, targets and free parameters disagree in count");
  LossValue<T> out;
  const T scale = T(1) / static_cast<T>(free.size());
  for (std::size_t i = 0; i < free.size(); ++i) {
    const int K = space.descriptor(free[i]).class_count;
    if (logits[i].size() != static_cast<std::size_t>(K)) throw ShapeError("loss: head size does not match K");
    nn::LossGrad<T> lg;
    if (mode == LossMode::cross_entropy) {
      lg = nn::cross_entropy<T>(logits[i].span(), target.dists[i]);
    } else {
      std::vector<double> values(static_cast<std::size_t>(K));
      for (int c = 0; c < K; ++c) values[static_cast<std::size_t>(c)] = K > 1 ? c / static_cast<double>(K - 1) : 0.0;
      const double y = K > 1 ? target.classes[i] / static_cast<double>(K - 1) : 0.0;
      lg = nn::expected_value_mse<T>(logits[i].span(), values, y);
    }
    const T w = static_cast<T>(target.weights[i]) * scale;
    out.loss += w * lg.loss;
    const std::size_t n = lg.grad.size();
    Tensor<T> g({n}, std::move(lg.grad));
    for (auto& v : g.data) v *= w;
    out.grad.push_back(std::move(g));
  }
  return out;
}

template LossValue<float> compute_loss<float>(const std::vector<Tensor<float>>&, const Target&,
                                              const ParameterSpace&, LossMode);
template LossValue<double> compute_loss<double>(const std::vector<Tensor<double>>&, const Target&,
                                                const ParameterSpace&, LossMode);

// ---------------------------------------------------------------------------
// Training

namespace {

using Snapshot = std::vector<std::vector<float>>;

Snapshot take_snapshot(const nn::ParamList<float>& params) {
  Snapshot s;
  s.reserve(params.size());
  for (auto* p : params) s.push_back(p->value.data);
  return s;
}

void restore_snapshot(const nn::ParamList<float>& params, const Snapshot& s) {
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value.data = s[i];
}

std::size_t argmax(const Tensor<float>& t) {
  return static_cast<std::size_t>(std::max_element(t.data.begin(), t.data.end()) - t.data.begin());
}

}  // namespace

std::pair<double, double> evaluate_examples(Model<float>& model, const std::vector<Example>& set, LossMode mode) {
  if (set.empty()) return {0.0, 0.0};
  double loss = 0.0, correct = 0.0, total = 0.0;
  for (const auto& ex : set) {
    const auto logits = model.forward(ex.input);
    loss += compute_loss(logits, ex.target, *model.space(), mode).loss;
    for (std::size_t i = 0; i < logits.size(); ++i) {
      correct += argmax(logits[i]) == static_cast<std::size_t>(ex.target.classes[i]) ? 1.0 : 0.0;
      total += 1.0;
    }
  }
  return {loss / static_cast<double>(set.size()), correct / total};
}

TrainHistory train(Model<float>& model, const std::vector<Example>& train_set, const std::vector<Example>& val_set,
                   const TrainConfig& cfg, std::uint64_t seed, const EpochCallback& on_epoch) {
  if (train_set.empty()) throw UserError("training set is empty");
  if (cfg.epochs == 0 || cfg.batch_size == 0) throw UserError("epochs and batch_size must be >= 1");
  const auto params = model.params();
  nn::AdamW<float> opt(params, nn::AdamWConfig{0.9, 0.999, 1e-8, cfg.weight_decay});
  const std::size_t n = train_set.size();
  const std::size_t steps_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
  const auto total_steps = static_cast<std::int64_t>(steps_per_epoch * cfg.epochs);
  const auto warmup_steps = static_cast<std::int64_t>(steps_per_epoch * cfg.warmup_epochs);

  std::mt19937_64 rng(seed ^ 0x5eed5eed5eedULL);
  std::normal_distribution<float> noise(0.0f, static_cast<float>(cfg.input_noise));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainHistory history;
  double best_val = std::numeric_limits<double>::infinity();
  Snapshot best = take_snapshot(params);
  std::deque<Snapshot> tail;
  std::size_t bad_epochs = 0;
  std::int64_t step = 0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    double last_lr = 0.0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t stop = std::min(n, start + cfg.batch_size);
      nn::zero_grads(params);
      for (std::size_t k = start; k < stop; ++k) {
        const Example& ex = train_set[order[k]];
        const ModelInput<float>* input = &ex.input;
        ModelInput<float> noisy;
        if (cfg.input_noise > 0.0) {
          noisy = ex.input;
          for (Modality m : kAllModalities) {
            if (!model.config().enabled(m)) continue;
            for (auto& v : noisy.get(m)) v += noise(rng);
          }
          input = &noisy;
        }
        const auto logits = model.forward(*input);
        const auto lv = compute_loss(logits, ex.target, *model.space(), cfg.loss.mode);
        loss_sum += lv.loss;
        model.backward(lv.grad);
      }
      nn::scale_grads(params, 1.0f / static_cast<float>(stop - start));
      if (cfg.grad_clip > 0.0) nn::clip_grad_norm(params, cfg.grad_clip);
      last_lr = nn::warmup_cosine_lr(step, total_steps, warmup_steps, cfg.peak_lr);
      opt.step(last_lr);
      ++step;
    }
    EpochStats st;
    st.epoch = epoch;
    st.train_loss = loss_sum / static_cast<double>(n);
    st.lr = last_lr;
    if (val_set.empty()) {
      st.val_loss = st.train_loss;
    } else {
      const auto [vl, acc] = evaluate_examples(model, val_set, cfg.loss.mode);
      st.val_loss = vl;
      st.val_accuracy = acc;
    }
    history.epochs.push_back(st);
    if (on_epoch) on_epoch(st);

    if (cfg.swa_last > 0) {
      tail.push_back(take_snapshot(params));
      if (tail.size() > cfg.swa_last) tail.pop_front();
    }
    if (st.val_loss < best_val) {
      best_val = st.val_loss;
      best = take_snapshot(params);
      history.best_epoch = epoch;
      bad_epochs = 0;
    } else if (cfg.patience > 0 && ++bad_epochs >= cfg.patience) {
      history.stopped_early = true;
      break;
    }
  }
  history.steps = step;
  history.adam_m = opt.first_moments();
  history.adam_v = opt.second_moments();

  if (cfg.swa_last > 0 && !tail.empty()) {
    Snapshot avg = tail.front();
    for (auto& v : avg) std::fill(v.begin(), v.end(), 0.0f);
    for (const auto& s : tail)
      for (std::size_t i = 0; i < s.size(); ++i)
        for (std::size_t k = 0; k < s[i].size(); ++k) avg[i][k] += s[i][k];
    for (auto& v : avg)
      for (auto& x : v) x /= static_cast<float>(tail.size());
    restore_snapshot(params, avg);
  } else {
    restore_snapshot(params, best);
  }
  return history;
}

Preset predict_preset(Model<float>& model, const ModelInput<float>& normalized_input) {
  const auto logits = model.forward(normalized_input);
  Preset p = Preset::defaults(model.space());
  const auto& free = model.space()->free_indices();
  for (std::size_t i = 0; i < free.size(); ++i) p.set(free[i], static_cast<int>(argmax(logits[i])));
  p.validate();
  return p;
}

// ---------------------------------------------------------------------------
// Estimator

Preset Estimator::estimate(const AudioBuffer& audio) {
  if (!model) throw Error("estimator has no model");
  if (audio.sample_rate != features.sample_rate)
    throw UserError("audio sample rate " + std::to_string(audio.sample_rate) + " differs from the model's " +
                    std::to_string(features.sample_rate));
  AudioBuffer fitted = audio;
  fitted.samples.resize(note.num_samples(features.sample_rate), 0.0);
  FeatureExtractor ex(features);
  ModelInput<float> input = to_model_input(ex(fitted), features, model->shapes());
  normalizer.apply(input);
  return predict_preset(*model, input);
}

void Estimator::save(const std::filesystem::path& dir) const {
  if (!model) throw Error("estimator has no model");
  std::filesystem::create_directories(dir);
  ArrayArchive ar;
  const auto params = model->params();
  const bool moments = history.adam_m.size() == params.size() && history.adam_v.size() == params.size();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto* p = params[i];
    std::vector<std::uint64_t> shape(p->value.shape.begin(), p->value.shape.end());
    ar.put("param/" + p->name, shape, p->value.data);
    if (moments) {
      ar.put("adam/m/" + p->name, shape, history.adam_m[i]);
      ar.put("adam/v/" + p->name, shape, history.adam_v[i]);
    }
  }
  for (Modality m : kAllModalities) {
    const auto& st = normalizer.stats(m);
    const std::vector<std::uint64_t> shape{st.mean.size()};
    ar.put("norm/" + modality_name(m) + "/mean", shape, st.mean);
    ar.put("norm/" + modality_name(m) + "/std", shape, st.stdev);
  }
  ar.save(dir / "model.smar");

  jsonio::json j = {{"format_version", 1},
                    {"space", model->space()->id()},
                    {"seed", seed},
                    {"config_hash", config_hash},
                    {"note", jsonio::to_json(note)},
                    {"features", jsonio::to_json(features)},
                    {"model", jsonio::to_json(model_cfg)},
                    {"train", jsonio::to_json(train_cfg)},
                    {"shapes", jsonio::to_json(model->shapes())},
                    {"parameters", const_cast<Model<float>&>(*model).parameter_count()},
                    {"history", jsonio::to_json(history)},
                    {"training_state",
                     {{"step", history.steps},
                      {"rng_seed", seed},
                      {"arrays", "model.smar"},
                      {"optimizer_moments", moments ? "model.smar:adam/m/*,adam/v/*" : ""}}}};
  write_text_file(dir / "model.json", j.dump(2) + "\n");
}

Estimator Estimator::load(const std::filesystem::path& dir) {
  const auto j = jsonio::parse(read_text_file(dir / "model.json"), (dir / "model.json").string());
  Estimator e;
  try {
    if (j.at("format_version").get<int>() != 1) throw UserError("unsupported model format version");
    e.seed = j.at("seed").get<std::uint64_t>();
    e.config_hash = j.at("config_hash").get<std::string>();
    e.note = jsonio::note_from_json(j.at("note"), "model.note");
    e.features = jsonio::features_from_json(j.at("features"), "model.features");
    e.model_cfg = jsonio::model_from_json(j.at("model"), "model.model");
    e.train_cfg = jsonio::train_from_json(j.at("train"), "model.train");
    e.history = jsonio::history_from_json(j.at("history"), "model.history");
    const auto shapes = jsonio::shapes_from_json(j.at("shapes"), "model.shapes");
    e.model = std::make_unique<Model<float>>(e.model_cfg, shapes, make_space(j.at("space").get<std::string>()), e.seed);
  } catch (const jsonio::json::exception& ex) {
    throw UserError((dir / "model.json").string() + ": " + ex.what());
  }
  const auto ar = ArrayArchive::load(dir / "model.smar");
  for (auto* p : e.model->params()) {
    const std::string key = "param/" + p->name;
    if (!ar.contains(key)) throw UserError("checkpoint is missing parameter " + p->name);
    const auto values = ar.get(key).as_double();
    if (values.size() != p->value.size()) throw ShapeError("checkpoint parameter " + p->name + " has the wrong size");
    std::copy(values.begin(), values.end(), p->value.data.begin());
    if (ar.contains("adam/m/" + p->name) && ar.contains("adam/v/" + p->name)) {
      const auto m = ar.get("adam/m/" + p->name).as_double();
      const auto v = ar.get("adam/v/" + p->name).as_double();
      e.history.adam_m.emplace_back(m.begin(), m.end());
      e.history.adam_v.emplace_back(v.begin(), v.end());
    }
  }
  for (Modality m : kAllModalities) {
    auto& st = e.normalizer.stats(m);
    st.mean = ar.get("norm/" + modality_name(m) + "/mean").as_double();
    st.stdev = ar.get("norm/" + modality_name(m) + "/std").as_double();
  }
  return e;
}

}  // namespace synthmatch
