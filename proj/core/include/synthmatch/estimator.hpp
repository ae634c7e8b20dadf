#pragma once

// Multi-modal preset estimator: one backbone per feature modality, a shared
// trunk, a block-diagonal split into per-operator groups and one classifier
// head per free parameter.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "synthmatch/features.hpp"
#include "synthmatch/nn/layers.hpp"
#include "synthmatch/nn/optim.hpp"
#include "synthmatch/synth.hpp"

namespace synthmatch {

struct PdcConfig {
  bool enabled = true;
  int num_primes = 4;
  bool symmetric = true;
  bool per_channel = false;
};

struct ModelConfig {
  std::map<std::string, bool> modalities{{"stft", true}, {"mel", true},   {"cqt", true},
                                         {"mfcc", true}, {"stats", true}, {"wave", false}};
  std::size_t conv1_channels = 8;
  std::size_t conv2_channels = 16;
  std::size_t conv_dim = 64;      // stft, mel, cqt backbone outputs
  std::size_t seq_dim = 32;       // mfcc and wave recurrent state
  std::size_t stats_track_dim = 8;
  std::size_t group_hidden = 64;
  std::size_t head_hidden = 32;
  PdcConfig pdc{};

  bool enabled(Modality m) const;
  void validate() const;
  /// Desk-scale defaults, or the larger "large" profile.
  static ModelConfig profile(const std::string& name);
};

template <class T>
class Model {
 public:
  Model(const ModelConfig& cfg, const InputShapes& shapes, SpacePtr space, std::uint64_t seed);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  /// One logit vector per free parameter, in ParameterSpace::free_indices order.
  std::vector<nn::Tensor<T>> forward(const ModelInput<T>& input);
  /// Accumulates parameter gradients for the last forward() call.
  void backward(const std::vector<nn::Tensor<T>>& grad_logits);

  nn::ParamList<T> params();
  std::size_t parameter_count();
  std::size_t global_dim() const { return global_dim_; }
  const std::vector<int>& groups() const { return groups_; }
  /// Group position (into groups()) of each head.
  const std::vector<std::size_t>& head_groups() const { return head_group_; }
  /// Local (per-group) features of the last forward pass, and their
  /// gradient from the last backward pass.
  const nn::Tensor<T>& local_features() const { return local_; }
  const nn::Tensor<T>& local_features_grad() const { return local_grad_; }
  const ModelConfig& config() const { return cfg_; }
  const InputShapes& shapes() const { return shapes_; }
  const SpacePtr& space() const { return space_; }

 private:
  struct Branch {
    Modality modality;
    std::unique_ptr<nn::Sequential<T>> net;                 // stft, mel, cqt, mfcc, wave
    std::vector<std::unique_ptr<nn::Sequential<T>>> tracks;  // stats
    std::size_t out_dim = 0;
    std::size_t offset = 0;
  };

  std::unique_ptr<nn::Sequential<T>> conv_branch(const std::string& name, std::size_t bins, std::size_t frames,
                                                 bool cqt, nn::Rng& rng);

  ModelConfig cfg_;
  InputShapes shapes_;
  SpacePtr space_;
  std::vector<Branch> branches_;
  std::size_t global_dim_ = 0;
  std::vector<int> groups_;
  std::vector<std::size_t> head_group_;
  std::unique_ptr<nn::Dense<T>> trunk_;
  nn::Relu<T> trunk_act_;
  std::unique_ptr<nn::MaskedDense<T>> split_;
  nn::Relu<T> split_act_;
  std::vector<std::unique_ptr<nn::Sequential<T>>> heads_;
  nn::Tensor<T> local_, local_grad_;
};

extern template class Model<float>;
extern template class Model<double>;

/// Gaussian over class indices with standard deviation sigma0 (that is,
/// sigma0 / K of the unit range), truncated to [0, K) and renormalized.
/// sigma0 == 0 gives a one-hot vector.
std::vector<double> label_smooth(int class_index, int class_count, double sigma0);

/// Importance of each free parameter of `preset`, in free_indices order:
/// the mean over +-1 class perturbations (one-sided at the range ends) of
/// MFCCD(render(perturbed), render(preset)) divided by the squared
/// parameter change in unit range, (1 / (K - 1))^2 per class step.
std::vector<double> gradient_weights(const Preset& preset, const MidiNote& note, int sample_rate,
                                     const dsp::MfccConfig& mfcc_cfg = {});

/// Scales weights to mean 1. All-zero weights stay zero.
std::vector<double> normalize_weights(std::vector<double> weights);

enum class LossMode { cross_entropy, mse };

struct LossConfig {
  LossMode mode = LossMode::cross_entropy;
  double sigma0 = 1.0;
  bool smooth_categorical = false;
};

/// Per-example training target.
struct Target {
  std::vector<int> classes;                // free parameters, free_indices order
  std::vector<std::vector<double>> dists;  // smoothed class distributions
  std::vector<double> weights;             // per free parameter
};

Target make_target(const Preset& preset, const LossConfig& cfg, const std::vector<double>& weights);

template <class T>
struct LossValue {
  T loss = T(0);
  std::vector<nn::Tensor<T>> grad;
};

/// Mean over free parameters of weight_i * loss_i. Cross-entropy uses the
/// smoothed distributions; mse compares the softmax-expected unit value
/// against the true unit value.
template <class T>
LossValue<T> compute_loss(const std::vector<nn::Tensor<T>>& logits, const Target& target,
                          const ParameterSpace& space, LossMode mode);

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  double peak_lr = 1e-3;
  std::size_t warmup_epochs = 2;
  double weight_decay = 1e-4;
  double grad_clip = 1.0;
  std::size_t patience = 8;
  double input_noise = 0.01;
  std::size_t swa_last = 0;  // average the last s epoch snapshots (0 = best snapshot)
  bool use_weights = true;
  LossConfig loss{};
};

struct Example {
  std::string id;
  ModelInput<float> input;  // normalized
  Target target;
};

struct EpochStats {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
  double lr = 0.0;
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
  std::size_t best_epoch = 0;
  std::int64_t steps = 0;
  bool stopped_early = false;
  // Optimizer moments at the end of training, aligned with Model::params().
  std::vector<std::vector<float>> adam_m, adam_v;
};

using EpochCallback = std::function<void(const EpochStats&)>;

/// Seeded, single-threaded and bit-reproducible. Leaves the model at the
/// best validation snapshot (or the tail average when swa_last > 0).
TrainHistory train(Model<float>& model, const std::vector<Example>& train_set, const std::vector<Example>& val_set,
                   const TrainConfig& cfg, std::uint64_t seed, const EpochCallback& on_epoch = {});

/// Mean loss and mean top-1 parameter accuracy, without noise.
std::pair<double, double> evaluate_examples(Model<float>& model, const std::vector<Example>& set, LossMode mode);

/// Argmax class per free parameter, fixed parameters from the space.
Preset predict_preset(Model<float>& model, const ModelInput<float>& normalized_input);

/// A trained model plus everything needed to run it on new audio.
struct Estimator {
  FeatureConfig features;
  ModelConfig model_cfg;
  TrainConfig train_cfg;
  MidiNote note;
  Normalizer normalizer;
  std::unique_ptr<Model<float>> model;
  TrainHistory history;
  std::uint64_t seed = 0;
  std::string config_hash;

  Preset estimate(const AudioBuffer& audio);
  /// Writes model.smar (parameters, normalization) and model.json.
  void save(const std::filesystem::path& dir) const;
  static Estimator load(const std::filesystem::path& dir);
};

}  // namespace synthmatch
