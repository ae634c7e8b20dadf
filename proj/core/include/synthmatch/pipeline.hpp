#pragma once

// Dataset directory -> normalized model inputs -> trained estimator, and the
// held-out evaluation used by `train` and the acceptance experiment.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "synthmatch/dataset.hpp"
#include "synthmatch/estimator.hpp"
#include "synthmatch/features.hpp"

namespace synthmatch {

struct PreparedSplit {
  std::vector<std::string> ids;
  std::vector<Preset> presets;
  std::vector<std::vector<double>> weights;  // raw, free_indices order; empty if absent
  std::vector<ModelInput<float>> inputs;     // normalized
};

struct PreparedDataset {
  std::filesystem::path dir;
  DatasetManifest manifest;
  SpacePtr space;
  FeatureConfig features;
  InputShapes shapes;
  Normalizer normalizer;
  PreparedSplit train, val;
};

/// Extracts features for the train and val splits and fits the normalizer
/// on train.
PreparedDataset prepare_dataset(const std::filesystem::path& dir, const FeatureConfig& features,
                                const ProgressCallback& progress = {});

std::vector<Example> make_examples(const PreparedSplit& split, const LossConfig& loss, bool use_weights);

Estimator train_estimator(const PreparedDataset& data, const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                          std::uint64_t seed, const std::string& config_hash, const EpochCallback& on_epoch = {});

struct TestEvaluation {
  std::vector<std::string> ids;
  std::vector<double> estimated;  // MFCCD(target, render(estimate))
  std::vector<double> random;     // MFCCD(target, render(uniform random preset))
  double median_estimated = 0.0;
  double median_random = 0.0;
};

/// Scores the test split. Renders are rounded to float32 like the stored
/// targets.
TestEvaluation evaluate_test_split(Estimator& est, const std::filesystem::path& dir, std::uint64_t seed);

double median(std::vector<double> values);

}  // namespace synthmatch
