#pragma once

// Black-box MFCCD minimization against the synth: random-restart hill
// climbing and a generational genetic algorithm.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "synthmatch/dsp.hpp"
#include "synthmatch/synth.hpp"

namespace synthmatch {

struct SearchBudget {
  std::size_t max_evaluations = 1000;
  std::uint64_t seed = 0;
  std::optional<double> early_stop;  // stop once best MFCCD <= this
};

struct TraceEntry {
  std::size_t step = 0;  // 1-based render count
  std::string candidate;
  double mfccd = 0.0;
  double best_mfccd = 0.0;
};

struct SearchTrace {
  std::vector<TraceEntry> entries;
  /// Columns step,mfccd,best_mfccd.
  std::string to_csv() const;
};

struct SearchResult {
  Preset best;
  double best_mfccd = 0.0;
  SearchTrace trace;
  std::size_t cache_hits = 0;
  std::size_t restarts = 0;
  std::size_t generations = 0;
};

struct HillClimbConfig {
  std::size_t patience = 30;  // proposals without improvement before a restart
};

struct GaConfig {
  std::size_t population = 32;
  std::size_t tournament = 3;
  double crossover_rate = 0.9;
  double mutation_rate = 0.0;  // per gene; 0 means 1 / number of free parameters
  double step_probability = 0.5;  // a mutation is a +-1 step with this probability, else a resample
  std::size_t elitism = 2;

  void validate() const;
};

SearchResult hill_climb(const AudioBuffer& target, const SpacePtr& space, const MidiNote& note,
                        const SearchBudget& budget, const HillClimbConfig& cfg = {},
                        const dsp::MfccConfig& mfcc_cfg = {});

/// `initial` seeds the first generation; missing members are random.
SearchResult genetic_search(const AudioBuffer& target, const SpacePtr& space, const MidiNote& note,
                            const SearchBudget& budget, const GaConfig& cfg = {},
                            const std::vector<Preset>& initial = {}, const dsp::MfccConfig& mfcc_cfg = {});

}  // namespace synthmatch
