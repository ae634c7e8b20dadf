#pragma once

// Deterministic N-operator phase-modulation synthesizer and its discretized
// parameter space.
//
// Each operator is a sine oscillator running at
//   note_freq * ratio * detune
// whose phase is offset by the sum of its modulators' outputs (phase
// modulation, as in the DX7 family, rather than true frequency modulation).
// Carrier outputs are summed. Every operator carries a linear ADSR envelope
// gated by the note's sustain time.

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace synthmatch {

inline constexpr int kDefaultClassCount = 64;
inline constexpr int kRatioCoarseClasses = 32;
inline constexpr int kGlobalGroup = -1;

struct MidiNote {
  int pitch = 60;
  int velocity = 127;
  double sustain_beats = 4.0;
  double total_beats = 8.0;
  double tempo_bpm = 120.0;

  void validate() const;
  double frequency_hz() const;
  double sustain_seconds() const { return sustain_beats * 60.0 / tempo_bpm; }
  double total_seconds() const { return total_beats * 60.0 / tempo_bpm; }
  std::size_t num_samples(int sample_rate) const;

  friend bool operator==(const MidiNote&, const MidiNote&) = default;
};

enum class ParamKind { continuous, categorical, fixed };

struct ParameterDescriptor {
  std::string name;
  ParamKind kind = ParamKind::continuous;
  int class_count = kDefaultClassCount;
  int group = kGlobalGroup;  // zero-based operator index or kGlobalGroup
  std::optional<int> fixed_value;
  // How a fixed descriptor decodes: as a unit value or as a raw index.
  bool unit_valued = true;

  bool is_free() const { return kind != ParamKind::fixed; }
  double decode(int class_index) const;
};

class ParameterSpace {
 public:
  ParameterSpace(std::string id, int algorithm_id, int num_operators,
                 std::vector<ParameterDescriptor> descriptors);

  const std::string& id() const { return id_; }
  int algorithm_id() const { return algorithm_id_; }
  int num_operators() const { return num_operators_; }
  const std::vector<ParameterDescriptor>& descriptors() const { return descriptors_; }
  std::size_t size() const { return descriptors_.size(); }
  const ParameterDescriptor& descriptor(std::size_t i) const { return descriptors_.at(i); }

  std::optional<std::size_t> index_of(std::string_view name) const;
  std::size_t require_index(std::string_view name) const;

  /// Indices of non-fixed descriptors, in descriptor order.
  const std::vector<std::size_t>& free_indices() const { return free_; }

  /// Distinct groups that own at least one free descriptor, ascending with
  /// kGlobalGroup first.
  std::vector<int> free_groups() const;

  /// A copy of this space with the named descriptors turned into fixed ones.
  ParameterSpace with_fixed(std::string new_id, const std::map<std::string, int>& fixes) const;

 private:
  std::string id_;
  int algorithm_id_;
  int num_operators_;
  std::vector<ParameterDescriptor> descriptors_;
  std::vector<std::size_t> free_;
  std::map<std::string, std::size_t, std::less<>> by_name_;
};

using SpacePtr = std::shared_ptr<const ParameterSpace>;

/// Builds a full space for one of the catalog algorithms: per operator
/// ratio_coarse, ratio_fine, detune, output_level, attack, decay, sustain,
/// release; globally feedback, algorithm (fixed) and output (fixed at max).
ParameterSpace make_full_space(std::string id, int algorithm_id, int class_count = kDefaultClassCount);

/// Named spaces: "fm6-stack", "fm6-pairs", "fm6-additive", "pair2",
/// "additive2", "toy2". Throws UserError for unknown ids.
SpacePtr make_space(std::string_view id);
std::vector<std::string> known_space_ids();

class Preset {
 public:
  Preset() = default;
  Preset(SpacePtr space, std::vector<int> classes, std::optional<std::string> theme = std::nullopt);

  /// Every free descriptor at class 0, fixed descriptors at their value.
  static Preset defaults(SpacePtr space);

  const ParameterSpace& space() const { return *space_; }
  const SpacePtr& space_ptr() const { return space_; }
  const std::vector<int>& classes() const { return classes_; }
  int at(std::size_t i) const { return classes_.at(i); }
  int at(std::string_view name) const;
  void set(std::size_t i, int class_index);
  void set(std::string_view name, int class_index);
  const std::optional<std::string>& theme() const { return theme_; }
  void set_theme(std::optional<std::string> theme) { theme_ = std::move(theme); }

  /// Throws UserError when an index is out of range or a fixed value is wrong.
  void validate() const;

  friend bool operator==(const Preset& a, const Preset& b);

 private:
  SpacePtr space_;
  std::vector<int> classes_;
  std::optional<std::string> theme_;
};

/// Decoded parameter values aligned with the space's descriptors.
/// Continuous descriptors decode to class/(count-1); categorical ones to the
/// class index itself.
class DecodedParams {
 public:
  DecodedParams(SpacePtr space, std::vector<double> values);
  const std::vector<double>& values() const { return values_; }
  double get(std::string_view name, double fallback) const;
  std::map<std::string, double> to_map() const;

 private:
  SpacePtr space_;
  std::vector<double> values_;
};

DecodedParams decode(const Preset& preset);

struct AudioBuffer {
  std::vector<double> samples;
  int sample_rate = 16000;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  friend bool operator==(const AudioBuffer&, const AudioBuffer&) = default;
};

double rms(std::span<const double> samples);
bool is_audible(const AudioBuffer& audio, double threshold);

enum class Algorithm : int {
  stack6 = 1,     // op6 -> op5 -> ... -> op1, carrier op1
  pairs3 = 2,     // op2->op1, op4->op3, op6->op5, carriers op1 op3 op5
  additive6 = 3,  // six carriers, no modulation
  pair2 = 4,      // op2 -> op1, carrier op1
  additive2 = 5,  // two carriers
};
inline constexpr int kNumAlgorithms = 5;

struct ModRouting {
  int num_operators = 0;
  // modulators[i] lists the zero-based operators whose output offsets op i's phase.
  std::vector<std::vector<int>> modulators;
  std::vector<int> carriers;
  int feedback_operator = 0;
  // Evaluation order: every operator appears after all of its modulators.
  std::vector<int> order;

  bool is_carrier(int op) const;
};

/// Throws UserError("unsupported algorithm ...") for ids outside the catalog.
ModRouting algorithm_topology(int algorithm_id);
std::string algorithm_name(int algorithm_id);

struct EngineConstants {
  static constexpr double kMaxModIndex = 4.0 * 3.14159265358979323846;
  static constexpr double kMaxFeedback = 3.14159265358979323846;
  static constexpr double kLevelRangeOctaves = 8.0;  // 48 dB output level range
};

/// Output level curve: 0 maps to silence, 1 to unit amplitude, exponential between.
double level_to_amplitude(double level);
double ratio_from_classes(int coarse_class, double fine);
double detune_factor(double detune);

struct AdsrTimes {
  double attack_s;
  double decay_s;
  double sustain_level;
  double release_s;
};
AdsrTimes adsr_from_unit(double attack, double decay, double sustain, double release);
/// Envelope amplitude at time t for a gate that closes at gate_off_s.
double envelope_at(const AdsrTimes& env, double t, double gate_off_s);

/// f : presets x notes -> audio. Pure and bit-reproducible.
AudioBuffer render(const Preset& preset, const MidiNote& note, int sample_rate = 16000);

}  // namespace synthmatch
