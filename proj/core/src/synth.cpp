#include "synthmatch/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include "synthmatch/error.hpp"

namespace synthmatch {

namespace {

constexpr const char* kOperatorParams[] = {"ratio_coarse", "ratio_fine", "detune",  "output_level",
                                           "attack",       "decay",      "sustain", "release"};

std::string op_param(int op, std::string_view what) {
  std::ostringstream os;
  os << "op" << (op + 1) << '.' << what;
  return os.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// MidiNote

void MidiNote::validate() const {
  if (pitch < 0 || pitch > 127) throw UserError("note pitch must be in 0..127, got " + std::to_string(pitch));
  if (velocity < 1 || velocity > 127)
    throw UserError("note velocity must be in 1..127, got " + std::to_string(velocity));
  if (!(sustain_beats > 0.0) || !(total_beats > 0.0) || !(tempo_bpm > 0.0))
    throw UserError("note beats and tempo must be positive");
  if (sustain_beats > total_beats) throw UserError("note sustain_beats exceeds total_beats");
}

double MidiNote::frequency_hz() const { return 440.0 * std::exp2((pitch - 69) / 12.0); }

std::size_t MidiNote::num_samples(int sample_rate) const {
  return static_cast<std::size_t>(std::floor(total_beats * (60.0 / tempo_bpm) * sample_rate));
}

// ---------------------------------------------------------------------------
// ParameterDescriptor / ParameterSpace

double ParameterDescriptor::decode(int class_index) const {
  const bool as_unit = kind == ParamKind::continuous || (kind == ParamKind::fixed && unit_valued);
  if (!as_unit) return static_cast<double>(class_index);
  if (class_count <= 1) return 0.0;
  return static_cast<double>(class_index) / static_cast<double>(class_count - 1);
}

ParameterSpace::ParameterSpace(std::string id, int algorithm_id, int num_operators,
                               std::vector<ParameterDescriptor> descriptors)
    : id_(std::move(id)),
      algorithm_id_(algorithm_id),
      num_operators_(num_operators),
      descriptors_(std::move(descriptors)) {
  if (num_operators_ < 1) throw UserError("parameter space needs at least one operator");
  for (std::size_t i = 0; i < descriptors_.size(); ++i) {
    const auto& d = descriptors_[i];
    if (d.class_count < 1) throw UserError("descriptor " + d.name + " has no classes");
    if (d.group != kGlobalGroup && (d.group < 0 || d.group >= num_operators_))
      throw UserError("descriptor " + d.name + " names a missing operator group");
    if (d.kind == ParamKind::fixed) {
      if (!d.fixed_value) throw UserError("fixed descriptor " + d.name + " has no fixed value");
      if (*d.fixed_value < 0 || *d.fixed_value >= d.class_count)
        throw UserError("fixed descriptor " + d.name + " has out-of-range value");
    } else {
      free_.push_back(i);
    }
    if (!by_name_.emplace(d.name, i).second) throw UserError("duplicate descriptor name " + d.name);
  }
}

std::optional<std::size_t> ParameterSpace::index_of(std::string_view name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) return std::nullopt;
  return it->second;
}

std::size_t ParameterSpace::require_index(std::string_view name) const {
  auto idx = index_of(name);
  if (!idx) throw UserError("space " + id_ + " has no parameter named " + std::string(name));
  return *idx;
}

std::vector<int> ParameterSpace::free_groups() const {
  std::set<int> groups;
  for (auto i : free_) groups.insert(descriptors_[i].group);
  return {groups.begin(), groups.end()};
}

ParameterSpace ParameterSpace::with_fixed(std::string new_id, const std::map<std::string, int>& fixes) const {
  auto descriptors = descriptors_;
  for (const auto& [name, value] : fixes) {
    auto& d = descriptors.at(require_index(name));
    if (value < 0 || value >= d.class_count)
      throw UserError("fixed value for " + name + " is out of range");
    if (d.kind != ParamKind::fixed) d.unit_valued = d.kind == ParamKind::continuous;
    d.kind = ParamKind::fixed;
    d.fixed_value = value;
  }
  return ParameterSpace(std::move(new_id), algorithm_id_, num_operators_, std::move(descriptors));
}

ParameterSpace make_full_space(std::string id, int algorithm_id, int class_count) {
  const ModRouting routing = algorithm_topology(algorithm_id);
  std::vector<ParameterDescriptor> ds;
  for (int op = 0; op < routing.num_operators; ++op) {
    for (const char* what : kOperatorParams) {
      ParameterDescriptor d;
      d.name = op_param(op, what);
      d.group = op;
      if (std::string_view(what) == "ratio_coarse") {
        d.kind = ParamKind::categorical;
        d.class_count = kRatioCoarseClasses;
        d.unit_valued = false;
      } else {
        d.kind = ParamKind::continuous;
        d.class_count = class_count;
      }
      ds.push_back(std::move(d));
    }
  }
  ds.push_back({"feedback", ParamKind::continuous, class_count, kGlobalGroup, std::nullopt, true});
  ds.push_back({"algorithm", ParamKind::fixed, kNumAlgorithms + 1, kGlobalGroup, algorithm_id, false});
  ds.push_back({"output", ParamKind::fixed, class_count, kGlobalGroup, class_count - 1, true});
  return ParameterSpace(std::move(id), algorithm_id, routing.num_operators, std::move(ds));
}

SpacePtr make_space(std::string_view id) {
  if (id == "fm6-stack") return std::make_shared<ParameterSpace>(make_full_space("fm6-stack", 1));
  if (id == "fm6-pairs") return std::make_shared<ParameterSpace>(make_full_space("fm6-pairs", 2));
  if (id == "fm6-additive") return std::make_shared<ParameterSpace>(make_full_space("fm6-additive", 3));
  if (id == "pair2") return std::make_shared<ParameterSpace>(make_full_space("pair2", 4));
  if (id == "additive2") return std::make_shared<ParameterSpace>(make_full_space("additive2", 5));
  if (id == "toy2") {
    // Two-operator pair with tuning pinned: carrier at ratio 1, no fine
    // ratio, detune at the centre class, no feedback. Eleven free parameters.
    const int centre = (kDefaultClassCount - 1) / 2;
    auto full = make_full_space("pair2", 4);
    return std::make_shared<ParameterSpace>(full.with_fixed("toy2", {{"op1.ratio_coarse", 1},
                                                                     {"op1.ratio_fine", 0},
                                                                     {"op2.ratio_fine", 0},
                                                                     {"op1.detune", centre},
                                                                     {"op2.detune", centre},
                                                                     {"feedback", 0}}));
  }
  throw UserError("unknown parameter space '" + std::string(id) + "'");
}

std::vector<std::string> known_space_ids() {
  return {"fm6-stack", "fm6-pairs", "fm6-additive", "pair2", "additive2", "toy2"};
}

// ---------------------------------------------------------------------------
// Preset

Preset::Preset(SpacePtr space, std::vector<int> classes, std::optional<std::string> theme)
    : space_(std::move(space)), classes_(std::move(classes)), theme_(std::move(theme)) {
  if (!space_) throw UserError("preset has no parameter space");
  validate();
}

Preset Preset::defaults(SpacePtr space) {
  std::vector<int> classes(space->size(), 0);
  for (std::size_t i = 0; i < space->size(); ++i)
    if (auto fv = space->descriptor(i).fixed_value; fv && !space->descriptor(i).is_free()) classes[i] = *fv;
  return Preset(std::move(space), std::move(classes));
}

int Preset::at(std::string_view name) const { return classes_.at(space_->require_index(name)); }

void Preset::set(std::size_t i, int class_index) {
  const auto& d = space_->descriptor(i);
  if (class_index < 0 || class_index >= d.class_count)
    throw UserError("class " + std::to_string(class_index) + " out of range for " + d.name);
  if (!d.is_free() && class_index != *d.fixed_value) throw UserError("cannot change fixed parameter " + d.name);
  classes_[i] = class_index;
}

void Preset::set(std::string_view name, int class_index) { set(space_->require_index(name), class_index); }

void Preset::validate() const {
  if (classes_.size() != space_->size())
    throw UserError("preset has " + std::to_string(classes_.size()) + " classes but space " + space_->id() +
                    " has " + std::to_string(space_->size()) + " descriptors");
  for (std::size_t i = 0; i < classes_.size(); ++i) {
    const auto& d = space_->descriptor(i);
    if (classes_[i] < 0 || classes_[i] >= d.class_count)
      throw UserError("class " + std::to_string(classes_[i]) + " out of range for " + d.name);
    if (!d.is_free() && classes_[i] != *d.fixed_value)
      throw UserError("fixed parameter " + d.name + " must hold " + std::to_string(*d.fixed_value));
  }
}

bool operator==(const Preset& a, const Preset& b) {
  const bool same_space = a.space_ == b.space_ || (a.space_ && b.space_ && a.space_->id() == b.space_->id());
  return same_space && a.classes_ == b.classes_ && a.theme_ == b.theme_;
}

DecodedParams::DecodedParams(SpacePtr space, std::vector<double> values)
    : space_(std::move(space)), values_(std::move(values)) {}

double DecodedParams::get(std::string_view name, double fallback) const {
  auto idx = space_->index_of(name);
  return idx ? values_[*idx] : fallback;
}

std::map<std::string, double> DecodedParams::to_map() const {
  std::map<std::string, double> out;
  for (std::size_t i = 0; i < values_.size(); ++i) out[space_->descriptor(i).name] = values_[i];
  return out;
}

DecodedParams decode(const Preset& preset) {
  preset.validate();
  const auto& space = preset.space();
  std::vector<double> values(space.size());
  for (std::size_t i = 0; i < space.size(); ++i) values[i] = space.descriptor(i).decode(preset.at(i));
  return DecodedParams(preset.space_ptr(), std::move(values));
}

// ---------------------------------------------------------------------------
// Audio helpers

double rms(std::span<const double> samples) {
  if (samples.empty()) return 0.0;
  double acc = 0.0;
  for (double s : samples) acc += s * s;
  return std::sqrt(acc / static_cast<double>(samples.size()));
}

bool is_audible(const AudioBuffer& audio, double threshold) { return rms(audio.samples) >= threshold; }

// ---------------------------------------------------------------------------
// Topologies

bool ModRouting::is_carrier(int op) const { return std::find(carriers.begin(), carriers.end(), op) != carriers.end(); }

namespace {

ModRouting finish_routing(ModRouting r) {
  // Higher-numbered operators modulate lower-numbered ones throughout the
  // catalog, so descending index order is a valid topological order.
  r.order.clear();
  for (int op = r.num_operators - 1; op >= 0; --op) r.order.push_back(op);
  for (int op = 0; op < r.num_operators; ++op)
    for (int m : r.modulators[op])
      if (m <= op) throw Error("routing violates descending evaluation order");
  return r;
}

}  // namespace

ModRouting algorithm_topology(int algorithm_id) {
  ModRouting r;
  switch (algorithm_id) {
    case static_cast<int>(Algorithm::stack6):
      r.num_operators = 6;
      r.modulators.assign(6, {});
      for (int op = 0; op < 5; ++op) r.modulators[op] = {op + 1};
      r.carriers = {0};
      r.feedback_operator = 5;
      break;
    case static_cast<int>(Algorithm::pairs3):
      r.num_operators = 6;
      r.modulators.assign(6, {});
      r.modulators[0] = {1};
      r.modulators[2] = {3};
      r.modulators[4] = {5};
      r.carriers = {0, 2, 4};
      r.feedback_operator = 5;
      break;
    case static_cast<int>(Algorithm::additive6):
      r.num_operators = 6;
      r.modulators.assign(6, {});
      r.carriers = {0, 1, 2, 3, 4, 5};
      r.feedback_operator = 5;
      break;
    case static_cast<int>(Algorithm::pair2):
      r.num_operators = 2;
      r.modulators = {{1}, {}};
      r.carriers = {0};
      r.feedback_operator = 1;
      break;
    case static_cast<int>(Algorithm::additive2):
      r.num_operators = 2;
      r.modulators.assign(2, {});
      r.carriers = {0, 1};
      r.feedback_operator = 1;
      break;
    default:
      throw UserError("unsupported algorithm " + std::to_string(algorithm_id));
  }
  return finish_routing(std::move(r));
}

std::string algorithm_name(int algorithm_id) {
  switch (algorithm_id) {
    case 1: return "STACK6";
    case 2: return "PAIRS3";
    case 3: return "ADDITIVE6";
    case 4: return "PAIR2";
    case 5: return "ADDITIVE2";
    default: throw UserError("unsupported algorithm " + std::to_string(algorithm_id));
  }
}

// ---------------------------------------------------------------------------
// Engine curves

double level_to_amplitude(double level) {
  if (level <= 0.0) return 0.0;
  return std::exp2((level - 1.0) * EngineConstants::kLevelRangeOctaves);
}

double ratio_from_classes(int coarse_class, double fine) {
  const double coarse = coarse_class == 0 ? 0.5 : static_cast<double>(coarse_class);
  return coarse * (1.0 + fine);
}

double detune_factor(double detune) { return std::exp2((detune - 0.5) / 12.0); }

AdsrTimes adsr_from_unit(double attack, double decay, double sustain, double release) {
  return {0.002 + 1.998 * attack * attack, 0.005 + 2.995 * decay * decay, sustain,
          0.005 + 1.495 * release * release};
}

double envelope_at(const AdsrTimes& env, double t, double gate_off_s) {
  auto held = [&](double u) {
    if (u < env.attack_s) return u / env.attack_s;
    if (u < env.attack_s + env.decay_s) return 1.0 - (1.0 - env.sustain_level) * (u - env.attack_s) / env.decay_s;
    return env.sustain_level;
  };
  if (t < gate_off_s) return held(t);
  const double since = (t - gate_off_s) / env.release_s;
  if (since >= 1.0) return 0.0;
  return held(gate_off_s) * (1.0 - since);
}

// ---------------------------------------------------------------------------
// Rendering

AudioBuffer render(const Preset& preset, const MidiNote& note, int sample_rate) {
  if (sample_rate < 8000) throw UserError("sample rate must be at least 8000 Hz, got " + std::to_string(sample_rate));
  note.validate();
  const DecodedParams params = decode(preset);
  const ParameterSpace& space = preset.space();
  const ModRouting routing = algorithm_topology(space.algorithm_id());
  if (routing.num_operators != space.num_operators())
    throw UserError("space " + space.id() + " does not match algorithm " + algorithm_name(space.algorithm_id()));

  struct OpState {
    double increment = 0.0;  // cycles per sample
    double amplitude = 0.0;
    AdsrTimes env{};
    double phase = 0.0;
  };
  const int n_ops = routing.num_operators;
  std::vector<OpState> ops(static_cast<std::size_t>(n_ops));
  const double base_freq = note.frequency_hz();
  for (int op = 0; op < n_ops; ++op) {
    auto p = [&](std::string_view what, double fallback) { return params.get(op_param(op, what), fallback); };
    auto& s = ops[static_cast<std::size_t>(op)];
    const double freq = base_freq * ratio_from_classes(static_cast<int>(p("ratio_coarse", 1.0)), p("ratio_fine", 0.0)) *
                        detune_factor(p("detune", 0.5));
    s.increment = freq / sample_rate;
    s.amplitude = level_to_amplitude(p("output_level", 1.0));
    s.env = adsr_from_unit(p("attack", 0.0), p("decay", 0.0), p("sustain", 1.0), p("release", 0.0));
  }
  const double feedback = params.get("feedback", 0.0) * EngineConstants::kMaxFeedback;
  const double master = params.get("output", 1.0) * (note.velocity / 127.0);
  const double gate_off = note.sustain_seconds();
  const int fb_op = routing.feedback_operator;

  AudioBuffer out;
  out.sample_rate = sample_rate;
  const std::size_t n = note.num_samples(sample_rate);
  if (n == 0) throw UserError("note renders to zero samples");
  out.samples.assign(n, 0.0);

  constexpr double two_pi = 2.0 * std::numbers::pi;
  std::vector<double> y(static_cast<std::size_t>(n_ops), 0.0);
  double fb_hist1 = 0.0, fb_hist2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sample_rate;
    for (int op : routing.order) {
      auto& s = ops[static_cast<std::size_t>(op)];
      double value = 0.0;
      if (s.amplitude > 0.0) {
        const double env = envelope_at(s.env, t, gate_off);
        if (env > 0.0) {
          double offset = 0.0;
          for (int m : routing.modulators[static_cast<std::size_t>(op)]) offset += y[static_cast<std::size_t>(m)];
          offset *= EngineConstants::kMaxModIndex;
          if (op == fb_op && feedback > 0.0) offset += feedback * 0.5 * (fb_hist1 + fb_hist2);
          value = s.amplitude * env * std::sin(two_pi * s.phase + offset);
        }
      }
      y[static_cast<std::size_t>(op)] = value;
      s.phase += s.increment;
      s.phase -= std::floor(s.phase);
    }
    fb_hist2 = fb_hist1;
    fb_hist1 = y[static_cast<std::size_t>(fb_op)];
    double mix = 0.0;
    for (int c : routing.carriers) mix += y[static_cast<std::size_t>(c)];
    out.samples[i] = master * mix;
  }

  double peak = 0.0;
  for (double s : out.samples) peak = std::max(peak, std::abs(s));
  if (peak > 1.0) {
    const double scale = 1.0 / peak;
    for (double& s : out.samples) s *= scale;
  }
  return out;
}

}  // namespace synthmatch
