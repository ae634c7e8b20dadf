#include "json_io.hpp"

#include <algorithm>

namespace synthmatch::jsonio {

void require_object(const json& j, const std::string& where) {
  if (!j.is_object()) throw UserError(where + ": expected a JSON object");
}

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  require_object(j, where);
  for (const auto& [key, value] : j.items()) {
    (void)value;
    const bool known = std::any_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; });
    if (!known) throw UserError(where + ": unknown key '" + key + "'");
  }
}

json parse(const std::string& text, const std::string& where) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw UserError(where + ": invalid JSON: " + e.what());
  }
}

json to_json(const MidiNote& n) {
  return {{"pitch", n.pitch},
          {"velocity", n.velocity},
          {"sustain_beats", n.sustain_beats},
          {"total_beats", n.total_beats},
          {"tempo_bpm", n.tempo_bpm}};
}

MidiNote note_from_json(const json& j, const std::string& w) {
  check_keys(j, w, {"pitch", "velocity", "sustain_beats", "total_beats", "tempo_bpm"});
  MidiNote n;
  read_opt(j, "pitch", n.pitch, w);
  read_opt(j, "velocity", n.velocity, w);
  read_opt(j, "sustain_beats", n.sustain_beats, w);
  read_opt(j, "total_beats", n.total_beats, w);
  read_opt(j, "tempo_bpm", n.tempo_bpm, w);
  n.validate();
  return n;
}

json to_json(const dsp::MelConfig& c) {
  return {{"bands", c.bands}, {"window", c.window}, {"hop", c.hop}, {"f_min", c.f_min}, {"f_max", c.f_max}};
}

dsp::MelConfig mel_from_json(const json& j, const std::string& w) {
  check_keys(j, w, {"bands", "window", "hop", "f_min", "f_max"});
  dsp::MelConfig c;
  read_opt(j, "bands", c.bands, w);
  read_opt(j, "window", c.window, w);
  read_opt(j, "hop", c.hop, w);
  read_opt(j, "f_min", c.f_min, w);
  read_opt(j, "f_max", c.f_max, w);
  return c;
}

json to_json(const dsp::CqtConfig& c) {
  return {{"f_min", c.f_min},
          {"bins_per_octave", c.bins_per_octave},
          {"num_octaves", c.num_octaves},
          {"hop", c.hop}};
}

dsp::CqtConfig cqt_from_json(const json& j, const std::string& w) {
  check_keys(j, w, {"f_min", "bins_per_octave", "num_octaves", "hop"});
  dsp::CqtConfig c;
  read_opt(j, "f_min", c.f_min, w);
  read_opt(j, "bins_per_octave", c.bins_per_octave, w);
  read_opt(j, "num_octaves", c.num_octaves, w);
  read_opt(j, "hop", c.hop, w);
  return c;
}

json to_json(const dsp::MfccConfig& c) {
  return {{"n_mfcc", c.n_mfcc}, {"mel", to_json(c.mel)}, {"log_floor", c.log_floor}};
}

dsp::MfccConfig mfcc_from_json(const json& j, const std::string& w) {
  check_keys(j, w, {"n_mfcc", "mel", "log_floor"});
  dsp::MfccConfig c;
  read_opt(j, "n_mfcc", c.n_mfcc, w);
  if (j.contains("mel")) c.mel = mel_from_json(j["mel"], w + ".mel");
  read_opt(j, "log_floor", c.log_floor, w);
  return c;
}

json to_json(const FeatureConfig& c) {
  return {{"sample_rate", c.sample_rate},
          {"stft_window", c.stft_window},
          {"stft_hop", c.stft_hop},
          {"stft_pool", c.stft_pool},
          {"mel", to_json(c.mel)},
          {"mel_pool", c.mel_pool},
          {"cqt", to_json(c.cqt)},
          {"mfcc", to_json(c.mfcc)},
          {"mfcc_pool", c.mfcc_pool},
          {"stats_frame", c.stats_frame},
          {"stats_hop", c.stats_hop},
          {"wave_decimation", c.wave_decimation},
          {"wave_frame", c.wave_frame},
          {"log_eps", c.log_eps}};
}

FeatureConfig features_from_json(const json& j, const std::string& w) {
  check_keys(j, w,
             {"sample_rate", "stft_window", "stft_hop", "stft_pool", "mel", "mel_pool", "cqt", "mfcc", "mfcc_pool",
              "stats_frame", "stats_hop", "wave_decimation", "wave_frame", "log_eps"});
  FeatureConfig c;
  read_opt(j, "sample_rate", c.sample_rate, w);
  read_opt(j, "stft_window", c.stft_window, w);
  read_opt(j, "stft_hop", c.stft_hop, w);
  read_opt(j, "stft_pool", c.stft_pool, w);
  if (j.contains("mel")) c.mel = mel_from_json(j["mel"], w + ".mel");
  read_opt(j, "mel_pool", c.mel_pool, w);
  if (j.contains("cqt")) c.cqt = cqt_from_json(j["cqt"], w + ".cqt");
  if (j.contains("mfcc")) c.mfcc = mfcc_from_json(j["mfcc"], w + ".mfcc");
  read_opt(j, "mfcc_pool", c.mfcc_pool, w);
  read_opt(j, "stats_frame", c.stats_frame, w);
  read_opt(j, "stats_hop", c.stats_hop, w);
  read_opt(j, "wave_decimation", c.wave_decimation, w);
  read_opt(j, "wave_frame", c.wave_frame, w);
  read_opt(j, "log_eps", c.log_eps, w);
  return c;
}

json to_json(const ModelConfig& c) {
  json mods = json::object();
  for (const auto& [k, v] : c.modalities) mods[k] = v;
  return {{"modalities", mods},
          {"conv1_channels", c.conv1_channels},
          {"conv2_channels", c.conv2_channels},
          {"conv_dim", c.conv_dim},
          {"seq_dim", c.seq_dim},
          {"stats_track_dim", c.stats_track_dim},
          {"group_hidden", c.group_hidden},
          {"head_hidden", c.head_hidden},
          {"pdc",
           {{"enabled", c.pdc.enabled},
            {"num_primes", c.pdc.num_primes},
            {"symmetric", c.pdc.symmetric},
            {"per_channel", c.pdc.per_channel}}}};
}

ModelConfig model_from_json(const json& j, const std::string& w) {
  check_keys(j, w,
             {"profile", "modalities", "conv1_channels", "conv2_channels", "conv_dim", "seq_dim", "stats_track_dim",
              "group_hidden", "head_hidden", "pdc"});
  std::string profile = "desk";
  read_opt(j, "profile", profile, w);
  ModelConfig c = ModelConfig::profile(profile);
  if (j.contains("modalities")) {
    const auto& m = j["modalities"];
    check_keys(m, w + ".modalities", {"stft", "mel", "cqt", "mfcc", "stats", "wave"});
    for (const auto& [k, v] : m.items()) {
      if (!v.is_boolean()) throw UserError(w + ".modalities." + k + ": expected a boolean");
      c.modalities[k] = v.get<bool>();
    }
  }
  read_opt(j, "conv1_channels", c.conv1_channels, w);
  read_opt(j, "conv2_channels", c.conv2_channels, w);
  read_opt(j, "conv_dim", c.conv_dim, w);
  read_opt(j, "seq_dim", c.seq_dim, w);
  read_opt(j, "stats_track_dim", c.stats_track_dim, w);
  read_opt(j, "group_hidden", c.group_hidden, w);
  read_opt(j, "head_hidden", c.head_hidden, w);
  if (j.contains("pdc")) {
    const auto& p = j["pdc"];
    const std::string pw = w + ".pdc";
    check_keys(p, pw, {"enabled", "num_primes", "symmetric", "per_channel"});
    read_opt(p, "enabled", c.pdc.enabled, pw);
    read_opt(p, "num_primes", c.pdc.num_primes, pw);
    read_opt(p, "symmetric", c.pdc.symmetric, pw);
    read_opt(p, "per_channel", c.pdc.per_channel, pw);
  }
  c.validate();
  return c;
}

namespace {

std::string loss_mode_name(LossMode m) { return m == LossMode::mse ? "mse" : "cross_entropy"; }

LossMode parse_loss_mode(const std::string& s, const std::string& w) {
  if (s == "cross_entropy") return LossMode::cross_entropy;
  if (s == "mse") return LossMode::mse;
  throw UserError(w + ".mode: expected 'cross_entropy' or 'mse', got '" + s + "'");
}

}  // namespace

json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"peak_lr", c.peak_lr},
          {"warmup_epochs", c.warmup_epochs},
          {"weight_decay", c.weight_decay},
          {"grad_clip", c.grad_clip},
          {"patience", c.patience},
          {"input_noise", c.input_noise},
          {"swa_last", c.swa_last},
          {"use_weights", c.use_weights},
          {"loss",
           {{"mode", loss_mode_name(c.loss.mode)},
            {"sigma0", c.loss.sigma0},
            {"smooth_categorical", c.loss.smooth_categorical}}}};
}

TrainConfig train_from_json(const json& j, const std::string& w) {
  check_keys(j, w,
             {"epochs", "batch_size", "peak_lr", "warmup_epochs", "weight_decay", "grad_clip", "patience",
              "input_noise", "swa_last", "use_weights", "loss"});
  TrainConfig c;
  read_opt(j, "epochs", c.epochs, w);
  read_opt(j, "batch_size", c.batch_size, w);
  read_opt(j, "peak_lr", c.peak_lr, w);
  read_opt(j, "warmup_epochs", c.warmup_epochs, w);
  read_opt(j, "weight_decay", c.weight_decay, w);
  read_opt(j, "grad_clip", c.grad_clip, w);
  read_opt(j, "patience", c.patience, w);
  read_opt(j, "input_noise", c.input_noise, w);
  read_opt(j, "swa_last", c.swa_last, w);
  read_opt(j, "use_weights", c.use_weights, w);
  if (j.contains("loss")) {
    const auto& l = j["loss"];
    const std::string lw = w + ".loss";
    check_keys(l, lw, {"mode", "sigma0", "smooth_categorical"});
    std::string mode = loss_mode_name(c.loss.mode);
    read_opt(l, "mode", mode, lw);
    c.loss.mode = parse_loss_mode(mode, lw);
    read_opt(l, "sigma0", c.loss.sigma0, lw);
    read_opt(l, "smooth_categorical", c.loss.smooth_categorical, lw);
  }
  if (c.epochs == 0) throw UserError(w + ".epochs must be >= 1");
  if (c.batch_size == 0) throw UserError(w + ".batch_size must be >= 1");
  if (!(c.peak_lr > 0.0)) throw UserError(w + ".peak_lr must be positive");
  if (c.loss.sigma0 < 0.0) throw UserError(w + ".loss.sigma0 must be >= 0");
  if (c.input_noise < 0.0) throw UserError(w + ".input_noise must be >= 0");
  return c;
}

json to_json(const DatasetConfig& c) {
  return {{"themes", c.themes},
          {"seeds", c.seeds},
          {"augmented", c.augmented},
          {"random", c.random},
          {"test_themes", c.test_themes},
          {"val_themes", c.val_themes},
          {"random_val_fraction", c.random_val_fraction},
          {"audibility_threshold", c.audibility_threshold},
          {"retry_cap", c.retry_cap},
          {"weights", c.weights}};
}

DatasetConfig dataset_from_json(const json& j, const std::string& w) {
  check_keys(j, w,
             {"themes", "seeds", "augmented", "random", "test_themes", "val_themes", "random_val_fraction",
              "audibility_threshold", "retry_cap", "weights"});
  DatasetConfig c;
  read_opt(j, "themes", c.themes, w);
  read_opt(j, "seeds", c.seeds, w);
  read_opt(j, "augmented", c.augmented, w);
  read_opt(j, "random", c.random, w);
  read_opt(j, "test_themes", c.test_themes, w);
  read_opt(j, "val_themes", c.val_themes, w);
  read_opt(j, "random_val_fraction", c.random_val_fraction, w);
  read_opt(j, "audibility_threshold", c.audibility_threshold, w);
  read_opt(j, "retry_cap", c.retry_cap, w);
  read_opt(j, "weights", c.weights, w);
  return c;
}

json to_json(const HillClimbConfig& c) { return {{"patience", c.patience}}; }

HillClimbConfig hill_climb_from_json(const json& j, const std::string& w) {
  check_keys(j, w, {"patience"});
  HillClimbConfig c;
  read_opt(j, "patience", c.patience, w);
  return c;
}

json to_json(const GaConfig& c) {
  return {{"population", c.population},         {"tournament", c.tournament},
          {"crossover_rate", c.crossover_rate}, {"mutation_rate", c.mutation_rate},
          {"step_probability", c.step_probability}, {"elitism", c.elitism}};
}

GaConfig ga_from_json(const json& j, const std::string& w) {
  check_keys(j, w, {"population", "tournament", "crossover_rate", "mutation_rate", "step_probability", "elitism"});
  GaConfig c;
  read_opt(j, "population", c.population, w);
  read_opt(j, "tournament", c.tournament, w);
  read_opt(j, "crossover_rate", c.crossover_rate, w);
  read_opt(j, "mutation_rate", c.mutation_rate, w);
  read_opt(j, "step_probability", c.step_probability, w);
  read_opt(j, "elitism", c.elitism, w);
  c.validate();
  return c;
}

json to_json(const InputShapes& s) {
  return {{"stft", {s.stft_bins, s.stft_frames}},
          {"mel", {s.mel_bins, s.mel_frames}},
          {"cqt", {s.cqt_bins, s.cqt_frames}},
          {"cqt_bins_per_octave", s.cqt_bins_per_octave},
          {"mfcc", {s.mfcc_frames, s.mfcc_coeffs}},
          {"stats", {s.stat_tracks, s.stat_frames}},
          {"wave", {s.wave_steps, s.wave_frame}}};
}

InputShapes shapes_from_json(const json& j, const std::string& w) {
  check_keys(j, w, {"stft", "mel", "cqt", "cqt_bins_per_octave", "mfcc", "stats", "wave"});
  InputShapes s;
  try {
    s.stft_bins = j.at("stft").at(0);
    s.stft_frames = j.at("stft").at(1);
    s.mel_bins = j.at("mel").at(0);
    s.mel_frames = j.at("mel").at(1);
    s.cqt_bins = j.at("cqt").at(0);
    s.cqt_frames = j.at("cqt").at(1);
    s.cqt_bins_per_octave = j.at("cqt_bins_per_octave");
    s.mfcc_frames = j.at("mfcc").at(0);
    s.mfcc_coeffs = j.at("mfcc").at(1);
    s.stat_tracks = j.at("stats").at(0);
    s.stat_frames = j.at("stats").at(1);
    s.wave_steps = j.at("wave").at(0);
    s.wave_frame = j.at("wave").at(1);
  } catch (const json::exception& e) {
    throw UserError(w + ": " + e.what());
  }
  return s;
}

json to_json(const TrainHistory& h) {
  json epochs = json::array();
  for (const auto& e : h.epochs)
    epochs.push_back({{"epoch", e.epoch},
                      {"train_loss", e.train_loss},
                      {"val_loss", e.val_loss},
                      {"val_accuracy", e.val_accuracy},
                      {"lr", e.lr}});
  return {{"epochs", epochs}, {"best_epoch", h.best_epoch}, {"steps", h.steps}, {"stopped_early", h.stopped_early}};
}

TrainHistory history_from_json(const json& j, const std::string& w) {
  TrainHistory h;
  try {
    for (const auto& e : j.at("epochs"))
      h.epochs.push_back({e.at("epoch"), e.at("train_loss"), e.at("val_loss"), e.at("val_accuracy"), e.at("lr")});
    h.best_epoch = j.at("best_epoch");
    h.steps = j.at("steps");
    h.stopped_early = j.at("stopped_early");
  } catch (const json::exception& e) {
    throw UserError(w + ": " + e.what());
  }
  return h;
}

json to_json(const GlobalConfig& c) {
  return {{"space", c.space},
          {"note", to_json(c.note)},
          {"features", to_json(c.features)},
          {"model", to_json(c.model)},
          {"train", to_json(c.train)},
          {"dataset", to_json(c.dataset)},
          {"hill_climb", to_json(c.hill_climb)},
          {"ga", to_json(c.ga)},
          {"seed", c.seed}};
}

GlobalConfig global_from_json(const json& j) {
  const std::string w = "config";
  check_keys(j, w, {"space", "note", "features", "model", "train", "dataset", "hill_climb", "ga", "seed"});
  GlobalConfig c;
  read_opt(j, "space", c.space, w);
  if (j.contains("note")) c.note = note_from_json(j["note"], "config.note");
  if (j.contains("features")) c.features = features_from_json(j["features"], "config.features");
  if (j.contains("model")) c.model = model_from_json(j["model"], "config.model");
  if (j.contains("train")) c.train = train_from_json(j["train"], "config.train");
  if (j.contains("dataset")) c.dataset = dataset_from_json(j["dataset"], "config.dataset");
  if (j.contains("hill_climb")) c.hill_climb = hill_climb_from_json(j["hill_climb"], "config.hill_climb");
  if (j.contains("ga")) c.ga = ga_from_json(j["ga"], "config.ga");
  read_opt(j, "seed", c.seed, w);
  c.dataset.space = c.space;
  c.validate();
  return c;
}

}  // namespace synthmatch::jsonio
