#include "synthmatch/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>

#include "json_io.hpp"
#include "synthmatch/estimator.hpp"
#include "synthmatch/io.hpp"

namespace synthmatch {

namespace fs = std::filesystem;
using jsonio::json;

namespace {

RoleTemplate role(std::pair<int, int> coarse, UnitRange fine, UnitRange level, UnitRange attack, UnitRange decay,
                  UnitRange sustain, UnitRange release, UnitRange detune = {0.45, 0.55}) {
  RoleTemplate r;
  r.coarse = coarse;
  r.fine = fine;
  r.detune = detune;
  r.level = level;
  r.attack = attack;
  r.decay = decay;
  r.sustain = sustain;
  r.release = release;
  return r;
}

std::vector<Theme> build_catalog() {
  // name, carrier, modulator, feedback
  return {
      {"bell", role({1, 1}, {0, 0}, {.85, 1}, {0, .05}, {.6, .85}, {0, .15}, {.5, .8}),
       role({3, 7}, {0, .1}, {.55, .8}, {0, .05}, {.45, .75}, {0, .25}, {.4, .7}), {0, .2}},
      {"e-piano", role({1, 1}, {0, 0}, {.85, 1}, {0, .04}, {.45, .7}, {.2, .45}, {.2, .4}),
       role({1, 1}, {0, .02}, {.5, .7}, {0, .04}, {.2, .4}, {0, .2}, {.15, .3}), {0, .1}},
      {"bass", role({0, 1}, {0, 0}, {.9, 1}, {0, .03}, {.3, .5}, {.5, .8}, {.05, .15}),
       role({1, 2}, {0, 0}, {.6, .8}, {0, .03}, {.2, .4}, {.3, .6}, {.05, .15}), {.2, .5}},
      {"brass", role({1, 1}, {0, 0}, {.85, 1}, {.15, .3}, {.3, .5}, {.7, .9}, {.15, .3}),
       role({1, 1}, {0, 0}, {.65, .85}, {.2, .35}, {.3, .5}, {.6, .85}, {.15, .3}), {.3, .6}},
      {"organ", role({1, 2}, {0, 0}, {.85, .95}, {0, .03}, {.1, .3}, {.9, 1}, {.05, .12}),
       role({2, 4}, {0, 0}, {.3, .5}, {0, .03}, {.1, .3}, {.9, 1}, {.05, .12}), {0, .1}},
      {"pad", role({1, 1}, {0, .05}, {.8, .95}, {.45, .7}, {.4, .6}, {.7, .9}, {.5, .8}),
       role({1, 2}, {0, .05}, {.4, .6}, {.5, .75}, {.4, .7}, {.6, .9}, {.5, .8}), {0, .2}},
      {"pluck", role({1, 1}, {0, 0}, {.85, 1}, {0, .02}, {.25, .45}, {0, .1}, {.1, .25}),
       role({2, 3}, {0, 0}, {.6, .8}, {0, .02}, {.1, .25}, {0, .1}, {.05, .15}), {.1, .3}},
      {"strings", role({1, 1}, {0, 0}, {.8, .95}, {.3, .5}, {.3, .5}, {.75, .95}, {.3, .5}),
       role({1, 1}, {0, .03}, {.45, .65}, {.3, .5}, {.4, .6}, {.6, .8}, {.3, .5}), {.3, .5}},
      {"lead", role({1, 1}, {0, 0}, {.9, 1}, {0, .05}, {.2, .4}, {.8, 1}, {.1, .2}),
       role({1, 2}, {0, 0}, {.7, .9}, {0, .05}, {.2, .4}, {.7, .95}, {.1, .2}), {.5, .8}},
      {"flute", role({1, 1}, {0, 0}, {.8, .95}, {.1, .25}, {.2, .4}, {.8, .95}, {.1, .25}),
       role({1, 1}, {0, 0}, {.25, .45}, {.1, .25}, {.2, .4}, {.6, .8}, {.1, .25}), {.1, .3}},
      {"marimba", role({1, 1}, {0, 0}, {.85, 1}, {0, .02}, {.3, .5}, {0, .05}, {.15, .3}),
       role({4, 4}, {0, 0}, {.5, .7}, {0, .02}, {.1, .2}, {0, .05}, {.05, .15}), {0, .1}},
      {"clav", role({1, 1}, {0, 0}, {.85, 1}, {0, .02}, {.2, .35}, {.1, .3}, {.05, .12}),
       role({3, 5}, {0, 0}, {.65, .85}, {0, .02}, {.15, .3}, {.1, .3}, {.05, .12}), {.3, .6}},
      {"harp", role({1, 1}, {0, 0}, {.85, 1}, {0, .03}, {.45, .65}, {0, .1}, {.35, .55}),
       role({2, 2}, {0, 0}, {.35, .55}, {0, .03}, {.2, .4}, {0, .15}, {.2, .4}), {0, .1}},
      {"sweep", role({1, 1}, {0, 0}, {.8, .95}, {.3, .5}, {.7, .9}, {.4, .6}, {.6, .9}),
       role({5, 9}, {0, .2}, {.6, .85}, {.6, .85}, {.7, .95}, {.3, .6}, {.6, .9}), {.2, .5}},
      {"chime", role({1, 2}, {0, 0}, {.8, .95}, {0, .03}, {.7, .9}, {0, .1}, {.6, .85}),
       role({8, 13}, {0, .3}, {.45, .7}, {0, .03}, {.6, .85}, {0, .2}, {.5, .8}), {0, .2}},
      {"wood", role({1, 1}, {0, 0}, {.85, 1}, {0, .02}, {.15, .3}, {0, .05}, {.05, .1}),
       role({6, 11}, {0, .2}, {.55, .75}, {0, .02}, {.05, .15}, {0, .05}, {.02, .08}), {0, .3}},
  };
}

int draw_unit(const UnitRange& r, int class_count, DatasetRng& rng) {
  const int lo = static_cast<int>(std::lround(r.lo * (class_count - 1)));
  const int hi = std::max(lo, static_cast<int>(std::lround(r.hi * (class_count - 1))));
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

int draw_class(int lo, int hi, int class_count, DatasetRng& rng) {
  lo = std::clamp(lo, 0, class_count - 1);
  hi = std::clamp(hi, lo, class_count - 1);
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

std::string field_of(const std::string& name) {
  const auto dot = name.find('.');
  return dot == std::string::npos ? name : name.substr(dot + 1);
}

}  // namespace

const std::vector<Theme>& theme_catalog() {
  static const std::vector<Theme> catalog = build_catalog();
  return catalog;
}

Preset sample_theme_preset(const SpacePtr& space, const Theme& theme, DatasetRng& rng) {
  Preset p = Preset::defaults(space);
  const ModRouting routing = algorithm_topology(space->algorithm_id());
  for (std::size_t i : space->free_indices()) {
    const auto& d = space->descriptor(i);
    int c = 0;
    if (d.group == kGlobalGroup) {
      c = field_of(d.name) == "feedback" ? draw_unit(theme.feedback, d.class_count, rng)
                                         : std::uniform_int_distribution<int>(0, d.class_count - 1)(rng);
    } else {
      const RoleTemplate& r = routing.is_carrier(d.group) ? theme.carrier : theme.modulator;
      const std::string f = field_of(d.name);
      if (f == "ratio_coarse") c = draw_class(r.coarse.first, r.coarse.second, d.class_count, rng);
      else if (f == "ratio_fine") c = draw_unit(r.fine, d.class_count, rng);
      else if (f == "detune") c = draw_unit(r.detune, d.class_count, rng);
      else if (f == "output_level") c = draw_unit(r.level, d.class_count, rng);
      else if (f == "attack") c = draw_unit(r.attack, d.class_count, rng);
      else if (f == "decay") c = draw_unit(r.decay, d.class_count, rng);
      else if (f == "sustain") c = draw_unit(r.sustain, d.class_count, rng);
      else if (f == "release") c = draw_unit(r.release, d.class_count, rng);
      else c = std::uniform_int_distribution<int>(0, d.class_count - 1)(rng);
    }
    p.set(i, c);
  }
  p.set_theme(theme.name);
  return p;
}

Preset sample_random_preset(const SpacePtr& space, DatasetRng& rng) {
  Preset p = Preset::defaults(space);
  for (std::size_t i : space->free_indices())
    p.set(i, std::uniform_int_distribution<int>(0, space->descriptor(i).class_count - 1)(rng));
  return p;
}

Preset augment_preset(const Preset& source, const std::vector<std::string>& free_names, DatasetRng& rng) {
  Preset p = source;
  for (const auto& name : free_names) {
    const std::size_t i = source.space().require_index(name);
    const auto& d = source.space().descriptor(i);
    if (!d.is_free()) throw UserError("cannot augment fixed parameter " + name);
    p.set(i, std::uniform_int_distribution<int>(0, d.class_count - 1)(rng));
  }
  return p;
}

std::vector<std::string> group_parameter_names(const ParameterSpace& space, int group) {
  std::vector<std::string> out;
  for (std::size_t i : space.free_indices())
    if (space.descriptor(i).group == group) out.push_back(space.descriptor(i).name);
  return out;
}

void DatasetConfig::validate() const {
  make_space(space);
  if (themes == 0 || themes > theme_catalog().size())
    throw UserError("dataset.themes must be in 1.." + std::to_string(theme_catalog().size()));
  if (seeds > 0 && test_themes + val_themes >= themes)
    throw UserError("dataset.test_themes + dataset.val_themes must leave at least one training theme");
  if (augmented > 0 && seeds == 0) throw UserError("dataset.augmented needs at least one seed preset");
  if (random_val_fraction < 0.0 || random_val_fraction > 1.0)
    throw UserError("dataset.random_val_fraction must be in [0, 1]");
  if (audibility_threshold < 0.0) throw UserError("dataset.audibility_threshold must be >= 0");
  if (retry_cap == 0) throw UserError("dataset.retry_cap must be >= 1");
}

std::string split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

std::string source_name(Source s) {
  switch (s) {
    case Source::seed: return "seed";
    case Source::augmented: return "augmented";
    case Source::random: return "random";
  }
  return "?";
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw UserError("unknown split '" + s + "'");
}

Source parse_source(const std::string& s) {
  if (s == "seed") return Source::seed;
  if (s == "augmented") return Source::augmented;
  if (s == "random") return Source::random;
  throw UserError("unknown source '" + s + "'");
}

std::size_t DatasetManifest::count(Split s) const {
  return static_cast<std::size_t>(
      std::count_if(records.begin(), records.end(), [&](const ManifestRecord& r) { return r.split == s; }));
}

namespace {

template <class Draw>
std::pair<Preset, AudioBuffer> draw_audible(Draw&& draw, const MidiNote& note, int sample_rate,
                                            const DatasetConfig& cfg, const std::string& what) {
  for (std::size_t attempt = 0; attempt < cfg.retry_cap; ++attempt) {
    Preset p = draw();
    AudioBuffer a = quantize_f32(render(p, note, sample_rate));
    if (is_audible(a, cfg.audibility_threshold)) return {std::move(p), std::move(a)};
  }
  throw UserError("no audible preset for " + what + " after " + std::to_string(cfg.retry_cap) +
                  " attempts (RMS threshold " + std::to_string(cfg.audibility_threshold) + ")");
}

json record_to_json(const ManifestRecord& r) {
  return {{"id", r.id},
          {"preset", r.preset_path},
          {"audio", r.audio_path},
          {"theme", r.theme ? json(*r.theme) : json(nullptr)},
          {"split", split_name(r.split)},
          {"source", source_name(r.source)},
          {"weights", r.weights_path ? json(*r.weights_path) : json(nullptr)}};
}

ManifestRecord record_from_json(const json& j, const std::string& where) {
  jsonio::check_keys(j, where, {"id", "preset", "audio", "theme", "split", "source", "weights"});
  ManifestRecord r;
  try {
    r.id = j.at("id").get<std::string>();
    r.preset_path = j.at("preset").get<std::string>();
    r.audio_path = j.at("audio").get<std::string>();
    if (!j.at("theme").is_null()) r.theme = j.at("theme").get<std::string>();
    r.split = parse_split(j.at("split").get<std::string>());
    r.source = parse_source(j.at("source").get<std::string>());
    if (j.contains("weights") && !j.at("weights").is_null()) r.weights_path = j.at("weights").get<std::string>();
  } catch (const json::exception& e) {
    throw UserError(where + ": " + e.what());
  }
  return r;
}

}  // namespace

DatasetManifest build_dataset(const SpacePtr& space, const DatasetConfig& cfg, const MidiNote& note, int sample_rate,
                              std::uint64_t seed, const fs::path& out, const std::string& config_hash,
                              const ProgressCallback& progress) {
  note.validate();
  if (cfg.themes == 0 || cfg.themes > theme_catalog().size()) throw UserError("dataset.themes out of range");
  if (cfg.seeds > 0 && cfg.test_themes + cfg.val_themes >= cfg.themes)
    throw UserError("dataset.test_themes + dataset.val_themes must leave at least one training theme");
  if (cfg.augmented > 0 && cfg.seeds == 0) throw UserError("dataset.augmented needs at least one seed preset");
  if (cfg.retry_cap == 0) throw UserError("dataset.retry_cap must be >= 1");

  DatasetRng rng(seed);
  const auto& catalog = theme_catalog();
  std::vector<std::size_t> theme_order(cfg.themes);
  for (std::size_t i = 0; i < cfg.themes; ++i) theme_order[i] = i;
  std::shuffle(theme_order.begin(), theme_order.end(), rng);
  std::map<std::string, Split> theme_split;
  for (std::size_t i = 0; i < cfg.themes; ++i) {
    const Split s = i < cfg.test_themes ? Split::test : i < cfg.test_themes + cfg.val_themes ? Split::val : Split::train;
    theme_split[catalog[theme_order[i]].name] = s;
  }

  DatasetManifest m;
  m.config = cfg;
  m.config.space = space->id();
  m.note = note;
  m.sample_rate = sample_rate;
  m.seed = seed;
  m.config_hash = config_hash;

  fs::create_directories(out / "presets");
  fs::create_directories(out / "audio");
  if (cfg.weights) fs::create_directories(out / "weights");

  std::vector<Preset> presets;
  auto emit = [&](const std::string& id, Preset p, const AudioBuffer& a, Source src, Split split) {
    ManifestRecord r;
    r.id = id;
    r.preset_path = "presets/" + id + ".json";
    r.audio_path = "audio/" + id + ".wav";
    r.theme = p.theme();
    r.source = src;
    r.split = split;
    write_preset(out / r.preset_path, p);
    write_wav(out / r.audio_path, a);
    m.records.push_back(r);
    presets.push_back(std::move(p));
  };
  auto id_of = [](const char* prefix, std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s-%05zu", prefix, i);
    return std::string(buf);
  };
  const std::size_t total = cfg.seeds + cfg.augmented + cfg.random;

  // Seeds, round-robin over themes.
  std::vector<Preset> seeds;
  for (std::size_t i = 0; i < cfg.seeds; ++i) {
    const Theme& theme = catalog[i % cfg.themes];
    auto [p, a] = draw_audible([&] { return sample_theme_preset(space, theme, rng); }, note, sample_rate, cfg,
                               "seed " + std::to_string(i) + " (" + theme.name + ")");
    seeds.push_back(p);
    emit(id_of("seed", i), std::move(p), a, Source::seed, theme_split.at(theme.name));
    if (progress) progress("render", m.records.size(), total);
  }

  // Augmentations: the k-th augmentation of seed i frees operator group (i + k) mod G.
  std::vector<int> aug_groups;
  for (int g : space->free_groups())
    if (g != kGlobalGroup) aug_groups.push_back(g);
  if (aug_groups.empty()) aug_groups = space->free_groups();
  for (std::size_t j = 0; j < cfg.augmented; ++j) {
    const std::size_t i = j % cfg.seeds;
    const std::size_t k = j / cfg.seeds;
    const int group = aug_groups[(i + k) % aug_groups.size()];
    const auto names = group_parameter_names(*space, group);
    auto [p, a] = draw_audible([&] { return augment_preset(seeds[i], names, rng); }, note, sample_rate, cfg,
                               "augmentation " + std::to_string(j));
    const Split split = theme_split.at(*p.theme());
    emit(id_of("aug", j), std::move(p), a, Source::augmented, split);
    if (progress) progress("render", m.records.size(), total);
  }

  // Random presets: never in test.
  const auto random_val =
      static_cast<std::size_t>(std::llround(cfg.random_val_fraction * static_cast<double>(cfg.random)));
  for (std::size_t j = 0; j < cfg.random; ++j) {
    auto [p, a] = draw_audible([&] { return sample_random_preset(space, rng); }, note, sample_rate, cfg,
                               "random preset " + std::to_string(j));
    emit(id_of("rand", j), std::move(p), a, Source::random, j < random_val ? Split::val : Split::train);
    if (progress) progress("render", m.records.size(), total);
  }

  if (cfg.weights) {
    std::size_t done = 0;
    const std::size_t need = m.count(Split::train) + m.count(Split::val);
    for (std::size_t r = 0; r < m.records.size(); ++r) {
      auto& rec = m.records[r];
      if (rec.split == Split::test) continue;
      const auto w = gradient_weights(presets[r], note, sample_rate);
      json jw = json::object();
      const auto& free = space->free_indices();
      for (std::size_t k = 0; k < free.size(); ++k) jw[space->descriptor(free[k]).name] = w[k];
      rec.weights_path = "weights/" + rec.id + ".json";
      write_text_file(out / *rec.weights_path, json{{"weights", jw}}.dump() + "\n");
      if (progress) progress("weights", ++done, need);
    }
  }

  std::string lines;
  for (const auto& r : m.records) lines += record_to_json(r).dump() + "\n";
  write_text_file(out / "manifest.jsonl", lines);

  json themes = {{"train", json::array()}, {"val", json::array()}, {"test", json::array()}};
  for (const auto& [name, split] : theme_split) themes[split_name(split)].push_back(name);
  json cfg_json = jsonio::to_json(cfg);
  const json info = {{"format_version", 1},
                     {"space", space->id()},
                     {"note", jsonio::to_json(note)},
                     {"sample_rate", sample_rate},
                     {"seed", seed},
                     {"config_hash", config_hash},
                     {"config", cfg_json},
                     {"themes", themes},
                     {"counts",
                      {{"train", m.count(Split::train)},
                       {"val", m.count(Split::val)},
                       {"test", m.count(Split::test)},
                       {"total", m.records.size()}}}};
  write_text_file(out / "dataset.json", info.dump(2) + "\n");
  return m;
}

DatasetManifest build_dataset(const DatasetConfig& cfg, const MidiNote& note, int sample_rate, std::uint64_t seed,
                              const fs::path& out, const std::string& config_hash, const ProgressCallback& progress) {
  cfg.validate();
  return build_dataset(make_space(cfg.space), cfg, note, sample_rate, seed, out, config_hash, progress);
}

DatasetManifest read_manifest(const fs::path& dir) {
  const fs::path info_path = dir / "dataset.json";
  const json info = jsonio::parse(read_text_file(info_path), info_path.string());
  DatasetManifest m;
  try {
    if (info.at("format_version").get<int>() != 1) throw UserError(info_path.string() + ": unsupported format_version");
    m.config = jsonio::dataset_from_json(info.at("config"), "dataset.json config");
    m.config.space = info.at("space").get<std::string>();
    m.note = jsonio::note_from_json(info.at("note"), "dataset.json note");
    m.sample_rate = info.at("sample_rate").get<int>();
    m.seed = info.at("seed").get<std::uint64_t>();
    m.config_hash = info.at("config_hash").get<std::string>();
  } catch (const json::exception& e) {
    throw UserError(info_path.string() + ": " + e.what());
  }
  const fs::path manifest_path = dir / "manifest.jsonl";
  std::ifstream in(manifest_path);
  if (!in) throw UserError("cannot open " + manifest_path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = manifest_path.string() + ":" + std::to_string(lineno);
    m.records.push_back(record_from_json(jsonio::parse(line, where), where));
  }
  return m;
}

std::vector<double> read_weights(const fs::path& path, const ParameterSpace& space) {
  const json j = jsonio::parse(read_text_file(path), path.string());
  std::vector<double> out;
  try {
    const json& w = j.at("weights");
    for (std::size_t i : space.free_indices()) out.push_back(w.at(space.descriptor(i).name).get<double>());
  } catch (const json::exception& e) {
    throw UserError(path.string() + ": " + e.what());
  }
  return out;
}

VerifyReport verify_dataset(const fs::path& dir) {
  VerifyReport rep;
  const DatasetManifest m = read_manifest(dir);
  rep.records = m.records.size();
  rep.train = m.count(Split::train);
  rep.val = m.count(Split::val);
  rep.test = m.count(Split::test);
  const SpacePtr space = make_space(m.config.space);

  std::set<std::string> ids;
  std::map<std::string, std::set<Split>> theme_splits;
  for (const auto& r : m.records) {
    if (!ids.insert(r.id).second) rep.issues.push_back("duplicate id " + r.id);
    if (r.theme) theme_splits[*r.theme].insert(r.split);
    if (r.source == Source::random) {
      if (r.split == Split::test) rep.issues.push_back(r.id + ": random preset in the test split");
      if (r.theme) rep.issues.push_back(r.id + ": random preset carries a theme");
    } else if (!r.theme) {
      rep.issues.push_back(r.id + ": " + source_name(r.source) + " preset has no theme");
    }
    for (const auto* rel : {&r.preset_path, &r.audio_path})
      if (!fs::exists(dir / *rel)) rep.issues.push_back(r.id + ": missing file " + *rel);
    if (r.weights_path && !fs::exists(dir / *r.weights_path))
      rep.issues.push_back(r.id + ": missing file " + *r.weights_path);
    if (m.config.weights && r.split != Split::test && !r.weights_path)
      rep.issues.push_back(r.id + ": no gradient weights");

    if (fs::exists(dir / r.preset_path)) {
      try {
        const Preset p = read_preset(dir / r.preset_path);
        if (p.space().id() != space->id()) rep.issues.push_back(r.id + ": preset space differs from the dataset's");
        if (p.theme() != r.theme) rep.issues.push_back(r.id + ": preset theme differs from the manifest");
      } catch (const Error& e) {
        rep.issues.push_back(r.id + ": " + e.what());
      }
    }
    if (fs::exists(dir / r.audio_path)) {
      try {
        const AudioBuffer a = read_wav(dir / r.audio_path);
        if (a.sample_rate != m.sample_rate) rep.issues.push_back(r.id + ": audio sample rate differs");
        if (!is_audible(a, m.config.audibility_threshold))
          rep.issues.push_back(r.id + ": audio below the audibility threshold");
      } catch (const Error& e) {
        rep.issues.push_back(r.id + ": " + e.what());
      }
    }
  }
  for (const auto& [theme, splits] : theme_splits)
    if (splits.size() > 1) rep.issues.push_back("theme " + theme + " spans more than one split");
  return rep;
}

}  // namespace synthmatch
