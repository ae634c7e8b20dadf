// synthmatch: render presets, build datasets, train the estimator, match
// audio and run the search baselines.
//
// Exit codes: 0 success, 1 user error (bad flags, config or input files),
// 2 internal error.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "synthmatch/config.hpp"
#include "synthmatch/dataset.hpp"
#include "synthmatch/error.hpp"
#include "synthmatch/estimator.hpp"
#include "synthmatch/features.hpp"
#include "synthmatch/io.hpp"
#include "synthmatch/pdc.hpp"
#include "synthmatch/pipeline.hpp"
#include "synthmatch/search.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace synthmatch;

namespace {

struct Context {
  std::string config_path;
  GlobalConfig cfg;
  std::string hash;

  void load() {
    cfg = config_path.empty() ? GlobalConfig{} : load_config(config_path);
    cfg.validate();
    hash = config_hash(cfg);
  }
};

// Relative output paths land under $SYNTHMATCH_OUTPUT_DIR when it is set.
fs::path output_path(const std::string& p) {
  fs::path path(p);
  const char* base = std::getenv("SYNTHMATCH_OUTPUT_DIR");
  if (base && *base && path.is_relative()) path = fs::path(base) / path;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  return path;
}

void print(const json& j) { std::cout << j.dump() << std::endl; }

void progress_line(const std::string& stage, std::size_t done, std::size_t total) {
  if (done == total || done % 64 == 0) std::fprintf(stderr, "%s %zu/%zu\n", stage.c_str(), done, total);
}

std::vector<double> to_vec(const dsp::MfccMatrix& m) { return m.coeffs; }

void put_spectrogram(ArrayArchive& ar, const std::string& name, const dsp::Spectrogram& s) {
  ar.put(name, {s.channels, s.bins, s.frames}, s.data);
  ar.put(name + "/bin_hz", {s.bin_hz.size()}, s.bin_hz);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthesizer preset matching toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  Context ctx;
  app.add_option("--config", ctx.config_path, "JSON config file")->check(CLI::ExistingFile);

  // render
  auto* render_cmd = app.add_subcommand("render", "Render a preset to a WAV file");
  std::string preset_path, out_path;
  render_cmd->add_option("--preset", preset_path)->required()->check(CLI::ExistingFile);
  render_cmd->add_option("--out", out_path)->required();

  // features
  auto* features_cmd = app.add_subcommand("features", "Dump model features of an audio file");
  std::string audio_path;
  features_cmd->add_option("--audio", audio_path)->required()->check(CLI::ExistingFile);
  features_cmd->add_option("--out", out_path)->required();

  // dataset gen | verify
  auto* dataset_cmd = app.add_subcommand("dataset", "Generate or verify a dataset");
  dataset_cmd->require_subcommand(1);
  auto* gen_cmd = dataset_cmd->add_subcommand("gen", "Generate a dataset");
  std::optional<std::uint64_t> seed;
  gen_cmd->add_option("--out", out_path)->required();
  gen_cmd->add_option("--seed", seed);
  auto* verify_cmd = dataset_cmd->add_subcommand("verify", "Check all manifest invariants");
  std::string dataset_dir;
  verify_cmd->add_option("dir", dataset_dir)->required()->check(CLI::ExistingDirectory);

  // train
  auto* train_cmd = app.add_subcommand("train", "Train the estimator on a dataset");
  bool skip_eval = false;
  train_cmd->add_option("--dataset", dataset_dir)->required()->check(CLI::ExistingDirectory);
  train_cmd->add_option("--seed", seed);
  train_cmd->add_option("--out", out_path)->required();
  train_cmd->add_flag("--skip-eval", skip_eval, "Do not score the test split");

  // match
  auto* match_cmd = app.add_subcommand("match", "Estimate a preset for an audio file");
  std::string model_dir;
  match_cmd->add_option("--model", model_dir)->required()->check(CLI::ExistingDirectory);
  match_cmd->add_option("--audio", audio_path)->required()->check(CLI::ExistingFile);
  match_cmd->add_option("--out", out_path)->required();

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "MFCCD between a target and the render of a preset");
  eval_cmd->add_option("--pred", preset_path)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--target", audio_path)->required()->check(CLI::ExistingFile);

  // baseline hillclimb | ga
  auto* baseline_cmd = app.add_subcommand("baseline", "Search-based matching baselines");
  baseline_cmd->require_subcommand(1);
  std::string space_id, trace_path;
  std::size_t budget = 1000;
  for (auto* sub : {baseline_cmd->add_subcommand("hillclimb", "Hill climbing with random restarts"),
                    baseline_cmd->add_subcommand("ga", "Genetic algorithm")}) {
    sub->add_option("--target", audio_path)->required()->check(CLI::ExistingFile);
    sub->add_option("--space", space_id);
    sub->add_option("--budget", budget);
    sub->add_option("--seed", seed);
    sub->add_option("--out", out_path)->required();
    sub->add_option("--trace", trace_path);
  }

  // pdc locations
  auto* pdc_cmd = app.add_subcommand("pdc", "Prime-dilated filter utilities");
  pdc_cmd->require_subcommand(1);
  auto* loc_cmd = pdc_cmd->add_subcommand("locations", "Print dilated tap locations");
  int bins_per_octave = 12, num_primes = 4;
  bool symmetric = false;
  loc_cmd->add_option("--B", bins_per_octave);
  loc_cmd->add_option("--l", num_primes);
  loc_cmd->add_flag("--symmetric", symmetric);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    ctx.load();
    const GlobalConfig& cfg = ctx.cfg;
    const std::uint64_t run_seed = seed.value_or(cfg.seed);
    const int sr = cfg.features.sample_rate;

    if (*render_cmd) {
      const Preset p = read_preset(preset_path);
      const AudioBuffer a = render(p, cfg.note, sr);
      const fs::path out = output_path(out_path);
      write_wav(out, a);
      print({{"out", out.string()}, {"samples", a.size()}, {"sample_rate", sr}, {"config_hash", ctx.hash}});

    } else if (*features_cmd) {
      const AudioBuffer a = read_wav(audio_path);
      FeatureConfig fc = cfg.features;
      fc.sample_rate = a.sample_rate;
      const FeatureBundle b = extract_bundle(a, fc);
      ArrayArchive ar;
      put_spectrogram(ar, "stft", b.stft);
      put_spectrogram(ar, "mel", b.mel);
      put_spectrogram(ar, "cqt", b.cqt);
      ar.put("mfcc", {b.mfcc.n_mfcc, b.mfcc.frames}, to_vec(b.mfcc));
      const std::size_t frames = b.stats.frames();
      ar.put("stats/amplitude_envelope", {frames}, b.stats.amplitude_envelope);
      ar.put("stats/rms_energy", {frames}, b.stats.rms_energy);
      ar.put("stats/zero_crossing_rate", {frames}, b.stats.zero_crossing_rate);
      ar.put("stats/wiener_entropy", {frames}, b.stats.wiener_entropy);
      ar.put("wave", {b.raw_frames.size()}, b.raw_frames);
      const fs::path out = output_path(out_path);
      ar.save(out);
      GlobalConfig sidecar_cfg = cfg;
      sidecar_cfg.features = fc;
      const json sidecar = {{"source", audio_path},
                            {"config", json::parse(config_to_json(sidecar_cfg))},
                            {"config_hash", ctx.hash}};
      write_text_file(out.string() + ".json", sidecar.dump(2) + "\n");
      json arrays = json::object();
      for (const auto& [name, arr] : ar.arrays()) arrays[name] = arr.shape;
      print({{"out", out.string()}, {"arrays", arrays}, {"config_hash", ctx.hash}});

    } else if (*gen_cmd) {
      const fs::path out = output_path(out_path);
      const auto m = build_dataset(cfg.dataset, cfg.note, sr, run_seed, out, ctx.hash, progress_line);
      print({{"out", out.string()},
             {"train", m.count(Split::train)},
             {"val", m.count(Split::val)},
             {"test", m.count(Split::test)},
             {"config_hash", ctx.hash}});

    } else if (*verify_cmd) {
      const auto rep = verify_dataset(dataset_dir);
      print({{"ok", rep.ok()},
             {"records", rep.records},
             {"train", rep.train},
             {"val", rep.val},
             {"test", rep.test},
             {"issues", rep.issues},
             {"config_hash", ctx.hash}});
      return rep.ok() ? 0 : 1;

    } else if (*train_cmd) {
      const auto data = prepare_dataset(dataset_dir, cfg.features, progress_line);
      if (data.space->id() != cfg.space)
        throw UserError("dataset space '" + data.space->id() + "' differs from config space '" + cfg.space + "'");
      Estimator est = train_estimator(data, cfg.model, cfg.train, run_seed, ctx.hash, [](const EpochStats& s) {
        std::fprintf(stderr, "epoch %zu train_loss %.6f val_loss %.6f val_acc %.4f lr %.3g\n", s.epoch,
                     s.train_loss, s.val_loss, s.val_accuracy, s.lr);
      });
      const fs::path out = output_path(out_path);
      est.save(out);
      json summary = {{"out", out.string()},
                      {"best_epoch", est.history.best_epoch},
                      {"epochs", est.history.epochs.size()},
                      {"first_train_loss", est.history.epochs.front().train_loss},
                      {"best_train_loss", est.history.epochs.at(est.history.best_epoch - 1).train_loss},
                      {"config_hash", ctx.hash}};
      if (!skip_eval && read_manifest(dataset_dir).count(Split::test) > 0) {
        const auto t = evaluate_test_split(est, dataset_dir, run_seed);
        json per = json::array();
        for (std::size_t i = 0; i < t.ids.size(); ++i)
          per.push_back({{"id", t.ids[i]}, {"estimated", t.estimated[i]}, {"random", t.random[i]}});
        const json ev = {{"median_mfccd_estimated", t.median_estimated},
                         {"median_mfccd_random", t.median_random},
                         {"bands", cfg.features.mfcc.n_mfcc},
                         {"records", per},
                         {"config_hash", ctx.hash}};
        write_text_file(out / "eval.json", ev.dump(2) + "\n");
        summary["median_mfccd_estimated"] = t.median_estimated;
        summary["median_mfccd_random"] = t.median_random;
      }
      print(summary);

    } else if (*match_cmd) {
      Estimator est = Estimator::load(model_dir);
      const Preset p = est.estimate(read_wav(audio_path));
      const fs::path out = output_path(out_path);
      write_preset(out, p);
      print({{"out", out.string()}, {"model_config_hash", est.config_hash}, {"config_hash", ctx.hash}});

    } else if (*eval_cmd) {
      const Preset p = read_preset(preset_path);
      const AudioBuffer target = read_wav(audio_path);
      AudioBuffer pred = quantize_f32(render(p, cfg.note, target.sample_rate));
      pred.samples.resize(target.size(), 0.0);
      const double d = dsp::mfccd(pred, target, cfg.features.mfcc);
      print({{"mfccd", d}, {"bands", cfg.features.mfcc.n_mfcc}, {"config_hash", ctx.hash}});

    } else if (*baseline_cmd) {
      const bool ga = baseline_cmd->got_subcommand("ga");
      const SpacePtr space = make_space(space_id.empty() ? cfg.space : space_id);
      const AudioBuffer target = read_wav(audio_path);
      SearchBudget b;
      b.max_evaluations = budget;
      b.seed = run_seed;
      const SearchResult r = ga ? genetic_search(target, space, cfg.note, b, cfg.ga, {}, cfg.features.mfcc)
                                : hill_climb(target, space, cfg.note, b, cfg.hill_climb, cfg.features.mfcc);
      const fs::path out = output_path(out_path);
      write_preset(out, r.best);
      if (!trace_path.empty()) write_text_file(output_path(trace_path), r.trace.to_csv());
      print({{"out", out.string()},
             {"method", ga ? "ga" : "hillclimb"},
             {"best_mfccd", r.best_mfccd},
             {"evaluations", r.trace.entries.size()},
             {"cache_hits", r.cache_hits},
             {"restarts", r.restarts},
             {"generations", r.generations},
             {"config_hash", ctx.hash}});

    } else if (*loc_cmd) {
      const auto locs = pdc::dilated_locations(bins_per_octave, num_primes, symmetric);
      json table = json::array();
      for (std::size_t i = 0; i < locs.size(); ++i) {
        json primes = json::array();
        for (auto p : locs.primes[i]) {
          const auto r = pdc::prime_ratio(p);
          primes.push_back({{"prime", p},
                            {"ratio", {r.numerator(), r.denominator()}},
                            {"exact_distance", bins_per_octave * std::log2(boost::rational_cast<double>(r))}});
        }
        table.push_back({{"location", locs.locations[i]}, {"primes", primes}});
      }
      print({{"bins_per_octave", bins_per_octave},
             {"num_primes", num_primes},
             {"symmetric", symmetric},
             {"locations", locs.locations},
             {"receptive_field", locs.receptive_field()},
             {"table", table},
             {"config_hash", ctx.hash}});
    }
    return 0;
  } catch (const UserError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
}
