#include <sys/wait.h>

#include <cstdio>
#include <fstream>

#include "doctest.h"
#include "json.hpp"
#include "support.hpp"
#include "synthmatch/dataset.hpp"
#include "synthmatch/io.hpp"

using namespace synthmatch;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

/// Runs the CLI through the shell; stdout only unless `merge` also takes stderr.
Run cli(const std::string& args, bool merge = false, const std::string& env = "") {
  const std::string cmd = env + " \"" SYNTHMATCH_CLI_PATH "\" " + args + (merge ? " 2>&1" : " 2>/dev/null");
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  char buf[4096];
  while (std::size_t n = std::fread(buf, 1, sizeof buf, p)) r.out.append(buf, n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

nlohmann::json last_json(const std::string& out) {
  const auto end = out.find_last_not_of('\n');
  const auto start = out.rfind('\n', end);
  return nlohmann::json::parse(out.substr(start == std::string::npos ? 0 : start + 1, end + 1));
}

const char* kSmallConfig = R"({
  "note": {"sustain_beats": 0.5, "total_beats": 1.0},
  "dataset": {"themes": 4, "seeds": 8, "augmented": 8, "random": 8, "test_themes": 1, "val_themes": 1},
  "model": {"conv1_channels": 2, "conv2_channels": 3, "conv_dim": 8, "seq_dim": 4, "stats_track_dim": 2,
            "group_hidden": 6, "head_hidden": 5},
  "train": {"epochs": 2, "batch_size": 4}
})";

}  // namespace

TEST_CASE("cli render, eval and features") {
  const auto dir = testing::scratch_dir("cli-render");
  const std::string d = dir.string();
  DatasetRng rng(4);
  Preset p = sample_random_preset(make_space("toy2"), rng);
  p.set("op1.output_level", 60);
  write_preset(dir / "p.json", p);

  auto r = cli("render --preset " + d + "/p.json --out " + d + "/p.wav");
  REQUIRE(r.code == 0);
  CHECK(last_json(r.out)["samples"] == 64000);
  CHECK(last_json(r.out).contains("config_hash"));

  r = cli("eval --pred " + d + "/p.json --target " + d + "/p.wav");
  REQUIRE(r.code == 0);
  CHECK(last_json(r.out)["mfccd"].get<double>() == 0.0);

  r = cli("features --audio " + d + "/p.wav --out " + d + "/f.smar");
  REQUIRE(r.code == 0);
  const auto ar = ArrayArchive::load(dir / "f.smar");
  CHECK(ar.contains("cqt"));
  CHECK(ar.get("mfcc").shape == std::vector<std::uint64_t>{13, 247});
  CHECK(fs::exists(dir / "f.smar.json"));
}

TEST_CASE("cli pdc locations") {
  auto r = cli("pdc locations --B 12 --l 4");
  REQUIRE(r.code == 0);
  const auto j = last_json(r.out);
  CHECK(j["locations"] == nlohmann::json::array({0, 4, 7, 10, 12}));
  r = cli("pdc locations --B 12 --l 4 --symmetric");
  REQUIRE(r.code == 0);
  CHECK(last_json(r.out)["locations"].size() == 9);
}

TEST_CASE("cli exit codes and output directory") {
  const auto dir = testing::scratch_dir("cli-errors");
  const std::string d = dir.string();
  CHECK(cli("--help").code == 0);
  CHECK(cli("").code == 1);
  CHECK(cli("render --preset /nonexistent.json --out x.wav").code == 1);

  write_text_file(dir / "bad.json", R"({"bogus": 1})");
  auto r = cli("--config " + d + "/bad.json pdc locations", true);
  CHECK(r.code == 1);
  CHECK(r.out.find("bogus") != std::string::npos);

  write_text_file(dir / "broken.json", R"({"space": "toy2", "classes": [1, 2]})");
  CHECK(cli("eval --pred " + d + "/broken.json --target " + d + "/bad.json").code == 1);

  write_preset(dir / "p.json", Preset::defaults(make_space("toy2")));
  const auto out_dir = dir / "outputs";
  r = cli("render --preset " + d + "/p.json --out sub/p.wav", false, "SYNTHMATCH_OUTPUT_DIR=" + out_dir.string());
  CHECK(r.code == 0);
  CHECK(fs::exists(out_dir / "sub/p.wav"));
}

TEST_CASE("cli dataset, train, match and baselines") {
  const auto dir = testing::scratch_dir("cli-pipeline");
  const std::string d = dir.string();
  write_text_file(dir / "small.json", kSmallConfig);
  const std::string cfg = "--config " + d + "/small.json ";

  auto r = cli(cfg + "dataset gen --out " + d + "/ds --seed 3");
  REQUIRE(r.code == 0);
  CHECK(last_json(r.out)["test"].get<int>() > 0);
  CHECK(cli(cfg + "dataset verify " + d + "/ds").code == 0);

  r = cli(cfg + "train --dataset " + d + "/ds --seed 1 --out " + d + "/model");
  REQUIRE(r.code == 0);
  CHECK(fs::exists(dir / "model/model.smar"));
  const auto eval = nlohmann::json::parse(read_text_file(dir / "model/eval.json"));
  CHECK(eval["median_mfccd_estimated"].get<double>() >= 0.0);

  const auto m = read_manifest(dir / "ds");
  const std::string audio = d + "/ds/" + m.records.front().audio_path;
  r = cli(cfg + "match --model " + d + "/model --audio " + audio + " --out " + d + "/est.json");
  REQUIRE(r.code == 0);
  const Preset est = read_preset(dir / "est.json");
  CHECK(est.space().id() == "toy2");
  CHECK(cli(cfg + "eval --pred " + d + "/est.json --target " + audio).code == 0);

  for (const char* algo : {"hillclimb", "ga"}) {
    r = cli(cfg + "baseline " + algo + " --target " + audio + " --budget 20 --seed 2 --out " + d + "/b.json --trace " +
            d + "/trace.csv");
    REQUIRE(r.code == 0);
    const std::string csv = read_text_file(dir / "trace.csv");
    CHECK(csv.rfind("step,mfccd,best_mfccd\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') <= 21);
  }

  // A checkpoint whose arrays no longer fit the declared model is an internal error.
  auto model_json = nlohmann::json::parse(read_text_file(dir / "model/model.json"));
  model_json["model"]["conv_dim"] = 9;
  write_text_file(dir / "model/model.json", model_json.dump());
  r = cli(cfg + "match --model " + d + "/model --audio " + audio + " --out " + d + "/est2.json", true);
  CHECK(r.code == 2);
}
