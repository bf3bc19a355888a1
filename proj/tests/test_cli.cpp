#include "doctest.h"

#include <cstdlib>
#include <sstream>

#include "json.hpp"
#include "test_util.hpp"
#include "utlsa/weights_io.hpp"

using namespace utlsa;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(UTLSA_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void write(const std::filesystem::path& p, const std::string& text) {
  std::ofstream f(p);
  f << text;
}

std::string small_config(const std::string& out_dir) {
  return R"({
  "attack": {"epsilon": 0.02, "iterations": 4, "grad_accum": 2, "seed": 3, "log_interval": 2},
  "train": {"name": "train", "count": 3, "seed": 100},
  "eval": {"corpora": [{"name": "read", "count": 3, "seed": 200},
                       {"name": "keyword", "profile": "keyword", "count": 3, "seed": 300}],
           "baseline": {"k": 2, "seed": 5}},
  "target": {"command": "unlock the door", "bank": ["call mom"]},
  "output": {"dir": ")" + out_dir + R"("}
})";
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST_CASE("usage errors exit with 1") {
  CHECK(run("") == 1);
  CHECK(run("frobnicate") == 1);
  CHECK(run("synth --count 2") == 1);
  CHECK(run("--help") == 0);
}

TEST_CASE("synth writes files and a manifest") {
  testutil::TempDir dir("cli_synth");
  REQUIRE(run("synth --profile telephony --count 4 --seed 9 --out " + (dir / "c").string()) == 0);
  CHECK(std::filesystem::exists(dir / "c/telephony_9_0003.wav"));
  CHECK(count_lines(testutil::slurp(dir / "c/manifest.tsv")) == 5);
  CHECK(run("synth --profile studio --count 1 --out " + (dir / "d").string()) == 1);
}

TEST_CASE("bad config is a usage error naming the key") {
  testutil::TempDir dir("cli_badcfg");
  write(dir / "bad.json", R"({"attack": {"iters": 5}})");
  CHECK(run("attack --config " + (dir / "bad.json").string()) == 1);
  const std::string cmd =
      std::string(UTLSA_CLI) + " attack --config " + (dir / "bad.json").string() + " 2>" + (dir / "err.txt").string();
  CHECK(std::system(cmd.c_str()) != 0);
  CHECK(testutil::slurp(dir / "err.txt").find("attack.iters") != std::string::npos);
}

TEST_CASE("missing or corrupt files are I/O errors") {
  testutil::TempDir dir("cli_io");
  write(dir / "cfg.json", small_config((dir / "out").string()));
  CHECK(run("eval --delta " + (dir / "nope.utls").string() + " --config " + (dir / "cfg.json").string()) == 2);
  write(dir / "junk.utls", "garbage");
  CHECK(run("eval --delta " + (dir / "junk.utls").string() + " --config " + (dir / "cfg.json").string()) == 2);
}

TEST_CASE("attack, eval, spectro end to end") {
  testutil::TempDir dir("cli_e2e");
  const auto out = dir / "out";
  write(dir / "cfg.json", small_config(out.string()));
  REQUIRE(run("attack --config " + (dir / "cfg.json").string()) == 0);

  const DeltaFile d = load_delta(out / "delta.utls");
  CHECK(d.delta.size() == 16000);
  CHECK(peak_abs(d.delta.view()) <= d.epsilon);
  CHECK(d.epsilon == 0.02f);

  std::istringstream log(testutil::slurp(out / "train_log.jsonl"));
  std::string line;
  std::vector<std::int64_t> iters;
  while (std::getline(log, line)) {
    const auto j = nlohmann::ordered_json::parse(line);
    std::vector<std::string> keys;
    for (const auto& item : j.items()) keys.push_back(item.key());
    CHECK(keys == std::vector<std::string>{"iter", "loss", "linf", "elapsed_s"});
    iters.push_back(j["iter"].get<std::int64_t>());
  }
  CHECK(iters == std::vector<std::int64_t>{2, 4});

  REQUIRE(run("eval --baseline --delta " + (out / "delta.utls").string() + " --config " + (dir / "cfg.json").string()) == 0);
  const std::string records = testutil::slurp(out / "report.jsonl");
  CHECK(count_lines(records) == 2 + 1 + 3);
  CHECK(records.find(R"("record":"macro")") != std::string::npos);
  CHECK(testutil::slurp(out / "report.txt").find("Random Noise Baseline (K=2)") != std::string::npos);

  REQUIRE(run("synth --count 1 --seed 1 --out " + (dir / "c").string()) == 0);
  REQUIRE(run("spectro --wav " + (dir / "c/read_1_0000.wav").string() + " --delta " + (out / "delta.utls").string() +
              " --out " + (dir / "sp/fig").string()) == 0);
  for (const char* suffix : {"_x.csv", "_delta.csv", "_mix.csv"}) {
    const std::string csv = testutil::slurp(dir / ("sp/fig" + std::string(suffix)));
    CHECK(count_lines(csv) == 98);
    const std::string first = csv.substr(0, csv.find('\n'));
    CHECK(std::count(first.begin(), first.end(), ',') == 63);
  }
}

TEST_CASE("zero perturbation evaluates to an all-zero table") {
  testutil::TempDir dir("cli_zero");
  const auto out = dir / "out";
  write(dir / "cfg.json", small_config(out.string()));
  save_delta(dir / "zero.utls", {Waveform(kInputSamples), 0.02f, 0});
  CHECK(run("rand-delta --seed 1 --epsilon 0 --out " + (dir / "bad.utls").string()) == 1);
  REQUIRE(run("rand-delta --seed 1 --epsilon 0.02 --out " + (dir / "rand.utls").string()) == 0);
  CHECK(peak_abs(load_delta(dir / "rand.utls").delta.view()) <= 0.02f);
  REQUIRE(run("eval --delta " + (dir / "zero.utls").string() + " --config " + (dir / "cfg.json").string()) == 0);
  std::istringstream records(testutil::slurp(out / "report.jsonl"));
  std::string line;
  int rows = 0;
  while (std::getline(records, line)) {
    const auto j = nlohmann::json::parse(line);
    if (j["record"] == "corpus") {
      CHECK(j["asr_percent"].get<double>() == 0.0);
      ++rows;
    } else if (j["record"] == "macro") {
      CHECK(j["macro_avg_percent"].get<double>() == 0.0);
    }
  }
  CHECK(rows == 2);
}

TEST_CASE("artifacts are reproducible") {
  testutil::TempDir dir("cli_repro");
  for (const char* run_dir : {"a", "b"}) {
    const auto out = dir / run_dir;
    write(dir / (std::string(run_dir) + ".json"), small_config(out.string()));
    REQUIRE(run("init-model --seed 7 --out " + (out / "w.utls").string()) == 0);
    REQUIRE(run("attack --config " + (dir / (std::string(run_dir) + ".json")).string()) == 0);
    REQUIRE(run("eval --delta " + (out / "delta.utls").string() + " --config " +
                (dir / (std::string(run_dir) + ".json")).string()) == 0);
  }
  for (const char* file : {"w.utls", "delta.utls", "report.jsonl"})
    CHECK(testutil::slurp(dir / "a" / file) == testutil::slurp(dir / "b" / file));
}

TEST_CASE("output directory can be overridden from the environment") {
  testutil::TempDir dir("cli_env");
  write(dir / "cfg.json", small_config((dir / "ignored").string()));
  const std::string cmd = "UTLSA_OUT_DIR=" + (dir / "env").string() + " " + UTLSA_CLI + " attack --config " +
                          (dir / "cfg.json").string() + " >/dev/null";
  REQUIRE(std::system(cmd.c_str()) == 0);
  CHECK(std::filesystem::exists(dir / "env/delta.utls"));
  CHECK_FALSE(std::filesystem::exists(dir / "ignored"));
}

TEST_CASE("bench runs both modes and writes the comparison") {
  testutil::TempDir dir("cli_bench");
  write(dir / "cfg.json", small_config((dir / "out").string()));
  REQUIRE(run("bench --mode both --iters 2 --config " + (dir / "cfg.json").string()) == 0);
  CHECK(count_lines(testutil::slurp(dir / "out/bench.jsonl")) == 2);
  CHECK(testutil::slurp(dir / "out/bench.txt").find("Training time (2 iters)") != std::string::npos);
  CHECK(run("bench --mode sideways --iters 2 --config " + (dir / "cfg.json").string()) == 1);
}
