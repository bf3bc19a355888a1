#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "utlsa/commands.hpp"

using namespace utlsa;

namespace {

enum Exit { kOk = 0, kUsage = 1, kIo = 2, kNumerical = 3 };

std::vector<BenchMode> parse_modes(const std::string& mode) {
  if (mode == "both") return {BenchMode::encoder_only, BenchMode::end_to_end};
  return {bench_mode_from_name(mode)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"utlsa: universal targeted latent-space audio attack"};
  app.require_subcommand(1);

  std::string profile = "read";
  std::size_t count = 64;
  std::uint64_t seed = 1;
  std::string out;
  auto* synth = app.add_subcommand("synth", "write a synthetic carrier corpus and manifest");
  synth->add_option("--profile", profile, "read | telephony | keyword")->capture_default_str();
  synth->add_option("--count", count)->capture_default_str();
  synth->add_option("--seed", seed)->capture_default_str();
  synth->add_option("--out", out, "output directory")->required();

  std::string command;
  auto* target = app.add_subcommand("target", "write the target waveform for a command");
  target->add_option("--command", command)->required();
  target->add_option("--out", out, "output WAV")->required();

  std::uint64_t model_seed = 7;
  auto* init = app.add_subcommand("init-model", "write encoder/decoder weights");
  init->add_option("--seed", model_seed)->capture_default_str();
  init->add_option("--out", out, "output weights file")->required();

  std::string config_path;
  auto* attack = app.add_subcommand("attack", "train a universal perturbation");
  attack->add_option("--config", config_path)->required()->check(CLI::ExistingFile);

  float epsilon = 0.02f;
  auto* rand = app.add_subcommand("rand-delta", "write a uniform random perturbation");
  rand->add_option("--seed", seed)->capture_default_str();
  rand->add_option("--epsilon", epsilon)->capture_default_str();
  rand->add_option("--out", out)->required();

  std::string delta_path;
  bool baseline = false;
  auto* eval = app.add_subcommand("eval", "evaluate a perturbation on the configured corpora");
  eval->add_option("--delta", delta_path)->required();
  eval->add_option("--config", config_path)->required()->check(CLI::ExistingFile);
  eval->add_flag("--baseline", baseline, "add random-noise baseline rows");

  std::string mode = "both";
  std::int64_t iters = 1000;
  bool parallel = false;
  auto* bench = app.add_subcommand("bench", "time encoder-only against end-to-end updates");
  bench->add_option("--config", config_path)->required()->check(CLI::ExistingFile);
  bench->add_option("--mode", mode, "encoder_only | end_to_end | both")->capture_default_str();
  bench->add_option("--iters", iters)->capture_default_str();
  bench->add_flag("--parallel", parallel, "use the OpenMP kernels");

  std::string wav_path;
  auto* spectro = app.add_subcommand("spectro", "dump log-Mel grids in dB for x, delta and x+delta");
  spectro->add_option("--wav", wav_path)->required();
  spectro->add_option("--delta", delta_path)->required();
  spectro->add_option("--out", out, "output prefix")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    if (*synth) {
      const auto entries = commands::synth(profile, count, seed, out);
      std::cout << "wrote " << entries.size() << " carriers to " << out << '\n';
    } else if (*target) {
      commands::target(command, out);
      std::cout << "wrote " << out << '\n';
    } else if (*init) {
      commands::init_model(model_seed, out);
      std::cout << "wrote " << out << '\n';
    } else if (*attack) {
      const auto summary = commands::attack(RunConfig::load(config_path), std::cout);
      std::cout << "delta " << summary.delta_path.string() << "\nlog " << summary.log_path.string() << '\n';
    } else if (*rand) {
      commands::rand_delta(seed, epsilon, out);
      std::cout << "wrote " << out << '\n';
    } else if (*eval) {
      const auto report = commands::eval(delta_path, RunConfig::load(config_path), baseline);
      std::cout << render_report_table(report);
    } else if (*bench) {
      auto config = RunConfig::load(config_path);
      if (parallel) config.parallel = true;
      commands::bench(config, parse_modes(mode), iters, std::cout);
    } else if (*spectro) {
      std::cout << commands::spectro(wav_path, delta_path, out).summary << '\n';
    }
  } catch (const ArgumentError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << '\n';
    return kIo;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  }
  return kOk;
}
