#include "utlsa/commands.hpp"

#include <fstream>
#include <ostream>

#include "json.hpp"
#include "utlsa/kernels.hpp"
#include "utlsa/spectro.hpp"
#include "utlsa/text.hpp"
#include "utlsa/weights_io.hpp"

namespace utlsa::commands {

namespace {

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) ensure_dir(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path.string());
  f << text;
  if (!f) throw IoError("write failed for " + path.string());
}

void apply_backend(const RunConfig& config) {
  kernels::set_backend(config.parallel ? kernels::Backend::openmp : kernels::Backend::serial);
}

}  // namespace

std::vector<ManifestEntry> synth(const std::string& profile, std::size_t count, std::uint64_t seed,
                                 const std::filesystem::path& out_dir) {
  if (count == 0) throw ArgumentError("synth: count must be > 0");
  return write_corpus(profile, count, seed, out_dir);
}

void target(const std::string& command, const std::filesystem::path& out) {
  if (out.has_parent_path()) ensure_dir(out.parent_path());
  write_wav(synth_target(command), out);
}

void init_model(std::uint64_t seed, const std::filesystem::path& out) {
  if (out.has_parent_path()) ensure_dir(out.parent_path());
  save_weights(init_params(seed), out);
}

std::string log_record(const LogRecord& r) {
  nlohmann::ordered_json j = {{"iter", r.iter}, {"loss", r.loss}, {"linf", r.linf}, {"elapsed_s", r.elapsed_s}};
  return j.dump();
}

AttackSummary attack(const RunConfig& config, std::ostream& progress) {
  apply_backend(config);
  const ModelParams params = load_model(config);
  const std::vector<Waveform> corpus = materialize(config.train);

  AttackResult result;
  if (config.mode == "e2e") {
    const auto tokens = tokenize(config.command, kMaxTokens);
    result = run_e2e(config.attack, corpus, params.encoder, params.decoder, tokens);
  } else {
    result = run_utlsa(config.attack, corpus, params.encoder, synth_target(config.command));
  }

  AttackSummary summary;
  const auto dir = config.output_dir();
  ensure_dir(dir);
  summary.delta_path = dir / config.output.delta;
  summary.log_path = dir / config.output.log;
  save_delta(summary.delta_path, {result.delta, static_cast<float>(config.attack.epsilon), config.attack.seed});
  std::string log;
  for (const auto& r : result.log) log += log_record(r) + '\n';
  write_text(summary.log_path, log);

  summary.final_loss = result.log.empty() ? 0.0 : result.log.back().loss;
  summary.linf = peak_abs(result.delta.view());
  progress << "mode=" << config.mode << " iterations=" << config.attack.iterations
           << " final_loss=" << summary.final_loss << " linf=" << summary.linf << " epsilon=" << config.attack.epsilon
           << '\n';
  return summary;
}

void rand_delta(std::uint64_t seed, float epsilon, const std::filesystem::path& out) {
  if (out.has_parent_path()) ensure_dir(out.parent_path());
  save_delta(out, {random_universal(seed, epsilon, kInputSamples), epsilon, seed});
}

EvalReport eval(const std::filesystem::path& delta_path, const RunConfig& config, bool with_baseline) {
  apply_backend(config);
  if (config.eval_corpora.empty()) throw ConfigError("eval.corpora: at least one corpus is required");
  const DeltaFile delta = load_delta(delta_path);
  const ModelParams params = load_model(config);
  TargetBank bank = TargetBank::build(params.encoder, config.bank);
  // A fixed tau or an explicit calibration set gives one shared threshold;
  // otherwise each corpus is calibrated on its own clean carriers.
  std::optional<double> shared = config.tau;
  if (!shared && !config.calibration.empty()) {
    std::vector<Waveform> benign;
    for (const auto& spec : config.calibration) {
      auto carriers = materialize(spec);
      benign.insert(benign.end(), std::make_move_iterator(carriers.begin()), std::make_move_iterator(carriers.end()));
    }
    shared = calibrate_tau(params.encoder, bank, benign);
  }

  EvalReport report;
  report.target = normalize_text(config.command);
  std::vector<NamedCorpus> corpora;
  std::vector<double> percents;
  const Waveform d = pad_or_trim(delta.delta, kInputSamples);
  for (const auto& spec : config.eval_corpora) {
    NamedCorpus c{spec.name, materialize(spec), shared};
    if (!c.tau) c.tau = calibrate_tau(params.encoder, bank, c.carriers);
    bank.tau = *c.tau;
    report.rows.push_back(eval_asr(d, c.carriers, c.name, config.command, bank, params.encoder, config.aliases));
    percents.push_back(report.rows.back().asr_percent);
    corpora.push_back(std::move(c));
  }
  report.macro_avg_percent = macro_average(percents);

  if (with_baseline) {
    const BaselineSpec spec = config.baseline.value_or(BaselineSpec{});
    const float eps = static_cast<float>(spec.epsilon.value_or(delta.epsilon));
    report.baseline =
        random_baseline(spec.k, eps, corpora, config.command, bank, params.encoder, config.aliases, spec.seed);
  }

  const auto dir = config.output_dir();
  write_text(dir / config.output.report, render_report_records(report));
  write_text(dir / config.output.table, render_report_table(report));
  return report;
}

std::vector<BenchReport> bench(const RunConfig& config, const std::vector<BenchMode>& modes, std::int64_t iterations,
                               std::ostream& out) {
  apply_backend(config);
  const ModelParams params = load_model(config);
  const std::vector<Waveform> corpus = materialize(config.train);
  BenchInputs inputs{config.attack, corpus, &params, synth_target(config.command), config.command};

  std::vector<BenchReport> reports;
  std::string records;
  for (const auto mode : modes) {
    reports.push_back(bench_attack(mode, iterations, inputs));
    records += render_bench_record(reports.back());
    out << render_bench_record(reports.back());
  }
  const auto dir = config.output_dir();
  write_text(dir / config.output.bench, records);

  const BenchReport* enc = nullptr;
  const BenchReport* e2e = nullptr;
  for (const auto& r : reports) (r.mode == BenchMode::encoder_only ? enc : e2e) = &r;
  if (enc && e2e) {
    const std::string table = render_bench_table(*enc, *e2e);
    write_text(dir / config.output.bench_table, table);
    out << table;
  }
  return reports;
}

SpectroResult spectro(const std::filesystem::path& wav, const std::filesystem::path& delta,
                      const std::string& out_prefix) {
  const Waveform x = read_wav(wav);
  const DeltaFile d = load_delta(delta);
  const SpectroDump dump = utlsa::spectro(x, d.delta);
  const std::filesystem::path prefix(out_prefix);
  if (prefix.has_parent_path()) ensure_dir(prefix.parent_path());
  write_spectro(dump, out_prefix);
  return {spectro_summary(dump), dump.mean_db_delta, dump.mean_db_carrier, dump.max_abs_diff_db};
}

}  // namespace utlsa::commands
