// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "utlsa/attack.hpp"
#include "utlsa/bench.hpp"
#include "utlsa/commands.hpp"
#include "utlsa/config.hpp"
#include "utlsa/eval.hpp"
#include "utlsa/features.hpp"
#include "utlsa/kernels.hpp"
#include "utlsa/loss.hpp"
#include "utlsa/spectro.hpp"

using namespace utlsa;

namespace {

// ---- pinned thresholds ----
constexpr double kPipelineRelTol = 1e-2;
constexpr double kStageRelTol = 1e-3;
constexpr double kGradCheckSeconds = 60.0;
constexpr double kFdStep = 1e-5;
constexpr int kGradCoords = 20;
constexpr int kGradCarriers = 3;
constexpr double kLossLawTol = 1e-6;
constexpr double kMinLossReduction = 0.5;
constexpr double kTargetAsr = 70.0;
constexpr double kMinThroughputRatio = 1.5;
constexpr double kMinPowerGapDb = 10.0;
constexpr double kMonotoneSlack = 0.05;

// ---- shared acceptance setup ----
constexpr std::uint64_t kModelSeed = 7;
constexpr std::uint64_t kTrainSeed = 1000;
constexpr std::uint64_t kReadSeed = 5000;
constexpr std::uint64_t kTelephonySeed = 6000;
constexpr std::uint64_t kKeywordSeed = 7000;
constexpr std::uint64_t kBaselineSeed = 900;
constexpr std::size_t kTrainCount = 64;
constexpr std::size_t kHeldOutCount = 50;
const std::string kCommand = "unlock the door";
const std::vector<std::string> kBank = {"call mom",   "open the window", "turn off the lights", "play music",
                                        "hey qwen",   "send a message",  "unlock the door"};

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const Outcome& o) {
  std::printf("[%s] criterion %d %s: %s\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str());
  std::fflush(stdout);
  if (!o.pass) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<Waveform> corpus(const CarrierProfile& p, std::size_t n, std::uint64_t seed) {
  std::vector<Waveform> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(synth_carrier(seed + i, p));
  return out;
}

const ModelParams& params() {
  static const ModelParams p = init_params(kModelSeed);
  return p;
}

AttackConfig acceptance_attack(double epsilon, std::int64_t iterations) {
  AttackConfig c;
  c.epsilon = epsilon;
  c.iterations = iterations;
  c.lr = 5e-3;
  c.batch = 1;
  c.grad_accum = 8;
  c.seed = 11;
  c.log_interval = 1;
  return c;
}

double rel_err(double fd, double an) {
  const double d = std::max(std::abs(fd), std::abs(an));
  return d == 0.0 ? 0.0 : std::abs(fd - an) / d;
}

template <typename F>
double central(F&& f, std::vector<double>& v, std::size_t i) {
  const double saved = v[i];
  v[i] = saved + kFdStep;
  const double p = f();
  v[i] = saved - kFdStep;
  const double m = f();
  v[i] = saved;
  return (p - m) / (2.0 * kFdStep);
}

Matrix<double> random_upstream(std::size_t r, std::size_t c, std::uint64_t seed) {
  Rng rng(seed);
  Matrix<double> m(r, c);
  for (auto& v : m.data) v = rng.normal();
  return m;
}

double inner(const Matrix<double>& a, const Matrix<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.data[i] * b.data[i];
  return s;
}

// ---------------------------------------------------------------- 1

Outcome gradient_correctness() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto& enc = params().encoder;
  const auto target = target_embedding(enc, synth_target(kCommand)).cast<double>();
  double worst_pipeline = 0.0, worst_features = 0.0, worst_encoder = 0.0, worst_loss = 0.0;
  Rng pick(2024);

  for (int c = 0; c < kGradCarriers; ++c) {
    const Waveform w = synth_carrier(31 + static_cast<std::uint64_t>(c), CarrierProfile::read());
    // Perturbed input x + delta with a random in-budget delta.
    const Waveform d = random_universal(77 + static_cast<std::uint64_t>(c), 0.02f, kInputSamples);
    std::vector<double> x(kInputSamples);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(w.samples[i]) + d.samples[i];
    auto span_x = [&] { return std::span<const double>(x); };

    const auto g = utlsa_pipeline_grad<double>(enc, span_x(), target);
    auto pipeline_loss = [&] { return utlsa_pipeline_grad<double>(enc, span_x(), target).loss; };
    for (int k = 0; k < kGradCoords; ++k) {
      const auto i = static_cast<std::size_t>(pick.uniform_int(0, kInputSamples - 1));
      worst_pipeline = std::max(worst_pipeline, rel_err(central(pipeline_loss, x, i), g.grad[i]));
    }

    const auto up_z = random_upstream(kFrames, kMelBins, 500 + static_cast<std::uint64_t>(c));
    const auto gz = log_mel_vjp<double>(span_x(), up_z);
    auto feat = [&] { return inner(log_mel<double>(span_x()), up_z); };
    for (int k = 0; k < kGradCoords; ++k) {
      const auto i = static_cast<std::size_t>(pick.uniform_int(0, kInputSamples - 1));
      worst_features = std::max(worst_features, rel_err(central(feat, x, i), gz[i]));
    }

    Matrix<double> z = log_mel<double>(span_x());
    const auto up_h = random_upstream(kLatentFrames, kModelDim, 600 + static_cast<std::uint64_t>(c));
    const auto gh = encode_vjp<double>(enc, z, up_h);
    auto encf = [&] { return inner(encode<double>(enc, z), up_h); };
    for (int k = 0; k < kGradCoords; ++k) {
      const auto i = static_cast<std::size_t>(pick.uniform_int(0, static_cast<std::int64_t>(z.size()) - 1));
      worst_encoder = std::max(worst_encoder, rel_err(central(encf, z.data, i), gh.data[i]));
    }

    Matrix<double> h = encode<double>(enc, z);
    const auto gl = cosine_frame_loss_vjp(h, target);
    auto lossf = [&] { return cosine_frame_loss(h, target); };
    for (int k = 0; k < kGradCoords; ++k) {
      const auto i = static_cast<std::size_t>(pick.uniform_int(0, static_cast<std::int64_t>(h.size()) - 1));
      worst_loss = std::max(worst_loss, rel_err(central(lossf, h.data, i), gl.grad.data[i]));
    }
  }
  const double elapsed = seconds_since(t0);
  const bool pass = worst_pipeline < kPipelineRelTol && worst_features < kStageRelTol &&
                    worst_encoder < kStageRelTol && worst_loss < kStageRelTol && elapsed < kGradCheckSeconds;
  return {pass, fmt("max rel err pipeline %.2e (< %.0e), log_mel %.2e, encoder %.2e, loss %.2e (< %.0e); "
                    "%d coords x %d carriers in %.1f s (< %.0f s)",
                    worst_pipeline, kPipelineRelTol, worst_features, worst_encoder, worst_loss, kStageRelTol,
                    kGradCoords, kGradCarriers, elapsed, kGradCheckSeconds)};
}

// ---------------------------------------------------------------- 3

Outcome loss_laws() {
  Rng rng(5);
  Matrix<double> a(kLatentFrames, kModelDim);
  for (auto& v : a.data) v = rng.normal();
  Matrix<double> neg = a, scaled = a;
  for (auto& v : neg.data) v = -v;
  for (auto& v : scaled.data) v *= 4.0;
  Matrix<double> e1(2, 3), e2(2, 3);
  e1(0, 0) = 1.0;
  e1(1, 1) = 2.0;
  e2(0, 1) = 3.0;
  e2(1, 2) = 1.0;

  const double identical = cosine_frame_loss(a, a);
  const double antipodal = cosine_frame_loss(a, neg);
  const double scale = cosine_frame_loss(a, scaled);
  const double ortho = cosine_frame_loss(e1, e2);
  const bool values = std::abs(identical) <= kLossLawTol && std::abs(antipodal - 2.0) <= kLossLawTol &&
                      std::abs(scale) <= kLossLawTol && std::abs(ortho - 1.0) <= kLossLawTol;

  const float eps = 0.02f;
  const Waveform raw(std::vector<float>{0.5f, -0.5f, 0.019f, -0.02f, 0.02f, 0.0f, 1e9f, -1e9f});
  const Waveform once = project_linf(raw, eps);
  const Waveform twice = project_linf(once, eps);
  const std::vector<float> expect = {eps, -eps, 0.019f, -eps, eps, 0.0f, eps, -eps};
  const bool proj = once.samples == expect && twice.samples == once.samples;

  return {values && proj, fmt("identical %.1e, antipodal %.9f, scaled %.1e, orthogonal %.9f (tol %.0e); "
                              "projection clamp exact %s, idempotent %s",
                              identical, antipodal, scale, ortho, kLossLawTol, once.samples == expect ? "yes" : "no",
                              twice.samples == once.samples ? "yes" : "no")};
}

// ---------------------------------------------------------------- 2, 4, 5, 7

struct MainRun {
  AttackResult result;
  std::int64_t steps = 0;
  std::int64_t step_violations = 0;
  double seconds = 0.0;
};

MainRun main_attack(const std::vector<Waveform>& train) {
  MainRun run;
  const auto cfg = acceptance_attack(0.05, 2000);
  const float eps = static_cast<float>(cfg.epsilon);
  const auto t0 = std::chrono::steady_clock::now();
  run.result = run_utlsa(cfg, train, params().encoder, synth_target(kCommand),
                         [&](const PerturbationState& s, double) {
                           ++run.steps;
                           if (peak_abs(s.delta.view()) > eps) ++run.step_violations;
                         });
  run.seconds = seconds_since(t0);
  return run;
}

Outcome budget_invariant(const MainRun& run) {
  const double eps = static_cast<double>(static_cast<float>(0.05));
  std::int64_t logged_violations = 0;
  for (const auto& r : run.result.log)
    if (r.linf > eps) ++logged_violations;
  const bool pass = run.steps == 2000 && run.result.log.size() == 2000 && logged_violations == 0 &&
                    run.step_violations == 0;
  return {pass, fmt("%zu logged records over %lld iterations, %lld logged and %lld per-step violations of "
                    "||delta||_inf <= eps=0.05 (float), final ||delta||_inf %.9g",
                    run.result.log.size(), static_cast<long long>(run.steps),
                    static_cast<long long>(logged_violations), static_cast<long long>(run.step_violations),
                    static_cast<double>(peak_abs(run.result.delta.view())))};
}

struct Eval {
  double clean_loss = 0.0;
  double attacked_loss = 0.0;
  double asr = 0.0;
  double clean_asr = 0.0;
  double random_mean = 0.0;
  double random_std = 0.0;
  double tau = 0.0;
};

Eval evaluate_read(const Waveform& delta, const std::vector<Waveform>& held_out, TargetBank& bank) {
  Eval e;
  const auto& enc = params().encoder;
  const auto target = target_embedding(enc, synth_target(kCommand));
  const Waveform zero(kInputSamples);
  e.clean_loss = mean_corpus_loss(enc, zero, held_out, target);
  e.attacked_loss = mean_corpus_loss(enc, delta, held_out, target);
  bank.tau = calibrate_tau(enc, bank, held_out);
  e.tau = bank.tau;
  e.asr = eval_asr(delta, held_out, "read", kCommand, bank, enc, {}).asr_percent;
  e.clean_asr = eval_asr(zero, held_out, "read", kCommand, bank, enc, {}).asr_percent;
  const std::vector<NamedCorpus> named = {{"read", held_out, bank.tau}};
  const auto base = random_baseline(5, 0.05f, named, kCommand, bank, enc, {}, kBaselineSeed);
  e.random_mean = base.per_corpus[0].mean;
  e.random_std = base.per_corpus[0].std;
  return e;
}

Outcome universality(const Eval& e, double train_seconds) {
  const double reduction = 1.0 - e.attacked_loss / e.clean_loss;
  const bool baselines_zero = e.clean_asr == 0.0 && e.random_mean == 0.0;
  const bool full = reduction >= kMinLossReduction && e.asr >= kTargetAsr && baselines_zero;
  const bool degraded = reduction >= kMinLossReduction && e.asr > e.clean_asr && e.asr > e.random_mean;
  std::string verdict = full ? "full target met" : degraded ? "degraded form met (ASR below 70%)" : "not met";
  return {full || degraded,
          fmt("held-out read loss %.4f -> %.4f (reduction %.1f%%, need >= %.0f%%); proxy ASR %.1f%% "
              "(target >= %.0f%%), clean %.1f%%, random K=5 %.1f +/- %.1f%%; tau %.4f; train %.0f s; %s",
              e.clean_loss, e.attacked_loss, 100.0 * reduction, 100.0 * kMinLossReduction, e.asr, kTargetAsr,
              e.clean_asr, e.random_mean, e.random_std, e.tau, train_seconds, verdict.c_str())};
}

Outcome transfer(const Waveform& delta, const std::vector<Waveform>& read, TargetBank bank) {
  const auto& enc = params().encoder;
  std::vector<NamedCorpus> corpora = {{"read", read, std::nullopt},
                                      {"telephony", corpus(CarrierProfile::telephony(), kHeldOutCount, kTelephonySeed),
                                       std::nullopt},
                                      {"keyword", corpus(CarrierProfile::keyword(), kHeldOutCount, kKeywordSeed),
                                       std::nullopt}};
  EvalReport report;
  report.target = kCommand;
  std::vector<double> percents;
  for (auto& c : corpora) {
    c.tau = calibrate_tau(enc, bank, c.carriers);
    bank.tau = *c.tau;
    report.rows.push_back(eval_asr(delta, c.carriers, c.name, kCommand, bank, enc, {}));
    percents.push_back(report.rows.back().asr_percent);
  }
  report.macro_avg_percent = macro_average(percents);
  const std::string table = render_report_table(report);
  std::printf("%s", table.c_str());

  const std::vector<double> row_a = {78.1, 79.4, 61.0};
  const std::vector<double> row_b = {97.7, 94.5, 85.5};
  const double ma = round_percent(macro_average(row_a));
  const double mb = round_percent(macro_average(row_b));
  const bool arithmetic = ma == 72.8 && mb == 92.6;
  const bool shape = report.rows.size() == 3 && table.find("Macro Avg.") != std::string::npos;
  return {arithmetic && shape,
          fmt("three-row table read %.1f / telephony %.1f / keyword %.1f, macro %.1f; "
              "macro_average([78.1,79.4,61.0]) = %.1f, macro_average([97.7,94.5,85.5]) = %.1f",
              round_percent(percents[0]), round_percent(percents[1]), round_percent(percents[2]),
              round_percent(report.macro_avg_percent), ma, mb)};
}

double power_mean_db(const Matrix<float>& grid_db) {
  double sum = 0.0;
  for (const float v : grid_db.data) sum += std::pow(10.0, static_cast<double>(v) / 10.0);
  return 10.0 * std::log10(sum / static_cast<double>(grid_db.size()));
}

Outcome power_property(const Waveform& delta, const Waveform& carrier) {
  const SpectroDump d = spectro(carrier, delta);
  const double gap = d.mean_db_carrier - d.mean_db_delta;
  const double energy_gap = power_mean_db(d.carrier_db) - power_mean_db(d.delta_db);
  return {gap >= kMinPowerGapDb,
          fmt("mean log-Mel power carrier %.2f dB, delta %.2f dB, gap %.2f dB (need >= %.0f dB); "
              "informational: max |x+delta - x| = %.2f dB, gap of bin-averaged power %.2f dB",
              d.mean_db_carrier, d.mean_db_delta, gap, kMinPowerGapDb, d.max_abs_diff_db, energy_gap)};
}

// ---------------------------------------------------------------- 6

Outcome efficiency(const std::vector<Waveform>& train) {
  kernels::set_backend(kernels::Backend::serial);
  const BenchInputs inputs{acceptance_attack(0.05, 100), train, &params(), synth_target(kCommand), kCommand};
  const auto enc = bench_attack(BenchMode::encoder_only, 100, inputs);
  const auto e2e = bench_attack(BenchMode::end_to_end, 100, inputs);
  std::printf("%s", render_bench_table(enc, e2e).c_str());
  const double ratio = enc.iters_per_second / e2e.iters_per_second;
  const bool pass = ratio >= kMinThroughputRatio && enc.peak_bytes_estimate < e2e.peak_bytes_estimate;
  return {pass, fmt("throughput encoder-only %.2f it/s vs end-to-end %.2f it/s, ratio %.2fx (need >= %.1fx); "
                    "peak memory estimate %llu < %llu bytes",
                    enc.iters_per_second, e2e.iters_per_second, ratio, kMinThroughputRatio,
                    static_cast<unsigned long long>(enc.peak_bytes_estimate),
                    static_cast<unsigned long long>(e2e.peak_bytes_estimate))};
}

// ---------------------------------------------------------------- 8

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

Outcome determinism() {
  const auto root = std::filesystem::temp_directory_path() /
                    ("utlsa_acceptance_" + std::to_string(std::random_device{}()));
  std::vector<std::string> runs;
  for (const char* name : {"a", "b"}) {
    const auto dir = root / name;
    commands::synth("read", 16, kTrainSeed, dir / "train");
    commands::init_model(kModelSeed, dir / "weights.utls");
    const std::string cfg_text = R"({
      "model": {"weights": "weights.utls"},
      "attack": {"epsilon": 0.05, "iterations": 50, "grad_accum": 8, "seed": 11, "log_interval": 10},
      "train": {"name": "train", "manifest": "train/manifest.tsv"},
      "eval": {"corpora": [{"name": "read", "count": 20, "seed": 5000},
                           {"name": "keyword", "profile": "keyword", "count": 20, "seed": 7000}],
               "baseline": {"k": 2, "seed": 900}},
      "target": {"command": "unlock the door", "bank": ["call mom", "hey qwen"]},
      "output": {"dir": "out"}
    })";
    const RunConfig cfg = RunConfig::parse(cfg_text, dir);
    std::ostringstream sink;
    const auto summary = commands::attack(cfg, sink);
    commands::eval(summary.delta_path, cfg, true);
    std::string artifacts;
    for (const auto& e : read_manifest(dir / "train/manifest.tsv")) artifacts += slurp(dir / "train" / e.file);
    artifacts += slurp(dir / "train/manifest.tsv");
    artifacts += '|' + slurp(dir / "weights.utls");
    artifacts += '|' + slurp(summary.delta_path);
    artifacts += '|' + slurp(dir / "out/report.jsonl");
    runs.push_back(std::move(artifacts));
  }
  std::error_code ec;
  std::filesystem::remove_all(root, ec);
  const bool pass = runs[0] == runs[1];
  return {pass, fmt("synth (16 WAV + manifest), weights, delta and report records %s across two runs (%zu bytes)",
                    pass ? "bit-identical" : "DIFFER", runs[0].size())};
}

// ---------------------------------------------------------------- 9

Outcome monotone_budget(const std::vector<Waveform>& train, const std::vector<Waveform>& held_out) {
  const auto target = target_embedding(params().encoder, synth_target(kCommand));
  std::vector<double> losses;
  for (const double eps : {0.01, 0.02, 0.05}) {
    const auto r = run_utlsa(acceptance_attack(eps, 1000), train, params().encoder, synth_target(kCommand));
    losses.push_back(mean_corpus_loss(params().encoder, r.delta, held_out, target));
  }
  const bool pass = losses[1] <= (1.0 + kMonotoneSlack) * losses[0] && losses[2] <= (1.0 + kMonotoneSlack) * losses[1];
  return {pass, fmt("final held-out loss eps=0.01: %.4f, eps=0.02: %.4f, eps=0.05: %.4f "
                    "(non-increasing within %.0f%%)",
                    losses[0], losses[1], losses[2], 100.0 * kMonotoneSlack)};
}

}  // namespace

int main() {
  kernels::set_backend(kernels::Backend::serial);
  const auto train = corpus(CarrierProfile::read(), kTrainCount, kTrainSeed);
  const auto held_out = corpus(CarrierProfile::read(), kHeldOutCount, kReadSeed);

  report(1, "gradient correctness", gradient_correctness());

  const MainRun run = main_attack(train);
  report(2, "budget invariant", budget_invariant(run));
  report(3, "loss laws", loss_laws());

  TargetBank bank = TargetBank::build(params().encoder, kBank);
  const Eval e = evaluate_read(run.result.delta, held_out, bank);
  report(4, "desk-scale universality", universality(e, run.seconds));
  report(5, "cross-profile transfer", transfer(run.result.delta, held_out, bank));
  report(6, "efficiency direction", efficiency(train));
  report(7, "spectral power gap", power_property(run.result.delta, held_out.front()));
  report(8, "determinism", determinism());
  report(9, "monotone budget", monotone_budget(train, held_out));

  std::printf("%d of 9 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
