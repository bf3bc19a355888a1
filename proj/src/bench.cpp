#include "utlsa/bench.hpp"

#include <chrono>
#include <iomanip>
#include <sstream>

#include "json.hpp"
#include "utlsa/errors.hpp"
#include "utlsa/features.hpp"
#include "utlsa/kernels.hpp"
#include "utlsa/loss.hpp"

namespace utlsa {

std::string_view to_string(BenchMode mode) {
  return mode == BenchMode::encoder_only ? "encoder_only" : "end_to_end";
}

BenchMode bench_mode_from_name(std::string_view name) {
  if (name == "encoder_only" || name == "utlsa") return BenchMode::encoder_only;
  if (name == "end_to_end" || name == "e2e") return BenchMode::end_to_end;
  throw ArgumentError("unknown bench mode '" + std::string(name) + "'");
}

namespace {

std::uint64_t param_bytes(ModelParams& params, bool include_decoder) {
  std::uint64_t n = 0;
  for_each_tensor(params.encoder, [&](const TensorRef& t) { n += t.values.size_bytes(); });
  if (include_decoder)
    for_each_tensor(params.decoder, [&](const TensorRef& t) { n += t.values.size_bytes(); });
  return n;
}

}  // namespace

std::uint64_t peak_bytes_estimate(BenchMode mode) {
  // Shapes only: zero-valued parameters and a silent input give the same cache sizes.
  ModelParams params{make_encoder_shapes(), make_decoder_shapes()};
  const bool e2e = mode == BenchMode::end_to_end;
  std::uint64_t bytes = param_bytes(params, e2e);

  // delta (float) + Adam m, v and the accumulated gradient (double)
  bytes += kInputSamples * (sizeof(float) + 3 * sizeof(double));

  const std::vector<float> silent(kInputSamples, 0.0f);
  LogMelCache<float> mel_cache;
  EncoderCache<float> enc_cache;
  const Matrix<float> z = log_mel<float>(silent, &mel_cache);
  const Latent<float> h = encode(params.encoder, z, &enc_cache);
  bytes += kInputSamples * sizeof(float);  // perturbed input
  bytes += mel_cache.payload_bytes() + z.size() * sizeof(float);
  bytes += enc_cache.payload_bytes() + h.size() * sizeof(float);
  if (e2e) {
    const std::vector<int> tokens = tokenize("unlock the door", kMaxTokens);
    DecoderCache<float> dec_cache;
    decode_ce(params.decoder, h, tokens, &dec_cache);
    bytes += dec_cache.payload_bytes();
    // logits gradient at the head of the decoder backward pass
    bytes += (kMaxTokens - 1) * kVocabSize * sizeof(float);
  } else {
    bytes += h.size() * sizeof(float);  // loss gradient w.r.t. h
  }
  // latent gradient, spectrogram gradient, waveform gradient
  bytes += (h.size() + z.size() + kInputSamples) * sizeof(float);
  return bytes;
}

BenchReport bench_attack(BenchMode mode, std::int64_t iterations, const BenchInputs& inputs,
                         Waveform* delta_out) {
  if (iterations < 1) throw ArgumentError("bench: iterations must be >= 1");
  if (!inputs.params) throw ArgumentError("bench: no model parameters");
  const auto& params = *inputs.params;

  AttackConfig warm = inputs.config;
  warm.iterations = kBenchWarmup;
  warm.log_interval = kBenchWarmup;
  AttackConfig timed = inputs.config;
  timed.iterations = iterations;
  timed.log_interval = iterations;

  const std::vector<int> tokens = tokenize(inputs.target_command, kMaxTokens);
  auto run = [&](const AttackConfig& cfg) {
    if (mode == BenchMode::encoder_only) return run_utlsa(cfg, inputs.corpus, params.encoder, inputs.target);
    return run_e2e(cfg, inputs.corpus, params.encoder, params.decoder, tokens);
  };

  run(warm);
  const auto start = std::chrono::steady_clock::now();
  AttackResult result = run(timed);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  BenchReport report;
  report.mode = mode;
  report.iterations = iterations;
  report.wall_seconds = wall;
  report.iters_per_second = static_cast<double>(iterations) / wall;
  report.peak_bytes_estimate = peak_bytes_estimate(mode);
  report.parallel = kernels::backend() == kernels::Backend::openmp;
  if (delta_out) *delta_out = std::move(result.delta);
  return report;
}

namespace {

std::string format_bytes(std::uint64_t bytes) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << static_cast<double>(bytes) / (1024.0 * 1024.0) << " MiB";
  return os.str();
}

std::string format_duration(double seconds) {
  std::ostringstream os;
  const auto minutes = static_cast<long long>(seconds / 60.0);
  os << minutes << "m" << std::setw(5) << std::setfill('0') << std::fixed << std::setprecision(2)
     << seconds - 60.0 * static_cast<double>(minutes) << "s";
  return os.str();
}

std::string format_ratio(double ratio, const char* better) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(1) << ratio << "x " << better;
  return os.str();
}

}  // namespace

std::string render_bench_table(const BenchReport& encoder_only, const BenchReport& end_to_end) {
  if (encoder_only.iterations != end_to_end.iterations)
    throw ArgumentError("render_bench_table: iteration counts differ (" + std::to_string(encoder_only.iterations) +
                        " vs " + std::to_string(end_to_end.iterations) + ")");
  const double mem_ratio =
      static_cast<double>(end_to_end.peak_bytes_estimate) / static_cast<double>(encoder_only.peak_bytes_estimate);
  const double time_ratio = end_to_end.wall_seconds / encoder_only.wall_seconds;
  const double tput_ratio = encoder_only.iters_per_second / end_to_end.iters_per_second;

  const std::string time_label = "Training time (" + std::to_string(encoder_only.iterations) + " iters)";
  std::ostringstream tput_e2e, tput_enc;
  tput_e2e << std::fixed << std::setprecision(2) << end_to_end.iters_per_second;
  tput_enc << std::fixed << std::setprecision(2) << encoder_only.iters_per_second;

  const std::vector<std::vector<std::string>> rows{
      {"Metric", "End-to-end", "Encoder-only", "Ratio"},
      {"Peak memory (estimate)", format_bytes(end_to_end.peak_bytes_estimate),
       format_bytes(encoder_only.peak_bytes_estimate), format_ratio(mem_ratio, "lower")},
      {time_label, format_duration(end_to_end.wall_seconds), format_duration(encoder_only.wall_seconds),
       format_ratio(time_ratio, "faster")},
      {"Throughput (iters/s)", tput_e2e.str(), tput_enc.str(), format_ratio(tput_ratio, "higher")},
  };
  std::vector<std::size_t> width(4, 0);
  for (const auto& r : rows)
    for (std::size_t c = 0; c < 4; ++c) width[c] = std::max(width[c], r[c].size());
  std::ostringstream os;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t c = 0; c < 4; ++c) {
      if (c == 0)
        os << std::left << std::setw(static_cast<int>(width[c])) << rows[i][c];
      else
        os << "  " << std::right << std::setw(static_cast<int>(width[c])) << rows[i][c];
    }
    os << '\n';
    if (i == 0) {
      std::size_t total = 0;
      for (const auto w : width) total += w + 2;
      os << std::string(total - 2, '-') << '\n';
    }
  }
  return os.str();
}

std::string render_bench_record(const BenchReport& report) {
  nlohmann::ordered_json j = {{"record", "bench"},
                              {"mode", to_string(report.mode)},
                              {"iterations", report.iterations},
                              {"wall_seconds", report.wall_seconds},
                              {"iters_per_second", report.iters_per_second},
                              {"peak_bytes_estimate", report.peak_bytes_estimate},
                              {"parallel", report.parallel}};
  return j.dump() + '\n';
}

}  // namespace utlsa
