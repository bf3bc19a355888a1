#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "utlsa/model.hpp"
#include "utlsa/signal.hpp"

namespace utlsa {

struct BankEntry {
  std::string command;  // normalized
  Latent<float> latent;
};

// Known target commands with their latent trajectories, plus the rejection
// threshold tau used by proxy_decode.
struct TargetBank {
  std::vector<BankEntry> entries;
  double tau = 0.0;

  // Encodes synth_target(command) for every command. Throws on duplicates after
  // normalization. tau is left at 0 until calibrated or set.
  static TargetBank build(const EncoderParams& params, std::span<const std::string> commands);
  const BankEntry* find(std::string_view command) const;
};

// Latent of pad_or_trim(x) + delta.
Latent<float> perturbed_latent(const EncoderParams& params, const Waveform& x, const Waveform& delta);

// tau = 0.9 * min over benign carriers of the min loss to any bank entry.
inline constexpr double kTauFactor = 0.9;
double calibrate_tau(const EncoderParams& params, const TargetBank& bank, std::span<const Waveform> benign);

// Nearest bank command under the cosine frame loss if that loss is below tau.
std::optional<std::string> proxy_decode(const Latent<float>& h, const TargetBank& bank);

struct AsrRow {
  std::string corpus;
  std::string target;
  std::size_t n = 0;
  std::size_t successes = 0;
  double asr_percent = 0.0;
  double tau = 0.0;
};

AsrRow eval_asr(const Waveform& delta, std::span<const Waveform> corpus, const std::string& corpus_name,
                const std::string& target, const TargetBank& bank, const EncoderParams& params,
                const std::set<std::string>& aliases);

double macro_average(std::span<const double> percents);

// One decimal, half away from zero.
double round_percent(double percent);

// tau, when set, replaces the bank threshold for this corpus.
struct NamedCorpus {
  std::string name;
  std::vector<Waveform> carriers;
  std::optional<double> tau;
};

struct BaselineStat {
  std::string corpus;  // "macro" for the macro-average row
  double mean = 0.0;
  double std = 0.0;  // population standard deviation over draws
  std::vector<double> draws;
};

struct BaselineReport {
  std::size_t k = 0;
  double epsilon = 0.0;
  std::uint64_t seed0 = 0;
  std::vector<BaselineStat> per_corpus;
  BaselineStat macro;
};

// delta_k = random_universal(seed0 + k, epsilon, T) applied unchanged to every utterance.
BaselineReport random_baseline(std::size_t k, float epsilon, std::span<const NamedCorpus> corpora,
                               const std::string& target, const TargetBank& bank, const EncoderParams& params,
                               const std::set<std::string>& aliases, std::uint64_t seed0);

std::pair<double, double> mean_and_population_std(std::span<const double> values);

struct EvalReport {
  std::string target;
  std::vector<AsrRow> rows;
  double macro_avg_percent = 0.0;
  std::optional<BaselineReport> baseline;
};

// One JSON object per line: corpus rows, the macro row, then baseline rows.
std::string render_report_records(const EvalReport& report);
// Aligned text table: target row with per-corpus ASR and macro average, then
// the random-noise baseline row when present.
std::string render_report_table(const EvalReport& report);

}  // namespace utlsa
