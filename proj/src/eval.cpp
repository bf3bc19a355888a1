#include "utlsa/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "json.hpp"

#include "utlsa/attack.hpp"
#include "utlsa/errors.hpp"
#include "utlsa/features.hpp"
#include "utlsa/kernels.hpp"
#include "utlsa/loss.hpp"
#include "utlsa/text.hpp"

namespace utlsa {

namespace {

template <typename Fn>
void for_each_index(std::size_t n, Fn&& fn) {
  const auto count = static_cast<std::ptrdiff_t>(n);
  const bool parallel = kernels::backend() == kernels::Backend::openmp;
#pragma omp parallel for schedule(static) if (parallel)
  for (std::ptrdiff_t i = 0; i < count; ++i) fn(static_cast<std::size_t>(i));
}

std::string fixed1(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(1) << round_percent(v);
  return os.str();
}

}  // namespace

TargetBank TargetBank::build(const EncoderParams& params, std::span<const std::string> commands) {
  if (commands.empty()) throw ArgumentError("target bank: no commands");
  TargetBank bank;
  for (const auto& c : commands) {
    const std::string norm = normalize_text(c);
    if (bank.find(norm)) throw ArgumentError("target bank: duplicate command '" + norm + "'");
    bank.entries.push_back({norm, target_embedding(params, synth_target(norm))});
  }
  return bank;
}

const BankEntry* TargetBank::find(std::string_view command) const {
  const std::string norm = normalize_text(command);
  for (const auto& e : entries)
    if (e.command == norm) return &e;
  return nullptr;
}

Latent<float> perturbed_latent(const EncoderParams& params, const Waveform& x, const Waveform& delta) {
  const Waveform padded = pad_or_trim(x, delta.size());
  return encode(params, log_mel(mix(padded, delta).view()));
}

double calibrate_tau(const EncoderParams& params, const TargetBank& bank, std::span<const Waveform> benign) {
  if (benign.empty()) throw ArgumentError("calibrate_tau: empty benign corpus");
  if (bank.entries.empty()) throw ArgumentError("calibrate_tau: empty target bank");
  const Waveform zero(kInputSamples);
  std::vector<double> mins(benign.size());
  for_each_index(benign.size(), [&](std::size_t i) {
    const Latent<float> h = perturbed_latent(params, benign[i], zero);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& e : bank.entries) best = std::min(best, static_cast<double>(cosine_frame_loss(h, e.latent)));
    mins[i] = best;
  });
  const double tau = kTauFactor * *std::min_element(mins.begin(), mins.end());
  if (!(tau > 0.0)) throw NumericalError("calibrate_tau: a benign carrier matches a bank entry exactly");
  return tau;
}

std::optional<std::string> proxy_decode(const Latent<float>& h, const TargetBank& bank) {
  if (bank.entries.empty()) throw ArgumentError("proxy_decode: empty target bank");
  const BankEntry* best = nullptr;
  double best_loss = std::numeric_limits<double>::infinity();
  for (const auto& e : bank.entries) {
    const double l = cosine_frame_loss(h, e.latent);
    if (l < best_loss) {
      best_loss = l;
      best = &e;
    }
  }
  if (best_loss < bank.tau) return best->command;
  return std::nullopt;
}

AsrRow eval_asr(const Waveform& delta, std::span<const Waveform> corpus, const std::string& corpus_name,
                const std::string& target, const TargetBank& bank, const EncoderParams& params,
                const std::set<std::string>& aliases) {
  if (corpus.empty()) throw ArgumentError("eval_asr: empty corpus '" + corpus_name + "'");
  std::vector<char> hit(corpus.size(), 0);
  for_each_index(corpus.size(), [&](std::size_t i) {
    const auto decoded = proxy_decode(perturbed_latent(params, corpus[i], delta), bank);
    hit[i] = decoded && match_target(*decoded, target, aliases);
  });
  AsrRow row{corpus_name, normalize_text(target), corpus.size(), 0, 0.0, bank.tau};
  for (const char h : hit) row.successes += h ? 1 : 0;
  row.asr_percent = 100.0 * static_cast<double>(row.successes) / static_cast<double>(row.n);
  return row;
}

double macro_average(std::span<const double> percents) {
  if (percents.empty()) throw ArgumentError("macro_average: no rows");
  double sum = 0.0;
  for (const double p : percents) sum += p;
  return sum / static_cast<double>(percents.size());
}

double round_percent(double percent) {
  // Shift by a few ulps so values such as 72.85 stored as 72.8499999... round as printed.
  const double scaled = percent * 10.0;
  const double nudged = scaled + std::copysign(1e-9 * std::max(1.0, std::abs(scaled)), scaled);
  return std::round(nudged) / 10.0;
}

std::pair<double, double> mean_and_population_std(std::span<const double> values) {
  if (values.empty()) throw ArgumentError("mean_and_population_std: no values");
  double mean = 0.0;
  for (const double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (const double v : values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(values.size());
  return {mean, std::sqrt(var)};
}

BaselineReport random_baseline(std::size_t k, float epsilon, std::span<const NamedCorpus> corpora,
                               const std::string& target, const TargetBank& bank, const EncoderParams& params,
                               const std::set<std::string>& aliases, std::uint64_t seed0) {
  if (k < 1) throw ArgumentError("random_baseline: K must be >= 1");
  if (corpora.empty()) throw ArgumentError("random_baseline: no corpora");
  BaselineReport report;
  report.k = k;
  report.epsilon = epsilon;
  report.seed0 = seed0;
  report.per_corpus.resize(corpora.size());
  for (std::size_t c = 0; c < corpora.size(); ++c) report.per_corpus[c].corpus = corpora[c].name;
  report.macro.corpus = "macro";

  for (std::size_t draw = 0; draw < k; ++draw) {
    const Waveform delta = random_universal(seed0 + draw, epsilon, kInputSamples);
    std::vector<double> percents;
    for (std::size_t c = 0; c < corpora.size(); ++c) {
      TargetBank local = bank;
      if (corpora[c].tau) local.tau = *corpora[c].tau;
      const auto row = eval_asr(delta, corpora[c].carriers, corpora[c].name, target, local, params, aliases);
      report.per_corpus[c].draws.push_back(row.asr_percent);
      percents.push_back(row.asr_percent);
    }
    report.macro.draws.push_back(macro_average(percents));
  }
  std::tie(report.macro.mean, report.macro.std) = mean_and_population_std(report.macro.draws);
  for (auto& stat : report.per_corpus) std::tie(stat.mean, stat.std) = mean_and_population_std(stat.draws);
  return report;
}

std::string render_report_records(const EvalReport& report) {
  using nlohmann::ordered_json;
  std::ostringstream os;
  for (const auto& r : report.rows) {
    ordered_json j = {{"record", "corpus"}, {"corpus", r.corpus},          {"target", r.target},
                      {"n", r.n},           {"successes", r.successes},    {"asr_percent", round_percent(r.asr_percent)},
                      {"tau", r.tau}};
    os << j.dump() << '\n';
  }
  os << ordered_json{{"record", "macro"}, {"target", report.target},
                     {"macro_avg_percent", round_percent(report.macro_avg_percent)}}
            .dump()
     << '\n';
  if (report.baseline) {
    const auto& b = *report.baseline;
    auto emit = [&](const BaselineStat& s) {
      ordered_json j = {{"record", "baseline"}, {"corpus", s.corpus},   {"k", b.k},
                        {"epsilon", b.epsilon}, {"seed0", b.seed0},     {"mean_percent", round_percent(s.mean)},
                        {"std_percent", round_percent(s.std)},          {"draws", s.draws}};
      os << j.dump() << '\n';
    };
    for (const auto& s : b.per_corpus) emit(s);
    emit(b.macro);
  }
  return os.str();
}

std::string render_report_table(const EvalReport& report) {
  std::vector<std::string> header{"Target"};
  for (const auto& r : report.rows) header.push_back(r.corpus);
  header.push_back("Macro Avg.");

  std::vector<std::vector<std::string>> body;
  std::vector<std::string> main{report.target};
  for (const auto& r : report.rows) main.push_back(fixed1(r.asr_percent));
  main.push_back(fixed1(report.macro_avg_percent));
  body.push_back(main);
  if (report.baseline) {
    std::vector<std::string> row{"Random Noise Baseline (K=" + std::to_string(report.baseline->k) + ")"};
    for (const auto& s : report.baseline->per_corpus) row.push_back(fixed1(s.mean) + " +/- " + fixed1(s.std));
    row.push_back(fixed1(report.baseline->macro.mean) + " +/- " + fixed1(report.baseline->macro.std));
    body.push_back(row);
  }

  std::vector<std::size_t> width(header.size(), 0);
  for (std::size_t c = 0; c < header.size(); ++c) {
    width[c] = header[c].size();
    for (const auto& row : body) width[c] = std::max(width[c], row[c].size());
  }
  std::ostringstream os;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c == 0)
        os << std::left << std::setw(static_cast<int>(width[c])) << cells[c];
      else
        os << "  " << std::right << std::setw(static_cast<int>(width[c])) << cells[c];
    }
    os << '\n';
  };
  std::size_t total = 0;
  for (const auto w : width) total += w + 2;
  line(header);
  os << std::string(total - 2, '-') << '\n';
  for (const auto& row : body) line(row);
  return os.str();
}

}  // namespace utlsa
