#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "utlsa/model.hpp"
#include "utlsa/rng.hpp"
#include "utlsa/signal.hpp"

namespace utlsa {

struct AttackConfig {
  double epsilon = 0.02;
  std::int64_t iterations = 30000;
  double lr = 5e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t batch = 1;
  std::size_t grad_accum = 64;
  std::uint64_t seed = 0;
  std::size_t samples = kInputSamples;
  std::int64_t log_interval = 100;

  void validate() const;
};

// delta plus Adam moments. ||delta||_inf <= epsilon after every update.
struct PerturbationState {
  Waveform delta;
  std::vector<double> m, v;
  std::int64_t step = 0;
  float epsilon = 0.0f;
  double lr = 5e-3, beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;

  static PerturbationState zeros(const AttackConfig& config);
};

struct LogRecord {
  std::int64_t iter = 0;
  double loss = 0.0;  // mean over the accumulation window
  double linf = 0.0;
  double elapsed_s = 0.0;
};
using TrainLog = std::vector<LogRecord>;

struct AttackResult {
  Waveform delta;
  TrainLog log;
};

struct GradResult {
  double loss = 0.0;
  std::vector<float> grad;  // d loss / d delta
};

// Loss and gradient for one perturbed input x + delta (already length T).
using GradFn = std::function<GradResult(const Waveform& perturbed)>;

// Called after every applied update; used for budget instrumentation.
using StepObserver = std::function<void(const PerturbationState&, double mean_loss)>;

Waveform project_linf(const Waveform& delta, float epsilon);

// H_tgt = encoder(log_mel(pad_or_trim(x_tgt, T))).
Latent<float> target_embedding(const EncoderParams& params, const Waveform& x_tgt);

// Cosine frame loss of encoder(log_mel(x)) against target, with d/dx.
template <typename T>
struct PipelineGrad {
  T loss = T{0};
  std::vector<T> grad;
};
template <typename T>
PipelineGrad<T> utlsa_pipeline_grad(const EncoderParams& params, std::span<const T> x,
                                    const Latent<T>& target);

// Encoder-only objective at x + delta. d loss/d delta == d loss/d (x + delta).
GradResult utlsa_grad(const EncoderParams& params, const Waveform& delta, const Waveform& x,
                      const Latent<float>& target);

// Decoder cross-entropy objective at x + delta (end-to-end baseline).
GradResult e2e_grad(const EncoderParams& enc, const DecoderParams& dec, const Waveform& delta,
                    const Waveform& x, std::span<const int> tokens);

// Epoch-wise seeded shuffle, consumed sequentially.
class MinibatchSampler {
 public:
  MinibatchSampler(std::size_t corpus_size, std::uint64_t seed);
  std::size_t next();

 private:
  void reshuffle();
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
  Rng rng_;
};

// One Adam update from the mean gradient over the given carriers (G micro-batches
// of `batch` carriers each, flattened). Returns the mean loss.
double attack_step(PerturbationState& state, std::span<const Waveform* const> carriers, const GradFn& grad_fn);

// Generic projected-Adam loop shared by both attack modes.
AttackResult run_attack(const AttackConfig& config, std::span<const Waveform> corpus, const GradFn& grad_fn,
                        const StepObserver& observer = {});

AttackResult run_utlsa(const AttackConfig& config, std::span<const Waveform> corpus, const EncoderParams& params,
                       const Waveform& target, const StepObserver& observer = {});

AttackResult run_e2e(const AttackConfig& config, std::span<const Waveform> corpus, const EncoderParams& enc,
                     const DecoderParams& dec, std::span<const int> target_tokens,
                     const StepObserver& observer = {});

// i.i.d. U[-epsilon, +epsilon] samples.
Waveform random_universal(std::uint64_t seed, float epsilon, std::size_t samples);

// Mean cosine frame loss of encoder(log_mel(pad(x) + delta)) against target over a corpus.
double mean_corpus_loss(const EncoderParams& params, const Waveform& delta, std::span<const Waveform> corpus,
                        const Latent<float>& target);

}  // namespace utlsa
