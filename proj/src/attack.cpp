#include "utlsa/attack.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

#include "utlsa/errors.hpp"
#include "utlsa/features.hpp"
#include "utlsa/kernels.hpp"
#include "utlsa/loss.hpp"

namespace utlsa {

void AttackConfig::validate() const {
  if (!(epsilon > 0.0)) throw ArgumentError("attack: epsilon must be > 0");
  if (iterations < 1) throw ArgumentError("attack: iterations must be >= 1");
  if (batch < 1) throw ArgumentError("attack: batch must be >= 1");
  if (grad_accum < 1) throw ArgumentError("attack: grad_accum must be >= 1");
  if (!(lr > 0.0)) throw ArgumentError("attack: lr must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw ArgumentError("attack: beta1/beta2 must be in [0, 1)");
  if (samples == 0) throw ArgumentError("attack: T must be > 0");
  if (log_interval < 1) throw ArgumentError("attack: log_interval must be >= 1");
}

PerturbationState PerturbationState::zeros(const AttackConfig& config) {
  PerturbationState s;
  s.delta = Waveform(config.samples);
  s.m.assign(config.samples, 0.0);
  s.v.assign(config.samples, 0.0);
  s.epsilon = static_cast<float>(config.epsilon);
  s.lr = config.lr;
  s.beta1 = config.beta1;
  s.beta2 = config.beta2;
  s.adam_eps = config.adam_eps;
  return s;
}

Waveform project_linf(const Waveform& delta, float epsilon) {
  if (!(epsilon > 0.0f)) throw ArgumentError("project_linf: epsilon must be > 0");
  Waveform out = delta;
  for (float& s : out.samples) s = std::clamp(s, -epsilon, epsilon);
  return out;
}

Latent<float> target_embedding(const EncoderParams& params, const Waveform& x_tgt) {
  const Waveform padded = pad_or_trim(x_tgt, kInputSamples);
  return encode(params, log_mel(padded.view()));
}

template <typename T>
PipelineGrad<T> utlsa_pipeline_grad(const EncoderParams& params, std::span<const T> x, const Latent<T>& target) {
  LogMelCache<T> mel_cache;
  EncoderCache<T> enc_cache;
  const Matrix<T> z = log_mel(x, &mel_cache);
  const Latent<T> h = encode(params, z, &enc_cache);
  const LossGrad<T> lg = cosine_frame_loss_vjp(h, target);
  const Matrix<T> gz = encode_vjp(params, enc_cache, lg.grad);
  return {lg.loss, log_mel_vjp(mel_cache, gz)};
}

template PipelineGrad<float> utlsa_pipeline_grad<float>(const EncoderParams&, std::span<const float>,
                                                        const Latent<float>&);
template PipelineGrad<double> utlsa_pipeline_grad<double>(const EncoderParams&, std::span<const double>,
                                                          const Latent<double>&);

GradResult utlsa_grad(const EncoderParams& params, const Waveform& delta, const Waveform& x,
                      const Latent<float>& target) {
  const Waveform perturbed = mix(x, delta);
  auto r = utlsa_pipeline_grad<float>(params, perturbed.view(), target);
  return {static_cast<double>(r.loss), std::move(r.grad)};
}

GradResult e2e_grad(const EncoderParams& enc, const DecoderParams& dec, const Waveform& delta, const Waveform& x,
                    std::span<const int> tokens) {
  const Waveform perturbed = mix(x, delta);
  LogMelCache<float> mel_cache;
  EncoderCache<float> enc_cache;
  const Matrix<float> z = log_mel(perturbed.view(), &mel_cache);
  const Latent<float> h = encode(enc, z, &enc_cache);
  const auto ce = decode_ce(dec, h, tokens);
  const Matrix<float> gz = encode_vjp(enc, enc_cache, ce.grad_h);
  return {static_cast<double>(ce.loss), log_mel_vjp(mel_cache, gz)};
}

MinibatchSampler::MinibatchSampler(std::size_t corpus_size, std::uint64_t seed) : order_(corpus_size), rng_(seed) {
  if (corpus_size == 0) throw ArgumentError("sampler: empty corpus");
  for (std::size_t i = 0; i < corpus_size; ++i) order_[i] = i;
  reshuffle();
}

void MinibatchSampler::reshuffle() {
  for (std::size_t i = order_.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng_.uniform_int(0, static_cast<std::int64_t>(i - 1)));
    std::swap(order_[i - 1], order_[j]);
  }
  pos_ = 0;
}

std::size_t MinibatchSampler::next() {
  if (pos_ == order_.size()) reshuffle();
  return order_[pos_++];
}

double attack_step(PerturbationState& state, std::span<const Waveform* const> carriers, const GradFn& grad_fn) {
  const std::size_t n = carriers.size();
  if (n == 0) throw ArgumentError("attack_step: no carriers");
  std::vector<GradResult> results(n);
  const auto count = static_cast<std::ptrdiff_t>(n);
  const bool parallel = kernels::backend() == kernels::Backend::openmp;
#pragma omp parallel for schedule(static) if (parallel)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    const auto k = static_cast<std::size_t>(i);
    results[k] = grad_fn(mix(*carriers[k], state.delta));
  }

  // Fixed summation order regardless of backend.
  const std::size_t len = state.delta.size();
  std::vector<double> grad(len, 0.0);
  double loss = 0.0;
  for (const auto& r : results) {
    if (r.grad.size() != len) throw ArgumentError("attack_step: gradient length mismatch");
    loss += r.loss;
    for (std::size_t j = 0; j < len; ++j) grad[j] += r.grad[j];
  }
  const double inv = 1.0 / static_cast<double>(n);
  loss *= inv;
  if (!std::isfinite(loss)) throw NumericalError("non-finite loss at step " + std::to_string(state.step + 1));

  const auto t = static_cast<double>(state.step + 1);
  const double bc1 = 1.0 - std::pow(state.beta1, t);
  const double bc2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t j = 0; j < len; ++j) {
    const double g = grad[j] * inv;
    if (!std::isfinite(g)) throw NumericalError("non-finite gradient at step " + std::to_string(state.step + 1));
    state.m[j] = state.beta1 * state.m[j] + (1.0 - state.beta1) * g;
    state.v[j] = state.beta2 * state.v[j] + (1.0 - state.beta2) * g * g;
    const double mhat = state.m[j] / bc1;
    const double vhat = state.v[j] / bc2;
    const double updated = state.delta.samples[j] - state.lr * mhat / (std::sqrt(vhat) + state.adam_eps);
    state.delta.samples[j] = std::clamp(static_cast<float>(updated), -state.epsilon, state.epsilon);
  }
  ++state.step;
  return loss;
}

AttackResult run_attack(const AttackConfig& config, std::span<const Waveform> corpus, const GradFn& grad_fn,
                        const StepObserver& observer) {
  config.validate();
  if (corpus.empty()) throw ArgumentError("attack: empty corpus");
  std::vector<Waveform> padded;
  padded.reserve(corpus.size());
  for (const auto& x : corpus) padded.push_back(pad_or_trim(x, config.samples));

  PerturbationState state = PerturbationState::zeros(config);
  MinibatchSampler sampler(padded.size(), config.seed);
  const std::size_t per_step = config.batch * config.grad_accum;
  std::vector<const Waveform*> picked(per_step);

  AttackResult result;
  const auto start = std::chrono::steady_clock::now();
  for (std::int64_t it = 1; it <= config.iterations; ++it) {
    for (auto& p : picked) p = &padded[sampler.next()];
    const double loss = attack_step(state, picked, grad_fn);
    if (observer) observer(state, loss);
    if (it % config.log_interval == 0 || it == config.iterations) {
      const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      result.log.push_back({it, loss, static_cast<double>(peak_abs(state.delta.view())), elapsed});
    }
  }
  result.delta = std::move(state.delta);
  return result;
}

AttackResult run_utlsa(const AttackConfig& config, std::span<const Waveform> corpus, const EncoderParams& params,
                       const Waveform& target, const StepObserver& observer) {
  const Latent<float> h_tgt = target_embedding(params, target);
  return run_attack(
      config, corpus,
      [&](const Waveform& perturbed) {
        auto r = utlsa_pipeline_grad<float>(params, perturbed.view(), h_tgt);
        return GradResult{static_cast<double>(r.loss), std::move(r.grad)};
      },
      observer);
}

AttackResult run_e2e(const AttackConfig& config, std::span<const Waveform> corpus, const EncoderParams& enc,
                     const DecoderParams& dec, std::span<const int> target_tokens, const StepObserver& observer) {
  const std::vector<int> tokens(target_tokens.begin(), target_tokens.end());
  return run_attack(
      config, corpus,
      [&](const Waveform& perturbed) {
        return e2e_grad(enc, dec, Waveform(perturbed.size()), perturbed, tokens);
      },
      observer);
}

Waveform random_universal(std::uint64_t seed, float epsilon, std::size_t samples) {
  if (!(epsilon > 0.0f)) throw ArgumentError("random_universal: epsilon must be > 0");
  Rng rng(seed);
  const double eps = epsilon;
  std::vector<float> out(samples);
  for (float& s : out) s = static_cast<float>(eps * (2.0 * rng.uniform() - 1.0));
  return Waveform(std::move(out));
}

double mean_corpus_loss(const EncoderParams& params, const Waveform& delta, std::span<const Waveform> corpus,
                        const Latent<float>& target) {
  if (corpus.empty()) throw ArgumentError("mean_corpus_loss: empty corpus");
  std::vector<double> losses(corpus.size());
  const auto n = static_cast<std::ptrdiff_t>(corpus.size());
  const bool parallel = kernels::backend() == kernels::Backend::openmp;
#pragma omp parallel for schedule(static) if (parallel)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const Waveform x = mix(pad_or_trim(corpus[static_cast<std::size_t>(i)], delta.size()), delta);
    losses[static_cast<std::size_t>(i)] = cosine_frame_loss(encode(params, log_mel(x.view())), target);
  }
  double sum = 0.0;
  for (const double l : losses) sum += l;
  return sum / static_cast<double>(corpus.size());
}

}  // namespace utlsa
