#include "doctest.h"

#include <cmath>

#include "test_util.hpp"
#include "utlsa/attack.hpp"
#include "utlsa/errors.hpp"
#include "utlsa/features.hpp"
#include "utlsa/loss.hpp"

using namespace utlsa;

namespace {

const ModelParams& seed7() {
  static const ModelParams p = init_params(7);
  return p;
}

std::vector<Waveform> corpus(std::size_t n, std::uint64_t seed) {
  std::vector<Waveform> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(synth_carrier(seed + i, CarrierProfile::read()));
  return out;
}

AttackConfig small_config(std::int64_t iterations) {
  AttackConfig c;
  c.epsilon = 0.02;
  c.iterations = iterations;
  c.grad_accum = 2;
  c.seed = 3;
  c.log_interval = 10;
  return c;
}

}  // namespace

TEST_CASE("config validation") {
  AttackConfig c;
  c.validate();
  c.epsilon = 0.0;
  CHECK_THROWS_AS(c.validate(), ArgumentError);
  c = AttackConfig{};
  c.grad_accum = 0;
  CHECK_THROWS_AS(c.validate(), ArgumentError);
  c = AttackConfig{};
  c.lr = -1.0;
  CHECK_THROWS_AS(c.validate(), ArgumentError);
}

TEST_CASE("first Adam step moves by lr against the gradient sign") {
  AttackConfig c = small_config(1);
  c.samples = 4;
  auto state = PerturbationState::zeros(c);
  const Waveform x(4);
  const Waveform* carriers[] = {&x};
  const double loss = attack_step(state, carriers, [](const Waveform&) {
    return GradResult{1.5, {2.0f, -0.5f, 0.0f, 1e-3f}};
  });
  CHECK(loss == 1.5);
  CHECK(state.step == 1);
  CHECK(state.delta.samples[0] == doctest::Approx(-0.005f).epsilon(1e-4));
  CHECK(state.delta.samples[1] == doctest::Approx(0.005f).epsilon(1e-4));
  CHECK(state.delta.samples[2] == 0.0f);
  CHECK(state.delta.samples[3] == doctest::Approx(-0.005f).epsilon(1e-3));
}

TEST_CASE("zero gradient leaves delta unchanged") {
  AttackConfig c = small_config(1);
  c.samples = 8;
  auto state = PerturbationState::zeros(c);
  state.delta.samples.assign(8, 0.01f);
  const Waveform x(8);
  const Waveform* carriers[] = {&x, &x};
  for (int i = 0; i < 3; ++i)
    attack_step(state, carriers, [](const Waveform&) { return GradResult{0.0, std::vector<float>(8, 0.0f)}; });
  for (const float v : state.delta.samples) CHECK(v == 0.01f);
}

TEST_CASE("projection holds after large steps") {
  AttackConfig c = small_config(1);
  c.samples = 8;
  c.lr = 1.0;
  auto state = PerturbationState::zeros(c);
  const Waveform x(8);
  const Waveform* carriers[] = {&x};
  for (int i = 0; i < 5; ++i) {
    attack_step(state, carriers, [](const Waveform&) {
      return GradResult{1.0, {1, -1, 2, -2, 3, -3, 4, -4}};
    });
    CHECK(peak_abs(state.delta.view()) <= state.epsilon);
  }
  CHECK(state.delta.samples[0] == -state.epsilon);
  CHECK(state.delta.samples[1] == state.epsilon);
}

TEST_CASE("NaN gradients stop the attack") {
  AttackConfig c = small_config(1);
  c.samples = 2;
  auto state = PerturbationState::zeros(c);
  const Waveform x(2);
  const Waveform* carriers[] = {&x};
  CHECK_THROWS_AS(attack_step(state, carriers,
                              [](const Waveform&) { return GradResult{1.0, {std::nanf(""), 0.0f}}; }),
                  NumericalError);
}

TEST_CASE("sampler visits every carrier once per epoch") {
  MinibatchSampler s(7, 5);
  for (int epoch = 0; epoch < 3; ++epoch) {
    std::vector<int> seen(7, 0);
    for (int i = 0; i < 7; ++i) ++seen[s.next()];
    for (const int v : seen) CHECK(v == 1);
  }
  MinibatchSampler a(10, 1), b(10, 1);
  for (int i = 0; i < 30; ++i) CHECK(a.next() == b.next());
}

TEST_CASE("short encoder-only run lowers the loss within budget") {
  const auto train = corpus(4, 200);
  const Waveform target = synth_target("unlock the door");
  const auto cfg = small_config(40);
  int steps = 0;
  const auto result = run_utlsa(cfg, train, seed7().encoder, target, [&](const PerturbationState& s, double) {
    ++steps;
    CHECK(peak_abs(s.delta.view()) <= static_cast<float>(cfg.epsilon));
  });
  CHECK(steps == 40);
  REQUIRE(result.log.size() == 4);
  CHECK(result.log.front().iter == 10);
  CHECK(result.log.back().iter == 40);
  for (const auto& r : result.log) CHECK(r.linf <= static_cast<double>(static_cast<float>(cfg.epsilon)));

  const auto h = target_embedding(seed7().encoder, target);
  const Waveform zero(kInputSamples);
  const double before = mean_corpus_loss(seed7().encoder, zero, train, h);
  const double after = mean_corpus_loss(seed7().encoder, result.delta, train, h);
  CHECK(after < before);
}

TEST_CASE("attack runs are deterministic") {
  const auto train = corpus(3, 300);
  const Waveform target = synth_target("call mom");
  const auto cfg = small_config(6);
  const auto a = run_utlsa(cfg, train, seed7().encoder, target);
  const auto b = run_utlsa(cfg, train, seed7().encoder, target);
  CHECK(a.delta.samples == b.delta.samples);
}

TEST_CASE("end-to-end objective runs and respects the budget") {
  const auto train = corpus(2, 400);
  auto cfg = small_config(3);
  cfg.grad_accum = 1;
  const auto tokens = tokenize("unlock the door", kMaxTokens);
  const auto r = run_e2e(cfg, train, seed7().encoder, seed7().decoder, tokens);
  CHECK(peak_abs(r.delta.view()) <= static_cast<float>(cfg.epsilon));
  CHECK(peak_abs(r.delta.view()) > 0.0f);
}

TEST_CASE("e2e gradient predicts the directional derivative") {
  const Waveform x = synth_carrier(500, CarrierProfile::read());
  const auto tokens = tokenize("open the window", 20);
  const Waveform zero(kInputSamples);
  const auto g = e2e_grad(seed7().encoder, seed7().decoder, zero, x, tokens);
  double norm = 0.0;
  for (const float v : g.grad) norm += static_cast<double>(v) * v;
  norm = std::sqrt(norm);
  REQUIRE(norm > 0.0);

  const double h = 1e-3;
  Waveform plus(kInputSamples), minus(kInputSamples);
  for (std::size_t i = 0; i < kInputSamples; ++i) {
    plus.samples[i] = static_cast<float>(h * g.grad[i] / norm);
    minus.samples[i] = -plus.samples[i];
  }
  const double lp = e2e_grad(seed7().encoder, seed7().decoder, plus, x, tokens).loss;
  const double lm = e2e_grad(seed7().encoder, seed7().decoder, minus, x, tokens).loss;
  CHECK((lp - lm) / (2.0 * h) == doctest::Approx(norm).epsilon(0.05));
}

TEST_CASE("the target itself has zero loss") {
  const Waveform target = synth_target("unlock the door");
  const auto h = target_embedding(seed7().encoder, target);
  const Waveform zero(kInputSamples);
  const std::vector<Waveform> one = {target};
  CHECK(mean_corpus_loss(seed7().encoder, zero, one, h) < 1e-6);
  const auto g = utlsa_grad(seed7().encoder, zero, target, h);
  CHECK(g.loss < 1e-6);
}

TEST_CASE("random universal perturbation moments") {
  const Waveform d = random_universal(9, 0.02f, 160000);
  double mean = 0.0, sq = 0.0;
  for (const float v : d.samples) {
    CHECK(std::abs(v) <= 0.02f);
    mean += v;
    sq += static_cast<double>(v) * v;
  }
  mean /= 160000.0;
  sq /= 160000.0;
  CHECK(std::abs(mean) < 1e-4);
  CHECK(sq == doctest::Approx(0.02 * 0.02 / 3.0).epsilon(0.01));
  CHECK(d.samples == random_universal(9, 0.02f, 160000).samples);
  CHECK(d.samples != random_universal(10, 0.02f, 160000).samples);
}
