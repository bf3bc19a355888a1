#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "utlsa/attack.hpp"
#include "utlsa/model.hpp"

namespace utlsa {

enum class BenchMode { encoder_only, end_to_end };

std::string_view to_string(BenchMode mode);
BenchMode bench_mode_from_name(std::string_view name);

struct BenchReport {
  BenchMode mode = BenchMode::encoder_only;
  std::int64_t iterations = 0;
  double wall_seconds = 0.0;
  double iters_per_second = 0.0;
  std::uint64_t peak_bytes_estimate = 0;
  bool parallel = false;
};

inline constexpr std::int64_t kBenchWarmup = 10;

// Analytic live-tensor payload at the deepest point of one backward pass:
// parameters resident for the mode, the perturbation state (delta, m, v, the
// accumulated gradient), every cached activation, and the gradient buffers.
std::uint64_t peak_bytes_estimate(BenchMode mode);

struct BenchInputs {
  AttackConfig config;
  std::span<const Waveform> corpus;
  const ModelParams* params = nullptr;
  Waveform target;
  std::string target_command;
};

// 10 untimed warm-up updates, then `iterations` timed updates of the attack loop.
// The timed run starts from delta = 0, so its result equals an unbenched run;
// it is returned through `delta_out` when given.
BenchReport bench_attack(BenchMode mode, std::int64_t iterations, const BenchInputs& inputs,
                         Waveform* delta_out = nullptr);

// Three rows (memory estimate, wall time, throughput) with end_to_end / encoder_only ratios.
std::string render_bench_table(const BenchReport& encoder_only, const BenchReport& end_to_end);
std::string render_bench_record(const BenchReport& report);

}  // namespace utlsa
