#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "utlsa/bench.hpp"
#include "utlsa/config.hpp"
#include "utlsa/eval.hpp"

// One function per CLI verb. Each writes its artifacts and returns what it
// printed, so the same code paths are exercised by tests and by the binary.
namespace utlsa::commands {

std::vector<ManifestEntry> synth(const std::string& profile, std::size_t count, std::uint64_t seed,
                                 const std::filesystem::path& out_dir);

void target(const std::string& command, const std::filesystem::path& out);

void init_model(std::uint64_t seed, const std::filesystem::path& out);

struct AttackSummary {
  double final_loss = 0.0;
  double linf = 0.0;
  std::filesystem::path delta_path;
  std::filesystem::path log_path;
};

std::string log_record(const LogRecord& r);

AttackSummary attack(const RunConfig& config, std::ostream& progress);

void rand_delta(std::uint64_t seed, float epsilon, const std::filesystem::path& out);

// Evaluates delta on every configured eval corpus; random baseline rows are
// added when `with_baseline` (K, seed from config; epsilon from config or the
// delta file).
EvalReport eval(const std::filesystem::path& delta_path, const RunConfig& config, bool with_baseline);

std::vector<BenchReport> bench(const RunConfig& config, const std::vector<BenchMode>& modes, std::int64_t iterations,
                               std::ostream& out);

struct SpectroResult {
  std::string summary;
  double mean_db_delta = 0.0;
  double mean_db_carrier = 0.0;
  double max_abs_diff_db = 0.0;
};

SpectroResult spectro(const std::filesystem::path& wav, const std::filesystem::path& delta,
                      const std::string& out_prefix);

}  // namespace utlsa::commands
