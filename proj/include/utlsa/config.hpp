#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "utlsa/attack.hpp"
#include "utlsa/errors.hpp"
#include "utlsa/eval.hpp"
#include "utlsa/model.hpp"
#include "utlsa/weights_io.hpp"

namespace utlsa {

class ConfigError : public ArgumentError {
 public:
  using ArgumentError::ArgumentError;
};

// A carrier corpus: synthesized from (profile, count, seed) or listed in a
// manifest written by `utlsa synth`. Carrier i uses seed + i.
struct CorpusSpec {
  std::string name;
  std::string profile = "read";
  std::size_t count = 0;
  std::uint64_t seed = 0;
  std::optional<std::filesystem::path> manifest;
};

struct BaselineSpec {
  std::size_t k = 5;
  std::uint64_t seed = 0;
  std::optional<double> epsilon;  // defaults to attack.epsilon
};

struct OutputSpec {
  std::filesystem::path dir = "out";
  std::string delta = "delta.utls";
  std::string log = "train_log.jsonl";
  std::string report = "report.jsonl";
  std::string table = "report.txt";
  std::string bench = "bench.jsonl";
  std::string bench_table = "bench.txt";
};

struct RunConfig {
  std::uint64_t model_seed = 7;
  std::optional<std::filesystem::path> weights;

  std::string mode = "utlsa";  // utlsa | e2e
  AttackConfig attack;
  bool parallel = false;

  CorpusSpec train;
  std::vector<CorpusSpec> eval_corpora;
  std::vector<CorpusSpec> calibration;  // empty: each eval corpus calibrates on itself
  std::optional<double> tau;            // empty: calibrate
  std::optional<BaselineSpec> baseline;

  std::string command = "unlock the door";
  std::set<std::string> aliases;
  std::vector<std::string> bank;

  OutputSpec output;

  // Strict: unknown keys and type mismatches raise ConfigError naming the key.
  // Relative paths resolve against base_dir.
  static RunConfig parse(const std::string& text, const std::filesystem::path& base_dir = {});
  static RunConfig load(const std::filesystem::path& path);

  // Output directory after the UTLSA_OUT_DIR override.
  std::filesystem::path output_dir() const;
  std::filesystem::path output_path(const std::string& file) const { return output_dir() / file; }
};

// ---- corpora ----

struct ManifestEntry {
  std::string file;
  std::uint64_t seed = 0;
  std::string profile;
};

std::string manifest_line(const ManifestEntry& e);
std::string carrier_filename(const std::string& profile, std::uint64_t corpus_seed, std::size_t index);

// Writes count WAV files plus manifest.tsv; returns the manifest entries.
std::vector<ManifestEntry> write_corpus(const std::string& profile, std::size_t count, std::uint64_t seed,
                                        const std::filesystem::path& out_dir);
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);

std::vector<Waveform> materialize(const CorpusSpec& spec);

// Weights file if configured (must exist), otherwise init_params(model_seed).
ModelParams load_model(const RunConfig& config);

}  // namespace utlsa
