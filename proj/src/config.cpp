#include "utlsa/config.hpp"

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "json.hpp"
#include "utlsa/text.hpp"

namespace utlsa {

namespace {

using nlohmann::json;

// Reads keys from one JSON object and rejects any key it was not asked for.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + ": expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  void number(const std::string& key, double& out) {
    if (!has(key)) return;
    const json& v = raw(key);
    if (!v.is_number()) throw ConfigError(key_path(key) + ": expected a number");
    out = v.get<double>();
  }

  template <typename U>
  void count(const std::string& key, U& out) {
    if (!has(key)) return;
    const json& v = raw(key);
    if (!v.is_number_integer() || v.get<long long>() < 0)
      throw ConfigError(key_path(key) + ": expected a non-negative integer");
    out = static_cast<U>(v.get<unsigned long long>());
  }

  void boolean(const std::string& key, bool& out) {
    if (!has(key)) return;
    const json& v = raw(key);
    if (!v.is_boolean()) throw ConfigError(key_path(key) + ": expected true or false");
    out = v.get<bool>();
  }

  void string(const std::string& key, std::string& out) {
    if (!has(key)) return;
    const json& v = raw(key);
    if (!v.is_string()) throw ConfigError(key_path(key) + ": expected a string");
    out = v.get<std::string>();
  }

  void strings(const std::string& key, std::vector<std::string>& out) {
    if (!has(key)) return;
    const json& v = raw(key);
    if (!v.is_array()) throw ConfigError(key_path(key) + ": expected a list of strings");
    out.clear();
    for (const auto& e : v) {
      if (!e.is_string()) throw ConfigError(key_path(key) + ": expected a list of strings");
      out.push_back(e.get<std::string>());
    }
  }

  Section child(const std::string& key) { return Section(raw(key), key_path(key)); }

  void finish() const {
    for (const auto& item : j_.items())
      if (!seen_.contains(item.key())) throw ConfigError("unknown config key '" + key_path(item.key()) + "'");
  }

  std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  std::string where() const { return path_.empty() ? "config" : path_; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

CorpusSpec parse_corpus(Section s, const std::filesystem::path& base, const std::string& default_name) {
  CorpusSpec c;
  c.name = default_name;
  s.string("name", c.name);
  if (s.has("manifest")) {
    std::string m;
    s.string("manifest", m);
    c.manifest = resolve(base, m);
    if (s.has("profile") || s.has("count") || s.has("seed"))
      throw ConfigError(s.key_path("manifest") + ": cannot be combined with profile/count/seed");
  } else {
    s.string("profile", c.profile);
    s.count("count", c.count);
    s.count("seed", c.seed);
    CarrierProfile::from_name(c.profile);
    if (c.count == 0) throw ConfigError(s.key_path("count") + ": must be > 0");
  }
  if (c.name.empty()) c.name = c.profile;
  s.finish();
  return c;
}

std::vector<CorpusSpec> parse_corpus_list(const json& list, const std::string& path, const std::filesystem::path& base) {
  if (!list.is_array()) throw ConfigError(path + ": expected a list of corpora");
  std::vector<CorpusSpec> out;
  for (std::size_t i = 0; i < list.size(); ++i)
    out.push_back(parse_corpus(Section(list[i], path + "[" + std::to_string(i) + "]"), base, ""));
  return out;
}

}  // namespace

RunConfig RunConfig::parse(const std::string& text, const std::filesystem::path& base_dir) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig cfg;
  Section top(root, "");

  if (top.has("model")) {
    Section s = top.child("model");
    s.count("seed", cfg.model_seed);
    if (s.has("weights")) {
      std::string w;
      s.string("weights", w);
      cfg.weights = resolve(base_dir, w);
    }
    s.finish();
  }

  if (top.has("attack")) {
    Section s = top.child("attack");
    s.string("mode", cfg.mode);
    if (cfg.mode != "utlsa" && cfg.mode != "e2e") throw ConfigError("attack.mode: expected 'utlsa' or 'e2e'");
    s.number("epsilon", cfg.attack.epsilon);
    s.count("iterations", cfg.attack.iterations);
    s.number("lr", cfg.attack.lr);
    s.number("beta1", cfg.attack.beta1);
    s.number("beta2", cfg.attack.beta2);
    s.number("adam_eps", cfg.attack.adam_eps);
    s.count("batch", cfg.attack.batch);
    s.count("grad_accum", cfg.attack.grad_accum);
    s.count("seed", cfg.attack.seed);
    s.count("T", cfg.attack.samples);
    s.count("log_interval", cfg.attack.log_interval);
    s.boolean("parallel", cfg.parallel);
    s.finish();
    try {
      cfg.attack.validate();
    } catch (const ArgumentError& e) {
      throw ConfigError(e.what());
    }
  }

  if (top.has("train")) cfg.train = parse_corpus(top.child("train"), base_dir, "train");

  if (top.has("eval")) {
    Section s = top.child("eval");
    if (s.has("corpora")) cfg.eval_corpora = parse_corpus_list(s.raw("corpora"), s.key_path("corpora"), base_dir);
    if (s.has("calibration"))
      cfg.calibration = parse_corpus_list(s.raw("calibration"), s.key_path("calibration"), base_dir);
    if (s.has("tau")) {
      const json& t = s.raw("tau");
      if (t.is_string() && t.get<std::string>() == "calibrate") {
        cfg.tau.reset();
      } else if (t.is_number() && t.get<double>() > 0.0) {
        cfg.tau = t.get<double>();
      } else {
        throw ConfigError("eval.tau: expected \"calibrate\" or a positive number");
      }
    }
    if (s.has("baseline")) {
      Section b = s.child("baseline");
      BaselineSpec spec;
      b.count("k", spec.k);
      b.count("seed", spec.seed);
      if (b.has("epsilon")) {
        double e = 0.0;
        b.number("epsilon", e);
        spec.epsilon = e;
      }
      if (spec.k < 1) throw ConfigError("eval.baseline.k: must be >= 1");
      b.finish();
      cfg.baseline = spec;
    }
    s.finish();
  }

  if (top.has("target")) {
    Section s = top.child("target");
    s.string("command", cfg.command);
    std::vector<std::string> aliases;
    s.strings("aliases", aliases);
    for (const auto& a : aliases) cfg.aliases.insert(normalize_text(a));
    s.strings("bank", cfg.bank);
    s.finish();
  }
  if (normalize_text(cfg.command).empty()) throw ConfigError("target.command: must not be empty");
  if (cfg.bank.empty()) cfg.bank.push_back(cfg.command);
  bool in_bank = false;
  for (const auto& b : cfg.bank) in_bank |= normalize_text(b) == normalize_text(cfg.command);
  if (!in_bank) cfg.bank.push_back(cfg.command);

  if (top.has("output")) {
    Section s = top.child("output");
    std::string dir = cfg.output.dir.string();
    s.string("dir", dir);
    cfg.output.dir = resolve(base_dir, dir);
    s.string("delta", cfg.output.delta);
    s.string("log", cfg.output.log);
    s.string("report", cfg.output.report);
    s.string("table", cfg.output.table);
    s.string("bench", cfg.output.bench);
    s.string("bench_table", cfg.output.bench_table);
    s.finish();
  } else {
    cfg.output.dir = resolve(base_dir, cfg.output.dir.string());
  }

  top.finish();
  return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse(ss.str(), path.parent_path());
}

std::filesystem::path RunConfig::output_dir() const {
  if (const char* env = std::getenv("UTLSA_OUT_DIR"); env && *env) return env;
  return output.dir;
}

std::string carrier_filename(const std::string& profile, std::uint64_t corpus_seed, std::size_t index) {
  std::ostringstream os;
  os << profile << '_' << corpus_seed << '_' << std::setw(4) << std::setfill('0') << index << ".wav";
  return os.str();
}

std::string manifest_line(const ManifestEntry& e) {
  return e.file + '\t' + std::to_string(e.seed) + '\t' + e.profile;
}

namespace {
constexpr const char* kManifestHeader = "# utlsa-manifest v1\tfile\tseed\tprofile";
}

std::vector<ManifestEntry> write_corpus(const std::string& profile_name, std::size_t count, std::uint64_t seed,
                                        const std::filesystem::path& out_dir) {
  const CarrierProfile profile = CarrierProfile::from_name(profile_name);
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  std::vector<ManifestEntry> entries;
  for (std::size_t i = 0; i < count; ++i) {
    ManifestEntry e{carrier_filename(profile_name, seed, i), seed + i, profile_name};
    write_wav(synth_carrier(e.seed, profile), out_dir / e.file);
    entries.push_back(std::move(e));
  }
  std::ofstream m(out_dir / "manifest.tsv", std::ios::trunc);
  if (!m) throw IoError("cannot write manifest in " + out_dir.string());
  m << kManifestHeader << '\n';
  for (const auto& e : entries) m << manifest_line(e) << '\n';
  if (!m) throw IoError("manifest write failed in " + out_dir.string());
  return entries;
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open manifest " + path.string());
  std::vector<ManifestEntry> entries;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream is(line);
    ManifestEntry e;
    std::string seed;
    if (!std::getline(is, e.file, '\t') || !std::getline(is, seed, '\t') || !std::getline(is, e.profile))
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected file<TAB>seed<TAB>profile");
    try {
      e.seed = std::stoull(seed);
    } catch (const std::exception&) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": bad seed '" + seed + "'");
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

std::vector<Waveform> materialize(const CorpusSpec& spec) {
  std::vector<Waveform> out;
  if (spec.manifest) {
    const auto dir = spec.manifest->parent_path();
    for (const auto& e : read_manifest(*spec.manifest)) out.push_back(read_wav(dir / e.file));
    if (out.empty()) throw ArgumentError("corpus '" + spec.name + "': manifest lists no files");
    return out;
  }
  if (spec.count == 0) throw ArgumentError("corpus '" + spec.name + "' is empty or missing");
  const CarrierProfile profile = CarrierProfile::from_name(spec.profile);
  out.reserve(spec.count);
  for (std::size_t i = 0; i < spec.count; ++i) out.push_back(synth_carrier(spec.seed + i, profile));
  return out;
}

ModelParams load_model(const RunConfig& config) {
  if (config.weights) return load_weights(*config.weights);
  return init_params(config.model_seed);
}

}  // namespace utlsa
