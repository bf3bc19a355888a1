#include "utlsa/signal.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <string>

#include "utlsa/errors.hpp"
#include "utlsa/rng.hpp"
#include "utlsa/text.hpp"

namespace utlsa {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr std::size_t kEnvelopeSamples = 800;
constexpr std::size_t kTargetSegments = 8;
constexpr std::size_t kTargetSegmentSamples = 2000;
constexpr std::size_t kCrossfadeSamples = 100;

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
}

double raised_cosine(std::size_t i, std::size_t len) {
  return 0.5 * (1.0 - std::cos(std::numbers::pi * static_cast<double>(i) / static_cast<double>(len)));
}

}  // namespace

void CarrierProfile::validate() const {
  if (duration_samples == 0 || duration_samples > kInputSamples)
    throw ArgumentError("carrier duration must be in (0, " + std::to_string(kInputSamples) + "]");
  if (!(f0_low < f0_high) || f0_low <= 0.0)
    throw ArgumentError("carrier f0 range must satisfy 0 < low < high");
  if (harmonic_max < 1) throw ArgumentError("carrier harmonic_max must be >= 1");
  if (noise_amp < 0.0) throw ArgumentError("carrier noise_amp must be >= 0");
}

double CarrierProfile::band_limit_hz() const {
  return kind == CarrierKind::telephony ? 3400.0 : 8000.0;
}

CarrierProfile CarrierProfile::read() {
  return {CarrierKind::read, kInputSamples, 90.0, 240.0, 40, 0.01};
}

CarrierProfile CarrierProfile::telephony() {
  return {CarrierKind::telephony, kInputSamples, 100.0, 280.0, 30, 0.02};
}

CarrierProfile CarrierProfile::keyword() {
  return {CarrierKind::keyword, 4000, 110.0, 260.0, 40, 0.01};
}

CarrierProfile CarrierProfile::from_name(std::string_view name) {
  if (name == "read") return read();
  if (name == "telephony") return telephony();
  if (name == "keyword") return keyword();
  throw ArgumentError("unknown carrier profile '" + std::string(name) + "'");
}

std::string_view to_string(CarrierKind kind) {
  switch (kind) {
    case CarrierKind::read: return "read";
    case CarrierKind::telephony: return "telephony";
    case CarrierKind::keyword: return "keyword";
  }
  return "?";
}

Waveform read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::size_t n = bytes.size();
  if (n < 12 || std::memcmp(p, "RIFF", 4) != 0 || std::memcmp(p + 8, "WAVE", 4) != 0)
    throw FormatError(path.string() + ": not a RIFF/WAVE file");

  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= n) {
    const std::uint32_t chunk_size = read_u32(p + pos + 4);
    const std::size_t body = pos + 8;
    if (chunk_size > n - body) throw FormatError(path.string() + ": truncated chunk");
    if (std::memcmp(p + pos, "fmt ", 4) == 0) {
      if (chunk_size < 16) throw FormatError(path.string() + ": short fmt chunk");
      const auto audio_format = read_u16(p + body);
      const auto channels = read_u16(p + body + 2);
      const auto rate = read_u32(p + body + 4);
      const auto bits = read_u16(p + body + 14);
      if (audio_format != 1 || channels != 1 || rate != static_cast<std::uint32_t>(kSampleRate) ||
          bits != 16) {
        throw UnsupportedFormatError(path.string() + ": need PCM16 mono 16000 Hz (got format " +
                                     std::to_string(audio_format) + ", " + std::to_string(channels) +
                                     " ch, " + std::to_string(rate) + " Hz, " +
                                     std::to_string(bits) + " bit)");
      }
      have_fmt = true;
    } else if (std::memcmp(p + pos, "data", 4) == 0) {
      if (!have_fmt) throw FormatError(path.string() + ": data chunk before fmt chunk");
      if (chunk_size % 2 != 0) throw FormatError(path.string() + ": odd PCM16 payload size");
      std::vector<float> samples(chunk_size / 2);
      for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto raw = static_cast<std::int16_t>(read_u16(p + body + 2 * i));
        samples[i] = static_cast<float>(raw) / 32768.0f;
      }
      return Waveform(std::move(samples));
    }
    pos = body + chunk_size + (chunk_size & 1u);
  }
  throw FormatError(path.string() + (have_fmt ? ": missing data chunk" : ": missing fmt chunk"));
}

std::int16_t quantize_pcm16(float sample) {
  const double clamped = std::clamp(static_cast<double>(sample), -1.0, 1.0);
  return static_cast<std::int16_t>(std::round(clamped * 32767.0));
}

void write_wav(const Waveform& wav, const std::filesystem::path& path) {
  const auto data_bytes = static_cast<std::uint32_t>(wav.size() * 2);
  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  put_u32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  put_u32(out, 16);
  put_u16(out, 1);
  put_u16(out, 1);
  put_u32(out, kSampleRate);
  put_u32(out, kSampleRate * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out += "data";
  put_u32(out, data_bytes);
  for (const float s : wav.samples) put_u16(out, static_cast<std::uint16_t>(quantize_pcm16(s)));

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("write failed for " + path.string());
}

Waveform synth_carrier(std::uint64_t seed, const CarrierProfile& profile) {
  profile.validate();
  Rng rng(seed);
  const double f0 = rng.uniform(profile.f0_low, profile.f0_high);
  const int h_lo = std::min(5, profile.harmonic_max);
  const auto harmonics = static_cast<int>(rng.uniform_int(h_lo, profile.harmonic_max));
  std::vector<double> phase(static_cast<std::size_t>(harmonics));
  for (auto& ph : phase) ph = kTwoPi * rng.uniform();

  const std::size_t n = profile.duration_samples;
  const double band = profile.band_limit_hz();
  std::vector<double> s(n, 0.0);
  for (int k = 1; k <= harmonics; ++k) {
    const double fk = k * f0;
    if (fk > band) break;
    const double amp = 0.5 / k;
    const double w = kTwoPi * fk / kSampleRate;
    const double ph = phase[static_cast<std::size_t>(k - 1)];
    for (std::size_t t = 0; t < n; ++t) s[t] += amp * std::sin(w * static_cast<double>(t) + ph);
  }

  const std::size_t ramp = std::min(kEnvelopeSamples, n / 2);
  for (std::size_t i = 0; i < ramp; ++i) {
    const double g = raised_cosine(i, ramp);
    s[i] *= g;
    s[n - 1 - i] *= g;
  }

  for (auto& v : s) v += profile.noise_amp * (2.0 * rng.uniform() - 1.0);

  double peak = 0.0;
  for (const double v : s) peak = std::max(peak, std::abs(v));
  std::vector<float> out(n);
  const double scale = peak > 0.0 ? 0.5 / peak : 0.0;
  for (std::size_t t = 0; t < n; ++t) out[t] = static_cast<float>(s[t] * scale);
  return Waveform(std::move(out));
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<double> target_segment_frequencies(std::string_view command) {
  const std::string norm = normalize_text(command);
  if (norm.empty()) throw ArgumentError("target command is empty after normalization");
  Rng rng(fnv1a64(norm));
  std::vector<double> freqs(kTargetSegments);
  for (auto& f : freqs) f = 300.0 + 50.0 * static_cast<double>(rng.next_u64() % 64);
  return freqs;
}

Waveform synth_target(std::string_view command) {
  const auto freqs = target_segment_frequencies(command);
  const std::size_t n = kTargetSegments * kTargetSegmentSamples;
  const std::size_t half = kCrossfadeSamples / 2;
  auto tone = [&](std::size_t seg, std::size_t t) {
    return 0.5 * std::sin(kTwoPi * freqs[seg] * static_cast<double>(t) / kSampleRate);
  };
  std::vector<float> out(n);
  for (std::size_t t = 0; t < n; ++t) {
    const std::size_t seg = t / kTargetSegmentSamples;
    const std::size_t offset = t % kTargetSegmentSamples;
    double v = tone(seg, t);
    // Crossfade window [b - 50, b + 50) around each interior boundary b.
    if (seg > 0 && offset < half) {
      const double w = raised_cosine(offset + half, kCrossfadeSamples);
      v = (1.0 - w) * tone(seg - 1, t) + w * v;
    } else if (seg + 1 < kTargetSegments && offset >= kTargetSegmentSamples - half) {
      const double w = raised_cosine(offset - (kTargetSegmentSamples - half), kCrossfadeSamples);
      v = (1.0 - w) * v + w * tone(seg + 1, t);
    }
    out[t] = static_cast<float>(v);
  }
  return Waveform(std::move(out));
}

Waveform pad_or_trim(const Waveform& wav, std::size_t length) {
  if (length == 0) throw ArgumentError("pad_or_trim: target length must be > 0");
  Waveform out = wav;
  out.samples.resize(length, 0.0f);
  return out;
}

Waveform mix(const Waveform& x, const Waveform& delta) {
  if (x.size() != delta.size())
    throw ArgumentError("mix: length mismatch (" + std::to_string(x.size()) + " vs " +
                        std::to_string(delta.size()) + ")");
  Waveform out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out.samples[i] += delta.samples[i];
  return out;
}

float peak_abs(std::span<const float> samples) {
  float peak = 0.0f;
  for (const float s : samples) peak = std::max(peak, std::abs(s));
  return peak;
}

}  // namespace utlsa
