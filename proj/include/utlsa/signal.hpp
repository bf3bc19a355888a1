#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

namespace utlsa {

inline constexpr int kSampleRate = 16000;
// Fixed encoder input length (1 s at 16 kHz).
inline constexpr std::size_t kInputSamples = 16000;

struct Waveform {
  std::vector<float> samples;
  int sample_rate = kSampleRate;

  Waveform() = default;
  explicit Waveform(std::vector<float> s, int rate = kSampleRate)
      : samples(std::move(s)), sample_rate(rate) {}
  explicit Waveform(std::size_t n) : samples(n, 0.0f) {}

  std::size_t size() const { return samples.size(); }
  std::span<const float> view() const { return samples; }
  bool operator==(const Waveform&) const = default;
};

enum class CarrierKind { read, telephony, keyword };

struct CarrierProfile {
  CarrierKind kind = CarrierKind::read;
  std::size_t duration_samples = kInputSamples;
  double f0_low = 90.0;
  double f0_high = 240.0;
  int harmonic_max = 40;
  double noise_amp = 0.01;

  void validate() const;
  // Harmonics above this frequency are dropped.
  double band_limit_hz() const;

  static CarrierProfile read();
  static CarrierProfile telephony();
  static CarrierProfile keyword();
  static CarrierProfile from_name(std::string_view name);
};

std::string_view to_string(CarrierKind kind);

Waveform read_wav(const std::filesystem::path& path);
void write_wav(const Waveform& wav, const std::filesystem::path& path);

// PCM16 quantizer used by write_wav: clamp to [-1, 1], round half away from zero.
std::int16_t quantize_pcm16(float sample);

Waveform synth_carrier(std::uint64_t seed, const CarrierProfile& profile);
Waveform synth_target(std::string_view command);
// Tone frequencies (Hz) of the eight signature segments for a command.
std::vector<double> target_segment_frequencies(std::string_view command);

std::uint64_t fnv1a64(std::string_view bytes);

Waveform pad_or_trim(const Waveform& wav, std::size_t length);
Waveform mix(const Waveform& x, const Waveform& delta);

float peak_abs(std::span<const float> samples);

}  // namespace utlsa
