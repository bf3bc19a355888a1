#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "utlsa/tensor.hpp"

namespace utlsa {

inline constexpr std::size_t kWindowLength = 400;  // 25 ms
inline constexpr std::size_t kHopLength = 160;     // 10 ms
inline constexpr std::size_t kFftSize = 512;
inline constexpr std::size_t kSpectrumBins = kFftSize / 2 + 1;
inline constexpr std::size_t kMelBins = 64;
inline constexpr std::size_t kFrames = 98;  // 1 + (16000 - 400) / 160
inline constexpr double kLogFloor = 1e-6;

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Triangular mel filters with peak value 1 (no area normalization).
struct MelFilterbank {
  Matrix<float> weights;  // mel_bins x (n_fft/2 + 1)
  std::size_t n_fft = 0;
  double f_min = 0.0;
  double f_max = 0.0;
  std::vector<double> edges_hz;  // mel_bins + 2 edges
  // Half-open column range [first, last) holding each filter's nonzero weights.
  std::vector<std::pair<std::size_t, std::size_t>> support;

  std::size_t mel_bins() const { return weights.rows; }
  // Frequency at which filter m peaks.
  double center_hz(std::size_t m) const { return edges_hz[m + 1]; }
};

MelFilterbank mel_filterbank(std::size_t mel_bins, std::size_t n_fft, double f_min, double f_max);

// 64 bins over 0-8000 Hz at n_fft = 512. Built once, read-only afterwards.
const MelFilterbank& default_filterbank();

std::vector<float> hann_window(std::size_t length);

inline constexpr std::size_t frame_count(std::size_t samples) {
  return samples < kWindowLength ? 0 : 1 + (samples - kWindowLength) / kHopLength;
}

// Per-frame intermediates kept for the backward pass.
template <typename T>
struct LogMelCache {
  std::size_t samples = 0;
  std::vector<std::complex<T>> spectrum;  // frames x kSpectrumBins
  Matrix<T> mel;                          // frames x mel bins, before the log

  std::size_t payload_bytes() const {
    return spectrum.size() * sizeof(std::complex<T>) + mel.size() * sizeof(T);
  }
};

// z = ln(filterbank * |FFT(hann * frame)|^2 + 1e-6), frames x mel bins.
// Requires exactly kInputSamples samples.
template <typename T>
Matrix<T> log_mel(std::span<const T> wav, LogMelCache<T>* cache = nullptr);

// d<upstream, log_mel(wav)>/d wav.
template <typename T>
std::vector<T> log_mel_vjp(std::span<const T> wav, const Matrix<T>& upstream);
template <typename T>
std::vector<T> log_mel_vjp(const LogMelCache<T>& cache, const Matrix<T>& upstream);

// 10 / ln(10): natural-log power to dB.
inline constexpr double kNepersToDb = 4.342944819032518;

}  // namespace utlsa
