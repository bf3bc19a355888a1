#include "utlsa/features.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "utlsa/errors.hpp"
#include "utlsa/fft.hpp"
#include "utlsa/kernels.hpp"
#include "utlsa/signal.hpp"

namespace utlsa {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

MelFilterbank mel_filterbank(std::size_t mel_bins, std::size_t n_fft, double f_min, double f_max) {
  if (mel_bins < 1) throw ArgumentError("mel_filterbank: need at least one filter");
  if (n_fft < 2 || (n_fft & (n_fft - 1)) != 0)
    throw ArgumentError("mel_filterbank: n_fft must be a power of two");
  if (!(f_min >= 0.0 && f_min < f_max && f_max <= kSampleRate / 2.0))
    throw ArgumentError("mel_filterbank: need 0 <= f_min < f_max <= 8000");

  MelFilterbank fb;
  fb.n_fft = n_fft;
  fb.f_min = f_min;
  fb.f_max = f_max;
  const std::size_t bins = n_fft / 2 + 1;
  fb.weights = Matrix<float>(mel_bins, bins);
  fb.edges_hz.resize(mel_bins + 2);
  const double mel_lo = hz_to_mel(f_min);
  const double mel_hi = hz_to_mel(f_max);
  for (std::size_t i = 0; i < mel_bins + 2; ++i) {
    const double m = mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) / static_cast<double>(mel_bins + 1);
    fb.edges_hz[i] = mel_to_hz(m);
  }

  const double bin_hz = static_cast<double>(kSampleRate) / static_cast<double>(n_fft);
  fb.support.resize(mel_bins);
  for (std::size_t m = 0; m < mel_bins; ++m) {
    const double lo = fb.edges_hz[m];
    const double mid = fb.edges_hz[m + 1];
    const double hi = fb.edges_hz[m + 2];
    std::size_t first = bins;
    std::size_t last = 0;
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * bin_hz;
      double w = 0.0;
      if (f > lo && f <= mid)
        w = (f - lo) / (mid - lo);
      else if (f > mid && f < hi)
        w = (hi - f) / (hi - mid);
      if (w > 0.0) {
        fb.weights(m, k) = static_cast<float>(w);
        first = std::min(first, k);
        last = k + 1;
      }
    }
    if (first >= last) throw ArgumentError("mel_filterbank: filter " + std::to_string(m) + " covers no FFT bin");
    fb.support[m] = {first, last};
  }
  return fb;
}

const MelFilterbank& default_filterbank() {
  static const MelFilterbank fb = mel_filterbank(kMelBins, kFftSize, 0.0, kSampleRate / 2.0);
  return fb;
}

std::vector<float> hann_window(std::size_t length) {
  std::vector<float> w(length);
  for (std::size_t n = 0; n < length; ++n)
    w[n] = static_cast<float>(0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) /
                                                   static_cast<double>(length)));
  return w;
}

namespace {

const std::vector<float>& window() {
  static const std::vector<float> w = hann_window(kWindowLength);
  return w;
}

template <typename T>
const Fft<T>& fft512() {
  static const Fft<T> f(kFftSize);
  return f;
}

template <typename T>
void forward_frame(std::span<const T> wav, std::size_t t, std::complex<T>* spectrum, T* mel,
                   T* out) {
  const auto& fb = default_filterbank();
  const auto& win = window();
  std::vector<std::complex<T>> buf(kFftSize);
  const T* frame = wav.data() + t * kHopLength;
  for (std::size_t n = 0; n < kWindowLength; ++n) buf[n] = {frame[n] * static_cast<T>(win[n]), T{0}};
  fft512<T>().forward(buf);

  T power[kSpectrumBins];
  for (std::size_t k = 0; k < kSpectrumBins; ++k) {
    spectrum[k] = buf[k];
    power[k] = buf[k].real() * buf[k].real() + buf[k].imag() * buf[k].imag();
  }
  for (std::size_t m = 0; m < kMelBins; ++m) {
    const auto [first, last] = fb.support[m];
    const float* w = fb.weights.data.data() + m * kSpectrumBins;
    T e = T{0};
    for (std::size_t k = first; k < last; ++k) e += static_cast<T>(w[k]) * power[k];
    mel[m] = e;
    out[m] = std::log(e + static_cast<T>(kLogFloor));
  }
}

// Gradient of one frame w.r.t. its 400 windowed input samples.
template <typename T>
void backward_frame(const std::complex<T>* spectrum, const T* mel, const T* upstream, T* grad) {
  const auto& fb = default_filterbank();
  const auto& win = window();
  T gpow[kSpectrumBins] = {};
  for (std::size_t m = 0; m < kMelBins; ++m) {
    const T gm = upstream[m] / (mel[m] + static_cast<T>(kLogFloor));
    if (gm == T{0}) continue;
    const auto [first, last] = fb.support[m];
    const float* w = fb.weights.data.data() + m * kSpectrumBins;
    for (std::size_t k = first; k < last; ++k) gpow[k] += gm * static_cast<T>(w[k]);
  }
  // dP_k/dy_n = 2 Re(conj(X_k) e^{-2 pi i k n / N}); sum over k is one forward DFT.
  std::vector<std::complex<T>> buf(kFftSize, std::complex<T>{});
  for (std::size_t k = 0; k < kSpectrumBins; ++k) buf[k] = gpow[k] * std::conj(spectrum[k]);
  fft512<T>().forward(buf);
  for (std::size_t n = 0; n < kWindowLength; ++n)
    grad[n] = T{2} * buf[n].real() * static_cast<T>(win[n]);
}

}  // namespace

template <typename T>
Matrix<T> log_mel(std::span<const T> wav, LogMelCache<T>* cache) {
  if (wav.size() != kInputSamples)
    throw ArgumentError("log_mel: expected " + std::to_string(kInputSamples) + " samples, got " +
                        std::to_string(wav.size()));
  const std::size_t frames = frame_count(wav.size());
  Matrix<T> out(frames, kMelBins);
  LogMelCache<T> local;
  LogMelCache<T>& c = cache ? *cache : local;
  c.samples = wav.size();
  c.spectrum.assign(frames * kSpectrumBins, std::complex<T>{});
  c.mel = Matrix<T>(frames, kMelBins);

  const auto n = static_cast<std::ptrdiff_t>(frames);
  const bool parallel = kernels::backend() == kernels::Backend::openmp;
#pragma omp parallel for schedule(static) if (parallel)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto t = static_cast<std::size_t>(i);
    forward_frame(wav, t, c.spectrum.data() + t * kSpectrumBins, c.mel.row(t).data(), out.row(t).data());
  }
  return out;
}

template <typename T>
std::vector<T> log_mel_vjp(const LogMelCache<T>& cache, const Matrix<T>& upstream) {
  const std::size_t frames = cache.mel.rows;
  if (upstream.rows != frames || upstream.cols != kMelBins)
    throw ArgumentError("log_mel_vjp: upstream must be " + std::to_string(frames) + "x" +
                        std::to_string(kMelBins));
  // Per-frame gradients first, then a fixed-order overlap-add.
  Matrix<T> frame_grad(frames, kWindowLength);
  const auto n = static_cast<std::ptrdiff_t>(frames);
  const bool parallel = kernels::backend() == kernels::Backend::openmp;
#pragma omp parallel for schedule(static) if (parallel)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto t = static_cast<std::size_t>(i);
    backward_frame(cache.spectrum.data() + t * kSpectrumBins, cache.mel.row(t).data(),
                   upstream.row(t).data(), frame_grad.row(t).data());
  }
  std::vector<T> grad(cache.samples, T{0});
  for (std::size_t t = 0; t < frames; ++t) {
    const T* g = frame_grad.row(t).data();
    T* dst = grad.data() + t * kHopLength;
    for (std::size_t j = 0; j < kWindowLength; ++j) dst[j] += g[j];
  }
  return grad;
}

template <typename T>
std::vector<T> log_mel_vjp(std::span<const T> wav, const Matrix<T>& upstream) {
  LogMelCache<T> cache;
  log_mel(wav, &cache);
  return log_mel_vjp(cache, upstream);
}

template Matrix<float> log_mel<float>(std::span<const float>, LogMelCache<float>*);
template Matrix<double> log_mel<double>(std::span<const double>, LogMelCache<double>*);
template std::vector<float> log_mel_vjp<float>(std::span<const float>, const Matrix<float>&);
template std::vector<double> log_mel_vjp<double>(std::span<const double>, const Matrix<double>&);
template std::vector<float> log_mel_vjp<float>(const LogMelCache<float>&, const Matrix<float>&);
template std::vector<double> log_mel_vjp<double>(const LogMelCache<double>&, const Matrix<double>&);

}  // namespace utlsa
