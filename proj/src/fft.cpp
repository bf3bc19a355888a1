#include "utlsa/fft.hpp"

#include <cmath>
#include <numbers>

#include "utlsa/errors.hpp"

namespace utlsa {

template <typename T>
Fft<T>::Fft(std::size_t n) : n_(n), bitrev_(n), twiddle_(n / 2) {
  if (n < 2 || (n & (n - 1)) != 0) throw ArgumentError("FFT size must be a power of two >= 2");
  std::size_t bits = 0;
  while ((std::size_t{1} << bits) < n) ++bits;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t r = 0;
    for (std::size_t b = 0; b < bits; ++b) r |= ((i >> b) & 1u) << (bits - 1 - b);
    bitrev_[i] = r;
  }
  for (std::size_t k = 0; k < n / 2; ++k) {
    const double a = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
    twiddle_[k] = {static_cast<T>(std::cos(a)), static_cast<T>(std::sin(a))};
  }
}

template <typename T>
void Fft<T>::forward(std::span<std::complex<T>> data) const {
  if (data.size() != n_) throw ArgumentError("FFT input length mismatch");
  for (std::size_t i = 0; i < n_; ++i)
    if (i < bitrev_[i]) std::swap(data[i], data[bitrev_[i]]);
  for (std::size_t len = 2; len <= n_; len <<= 1) {
    const std::size_t half = len / 2;
    const std::size_t stride = n_ / len;
    for (std::size_t start = 0; start < n_; start += len) {
      for (std::size_t j = 0; j < half; ++j) {
        const std::complex<T> w = twiddle_[j * stride];
        const std::complex<T> u = data[start + j];
        const std::complex<T> b = data[start + j + half];
        // Plain product; operator* carries NaN-recovery branches.
        const std::complex<T> v{b.real() * w.real() - b.imag() * w.imag(),
                                b.real() * w.imag() + b.imag() * w.real()};
        data[start + j] = u + v;
        data[start + j + half] = u - v;
      }
    }
  }
}

template class Fft<float>;
template class Fft<double>;

}  // namespace utlsa
