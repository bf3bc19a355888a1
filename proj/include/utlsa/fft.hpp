#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace utlsa {

// In-place iterative radix-2 DFT: X_k = sum_n x_n exp(-2 pi i k n / N).
template <typename T>
class Fft {
 public:
  explicit Fft(std::size_t n);

  std::size_t size() const { return n_; }
  void forward(std::span<std::complex<T>> data) const;

 private:
  std::size_t n_;
  std::vector<std::size_t> bitrev_;
  std::vector<std::complex<T>> twiddle_;  // exp(-2 pi i k / N), k < N/2
};

extern template class Fft<float>;
extern template class Fft<double>;

}  // namespace utlsa
