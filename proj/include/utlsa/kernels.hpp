#pragma once

#include <span>

#include "utlsa/tensor.hpp"

// Dense kernels on the hot path of the encoder/decoder passes. Each kernel has
// a serial reference version and an OpenMP version that parallelizes over
// output rows. Each output element is reduced in the same order by both, so the
// two backends are bit-identical.
namespace utlsa::kernels {

enum class Backend { serial, openmp };

void set_backend(Backend b);
Backend backend();

// y[m x n] = x[m x k] * w^T + bias, with w stored n x k (out x in).
template <typename T>
void linear(const Matrix<T>& x, const Matrix<float>& w, std::span<const float> bias, Matrix<T>& y);

// gx[m x k] = gy[m x n] * w
template <typename T>
void linear_input_grad(const Matrix<T>& gy, const Matrix<float>& w, Matrix<T>& gx);

// c[m x n] = a[m x k] * b[n x k]^T * scale   (attention scores)
template <typename T>
void matmul_abt(const Matrix<T>& a, const Matrix<T>& b, T scale, Matrix<T>& c);

// c[m x n] = a[m x k] * b[k x n]
template <typename T>
void matmul_ab(const Matrix<T>& a, const Matrix<T>& b, Matrix<T>& c);

// c[k x n] = a[m x k]^T * b[m x n]
template <typename T>
void matmul_atb(const Matrix<T>& a, const Matrix<T>& b, Matrix<T>& c);

namespace serial {
template <typename T>
void linear(const Matrix<T>& x, const Matrix<float>& w, std::span<const float> bias, Matrix<T>& y);
template <typename T>
void linear_input_grad(const Matrix<T>& gy, const Matrix<float>& w, Matrix<T>& gx);
template <typename T>
void matmul_abt(const Matrix<T>& a, const Matrix<T>& b, T scale, Matrix<T>& c);
template <typename T>
void matmul_ab(const Matrix<T>& a, const Matrix<T>& b, Matrix<T>& c);
template <typename T>
void matmul_atb(const Matrix<T>& a, const Matrix<T>& b, Matrix<T>& c);
}  // namespace serial

namespace openmp {
template <typename T>
void linear(const Matrix<T>& x, const Matrix<float>& w, std::span<const float> bias, Matrix<T>& y);
template <typename T>
void linear_input_grad(const Matrix<T>& gy, const Matrix<float>& w, Matrix<T>& gx);
template <typename T>
void matmul_abt(const Matrix<T>& a, const Matrix<T>& b, T scale, Matrix<T>& c);
template <typename T>
void matmul_ab(const Matrix<T>& a, const Matrix<T>& b, Matrix<T>& c);
template <typename T>
void matmul_atb(const Matrix<T>& a, const Matrix<T>& b, Matrix<T>& c);
}  // namespace openmp

}  // namespace utlsa::kernels
