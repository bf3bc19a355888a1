#include "utlsa/kernels.hpp"

#include <atomic>
#include <cassert>

namespace utlsa::kernels {

namespace {

std::atomic<Backend> g_backend{Backend::serial};

template <typename T, typename W>
inline T dot(const T* a, const W* b, std::size_t n) {
  T s = T{0};
#pragma omp simd reduction(+ : s)
  for (std::size_t i = 0; i < n; ++i) s += a[i] * static_cast<T>(b[i]);
  return s;
}

template <typename T, typename W>
inline void axpy(T alpha, const W* x, T* y, std::size_t n) {
#pragma omp simd
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * static_cast<T>(x[i]);
}

// Row kernels shared by both backends.
template <typename T>
inline void linear_row(const Matrix<T>& x, const Matrix<float>& w, std::span<const float> bias,
                       Matrix<T>& y, std::size_t i) {
  const T* xr = x.data.data() + i * x.cols;
  T* yr = y.data.data() + i * y.cols;
  for (std::size_t j = 0; j < w.rows; ++j) {
    const T b = bias.empty() ? T{0} : static_cast<T>(bias[j]);
    yr[j] = b + dot(xr, w.data.data() + j * w.cols, w.cols);
  }
}

template <typename T>
inline void linear_grad_row(const Matrix<T>& gy, const Matrix<float>& w, Matrix<T>& gx,
                            std::size_t i) {
  T* gxr = gx.data.data() + i * gx.cols;
  for (std::size_t p = 0; p < gx.cols; ++p) gxr[p] = T{0};
  const T* gyr = gy.data.data() + i * gy.cols;
  for (std::size_t j = 0; j < w.rows; ++j) axpy(gyr[j], w.data.data() + j * w.cols, gxr, w.cols);
}

template <typename T>
inline void abt_row(const Matrix<T>& a, const Matrix<T>& b, T scale, Matrix<T>& c,
                    std::size_t i) {
  const T* ar = a.data.data() + i * a.cols;
  for (std::size_t j = 0; j < b.rows; ++j) c(i, j) = scale * dot(ar, b.data.data() + j * b.cols, a.cols);
}

template <typename T>
inline void ab_row(const Matrix<T>& a, const Matrix<T>& b, Matrix<T>& c, std::size_t i) {
  T* cr = c.data.data() + i * c.cols;
  for (std::size_t j = 0; j < c.cols; ++j) cr[j] = T{0};
  for (std::size_t p = 0; p < a.cols; ++p) axpy(a(i, p), b.data.data() + p * b.cols, cr, b.cols);
}

template <typename T>
inline void atb_row(const Matrix<T>& a, const Matrix<T>& b, Matrix<T>& c, std::size_t p) {
  T* cr = c.data.data() + p * c.cols;
  for (std::size_t j = 0; j < c.cols; ++j) cr[j] = T{0};
  for (std::size_t i = 0; i < a.rows; ++i) axpy(a(i, p), b.data.data() + i * b.cols, cr, b.cols);
}

template <typename T>
void shape_linear(const Matrix<T>& x, const Matrix<float>& w, std::span<const float> bias,
                  Matrix<T>& y) {
  assert(x.cols == w.cols);
  assert(bias.empty() || bias.size() == w.rows);
  (void)bias;
  if (y.rows != x.rows || y.cols != w.rows) y = Matrix<T>(x.rows, w.rows);
}

template <typename T>
void shape_linear_grad(const Matrix<T>& gy, const Matrix<float>& w, Matrix<T>& gx) {
  assert(gy.cols == w.rows);
  if (gx.rows != gy.rows || gx.cols != w.cols) gx = Matrix<T>(gy.rows, w.cols);
}

template <typename T>
void shape_abt(const Matrix<T>& a, const Matrix<T>& b, Matrix<T>& c) {
  assert(a.cols == b.cols);
  if (c.rows != a.rows || c.cols != b.rows) c = Matrix<T>(a.rows, b.rows);
}

template <typename T>
void shape_ab(const Matrix<T>& a, const Matrix<T>& b, Matrix<T>& c) {
  assert(a.cols == b.rows);
  if (c.rows != a.rows || c.cols != b.cols) c = Matrix<T>(a.rows, b.cols);
}

template <typename T>
void shape_atb(const Matrix<T>& a, const Matrix<T>& b, Matrix<T>& c) {
  assert(a.rows == b.rows);
  if (c.rows != a.cols || c.cols != b.cols) c = Matrix<T>(a.cols, b.cols);
}

}  // namespace

void set_backend(Backend b) { g_backend.store(b); }
Backend backend() { return g_backend.load(); }

namespace serial {

template <typename T>
void linear(const Matrix<T>& x, const Matrix<float>& w, std::span<const float> bias, Matrix<T>& y) {
  shape_linear(x, w, bias, y);
  for (std::size_t i = 0; i < x.rows; ++i) linear_row(x, w, bias, y, i);
}

template <typename T>
void linear_input_grad(const Matrix<T>& gy, const Matrix<float>& w, Matrix<T>& gx) {
  shape_linear_grad(gy, w, gx);
  for (std::size_t i = 0; i < gy.rows; ++i) linear_grad_row(gy, w, gx, i);
}

template <typename T>
void matmul_abt(const Matrix<T>& a, const Matrix<T>& b, T scale, Matrix<T>& c) {
  shape_abt(a, b, c);
  for (std::size_t i = 0; i < a.rows; ++i) abt_row(a, b, scale, c, i);
}

template <typename T>
void matmul_ab(const Matrix<T>& a, const Matrix<T>& b, Matrix<T>& c) {
  shape_ab(a, b, c);
  for (std::size_t i = 0; i < a.rows; ++i) ab_row(a, b, c, i);
}

template <typename T>
void matmul_atb(const Matrix<T>& a, const Matrix<T>& b, Matrix<T>& c) {
  shape_atb(a, b, c);
  for (std::size_t p = 0; p < a.cols; ++p) atb_row(a, b, c, p);
}

}  // namespace serial

namespace openmp {

template <typename T>
void linear(const Matrix<T>& x, const Matrix<float>& w, std::span<const float> bias, Matrix<T>& y) {
  shape_linear(x, w, bias, y);
  const auto n = static_cast<std::ptrdiff_t>(x.rows);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) linear_row(x, w, bias, y, static_cast<std::size_t>(i));
}

template <typename T>
void linear_input_grad(const Matrix<T>& gy, const Matrix<float>& w, Matrix<T>& gx) {
  shape_linear_grad(gy, w, gx);
  const auto n = static_cast<std::ptrdiff_t>(gy.rows);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) linear_grad_row(gy, w, gx, static_cast<std::size_t>(i));
}

template <typename T>
void matmul_abt(const Matrix<T>& a, const Matrix<T>& b, T scale, Matrix<T>& c) {
  shape_abt(a, b, c);
  const auto n = static_cast<std::ptrdiff_t>(a.rows);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) abt_row(a, b, scale, c, static_cast<std::size_t>(i));
}

template <typename T>
void matmul_ab(const Matrix<T>& a, const Matrix<T>& b, Matrix<T>& c) {
  shape_ab(a, b, c);
  const auto n = static_cast<std::ptrdiff_t>(a.rows);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) ab_row(a, b, c, static_cast<std::size_t>(i));
}

template <typename T>
void matmul_atb(const Matrix<T>& a, const Matrix<T>& b, Matrix<T>& c) {
  shape_atb(a, b, c);
  const auto n = static_cast<std::ptrdiff_t>(a.cols);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t p = 0; p < n; ++p) atb_row(a, b, c, static_cast<std::size_t>(p));
}

}  // namespace openmp

template <typename T>
void linear(const Matrix<T>& x, const Matrix<float>& w, std::span<const float> bias, Matrix<T>& y) {
  if (backend() == Backend::openmp)
    openmp::linear(x, w, bias, y);
  else
    serial::linear(x, w, bias, y);
}

template <typename T>
void linear_input_grad(const Matrix<T>& gy, const Matrix<float>& w, Matrix<T>& gx) {
  if (backend() == Backend::openmp)
    openmp::linear_input_grad(gy, w, gx);
  else
    serial::linear_input_grad(gy, w, gx);
}

template <typename T>
void matmul_abt(const Matrix<T>& a, const Matrix<T>& b, T scale, Matrix<T>& c) {
  if (backend() == Backend::openmp)
    openmp::matmul_abt(a, b, scale, c);
  else
    serial::matmul_abt(a, b, scale, c);
}

template <typename T>
void matmul_ab(const Matrix<T>& a, const Matrix<T>& b, Matrix<T>& c) {
  if (backend() == Backend::openmp)
    openmp::matmul_ab(a, b, c);
  else
    serial::matmul_ab(a, b, c);
}

template <typename T>
void matmul_atb(const Matrix<T>& a, const Matrix<T>& b, Matrix<T>& c) {
  if (backend() == Backend::openmp)
    openmp::matmul_atb(a, b, c);
  else
    serial::matmul_atb(a, b, c);
}

#define UTLSA_INSTANTIATE(NS, T)                                                                  \
  template void NS::linear<T>(const Matrix<T>&, const Matrix<float>&, std::span<const float>,     \
                              Matrix<T>&);                                                        \
  template void NS::linear_input_grad<T>(const Matrix<T>&, const Matrix<float>&, Matrix<T>&);     \
  template void NS::matmul_abt<T>(const Matrix<T>&, const Matrix<T>&, T, Matrix<T>&);             \
  template void NS::matmul_ab<T>(const Matrix<T>&, const Matrix<T>&, Matrix<T>&);                 \
  template void NS::matmul_atb<T>(const Matrix<T>&, const Matrix<T>&, Matrix<T>&);

UTLSA_INSTANTIATE(serial, float)
UTLSA_INSTANTIATE(serial, double)
UTLSA_INSTANTIATE(openmp, float)
UTLSA_INSTANTIATE(openmp, double)

template void linear<float>(const Matrix<float>&, const Matrix<float>&, std::span<const float>, Matrix<float>&);
template void linear<double>(const Matrix<double>&, const Matrix<float>&, std::span<const float>, Matrix<double>&);
template void linear_input_grad<float>(const Matrix<float>&, const Matrix<float>&, Matrix<float>&);
template void linear_input_grad<double>(const Matrix<double>&, const Matrix<float>&, Matrix<double>&);
template void matmul_abt<float>(const Matrix<float>&, const Matrix<float>&, float, Matrix<float>&);
template void matmul_abt<double>(const Matrix<double>&, const Matrix<double>&, double, Matrix<double>&);
template void matmul_ab<float>(const Matrix<float>&, const Matrix<float>&, Matrix<float>&);
template void matmul_ab<double>(const Matrix<double>&, const Matrix<double>&, Matrix<double>&);
template void matmul_atb<float>(const Matrix<float>&, const Matrix<float>&, Matrix<float>&);
template void matmul_atb<double>(const Matrix<double>&, const Matrix<double>&, Matrix<double>&);

}  // namespace utlsa::kernels
