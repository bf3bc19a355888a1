#pragma once

#include "utlsa/tensor.hpp"

namespace utlsa {

// Added to each product of frame norms.
inline constexpr double kCosineGuard = 1e-8;

// Mean over frames of 1 - cos(a_t, b_t). Result lies in [0, 2].
template <typename T>
T cosine_frame_loss(const Matrix<T>& a, const Matrix<T>& b);

template <typename T>
struct LossGrad {
  T loss = T{0};
  Matrix<T> grad;  // d loss / d a
};

template <typename T>
LossGrad<T> cosine_frame_loss_vjp(const Matrix<T>& a, const Matrix<T>& b);

}  // namespace utlsa
