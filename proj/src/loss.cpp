#include "utlsa/loss.hpp"

#include <cmath>

#include "utlsa/errors.hpp"

namespace utlsa {

namespace {

template <typename T>
void check_shapes(const Matrix<T>& a, const Matrix<T>& b) {
  if (!a.same_shape(b) || a.rows == 0)
    throw ArgumentError("cosine_frame_loss: shape mismatch (" + std::to_string(a.rows) + "x" +
                        std::to_string(a.cols) + " vs " + std::to_string(b.rows) + "x" +
                        std::to_string(b.cols) + ")");
}

}  // namespace

template <typename T>
T cosine_frame_loss(const Matrix<T>& a, const Matrix<T>& b) {
  return cosine_frame_loss_vjp(a, b).loss;
}

template <typename T>
LossGrad<T> cosine_frame_loss_vjp(const Matrix<T>& a, const Matrix<T>& b) {
  check_shapes(a, b);
  LossGrad<T> out;
  out.grad = Matrix<T>(a.rows, a.cols);
  const T inv_frames = T{1} / static_cast<T>(a.rows);
  for (std::size_t t = 0; t < a.rows; ++t) {
    const auto ar = a.row(t);
    const auto br = b.row(t);
    T dot = T{0}, aa = T{0}, bb = T{0};
    for (std::size_t c = 0; c < a.cols; ++c) {
      dot += ar[c] * br[c];
      aa += ar[c] * ar[c];
      bb += br[c] * br[c];
    }
    const T na = std::sqrt(aa);
    const T nb = std::sqrt(bb);
    const T denom = na * nb + static_cast<T>(kCosineGuard);
    out.loss += (T{1} - dot / denom) * inv_frames;
    // d cos / d a = b / D - dot * nb * (a / na) / D^2
    const T coef_a = na > T{0} ? dot * nb / (na * denom * denom) : T{0};
    auto g = out.grad.row(t);
    for (std::size_t c = 0; c < a.cols; ++c) g[c] = -inv_frames * (br[c] / denom - coef_a * ar[c]);
  }
  return out;
}

template float cosine_frame_loss<float>(const Matrix<float>&, const Matrix<float>&);
template double cosine_frame_loss<double>(const Matrix<double>&, const Matrix<double>&);
template LossGrad<float> cosine_frame_loss_vjp<float>(const Matrix<float>&, const Matrix<float>&);
template LossGrad<double> cosine_frame_loss_vjp<double>(const Matrix<double>&, const Matrix<double>&);

}  // namespace utlsa
