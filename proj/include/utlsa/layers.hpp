#pragma once

#include <cstddef>
#include <vector>

#include "utlsa/tensor.hpp"

// Building blocks of the encoder and decoder. Parameters are frozen float32
// tensors; activations are computed in T (float in production, double in the
// gradient checks). Every backward function returns input gradients only.
namespace utlsa {

struct LinearParams {
  Matrix<float> weight;  // out x in
  std::vector<float> bias;
};

struct LayerNormParams {
  std::vector<float> gain;
  std::vector<float> bias;
};

struct Conv1dParams {
  Matrix<float> weight;  // out x (in * kernel), flattened from [out][in][kernel]
  std::vector<float> bias;
  std::size_t in_channels = 0;
  std::size_t kernel = 0;
  std::size_t stride = 1;
  std::size_t padding = 0;
};

struct AttentionParams {
  LinearParams q, k, v, o;
  std::size_t heads = 0;
};

inline constexpr double kLayerNormEps = 1e-5;

template <typename T>
T gelu(T x);
template <typename T>
T gelu_grad(T x);

// ---- layer norm ----
template <typename T>
struct LayerNormCache {
  Matrix<T> xhat;
  std::vector<T> inv_std;
  std::size_t payload_bytes() const { return (xhat.size() + inv_std.size()) * sizeof(T); }
};

template <typename T>
Matrix<T> layer_norm(const LayerNormParams& p, const Matrix<T>& x, LayerNormCache<T>& cache);
template <typename T>
Matrix<T> layer_norm_backward(const LayerNormParams& p, const LayerNormCache<T>& cache,
                              const Matrix<T>& gy);

// ---- elementwise GELU (cache = input) ----
template <typename T>
Matrix<T> gelu(const Matrix<T>& x);
template <typename T>
Matrix<T> gelu_backward(const Matrix<T>& x, const Matrix<T>& gy);

// ---- 1-D convolution over time; x is time x channels ----
template <typename T>
Matrix<T> conv1d(const Conv1dParams& p, const Matrix<T>& x);
template <typename T>
Matrix<T> conv1d_backward(const Conv1dParams& p, std::size_t input_rows, const Matrix<T>& gy);
std::size_t conv1d_output_rows(const Conv1dParams& p, std::size_t input_rows);

// ---- multi-head attention ----
template <typename T>
struct AttentionCache {
  std::vector<Matrix<T>> q, k, v, probs;  // per head
  Matrix<T> context;                      // heads concatenated
  std::size_t payload_bytes() const;
};

template <typename T>
struct AttentionGrads {
  Matrix<T> q_in;
  Matrix<T> kv_in;
};

// Queries from q_in, keys/values from kv_in. causal masks j > i.
template <typename T>
Matrix<T> attention(const AttentionParams& p, const Matrix<T>& q_in, const Matrix<T>& kv_in,
                    bool causal, AttentionCache<T>& cache);
template <typename T>
AttentionGrads<T> attention_backward(const AttentionParams& p, const AttentionCache<T>& cache,
                                     const Matrix<T>& gy);

// PE[t, 2i] = sin(t / 10000^(2i/d)), PE[t, 2i+1] = cos(same).
Matrix<float> sinusoidal_positions(std::size_t length, std::size_t dim);

}  // namespace utlsa
