#include "utlsa/layers.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <numbers>

#include "utlsa/kernels.hpp"

namespace utlsa {

template <typename T>
T gelu(T x) {
  return T{0.5} * x * (T{1} + std::erf(x / std::numbers::sqrt2_v<T>));
}

template <typename T>
T gelu_grad(T x) {
  const T cdf = T{0.5} * (T{1} + std::erf(x / std::numbers::sqrt2_v<T>));
  const T pdf = std::exp(T{-0.5} * x * x) * std::numbers::inv_sqrtpi_v<T> / std::numbers::sqrt2_v<T>;
  return cdf + x * pdf;
}

template <typename T>
Matrix<T> layer_norm(const LayerNormParams& p, const Matrix<T>& x, LayerNormCache<T>& cache) {
  const std::size_t d = x.cols;
  Matrix<T> y(x.rows, d);
  cache.xhat = Matrix<T>(x.rows, d);
  cache.inv_std.assign(x.rows, T{0});
  for (std::size_t r = 0; r < x.rows; ++r) {
    const auto xr = x.row(r);
    T mean = T{0};
    for (const T v : xr) mean += v;
    mean /= static_cast<T>(d);
    T var = T{0};
    for (const T v : xr) var += (v - mean) * (v - mean);
    var /= static_cast<T>(d);
    const T inv = T{1} / std::sqrt(var + static_cast<T>(kLayerNormEps));
    cache.inv_std[r] = inv;
    for (std::size_t c = 0; c < d; ++c) {
      const T xh = (xr[c] - mean) * inv;
      cache.xhat(r, c) = xh;
      y(r, c) = xh * static_cast<T>(p.gain[c]) + static_cast<T>(p.bias[c]);
    }
  }
  return y;
}

template <typename T>
Matrix<T> layer_norm_backward(const LayerNormParams& p, const LayerNormCache<T>& cache,
                              const Matrix<T>& gy) {
  const std::size_t d = gy.cols;
  Matrix<T> gx(gy.rows, d);
  std::vector<T> gxh(d);
  for (std::size_t r = 0; r < gy.rows; ++r) {
    T sum = T{0};
    T sum_x = T{0};
    for (std::size_t c = 0; c < d; ++c) {
      gxh[c] = gy(r, c) * static_cast<T>(p.gain[c]);
      sum += gxh[c];
      sum_x += gxh[c] * cache.xhat(r, c);
    }
    const T scale = cache.inv_std[r] / static_cast<T>(d);
    for (std::size_t c = 0; c < d; ++c)
      gx(r, c) = scale * (static_cast<T>(d) * gxh[c] - sum - cache.xhat(r, c) * sum_x);
  }
  return gx;
}

template <typename T>
Matrix<T> gelu(const Matrix<T>& x) {
  Matrix<T> y(x.rows, x.cols);
  for (std::size_t i = 0; i < x.size(); ++i) y.data[i] = gelu(x.data[i]);
  return y;
}

template <typename T>
Matrix<T> gelu_backward(const Matrix<T>& x, const Matrix<T>& gy) {
  Matrix<T> gx(x.rows, x.cols);
  for (std::size_t i = 0; i < x.size(); ++i) gx.data[i] = gy.data[i] * gelu_grad(x.data[i]);
  return gx;
}

std::size_t conv1d_output_rows(const Conv1dParams& p, std::size_t input_rows) {
  return (input_rows + 2 * p.padding - p.kernel) / p.stride + 1;
}

template <typename T>
Matrix<T> conv1d(const Conv1dParams& p, const Matrix<T>& x) {
  assert(x.cols == p.in_channels);
  const std::size_t out_rows = conv1d_output_rows(p, x.rows);
  // im2col: cols[t][c * kernel + j] = x[t * stride + j - padding][c]
  Matrix<T> cols(out_rows, p.in_channels * p.kernel);
  for (std::size_t t = 0; t < out_rows; ++t) {
    for (std::size_t j = 0; j < p.kernel; ++j) {
      const auto src = static_cast<std::ptrdiff_t>(t * p.stride + j) - static_cast<std::ptrdiff_t>(p.padding);
      if (src < 0 || src >= static_cast<std::ptrdiff_t>(x.rows)) continue;
      const auto xr = x.row(static_cast<std::size_t>(src));
      for (std::size_t c = 0; c < p.in_channels; ++c) cols(t, c * p.kernel + j) = xr[c];
    }
  }
  Matrix<T> y;
  kernels::linear(cols, p.weight, p.bias, y);
  return y;
}

template <typename T>
Matrix<T> conv1d_backward(const Conv1dParams& p, std::size_t input_rows, const Matrix<T>& gy) {
  Matrix<T> gcols;
  kernels::linear_input_grad(gy, p.weight, gcols);
  Matrix<T> gx(input_rows, p.in_channels);
  for (std::size_t t = 0; t < gy.rows; ++t) {
    for (std::size_t j = 0; j < p.kernel; ++j) {
      const auto src = static_cast<std::ptrdiff_t>(t * p.stride + j) - static_cast<std::ptrdiff_t>(p.padding);
      if (src < 0 || src >= static_cast<std::ptrdiff_t>(input_rows)) continue;
      auto gxr = gx.row(static_cast<std::size_t>(src));
      for (std::size_t c = 0; c < p.in_channels; ++c) gxr[c] += gcols(t, c * p.kernel + j);
    }
  }
  return gx;
}

template <typename T>
std::size_t AttentionCache<T>::payload_bytes() const {
  std::size_t n = context.size();
  for (const auto* group : {&q, &k, &v, &probs})
    for (const auto& m : *group) n += m.size();
  return n * sizeof(T);
}

namespace {

template <typename T>
Matrix<T> head_slice(const Matrix<T>& x, std::size_t head, std::size_t head_dim) {
  Matrix<T> out(x.rows, head_dim);
  for (std::size_t r = 0; r < x.rows; ++r)
    std::copy_n(x.row(r).data() + head * head_dim, head_dim, out.row(r).data());
  return out;
}

template <typename T>
void scatter_head(const Matrix<T>& src, std::size_t head, Matrix<T>& dst) {
  for (std::size_t r = 0; r < src.rows; ++r)
    std::copy_n(src.row(r).data(), src.cols, dst.row(r).data() + head * src.cols);
}

}  // namespace

template <typename T>
Matrix<T> attention(const AttentionParams& p, const Matrix<T>& q_in, const Matrix<T>& kv_in,
                    bool causal, AttentionCache<T>& cache) {
  const std::size_t d = p.q.weight.rows;
  const std::size_t hd = d / p.heads;
  Matrix<T> q, k, v;
  kernels::linear(q_in, p.q.weight, p.q.bias, q);
  kernels::linear(kv_in, p.k.weight, p.k.bias, k);
  kernels::linear(kv_in, p.v.weight, p.v.bias, v);

  cache.q.assign(p.heads, {});
  cache.k.assign(p.heads, {});
  cache.v.assign(p.heads, {});
  cache.probs.assign(p.heads, {});
  cache.context = Matrix<T>(q_in.rows, d);
  const T scale = T{1} / std::sqrt(static_cast<T>(hd));
  for (std::size_t h = 0; h < p.heads; ++h) {
    cache.q[h] = head_slice(q, h, hd);
    cache.k[h] = head_slice(k, h, hd);
    cache.v[h] = head_slice(v, h, hd);
    Matrix<T>& s = cache.probs[h];
    kernels::matmul_abt(cache.q[h], cache.k[h], scale, s);
    for (std::size_t i = 0; i < s.rows; ++i) {
      auto row = s.row(i);
      const std::size_t valid = causal ? std::min(i + 1, row.size()) : row.size();
      T mx = row[0];
      for (std::size_t j = 1; j < valid; ++j) mx = std::max(mx, row[j]);
      T z = T{0};
      for (std::size_t j = 0; j < valid; ++j) {
        row[j] = std::exp(row[j] - mx);
        z += row[j];
      }
      for (std::size_t j = 0; j < valid; ++j) row[j] /= z;
      for (std::size_t j = valid; j < row.size(); ++j) row[j] = T{0};
    }
    Matrix<T> ctx;
    kernels::matmul_ab(s, cache.v[h], ctx);
    scatter_head(ctx, h, cache.context);
  }
  Matrix<T> y;
  kernels::linear(cache.context, p.o.weight, p.o.bias, y);
  return y;
}

template <typename T>
AttentionGrads<T> attention_backward(const AttentionParams& p, const AttentionCache<T>& cache,
                                     const Matrix<T>& gy) {
  const std::size_t d = p.q.weight.rows;
  const std::size_t hd = d / p.heads;
  const std::size_t lq = cache.context.rows;
  const std::size_t lk = cache.k.front().rows;
  Matrix<T> gctx;
  kernels::linear_input_grad(gy, p.o.weight, gctx);

  Matrix<T> gq(lq, d), gk(lk, d), gv(lk, d);
  const T scale = T{1} / std::sqrt(static_cast<T>(hd));
  for (std::size_t h = 0; h < p.heads; ++h) {
    const Matrix<T> go = head_slice(gctx, h, hd);
    const Matrix<T>& probs = cache.probs[h];
    Matrix<T> gp, gvh;
    kernels::matmul_abt(go, cache.v[h], T{1}, gp);
    kernels::matmul_atb(probs, go, gvh);
    // softmax backward; masked entries have probs == 0 and drop out
    for (std::size_t i = 0; i < gp.rows; ++i) {
      auto g = gp.row(i);
      const auto pr = probs.row(i);
      T dotp = T{0};
      for (std::size_t j = 0; j < g.size(); ++j) dotp += g[j] * pr[j];
      for (std::size_t j = 0; j < g.size(); ++j) g[j] = pr[j] * (g[j] - dotp) * scale;
    }
    Matrix<T> gqh, gkh;
    kernels::matmul_ab(gp, cache.k[h], gqh);
    kernels::matmul_atb(gp, cache.q[h], gkh);
    scatter_head(gqh, h, gq);
    scatter_head(gkh, h, gk);
    scatter_head(gvh, h, gv);
  }

  AttentionGrads<T> out;
  kernels::linear_input_grad(gq, p.q.weight, out.q_in);
  Matrix<T> tmp;
  kernels::linear_input_grad(gk, p.k.weight, out.kv_in);
  kernels::linear_input_grad(gv, p.v.weight, tmp);
  out.kv_in += tmp;
  return out;
}

Matrix<float> sinusoidal_positions(std::size_t length, std::size_t dim) {
  Matrix<float> pe(length, dim);
  for (std::size_t t = 0; t < length; ++t) {
    for (std::size_t i = 0; 2 * i < dim; ++i) {
      const double angle = static_cast<double>(t) /
                           std::pow(10000.0, static_cast<double>(2 * i) / static_cast<double>(dim));
      pe(t, 2 * i) = static_cast<float>(std::sin(angle));
      if (2 * i + 1 < dim) pe(t, 2 * i + 1) = static_cast<float>(std::cos(angle));
    }
  }
  return pe;
}

#define UTLSA_LAYERS(T)                                                                            \
  template T gelu<T>(T);                                                                           \
  template T gelu_grad<T>(T);                                                                      \
  template Matrix<T> layer_norm<T>(const LayerNormParams&, const Matrix<T>&, LayerNormCache<T>&);  \
  template Matrix<T> layer_norm_backward<T>(const LayerNormParams&, const LayerNormCache<T>&,      \
                                            const Matrix<T>&);                                     \
  template Matrix<T> gelu<T>(const Matrix<T>&);                                                    \
  template Matrix<T> gelu_backward<T>(const Matrix<T>&, const Matrix<T>&);                         \
  template Matrix<T> conv1d<T>(const Conv1dParams&, const Matrix<T>&);                             \
  template Matrix<T> conv1d_backward<T>(const Conv1dParams&, std::size_t, const Matrix<T>&);       \
  template struct AttentionCache<T>;                                                               \
  template Matrix<T> attention<T>(const AttentionParams&, const Matrix<T>&, const Matrix<T>&, bool, \
                                  AttentionCache<T>&);                                             \
  template AttentionGrads<T> attention_backward<T>(const AttentionParams&, const AttentionCache<T>&, \
                                                   const Matrix<T>&);

UTLSA_LAYERS(float)
UTLSA_LAYERS(double)

}  // namespace utlsa
