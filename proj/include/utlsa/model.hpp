#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "utlsa/features.hpp"
#include "utlsa/layers.hpp"
#include "utlsa/tensor.hpp"

namespace utlsa {

inline constexpr std::size_t kModelDim = 64;
inline constexpr std::size_t kHeads = 4;
inline constexpr std::size_t kMlpHidden = 256;
inline constexpr std::size_t kEncoderBlocks = 2;
inline constexpr std::size_t kDecoderBlocks = 4;
inline constexpr std::size_t kLatentFrames = 49;  // conv2 halves the 98 feature frames
inline constexpr std::size_t kVocabSize = 30;
inline constexpr std::size_t kMaxTokens = 64;

// Token ids: 'a'..'z' -> 0..25, then the specials.
inline constexpr int kTokenSpace = 26;
inline constexpr int kTokenBos = 27;
inline constexpr int kTokenEos = 28;
inline constexpr int kTokenPad = 29;

// Latent sequence h, kLatentFrames x kModelDim.
template <typename T>
using Latent = Matrix<T>;

struct EncoderBlockParams {
  LayerNormParams ln1;
  AttentionParams attn;
  LayerNormParams ln2;
  LinearParams fc1, fc2;
};

struct EncoderParams {
  Conv1dParams conv1, conv2;
  std::vector<EncoderBlockParams> blocks;
  LayerNormParams ln_post;
};

struct DecoderBlockParams {
  LayerNormParams ln1;
  AttentionParams self_attn;
  LayerNormParams ln2;
  AttentionParams cross_attn;
  LayerNormParams ln3;
  LinearParams fc1, fc2;
};

struct DecoderParams {
  Matrix<float> token_embedding;  // vocab x d
  std::vector<DecoderBlockParams> blocks;
  LayerNormParams ln_post;
  Matrix<float> out_proj;  // vocab x d, no bias
};

struct ModelParams {
  EncoderParams encoder;
  DecoderParams decoder;
};

enum class TensorRole { weight, gain, bias };

struct TensorRef {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::span<float> values;
  TensorRole role;
  std::size_t fan_in;
};

// Allocates every tensor at its architectural shape (values zero).
EncoderParams make_encoder_shapes();
DecoderParams make_decoder_shapes();

// Visits every tensor in canonical order: encoder in definition order, then
// decoder. This order defines initialization draws and the weights file layout.
void for_each_tensor(EncoderParams& enc, const std::function<void(const TensorRef&)>& fn);
void for_each_tensor(DecoderParams& dec, const std::function<void(const TensorRef&)>& fn);
void for_each_tensor(ModelParams& params, const std::function<void(const TensorRef&)>& fn);

// Weights ~ N(0, std = 1/sqrt(fan_in)); gains 1; biases 0. One SplitMix64
// stream seeded with `seed` covers encoder then decoder.
ModelParams init_params(std::uint64_t seed);

// FNV-1a over every tensor's name and raw bytes.
std::uint64_t checksum(const EncoderParams& enc);
std::uint64_t checksum(const DecoderParams& dec);

// ---------------------------------------------------------------- encoder

template <typename T>
struct EncoderBlockCache {
  LayerNormCache<T> ln1, ln2;
  AttentionCache<T> attn;
  Matrix<T> fc1_out;  // pre-GELU
  std::size_t payload_bytes() const;
};

template <typename T>
struct EncoderCache {
  std::size_t input_rows = 0;
  Matrix<T> conv1_out, conv2_out;  // pre-GELU
  std::vector<EncoderBlockCache<T>> blocks;
  LayerNormCache<T> ln_post;
  std::size_t payload_bytes() const;
};

// h = encoder(z), z is kFrames x kMelBins; returns kLatentFrames x kModelDim.
template <typename T>
Latent<T> encode(const EncoderParams& params, const Matrix<T>& z, EncoderCache<T>* cache = nullptr);

// d<upstream, encode(z)>/dz.
template <typename T>
Matrix<T> encode_vjp(const EncoderParams& params, const EncoderCache<T>& cache,
                     const Matrix<T>& upstream);
template <typename T>
Matrix<T> encode_vjp(const EncoderParams& params, const Matrix<T>& z, const Matrix<T>& upstream);

// ---------------------------------------------------------------- decoder

// Normalized text -> BOS, letters/spaces, EOS, then PAD up to `length`.
// Characters outside [a-z ] are rejected.
std::vector<int> tokenize(std::string_view text, std::size_t length = 0);

template <typename T>
struct DecoderBlockCache {
  LayerNormCache<T> ln1, ln2, ln3;
  AttentionCache<T> self_attn, cross_attn;
  Matrix<T> fc1_out;
  std::size_t payload_bytes() const;
};

template <typename T>
struct DecoderCache {
  std::vector<DecoderBlockCache<T>> blocks;
  LayerNormCache<T> ln_post;
  Matrix<T> probs;  // softmax over vocab per position
  std::size_t payload_bytes() const;
};

template <typename T>
struct CrossEntropyResult {
  T loss = T{0};
  Latent<T> grad_h;
};

// Teacher-forced masked cross-entropy of tokens[1:] given tokens[:-1] and h.
template <typename T>
CrossEntropyResult<T> decode_ce(const DecoderParams& params, const Latent<T>& h,
                                std::span<const int> tokens, DecoderCache<T>* cache = nullptr);

}  // namespace utlsa
