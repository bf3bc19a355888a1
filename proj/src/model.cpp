#include "utlsa/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "utlsa/errors.hpp"
#include "utlsa/kernels.hpp"
#include "utlsa/rng.hpp"
#include "utlsa/text.hpp"

namespace utlsa {

namespace {

LinearParams make_linear(std::size_t in, std::size_t out) {
  return {Matrix<float>(out, in), std::vector<float>(out, 0.0f)};
}

LayerNormParams make_ln(std::size_t d) {
  return {std::vector<float>(d, 1.0f), std::vector<float>(d, 0.0f)};
}

Conv1dParams make_conv(std::size_t in, std::size_t out, std::size_t kernel, std::size_t stride) {
  Conv1dParams c;
  c.weight = Matrix<float>(out, in * kernel);
  c.bias.assign(out, 0.0f);
  c.in_channels = in;
  c.kernel = kernel;
  c.stride = stride;
  c.padding = 1;
  return c;
}

AttentionParams make_attention(std::size_t d, std::size_t heads) {
  return {make_linear(d, d), make_linear(d, d), make_linear(d, d), make_linear(d, d), heads};
}

using Visitor = std::function<void(const TensorRef&)>;

std::uint32_t u32(std::size_t v) { return static_cast<std::uint32_t>(v); }

void visit_linear(const std::string& name, LinearParams& p, const Visitor& fn) {
  fn({name + ".weight", {u32(p.weight.rows), u32(p.weight.cols)}, p.weight.data, TensorRole::weight,
      p.weight.cols});
  fn({name + ".bias", {u32(p.bias.size())}, p.bias, TensorRole::bias, 0});
}

void visit_ln(const std::string& name, LayerNormParams& p, const Visitor& fn) {
  fn({name + ".gain", {u32(p.gain.size())}, p.gain, TensorRole::gain, 0});
  fn({name + ".bias", {u32(p.bias.size())}, p.bias, TensorRole::bias, 0});
}

void visit_conv(const std::string& name, Conv1dParams& p, const Visitor& fn) {
  fn({name + ".weight", {u32(p.weight.rows), u32(p.in_channels), u32(p.kernel)}, p.weight.data,
      TensorRole::weight, p.weight.cols});
  fn({name + ".bias", {u32(p.bias.size())}, p.bias, TensorRole::bias, 0});
}

void visit_attention(const std::string& name, AttentionParams& p, const Visitor& fn) {
  visit_linear(name + ".q", p.q, fn);
  visit_linear(name + ".k", p.k, fn);
  visit_linear(name + ".v", p.v, fn);
  visit_linear(name + ".o", p.o, fn);
}

template <typename Params>
std::uint64_t checksum_impl(const Params& params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const void* bytes, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(bytes);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ULL;
    }
  };
  // The visitor only reads.
  for_each_tensor(const_cast<Params&>(params), [&](const TensorRef& t) {
    mix(t.name.data(), t.name.size());
    mix(t.values.data(), t.values.size_bytes());
  });
  return h;
}

template <typename T>
void add_positions(Matrix<T>& x) {
  static const Matrix<float> pe = sinusoidal_positions(kMaxTokens > kLatentFrames ? kMaxTokens : kLatentFrames, kModelDim);
  for (std::size_t t = 0; t < x.rows; ++t)
    for (std::size_t c = 0; c < x.cols; ++c) x(t, c) += static_cast<T>(pe(t, c));
}

template <typename T>
Matrix<T> mlp_forward(const LinearParams& fc1, const LinearParams& fc2, const Matrix<T>& x,
                      Matrix<T>& fc1_out) {
  kernels::linear(x, fc1.weight, fc1.bias, fc1_out);
  Matrix<T> y;
  kernels::linear(gelu(fc1_out), fc2.weight, fc2.bias, y);
  return y;
}

template <typename T>
Matrix<T> mlp_backward(const LinearParams& fc1, const LinearParams& fc2, const Matrix<T>& fc1_out,
                       const Matrix<T>& gy) {
  Matrix<T> gh, gx;
  kernels::linear_input_grad(gy, fc2.weight, gh);
  kernels::linear_input_grad(gelu_backward(fc1_out, gh), fc1.weight, gx);
  return gx;
}

}  // namespace

EncoderParams make_encoder_shapes() {
  EncoderParams p;
  p.conv1 = make_conv(kMelBins, kModelDim, 3, 1);
  p.conv2 = make_conv(kModelDim, kModelDim, 3, 2);
  p.blocks.resize(kEncoderBlocks);
  for (auto& b : p.blocks) {
    b.ln1 = make_ln(kModelDim);
    b.attn = make_attention(kModelDim, kHeads);
    b.ln2 = make_ln(kModelDim);
    b.fc1 = make_linear(kModelDim, kMlpHidden);
    b.fc2 = make_linear(kMlpHidden, kModelDim);
  }
  p.ln_post = make_ln(kModelDim);
  return p;
}

DecoderParams make_decoder_shapes() {
  DecoderParams p;
  p.token_embedding = Matrix<float>(kVocabSize, kModelDim);
  p.blocks.resize(kDecoderBlocks);
  for (auto& b : p.blocks) {
    b.ln1 = make_ln(kModelDim);
    b.self_attn = make_attention(kModelDim, kHeads);
    b.ln2 = make_ln(kModelDim);
    b.cross_attn = make_attention(kModelDim, kHeads);
    b.ln3 = make_ln(kModelDim);
    b.fc1 = make_linear(kModelDim, kMlpHidden);
    b.fc2 = make_linear(kMlpHidden, kModelDim);
  }
  p.ln_post = make_ln(kModelDim);
  p.out_proj = Matrix<float>(kVocabSize, kModelDim);
  return p;
}

void for_each_tensor(EncoderParams& enc, const Visitor& fn) {
  visit_conv("encoder.conv1", enc.conv1, fn);
  visit_conv("encoder.conv2", enc.conv2, fn);
  for (std::size_t i = 0; i < enc.blocks.size(); ++i) {
    auto& b = enc.blocks[i];
    const std::string base = "encoder.blocks." + std::to_string(i);
    visit_ln(base + ".ln1", b.ln1, fn);
    visit_attention(base + ".attn", b.attn, fn);
    visit_ln(base + ".ln2", b.ln2, fn);
    visit_linear(base + ".mlp.fc1", b.fc1, fn);
    visit_linear(base + ".mlp.fc2", b.fc2, fn);
  }
  visit_ln("encoder.ln_post", enc.ln_post, fn);
}

void for_each_tensor(DecoderParams& dec, const Visitor& fn) {
  fn({"decoder.token_embedding",
      {u32(dec.token_embedding.rows), u32(dec.token_embedding.cols)},
      dec.token_embedding.data,
      TensorRole::weight,
      dec.token_embedding.cols});
  for (std::size_t i = 0; i < dec.blocks.size(); ++i) {
    auto& b = dec.blocks[i];
    const std::string base = "decoder.blocks." + std::to_string(i);
    visit_ln(base + ".ln1", b.ln1, fn);
    visit_attention(base + ".self_attn", b.self_attn, fn);
    visit_ln(base + ".ln2", b.ln2, fn);
    visit_attention(base + ".cross_attn", b.cross_attn, fn);
    visit_ln(base + ".ln3", b.ln3, fn);
    visit_linear(base + ".mlp.fc1", b.fc1, fn);
    visit_linear(base + ".mlp.fc2", b.fc2, fn);
  }
  visit_ln("decoder.ln_post", dec.ln_post, fn);
  fn({"decoder.out_proj.weight", {u32(dec.out_proj.rows), u32(dec.out_proj.cols)}, dec.out_proj.data,
      TensorRole::weight, dec.out_proj.cols});
}

void for_each_tensor(ModelParams& params, const Visitor& fn) {
  for_each_tensor(params.encoder, fn);
  for_each_tensor(params.decoder, fn);
}

ModelParams init_params(std::uint64_t seed) {
  ModelParams p{make_encoder_shapes(), make_decoder_shapes()};
  Rng rng(seed);
  for_each_tensor(p, [&rng](const TensorRef& t) {
    switch (t.role) {
      case TensorRole::weight: {
        const double std = 1.0 / std::sqrt(static_cast<double>(t.fan_in));
        for (float& v : t.values) v = static_cast<float>(std * rng.normal());
        break;
      }
      case TensorRole::gain: std::fill(t.values.begin(), t.values.end(), 1.0f); break;
      case TensorRole::bias: std::fill(t.values.begin(), t.values.end(), 0.0f); break;
    }
  });
  return p;
}

std::uint64_t checksum(const EncoderParams& enc) { return checksum_impl(enc); }
std::uint64_t checksum(const DecoderParams& dec) { return checksum_impl(dec); }

// ---------------------------------------------------------------- encoder

template <typename T>
std::size_t EncoderBlockCache<T>::payload_bytes() const {
  return ln1.payload_bytes() + ln2.payload_bytes() + attn.payload_bytes() + fc1_out.size() * sizeof(T);
}

template <typename T>
std::size_t EncoderCache<T>::payload_bytes() const {
  std::size_t n = (conv1_out.size() + conv2_out.size()) * sizeof(T) + ln_post.payload_bytes();
  for (const auto& b : blocks) n += b.payload_bytes();
  return n;
}

template <typename T>
Latent<T> encode(const EncoderParams& params, const Matrix<T>& z, EncoderCache<T>* cache) {
  if (z.rows != kFrames || z.cols != kMelBins)
    throw ArgumentError("encode: expected a " + std::to_string(kFrames) + "x" + std::to_string(kMelBins) +
                        " spectrogram, got " + std::to_string(z.rows) + "x" + std::to_string(z.cols));
  EncoderCache<T> local;
  EncoderCache<T>& c = cache ? *cache : local;
  c.input_rows = z.rows;
  c.conv1_out = conv1d(params.conv1, z);
  c.conv2_out = conv1d(params.conv2, gelu(c.conv1_out));
  Matrix<T> x = gelu(c.conv2_out);
  add_positions(x);

  c.blocks.resize(params.blocks.size());
  for (std::size_t i = 0; i < params.blocks.size(); ++i) {
    const auto& bp = params.blocks[i];
    auto& bc = c.blocks[i];
    const Matrix<T> n1 = layer_norm(bp.ln1, x, bc.ln1);
    x += attention(bp.attn, n1, n1, false, bc.attn);
    const Matrix<T> n2 = layer_norm(bp.ln2, x, bc.ln2);
    x += mlp_forward(bp.fc1, bp.fc2, n2, bc.fc1_out);
  }
  return layer_norm(params.ln_post, x, c.ln_post);
}

template <typename T>
Matrix<T> encode_vjp(const EncoderParams& params, const EncoderCache<T>& cache,
                     const Matrix<T>& upstream) {
  if (upstream.rows != kLatentFrames || upstream.cols != kModelDim)
    throw ArgumentError("encode_vjp: upstream must be " + std::to_string(kLatentFrames) + "x" +
                        std::to_string(kModelDim));
  Matrix<T> g = layer_norm_backward(params.ln_post, cache.ln_post, upstream);
  for (std::size_t i = params.blocks.size(); i-- > 0;) {
    const auto& bp = params.blocks[i];
    const auto& bc = cache.blocks[i];
    g += layer_norm_backward(bp.ln2, bc.ln2, mlp_backward(bp.fc1, bp.fc2, bc.fc1_out, g));
    auto ga = attention_backward(bp.attn, bc.attn, g);
    ga.q_in += ga.kv_in;
    g += layer_norm_backward(bp.ln1, bc.ln1, ga.q_in);
  }
  const Matrix<T> g_act1 =
      conv1d_backward(params.conv2, cache.conv1_out.rows, gelu_backward(cache.conv2_out, g));
  return conv1d_backward(params.conv1, cache.input_rows, gelu_backward(cache.conv1_out, g_act1));
}

template <typename T>
Matrix<T> encode_vjp(const EncoderParams& params, const Matrix<T>& z, const Matrix<T>& upstream) {
  EncoderCache<T> cache;
  encode(params, z, &cache);
  return encode_vjp(params, cache, upstream);
}

// ---------------------------------------------------------------- decoder

std::vector<int> tokenize(std::string_view text, std::size_t length) {
  const std::string norm = normalize_text(text);
  std::vector<int> tokens{kTokenBos};
  for (const char c : norm) {
    if (c == ' ')
      tokens.push_back(kTokenSpace);
    else if (c >= 'a' && c <= 'z')
      tokens.push_back(c - 'a');
    else
      throw ArgumentError(std::string("tokenize: character '") + c + "' is not in the vocabulary");
  }
  tokens.push_back(kTokenEos);
  if (length == 0) length = tokens.size();
  if (tokens.size() > length || length > kMaxTokens)
    throw ArgumentError("tokenize: '" + norm + "' does not fit in " + std::to_string(std::min(length, kMaxTokens)) +
                        " tokens");
  tokens.resize(length, kTokenPad);
  return tokens;
}

template <typename T>
std::size_t DecoderBlockCache<T>::payload_bytes() const {
  return ln1.payload_bytes() + ln2.payload_bytes() + ln3.payload_bytes() + self_attn.payload_bytes() +
         cross_attn.payload_bytes() + fc1_out.size() * sizeof(T);
}

template <typename T>
std::size_t DecoderCache<T>::payload_bytes() const {
  std::size_t n = ln_post.payload_bytes() + probs.size() * sizeof(T);
  for (const auto& b : blocks) n += b.payload_bytes();
  return n;
}

template <typename T>
CrossEntropyResult<T> decode_ce(const DecoderParams& params, const Latent<T>& h,
                                std::span<const int> tokens, DecoderCache<T>* cache) {
  if (tokens.size() < 2 || tokens.size() > kMaxTokens)
    throw ArgumentError("decode_ce: token sequence length must be in [2, " + std::to_string(kMaxTokens) + "]");
  for (const int t : tokens)
    if (t < 0 || t >= static_cast<int>(kVocabSize))
      throw ArgumentError("decode_ce: invalid token id " + std::to_string(t));
  if (tokens.front() != kTokenBos) throw ArgumentError("decode_ce: sequence must start with BOS");
  if (h.cols != kModelDim) throw ArgumentError("decode_ce: latent width must be " + std::to_string(kModelDim));

  DecoderCache<T> local;
  DecoderCache<T>& c = cache ? *cache : local;
  const std::size_t n = tokens.size() - 1;
  Matrix<T> x(n, kModelDim);
  for (std::size_t i = 0; i < n; ++i) {
    const auto emb = params.token_embedding.row(static_cast<std::size_t>(tokens[i]));
    for (std::size_t d = 0; d < kModelDim; ++d) x(i, d) = static_cast<T>(emb[d]);
  }
  add_positions(x);

  c.blocks.resize(params.blocks.size());
  for (std::size_t i = 0; i < params.blocks.size(); ++i) {
    const auto& bp = params.blocks[i];
    auto& bc = c.blocks[i];
    const Matrix<T> n1 = layer_norm(bp.ln1, x, bc.ln1);
    x += attention(bp.self_attn, n1, n1, true, bc.self_attn);
    const Matrix<T> n2 = layer_norm(bp.ln2, x, bc.ln2);
    x += attention(bp.cross_attn, n2, h, false, bc.cross_attn);
    const Matrix<T> n3 = layer_norm(bp.ln3, x, bc.ln3);
    x += mlp_forward(bp.fc1, bp.fc2, n3, bc.fc1_out);
  }
  const Matrix<T> y = layer_norm(params.ln_post, x, c.ln_post);
  Matrix<T> logits;
  kernels::linear(y, params.out_proj, {}, logits);

  std::size_t counted = 0;
  for (std::size_t i = 0; i < n; ++i) counted += tokens[i + 1] != kTokenPad;
  if (counted == 0) throw ArgumentError("decode_ce: no non-PAD target positions");

  CrossEntropyResult<T> result;
  c.probs = Matrix<T>(n, kVocabSize);
  Matrix<T> glogits(n, kVocabSize);
  const T inv_count = T{1} / static_cast<T>(counted);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = logits.row(i);
    const T mx = *std::max_element(row.begin(), row.end());
    T z = T{0};
    for (std::size_t v = 0; v < kVocabSize; ++v) z += std::exp(row[v] - mx);
    for (std::size_t v = 0; v < kVocabSize; ++v) c.probs(i, v) = std::exp(row[v] - mx) / z;
    const int target = tokens[i + 1];
    if (target == kTokenPad) continue;
    result.loss += (std::log(z) + mx - row[static_cast<std::size_t>(target)]) * inv_count;
    for (std::size_t v = 0; v < kVocabSize; ++v) glogits(i, v) = c.probs(i, v) * inv_count;
    glogits(i, static_cast<std::size_t>(target)) -= inv_count;
  }

  Matrix<T> gy;
  kernels::linear_input_grad(glogits, params.out_proj, gy);
  Matrix<T> g = layer_norm_backward(params.ln_post, c.ln_post, gy);
  result.grad_h = Matrix<T>(h.rows, h.cols);
  for (std::size_t i = params.blocks.size(); i-- > 0;) {
    const auto& bp = params.blocks[i];
    const auto& bc = c.blocks[i];
    g += layer_norm_backward(bp.ln3, bc.ln3, mlp_backward(bp.fc1, bp.fc2, bc.fc1_out, g));
    const auto gc = attention_backward(bp.cross_attn, bc.cross_attn, g);
    result.grad_h += gc.kv_in;
    g += layer_norm_backward(bp.ln2, bc.ln2, gc.q_in);
    auto gs = attention_backward(bp.self_attn, bc.self_attn, g);
    gs.q_in += gs.kv_in;
    g += layer_norm_backward(bp.ln1, bc.ln1, gs.q_in);
  }
  return result;
}

#define UTLSA_MODEL(T)                                                                               \
  template struct EncoderBlockCache<T>;                                                              \
  template struct EncoderCache<T>;                                                                   \
  template struct DecoderBlockCache<T>;                                                              \
  template struct DecoderCache<T>;                                                                   \
  template Latent<T> encode<T>(const EncoderParams&, const Matrix<T>&, EncoderCache<T>*);            \
  template Matrix<T> encode_vjp<T>(const EncoderParams&, const EncoderCache<T>&, const Matrix<T>&);  \
  template Matrix<T> encode_vjp<T>(const EncoderParams&, const Matrix<T>&, const Matrix<T>&);        \
  template CrossEntropyResult<T> decode_ce<T>(const DecoderParams&, const Latent<T>&,                \
                                              std::span<const int>, DecoderCache<T>*);

UTLSA_MODEL(float)
UTLSA_MODEL(double)

}  // namespace utlsa
