#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vxseg/patch.hpp"
#include "vxseg/tape.hpp"
#include "vxseg/tensor.hpp"
#include "vxseg/volume.hpp"

namespace vxseg {

/// What feeds the mask head: the center token alone, or the mean over all
/// tokens (ablation).
enum class DecoderInput : std::uint8_t { center_token = 0, mean_tokens = 1 };

struct ModelConfig {
  BlockGeometry geometry;
  int dim = 96;        // D
  int heads = 4;       // h
  int layers = 4;      // k
  int ffn_dim = 384;   // D_ff
  int classes = 6;     // L
  double layernorm_eps = 1e-5;
  bool positional = true;
  DecoderInput decoder_input = DecoderInput::center_token;
  // Voxels enter the model as (v - intensity_center) / intensity_scale.
  double intensity_center = 50.0;
  double intensity_scale = 25.0;

  int head_dim() const noexcept { return heads > 0 ? dim / heads : 0; }
  /// ConfigError on any cross-field violation (h * D_h == D, n odd, ...).
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct AttentionParams {
  std::vector<Tensor> query, key, value;  // h matrices of D x D_h
  Tensor output;                          // (h * D_h) x D
};

struct FfnParams {
  Tensor w1, b1;  // D x D_ff, D_ff
  Tensor w2, b2;  // D_ff x D, D
};

struct EncoderLayerParams {
  AttentionParams attention;
  FfnParams ffn;
  Tensor norm1_gamma, norm1_beta;
  Tensor norm2_gamma, norm2_beta;
};

struct DecoderParams {
  Tensor weight;  // D x (w^3 L)
  Tensor bias;    // w^3 L
};

struct ModelParams {
  ModelConfig config;
  std::uint64_t seed = 0;
  Tensor embedding;  // D x (w^3 c)
  std::vector<EncoderLayerParams> layers;
  DecoderParams decoder;

  // Fixed parameter order, shared by checkpoints, optimizers and gradients:
  // embedding; per layer: query[0..h), key[0..h), value[0..h), output, w1,
  // b1, w2, b2, norm1 gamma/beta, norm2 gamma/beta; decoder weight, bias.
  std::vector<Tensor*> tensors();
  std::vector<const Tensor*> tensors() const;
  std::vector<std::string> names() const;
  std::size_t parameter_count() const;
};

/// Uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)) per matrix; zero
/// biases and betas, unit gammas. Each tensor draws from its own named stream.
ModelParams init_model(const ModelConfig& config, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Tape-bound forward pass
// ---------------------------------------------------------------------------

struct BoundAttention {
  std::vector<Var> query, key, value;
  Var output;
};

struct BoundLayer {
  BoundAttention attention;
  Var w1, b1, w2, b2;
  Var norm1_gamma, norm1_beta, norm2_gamma, norm2_beta;
};

struct BoundDecoder {
  Var weight, bias;
};

struct BoundModel {
  const ModelParams* params = nullptr;
  Var embedding;
  std::vector<BoundLayer> layers;
  BoundDecoder decoder;
  Var positional;           // N x D constant
  std::vector<Var> all;     // ModelParams::tensors() order
};

/// Registers every parameter tensor on `tape` (non-owning; `params` must
/// outlive the tape). With trainable == false they enter as constants.
BoundModel bind(Tape& tape, const ModelParams& params, bool trainable = true);

struct HeadResult {
  Var output;   // N x D_h
  Var weights;  // N x N attention matrix
};

/// softmax((X Wq)(X Wk)^T / sqrt(D_h)) (X Wv)
HeadResult attention_head(Var x, Var wq, Var wk, Var wv);

struct AttentionResult {
  Var output;
  std::vector<Var> weights;  // one per head
};

/// Concat(head_1..head_h) W_O
AttentionResult multi_head_attention(Var x, const BoundAttention& params);

/// ReLU(x W1 + b1) W2 + b2
Var feed_forward(Var x, Var w1, Var b1, Var w2, Var b2);

struct LayerResult {
  Var output;
  std::vector<Var> attention_weights;
};

/// X' = LN(X + MA(X)); X'' = LN(X' + FFN(X')).
LayerResult encoder_layer(Var x, const BoundLayer& layer, double eps);

struct EncoderTrace {
  std::vector<Var> layer_outputs;             // X^1 .. X^k
  std::vector<std::vector<Var>> attention;    // per layer, per head
  Var final() const { return layer_outputs.back(); }
};

EncoderTrace encode(Var x0, std::span<const BoundLayer> layers, double eps);

struct DecodeResult {
  Var logits;  // w^3 x L, row = voxel (x fastest), column = class
  Var probs;   // softmax over classes per voxel
};

/// Mask head on the center token (or the token mean, per config). ContractError
/// for even n.
DecodeResult decode_center(Var xk, const BoundDecoder& decoder, const ModelConfig& config);

struct BlockForward {
  Var x0;
  EncoderTrace trace;
  DecodeResult decoded;
};

/// Normalizes intensities, embeds, adds the positional table when enabled,
/// encodes and decodes one block.
BlockForward forward_block(const BoundModel& model, const PatchSequence& seq);

/// Model input for the block at `origin` (reflection padded).
PatchSequence block_tokens(const Volume& volume, Index3 origin, const ModelConfig& config);

// ---------------------------------------------------------------------------
// Whole-volume inference
// ---------------------------------------------------------------------------

struct ProbVolume {
  Dims dims;
  int classes = 0;
  std::vector<double> probs;  // voxel-major, class fastest

  double at(std::size_t voxel, int c) const { return probs[voxel * classes + c]; }
};

struct Prediction {
  ProbVolume probabilities;
  LabelVolume labels;
};

/// Argmax per voxel, ties to the smallest class id.
LabelVolume argmax_labels(const ProbVolume& probs, Spacing spacing);

/// Tiles center patches over the volume and writes each tile's probability
/// grid at its location. Tiles run in parallel across kernels::threads().
Prediction predict_volume(const Volume& volume, const ModelParams& params);

}  // namespace vxseg
