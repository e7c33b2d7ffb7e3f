#include "vxseg/model.hpp"

#include <cmath>
#include <exception>

#include "vxseg/errors.hpp"
#include "vxseg/kernels.hpp"
#include "vxseg/ops.hpp"
#include "vxseg/rng.hpp"

namespace vxseg {

void ModelConfig::validate() const {
  geometry.validate();
  if (dim < 2 || dim % 2 != 0) throw ConfigError("model dim D must be even and >= 2");
  if (heads < 1) throw ConfigError("head count h must be >= 1");
  if (head_dim() == 0) throw ConfigError("head dim D_h = D / h is zero");
  if (heads * head_dim() != dim) {
    throw ConfigError("h * D_h must equal D (h = " + std::to_string(heads) + ", D = " +
                      std::to_string(dim) + ")");
  }
  if (layers < 1) throw ConfigError("layer count k must be >= 1");
  if (ffn_dim < 1) throw ConfigError("FFN width must be >= 1");
  if (classes < 2 || classes > 255) throw ConfigError("class count L must lie in [2, 255]");
  if (!(layernorm_eps >= 0.0)) throw ConfigError("layernorm eps must be >= 0");
  if (!(intensity_scale > 0.0) || !std::isfinite(intensity_center)) {
    throw ConfigError("intensity normalization must have a positive scale");
  }
}

std::vector<Tensor*> ModelParams::tensors() {
  std::vector<Tensor*> out{&embedding};
  for (auto& l : layers) {
    for (auto& t : l.attention.query) out.push_back(&t);
    for (auto& t : l.attention.key) out.push_back(&t);
    for (auto& t : l.attention.value) out.push_back(&t);
    out.insert(out.end(), {&l.attention.output, &l.ffn.w1, &l.ffn.b1, &l.ffn.w2, &l.ffn.b2,
                           &l.norm1_gamma, &l.norm1_beta, &l.norm2_gamma, &l.norm2_beta});
  }
  out.push_back(&decoder.weight);
  out.push_back(&decoder.bias);
  return out;
}

std::vector<const Tensor*> ModelParams::tensors() const {
  auto mut = const_cast<ModelParams*>(this)->tensors();
  return {mut.begin(), mut.end()};
}

std::vector<std::string> ModelParams::names() const {
  std::vector<std::string> out{"embedding"};
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::string p = "layer" + std::to_string(i) + ".";
    const auto h = layers[i].attention.query.size();
    for (const char* kind : {"query", "key", "value"})
      for (std::size_t j = 0; j < h; ++j) out.push_back(p + kind + std::to_string(j));
    for (const char* n : {"attn_out", "ffn_w1", "ffn_b1", "ffn_w2", "ffn_b2", "norm1_gamma",
                          "norm1_beta", "norm2_gamma", "norm2_beta"})
      out.push_back(p + n);
  }
  out.push_back("decoder_weight");
  out.push_back("decoder_bias");
  return out;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const Tensor* t : tensors()) n += t->size();
  return n;
}

namespace {

Tensor xavier(std::size_t rows, std::size_t cols, std::uint64_t seed, const std::string& name) {
  CounterRng rng(derive_seed(seed, name));
  const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Tensor t({rows, cols});
  for (auto& v : t.data()) v = rng.uniform(-a, a);
  return t;
}

}  // namespace

ModelParams init_model(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  ModelParams p;
  p.config = config;
  p.seed = seed;
  const auto D = static_cast<std::size_t>(config.dim);
  const auto Dh = static_cast<std::size_t>(config.head_dim());
  const auto F = static_cast<std::size_t>(config.ffn_dim);
  const auto T = static_cast<std::size_t>(config.geometry.token_length());
  const auto O = static_cast<std::size_t>(config.geometry.patch_voxels() * config.classes);
  const auto init = derive_seed(seed, "init");

  p.embedding = xavier(D, T, init, "embedding");
  for (int l = 0; l < config.layers; ++l) {
    const std::string pre = "layer" + std::to_string(l) + ".";
    EncoderLayerParams layer;
    for (int h = 0; h < config.heads; ++h) {
      const std::string s = std::to_string(h);
      layer.attention.query.push_back(xavier(D, Dh, init, pre + "query" + s));
      layer.attention.key.push_back(xavier(D, Dh, init, pre + "key" + s));
      layer.attention.value.push_back(xavier(D, Dh, init, pre + "value" + s));
    }
    layer.attention.output = xavier(Dh * config.heads, D, init, pre + "attn_out");
    layer.ffn.w1 = xavier(D, F, init, pre + "ffn_w1");
    layer.ffn.b1 = Tensor({F});
    layer.ffn.w2 = xavier(F, D, init, pre + "ffn_w2");
    layer.ffn.b2 = Tensor({D});
    layer.norm1_gamma = Tensor({D}, 1.0);
    layer.norm1_beta = Tensor({D});
    layer.norm2_gamma = Tensor({D}, 1.0);
    layer.norm2_beta = Tensor({D});
    p.layers.push_back(std::move(layer));
  }
  p.decoder.weight = xavier(D, O, init, "decoder_weight");
  p.decoder.bias = Tensor({O});
  return p;
}

BoundModel bind(Tape& tape, const ModelParams& params, bool trainable) {
  BoundModel m;
  m.params = &params;
  auto reg = [&](const Tensor& t) {
    Var v = tape.reference(t, trainable);
    m.all.push_back(v);
    return v;
  };
  m.embedding = reg(params.embedding);
  for (const auto& l : params.layers) {
    BoundLayer b;
    for (const auto& t : l.attention.query) b.attention.query.push_back(reg(t));
    for (const auto& t : l.attention.key) b.attention.key.push_back(reg(t));
    for (const auto& t : l.attention.value) b.attention.value.push_back(reg(t));
    b.attention.output = reg(l.attention.output);
    b.w1 = reg(l.ffn.w1);
    b.b1 = reg(l.ffn.b1);
    b.w2 = reg(l.ffn.w2);
    b.b2 = reg(l.ffn.b2);
    b.norm1_gamma = reg(l.norm1_gamma);
    b.norm1_beta = reg(l.norm1_beta);
    b.norm2_gamma = reg(l.norm2_gamma);
    b.norm2_beta = reg(l.norm2_beta);
    m.layers.push_back(std::move(b));
  }
  m.decoder.weight = reg(params.decoder.weight);
  m.decoder.bias = reg(params.decoder.bias);
  m.positional = tape.constant(positional_encoding(params.config.geometry, params.config.dim));
  return m;
}

HeadResult attention_head(Var x, Var wq, Var wk, Var wv) {
  const std::size_t dh = wq.shape().back();
  if (dh == 0) throw ConfigError("attention head dim is zero");
  Var q = ops::matmul(x, wq);
  Var k = ops::matmul(x, wk);
  Var v = ops::matmul(x, wv);
  Var scores = ops::scale(ops::matmul_nt(q, k), 1.0 / std::sqrt(static_cast<double>(dh)));
  Var weights = ops::softmax_lastdim(scores);
  // Sorted accumulation over keys keeps the layer exactly equivariant to
  // token permutations.
  return {ops::matmul_sorted(weights, v), weights};
}

AttentionResult multi_head_attention(Var x, const BoundAttention& p) {
  const std::size_t h = p.query.size();
  if (h == 0 || p.key.size() != h || p.value.size() != h) {
    throw DimensionError("multi_head_attention: inconsistent head projections");
  }
  AttentionResult r;
  std::vector<Var> heads;
  for (std::size_t i = 0; i < h; ++i) {
    auto head = attention_head(x, p.query[i], p.key[i], p.value[i]);
    heads.push_back(head.output);
    r.weights.push_back(head.weights);
  }
  Var cat = h == 1 ? heads.front() : ops::concat_lastdim(heads);
  r.output = ops::matmul(cat, p.output);
  return r;
}

Var feed_forward(Var x, Var w1, Var b1, Var w2, Var b2) {
  Var hidden = ops::relu(ops::add_bias(ops::matmul(x, w1), b1));
  return ops::add_bias(ops::matmul(hidden, w2), b2);
}

LayerResult encoder_layer(Var x, const BoundLayer& l, double eps) {
  auto attn = multi_head_attention(x, l.attention);
  Var x1 = ops::layernorm(ops::add(x, attn.output), l.norm1_gamma, l.norm1_beta, eps);
  Var ff = feed_forward(x1, l.w1, l.b1, l.w2, l.b2);
  Var x2 = ops::layernorm(ops::add(x1, ff), l.norm2_gamma, l.norm2_beta, eps);
  return {x2, std::move(attn.weights)};
}

EncoderTrace encode(Var x0, std::span<const BoundLayer> layers, double eps) {
  if (layers.empty()) throw ConfigError("encode: at least one layer is required");
  EncoderTrace trace;
  Var x = x0;
  for (const auto& l : layers) {
    auto r = encoder_layer(x, l, eps);
    x = r.output;
    trace.layer_outputs.push_back(x);
    trace.attention.push_back(std::move(r.attention_weights));
  }
  return trace;
}

DecodeResult decode_center(Var xk, const BoundDecoder& decoder, const ModelConfig& config) {
  const auto& g = config.geometry;
  if (g.per_axis() % 2 == 0) throw ContractError("decode_center: n must be odd");
  Var row = config.decoder_input == DecoderInput::center_token
                ? ops::select_row(xk, static_cast<std::size_t>(g.center_index()))
                : ops::reshape(ops::mean_axis(xk, 0), {1, xk.shape()[1]});
  Var flat = ops::add_bias(ops::matmul(row, decoder.weight), decoder.bias);
  const auto voxels = static_cast<std::size_t>(g.patch_voxels());
  const auto L = static_cast<std::size_t>(config.classes);
  if (flat.value().size() != voxels * L) {
    throw DimensionError("decode_center: decoder emits " + std::to_string(flat.value().size()) +
                         " logits, expected w^3 * L = " + std::to_string(voxels * L));
  }
  Var logits = ops::reshape(flat, {voxels, L});
  return {logits, ops::softmax_lastdim(logits)};
}

PatchSequence block_tokens(const Volume& volume, Index3 origin, const ModelConfig& config) {
  Block b = extract_block(volume, origin, config.geometry);
  const double inv = 1.0 / config.intensity_scale;
  for (auto& v : b.data.data()) v = (v - config.intensity_center) * inv;
  return partition(b);
}

BlockForward forward_block(const BoundModel& model, const PatchSequence& seq) {
  const ModelConfig& cfg = model.params->config;
  if (!(seq.geometry == cfg.geometry)) throw DimensionError("forward_block: geometry mismatch");
  Tape& tape = *model.embedding.tape();
  BlockForward f;
  Var tokens = tape.constant(seq.tokens);
  Var x0 = ops::matmul_nt(tokens, model.embedding);
  if (cfg.positional) x0 = ops::add(x0, model.positional);
  f.x0 = x0;
  f.trace = encode(x0, model.layers, cfg.layernorm_eps);
  f.decoded = decode_center(f.trace.final(), model.decoder, cfg);
  return f;
}

LabelVolume argmax_labels(const ProbVolume& probs, Spacing spacing) {
  LabelVolume labels(probs.dims, spacing);
  auto& out = labels.voxels();
  for (std::size_t v = 0; v < out.size(); ++v) {
    int best = 0;
    for (int c = 1; c < probs.classes; ++c)
      if (probs.at(v, c) > probs.at(v, best)) best = c;
    out[v] = static_cast<std::uint8_t>(best);
  }
  return labels;
}

Prediction predict_volume(const Volume& volume, const ModelParams& params) {
  const ModelConfig& cfg = params.config;
  cfg.validate();
  if (cfg.geometry.channels != 1) {
    throw DimensionError("predict_volume: single-channel volume given to a " +
                         std::to_string(cfg.geometry.channels) + "-channel model");
  }
  const Dims d = volume.dims();
  const auto origins = tile_inference_origins(d, cfg.geometry);
  const int w = cfg.geometry.patch;
  const int L = cfg.classes;

  Prediction out;
  out.probabilities.dims = d;
  out.probabilities.classes = L;
  out.probabilities.probs.assign(d.count() * L, 0.0);
  auto& probs = out.probabilities.probs;

  const auto tiles = static_cast<std::ptrdiff_t>(origins.size());
  std::vector<std::exception_ptr> failures(origins.size());
  // Each tile writes a disjoint set of voxels.
#pragma omp parallel for schedule(dynamic) num_threads(kernels::threads())
  for (std::ptrdiff_t t = 0; t < tiles; ++t) {
    try {
      Tape tape;
      BoundModel m = bind(tape, params, false);
      auto f = forward_block(m, block_tokens(volume, origins[t], cfg));
      const Tensor& p = f.decoded.probs.value();
      const Index3 c = center_patch_origin(origins[t], cfg.geometry);
      for (int z = 0; z < w; ++z)
        for (int y = 0; y < w; ++y)
          for (int x = 0; x < w; ++x) {
            const int vx = c.x + x, vy = c.y + y, vz = c.z + z;
            if (vx >= d.x || vy >= d.y || vz >= d.z) continue;
            const std::size_t voxel = volume.index(vx, vy, vz);
            const std::size_t row = static_cast<std::size_t>((z * w + y) * w + x);
            for (int k = 0; k < L; ++k) probs[voxel * L + k] = p[row * L + k];
          }
    } catch (...) {
      failures[static_cast<std::size_t>(t)] = std::current_exception();
    }
  }
  for (const auto& f : failures)
    if (f) std::rethrow_exception(f);
  out.labels = argmax_labels(out.probabilities, volume.spacing());
  return out;
}

}  // namespace vxseg
