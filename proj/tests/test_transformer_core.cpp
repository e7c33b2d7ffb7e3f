#include <cmath>
#include <numeric>

#include "doctest.h"
#include "test_support.hpp"
#include "vxseg/checkpoint.hpp"
#include "vxseg/errors.hpp"
#include "vxseg/model.hpp"
#include "vxseg/ops.hpp"
#include "vxseg/tensor_ops.hpp"

using namespace vxseg;
using vxseg::testing::gradient_errors;
using vxseg::testing::max_of;
using vxseg::testing::random_tensor;
using vxseg::testing::random_volume;

namespace {

ModelConfig tiny_config() {
  ModelConfig c;
  c.geometry = {6, 2, 1};
  c.dim = 8;
  c.heads = 2;
  c.layers = 1;
  c.ffn_dim = 16;
  c.classes = 3;
  return c;
}

// Plain-loop single-head attention.
std::vector<std::vector<double>> scalar_attention(const Tensor& x, const Tensor& wq, const Tensor& wk,
                                                  const Tensor& wv) {
  const std::size_t n = x.dim(0), d = x.dim(1), dh = wq.dim(1);
  auto proj = [&](const Tensor& w) {
    std::vector<std::vector<double>> out(n, std::vector<double>(dh, 0.0));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < dh; ++j)
        for (std::size_t k = 0; k < d; ++k) out[i][j] += x.at(i, k) * w.at(k, j);
    return out;
  };
  const auto q = proj(wq), k = proj(wk), v = proj(wv);
  std::vector<std::vector<double>> out(n, std::vector<double>(dh, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> s(n);
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t t = 0; t < dh; ++t) s[j] += q[i][t] * k[j][t];
      s[j] /= std::sqrt(static_cast<double>(dh));
    }
    double z = 0.0;
    for (auto& e : s) z += std::exp(e);
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t t = 0; t < dh; ++t) out[i][t] += std::exp(s[j]) / z * v[j][t];
  }
  return out;
}

Tensor permute_rows(const Tensor& x, const std::vector<std::size_t>& perm) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < perm.size(); ++i)
    for (std::size_t c = 0; c < x.cols(); ++c) out.at(i, c) = x.at(perm[i], c);
  return out;
}

Tensor run_layers(const ModelParams& p, const Tensor& x0) {
  Tape tape;
  BoundModel m = bind(tape, p, false);
  return encode(tape.constant(x0), m.layers, p.config.layernorm_eps).final().value();
}

}  // namespace

TEST_CASE("config validation") {
  ModelConfig c;
  CHECK_NOTHROW(c.validate());
  c.heads = 5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = ModelConfig{};
  c.geometry.block = 16;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = ModelConfig{};
  c.classes = 1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("attention head examples") {
  Tape tape;
  Var one = tape.constant(random_tensor({1, 4}, 1));
  const auto r1 = attention_head(one, tape.constant(random_tensor({4, 2}, 2)),
                                 tape.constant(random_tensor({4, 2}, 3)), tape.constant(random_tensor({4, 2}, 4)));
  CHECK(r1.weights.value()[0] == 1.0);

  Tensor same({5, 4});
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t c = 0; c < 4; ++c) same.at(i, c) = 0.3 * static_cast<double>(c) - 0.2;
  const auto r2 = attention_head(tape.constant(same), tape.constant(random_tensor({4, 3}, 5)),
                                 tape.constant(random_tensor({4, 3}, 6)), tape.constant(random_tensor({4, 3}, 7)));
  for (std::size_t i = 1; i < 5; ++i)
    for (std::size_t c = 0; c < 3; ++c) CHECK(r2.output.value().at(i, c) == r2.output.value().at(0, c));
}

TEST_CASE("3-token attention matches scalar oracle") {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Tensor x = random_tensor({3, 4}, s), wq = random_tensor({4, 2}, 10 + s),
                 wk = random_tensor({4, 2}, 20 + s), wv = random_tensor({4, 2}, 30 + s);
    Tape tape;
    const auto r = attention_head(tape.constant(x), tape.constant(wq), tape.constant(wk), tape.constant(wv));
    const auto oracle = scalar_attention(x, wq, wk, wv);
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t t = 0; t < 2; ++t) CHECK(std::abs(r.output.value().at(i, t) - oracle[i][t]) < 1e-9);
  }
}

TEST_CASE("single head with identity output equals the head") {
  Tape tape;
  const Tensor x = random_tensor({5, 4}, 8);
  BoundAttention a;
  a.query = {tape.constant(random_tensor({4, 4}, 1))};
  a.key = {tape.constant(random_tensor({4, 4}, 2))};
  a.value = {tape.constant(random_tensor({4, 4}, 3))};
  a.output = tape.constant(Tensor::identity(4));
  const auto mha = multi_head_attention(tape.constant(x), a);
  const auto head = attention_head(tape.constant(x), a.query[0], a.key[0], a.value[0]);
  CHECK(mha.output.value() == head.output.value());
}

TEST_CASE("attention gradients match finite differences") {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Tensor mix = random_tensor({3, 4}, 900 + s);
    const auto e = gradient_errors(
        [&](Tape& t, const std::vector<Var>& v) {
          BoundAttention a{{v[1], v[2]}, {v[3], v[4]}, {v[5], v[6]}, v[7]};
          return ops::sum(ops::mul(multi_head_attention(v[0], a).output, t.constant(mix)));
        },
        {random_tensor({3, 4}, s), random_tensor({4, 2}, 10 + s), random_tensor({4, 2}, 20 + s),
         random_tensor({4, 2}, 30 + s), random_tensor({4, 2}, 40 + s), random_tensor({4, 2}, 50 + s),
         random_tensor({4, 2}, 60 + s), random_tensor({4, 4}, 70 + s)});
    CHECK(max_of(e) < 1e-4);
  }
}

TEST_CASE("encoder layer with zero sublayers reduces to layernorm twice") {
  ModelConfig c = tiny_config();
  ModelParams p = init_model(c, 3);
  auto& l = p.layers[0];
  l.attention.output = Tensor(l.attention.output.shape(), 0.0);
  l.ffn.w2 = Tensor(l.ffn.w2.shape(), 0.0);
  const Tensor x = random_tensor({27, 8}, 4);
  const Tensor one({8}, 1.0), zero({8}, 0.0);
  const Tensor expect = layernorm(layernorm(x, one, zero, c.layernorm_eps), one, zero, c.layernorm_eps);
  const Tensor got = run_layers(p, x);
  CHECK(got.shape() == Shape{27, 8});
  for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == doctest::Approx(expect[i]).epsilon(1e-12));
}

TEST_CASE("encoder layer gradient matches finite differences") {
  const ModelConfig c = tiny_config();
  for (std::uint64_t s = 0; s < 5; ++s) {
    const ModelParams p = init_model(c, s);
    const Tensor mix = random_tensor({27, 8}, 40 + s);
    std::vector<Tensor> inputs = {random_tensor({27, 8}, s)};
    for (const Tensor* t : p.tensors()) inputs.push_back(*t);
    // layer tensors follow the embedding in parameter order
    const std::size_t per_layer = 3 * 2 + 1 + 4 + 4;
    inputs.resize(1 + 1 + per_layer);
    inputs.erase(inputs.begin() + 1);
    for (std::size_t i = 1; i < inputs.size(); ++i)
      for (auto& v : inputs[i].data()) v += 0.05 * std::sin(static_cast<double>(i * 31 + s));
    const auto e = gradient_errors(
        [&](Tape& t, const std::vector<Var>& v) {
          BoundLayer b;
          b.attention = {{v[1], v[2]}, {v[3], v[4]}, {v[5], v[6]}, v[7]};
          b.w1 = v[8], b.b1 = v[9], b.w2 = v[10], b.b2 = v[11];
          b.norm1_gamma = v[12], b.norm1_beta = v[13], b.norm2_gamma = v[14], b.norm2_beta = v[15];
          return ops::sum(ops::mul(encoder_layer(v[0], b, c.layernorm_eps).output, t.constant(mix)));
        },
        inputs);
    CHECK(max_of(e) < 1e-4);
  }
}

TEST_CASE("encoder composition and determinism") {
  ModelConfig c = tiny_config();
  c.layers = 2;
  const ModelParams p = init_model(c, 5);
  const Tensor x = random_tensor({27, 8}, 6);
  Tape tape;
  BoundModel m = bind(tape, p, false);
  Var x0 = tape.constant(x);
  const Tensor stacked = encode(x0, m.layers, c.layernorm_eps).final().value();
  const Tensor manual =
      encoder_layer(encoder_layer(x0, m.layers[0], c.layernorm_eps).output, m.layers[1], c.layernorm_eps)
          .output.value();
  CHECK(stacked == manual);
  CHECK(run_layers(p, x) == stacked);

  ModelConfig c1 = tiny_config();
  const ModelParams p1 = init_model(c1, 5);
  Tape t1;
  BoundModel m1 = bind(t1, p1, false);
  Var y0 = t1.constant(x);
  CHECK(encode(y0, m1.layers, c1.layernorm_eps).final().value() ==
        encoder_layer(y0, m1.layers[0], c1.layernorm_eps).output.value());
}

TEST_CASE("encoder rows permute with tokens when positions are withheld") {
  ModelConfig c = tiny_config();
  c.layers = 2;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const ModelParams p = init_model(c, s);
    const Tensor x = random_tensor({27, 8}, 100 + s);
    std::vector<std::size_t> perm(27);
    std::iota(perm.begin(), perm.end(), 0);
    CounterRng rng(s);
    for (std::size_t i = 26; i > 0; --i) std::swap(perm[i], perm[rng.uniform_int(0, static_cast<std::int64_t>(i))]);
    CHECK(run_layers(p, permute_rows(x, perm)) == permute_rows(run_layers(p, x), perm));
  }
}

TEST_CASE("decoder") {
  ModelConfig c = tiny_config();
  ModelParams p = init_model(c, 1);
  p.decoder.weight = Tensor(p.decoder.weight.shape(), 0.0);
  Tape tape;
  BoundModel m = bind(tape, p, false);
  const auto d = decode_center(tape.constant(random_tensor({27, 8}, 2)), m.decoder, c);
  CHECK(d.probs.shape() == Shape{8, 3});
  for (double v : d.probs.value().data()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  ProbVolume pv{{2, 1, 1}, 3, {0.2, 0.5, 0.3, 0.4, 0.4, 0.2}};
  const LabelVolume l = argmax_labels(pv, {});
  CHECK(l(0, 0, 0) == 1);
  CHECK(l(1, 0, 0) == 0);

  for (std::uint64_t s = 0; s < 10; ++s) {
    const ModelParams q = init_model(c, s);
    Tape t;
    BoundModel mq = bind(t, q, false);
    const auto r = decode_center(t.constant(random_tensor({27, 8}, 50 + s, -3, 3)), mq.decoder, c);
    const Tensor& pr = r.probs.value();
    for (std::size_t v = 0; v < 8; ++v) {
      double sum = 0;
      for (std::size_t k = 0; k < 3; ++k) sum += pr.at(v, k);
      CHECK(std::abs(sum - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("decoder reads the configured token") {
  ModelConfig c = tiny_config();
  const ModelParams p = init_model(c, 2);
  Tensor x = random_tensor({27, 8}, 3);
  Tape tape;
  BoundModel m = bind(tape, p, false);
  const Tensor base = decode_center(tape.constant(x), m.decoder, c).logits.value();
  x.at(0, 0) += 1.0;
  CHECK(decode_center(tape.constant(x), m.decoder, c).logits.value() == base);
  c.decoder_input = DecoderInput::mean_tokens;
  CHECK_FALSE(decode_center(tape.constant(x), m.decoder, c).logits.value() == base);
}

TEST_CASE("whole-volume prediction") {
  const ModelConfig c = tiny_config();
  ModelParams p = init_model(c, 4);
  const Volume v = random_volume({7, 5, 9}, 1);
  const Prediction a = predict_volume(v, p);
  CHECK(a.labels.dims() == v.dims());
  CHECK(predict_volume(v, p).probabilities.probs == a.probabilities.probs);

  p.decoder.weight = Tensor(p.decoder.weight.shape(), 0.0);
  const Prediction z = predict_volume(v, p);
  for (double q : z.probabilities.probs) CHECK(q == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  for (auto l : z.labels.voxels()) CHECK(l == 0);
}

TEST_CASE("initialization") {
  const ModelConfig c;
  const ModelParams a = init_model(c, 7), b = init_model(c, 7), d = init_model(c, 8);
  CHECK(a.tensors().size() == b.tensors().size());
  for (std::size_t i = 0; i < a.tensors().size(); ++i) CHECK(*a.tensors()[i] == *b.tensors()[i]);
  CHECK_FALSE(a.embedding == d.embedding);
  const double bound = std::sqrt(6.0 / (96 + 512));
  for (double v : a.embedding.data()) CHECK(std::abs(v) <= bound);
  for (double v : a.layers[0].norm1_gamma.data()) CHECK(v == 1.0);
  for (double v : a.decoder.bias.data()) CHECK(v == 0.0);
  CHECK(a.names().size() == a.tensors().size());
}

TEST_CASE("checkpoints round-trip bit-exactly") {
  for (std::uint64_t s = 0; s < 50; ++s) {
    ModelConfig c = tiny_config();
    c.layers = 1 + static_cast<int>(s % 3);
    c.positional = s % 2 == 0;
    c.layernorm_eps = 1e-5 * static_cast<double>(1 + s % 4);
    ModelParams p = init_model(c, s);
    for (Tensor* t : p.tensors())
      for (auto& v : t->data()) v += 1e-3 * std::cos(static_cast<double>(s) + v * 1e3);
    const auto bytes = encode_checkpoint(p);
    const ModelParams back = decode_checkpoint(bytes);
    CHECK(back.config == p.config);
    CHECK(back.seed == p.seed);
    for (std::size_t i = 0; i < p.tensors().size(); ++i) CHECK(*back.tensors()[i] == *p.tensors()[i]);
    CHECK(encode_checkpoint(back) == bytes);
  }
  auto bytes = encode_checkpoint(init_model(tiny_config(), 1));
  bytes.push_back(0);
  CHECK_THROWS_AS(decode_checkpoint(bytes), FormatError);
  bytes[0] = 'X';
  CHECK_THROWS_AS(decode_checkpoint(bytes), FormatError);
}
