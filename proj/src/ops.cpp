#include "vxseg/ops.hpp"

#include <cmath>

#include "vxseg/errors.hpp"
#include "vxseg/kernels.hpp"
#include "vxseg/tensor_ops.hpp"

namespace vxseg::ops {

namespace {
Tape& tape_of(Var v) {
  if (!v.valid()) throw ContractError("op applied to an unbound Var");
  return *v.tape();
}

void same_shape(Var a, Var b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shapes " + shape_string(a.shape()) + " and " +
                         shape_string(b.shape()) + " differ");
  }
}

void axpy(Tensor& dst, const Tensor& src, double s = 1.0) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += s * src[i];
}
}  // namespace

Var matmul(Var a, Var b) {
  Tensor out = vxseg::matmul(a.value(), b.value());
  const std::size_t m = a.shape()[0], p = a.shape()[1], q = b.shape()[1];
  return tape_of(a).record(std::move(out), {a, b}, [a, b, m, p, q](Tape& t, const Tensor& g) {
    if (t.requires_grad(a)) kernels::gemm_nt(g.data(), b.value().data(), t.grad_buffer(a.id()).data(), m, q, p);
    if (t.requires_grad(b)) kernels::gemm_tn(a.value().data(), g.data(), t.grad_buffer(b.id()).data(), p, m, q);
  });
}

Var matmul_sorted(Var a, Var b) {
  Tensor out = vxseg::matmul_sorted(a.value(), b.value());
  const std::size_t m = a.shape()[0], p = a.shape()[1], q = b.shape()[1];
  return tape_of(a).record(std::move(out), {a, b}, [a, b, m, p, q](Tape& t, const Tensor& g) {
    if (t.requires_grad(a)) kernels::gemm_nt(g.data(), b.value().data(), t.grad_buffer(a.id()).data(), m, q, p);
    if (t.requires_grad(b)) kernels::gemm_tn(a.value().data(), g.data(), t.grad_buffer(b.id()).data(), p, m, q);
  });
}

Var matmul_nt(Var a, Var b) {
  Tensor out = vxseg::matmul_nt(a.value(), b.value());
  const std::size_t m = a.shape()[0], p = a.shape()[1], q = b.shape()[0];
  return tape_of(a).record(std::move(out), {a, b}, [a, b, m, p, q](Tape& t, const Tensor& g) {
    // C = A B^T: dA = G B, dB = G^T A
    if (t.requires_grad(a)) kernels::gemm_nn(g.data(), b.value().data(), t.grad_buffer(a.id()).data(), m, q, p);
    if (t.requires_grad(b)) kernels::gemm_tn(g.data(), a.value().data(), t.grad_buffer(b.id()).data(), q, m, p);
  });
}

Var transpose(Var a) {
  return tape_of(a).record(vxseg::transpose(a.value()), {a}, [a](Tape& t, const Tensor& g) {
    axpy(t.grad_buffer(a.id()), vxseg::transpose(g));
  });
}

Var add(Var a, Var b) {
  same_shape(a, b, "add");
  return tape_of(a).record(vxseg::add(a.value(), b.value()), {a, b}, [a, b](Tape& t, const Tensor& g) {
    if (t.requires_grad(a)) axpy(t.grad_buffer(a.id()), g);
    if (t.requires_grad(b)) axpy(t.grad_buffer(b.id()), g);
  });
}

Var sub(Var a, Var b) {
  same_shape(a, b, "sub");
  Tensor out = a.value();
  axpy(out, b.value(), -1.0);
  return tape_of(a).record(std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
    if (t.requires_grad(a)) axpy(t.grad_buffer(a.id()), g);
    if (t.requires_grad(b)) axpy(t.grad_buffer(b.id()), g, -1.0);
  });
}

Var mul(Var a, Var b) {
  same_shape(a, b, "mul");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return tape_of(a).record(std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
    if (t.requires_grad(a)) {
      Tensor& ga = t.grad_buffer(a.id());
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b.value()[i];
    }
    if (t.requires_grad(b)) {
      Tensor& gb = t.grad_buffer(b.id());
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a.value()[i];
    }
  });
}

Var scale(Var a, double s) {
  Tensor out = a.value();
  for (auto& v : out.data()) v *= s;
  return tape_of(a).record(std::move(out), {a}, [a, s](Tape& t, const Tensor& g) {
    axpy(t.grad_buffer(a.id()), g, s);
  });
}

Var add_bias(Var x, Var bias) {
  const std::size_t n = x.value().cols();
  if (bias.value().size() != n) {
    throw DimensionError("add_bias: bias " + shape_string(bias.shape()) +
                         " does not match last extent of " + shape_string(x.shape()));
  }
  Tensor out = x.value();
  const std::size_t rows = out.rows();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < n; ++j) out[r * n + j] += bias.value()[j];
  return tape_of(x).record(std::move(out), {x, bias}, [x, bias, rows, n](Tape& t, const Tensor& g) {
    if (t.requires_grad(x)) axpy(t.grad_buffer(x.id()), g);
    if (t.requires_grad(bias)) {
      Tensor& gb = t.grad_buffer(bias.id());
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < n; ++j) gb[j] += g[r * n + j];
    }
  });
}

Var relu(Var x) {
  return tape_of(x).record(vxseg::relu(x.value()), {x}, [x](Tape& t, const Tensor& g) {
    Tensor& gx = t.grad_buffer(x.id());
    for (std::size_t i = 0; i < g.size(); ++i)
      if (x.value()[i] > 0.0) gx[i] += g[i];
  });
}

Var softmax_lastdim(Var x) {
  Tape& tape = tape_of(x);
  Tensor y = vxseg::softmax_lastdim(x.value());
  const std::size_t id = tape.size();  // id the result will receive
  return tape.record(std::move(y), {x}, [x, id](Tape& t, const Tensor& g) {
    const Tensor& y = t.value(id);
    Tensor& gx = t.grad_buffer(x.id());
    const std::size_t n = y.cols();
    for (std::size_t r = 0; r < y.rows(); ++r) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += g[r * n + j] * y[r * n + j];
      for (std::size_t j = 0; j < n; ++j) gx[r * n + j] += y[r * n + j] * (g[r * n + j] - dot);
    }
  });
}

Var layernorm(Var x, Var gamma, Var beta, double eps) {
  Tensor y = vxseg::layernorm(x.value(), gamma.value(), beta.value(), eps);
  const Tensor& xv = x.value();
  const std::size_t n = xv.cols(), rows = xv.rows();
  // saved normalized values and inverse deviations for the backward pass
  Tensor xhat(xv.shape());
  std::vector<double> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = xv.data().data() + r * n;
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += in[j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (in[j] - mu) * (in[j] - mu);
    var /= static_cast<double>(n);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) xhat[r * n + j] = (in[j] - mu) * inv_std[r];
  }
  return tape_of(x).record(
      std::move(y), {x, gamma, beta},
      [x, gamma, beta, n, rows, xhat = std::move(xhat), inv_std = std::move(inv_std)](
          Tape& t, const Tensor& g) {
        const Tensor& gm = gamma.value();
        if (t.requires_grad(gamma) || t.requires_grad(beta)) {
          Tensor& gg = t.grad_buffer(gamma.id());
          Tensor& gb = t.grad_buffer(beta.id());
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < n; ++j) {
              gg[j] += g[r * n + j] * xhat[r * n + j];
              gb[j] += g[r * n + j];
            }
        }
        if (!t.requires_grad(x)) return;
        Tensor& gx = t.grad_buffer(x.id());
        const double inv_n = 1.0 / static_cast<double>(n);
        for (std::size_t r = 0; r < rows; ++r) {
          double mean_g = 0.0, mean_gx = 0.0;
          for (std::size_t j = 0; j < n; ++j) {
            const double gj = g[r * n + j] * gm[j];
            mean_g += gj;
            mean_gx += gj * xhat[r * n + j];
          }
          mean_g *= inv_n;
          mean_gx *= inv_n;
          for (std::size_t j = 0; j < n; ++j) {
            const double gj = g[r * n + j] * gm[j];
            gx[r * n + j] += inv_std[r] * (gj - mean_g - xhat[r * n + j] * mean_gx);
          }
        }
      });
}

Var concat_lastdim(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_lastdim: no inputs");
  std::vector<Tensor> values;
  values.reserve(parts.size());
  for (const Var& p : parts) values.push_back(p.value());
  Tensor out = vxseg::concat_lastdim(values);
  const std::size_t total = out.cols(), rows = out.rows();
  std::vector<Var> inputs(parts.begin(), parts.end());
  return tape_of(parts.front())
      .record(std::move(out), inputs, [inputs, total, rows](Tape& t, const Tensor& g) {
        std::size_t offset = 0;
        for (const Var& p : inputs) {
          const std::size_t c = p.value().cols();
          if (t.requires_grad(p)) {
            Tensor& gp = t.grad_buffer(p.id());
            for (std::size_t r = 0; r < rows; ++r)
              for (std::size_t j = 0; j < c; ++j) gp[r * c + j] += g[r * total + offset + j];
          }
          offset += c;
        }
      });
}

Var mean_axis(Var x, std::size_t axis) {
  Tensor out = vxseg::mean_axis(x.value(), axis);
  const Shape& s = x.shape();
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t len = s[axis];
  return tape_of(x).record(std::move(out), {x}, [x, outer, inner, len](Tape& t, const Tensor& g) {
    Tensor& gx = t.grad_buffer(x.id());
    const double inv = 1.0 / static_cast<double>(len);
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t a = 0; a < len; ++a)
        for (std::size_t i = 0; i < inner; ++i) gx[(o * len + a) * inner + i] += g[o * inner + i] * inv;
  });
}

Var reshape(Var x, Shape shape) {
  return tape_of(x).record(x.value().reshaped(std::move(shape)), {x}, [x](Tape& t, const Tensor& g) {
    Tensor& gx = t.grad_buffer(x.id());
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

Var select_row(Var x, std::size_t row) {
  const Tensor& xv = x.value();
  if (xv.rank() != 2 || row >= xv.dim(0)) {
    throw DimensionError("select_row: row " + std::to_string(row) + " invalid for " +
                         shape_string(xv.shape()));
  }
  const std::size_t n = xv.dim(1);
  Tensor out({1, n});
  std::copy_n(xv.data().data() + row * n, n, out.data().data());
  return tape_of(x).record(std::move(out), {x}, [x, row, n](Tape& t, const Tensor& g) {
    Tensor& gx = t.grad_buffer(x.id());
    for (std::size_t j = 0; j < n; ++j) gx[row * n + j] += g[j];
  });
}

Var sum(Var x) {
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  return tape_of(x).record(Tensor::scalar(s), {x}, [x](Tape& t, const Tensor& g) {
    Tensor& gx = t.grad_buffer(x.id());
    for (auto& v : gx.data()) v += g[0];
  });
}

Var mean(Var x) {
  return scale(sum(x), 1.0 / static_cast<double>(x.value().size()));
}

Var weighted_nll(Var probs, std::span<const std::uint8_t> labels,
                 std::span<const double> class_weights, double clamp) {
  const Tensor& p = probs.value();
  if (p.rank() != 2) throw DimensionError("weighted_nll: probabilities must be [V x L]");
  const std::size_t rows = p.dim(0), classes = p.dim(1);
  if (labels.size() != rows) {
    throw DimensionError("weighted_nll: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(rows) + " rows");
  }
  if (class_weights.size() != classes) {
    throw DimensionError("weighted_nll: " + std::to_string(class_weights.size()) +
                         " class weights for " + std::to_string(classes) + " classes");
  }
  std::vector<std::uint8_t> saved(labels.begin(), labels.end());
  std::vector<double> weights(class_weights.begin(), class_weights.end());
  double total = 0.0;
  for (std::size_t v = 0; v < rows; ++v) {
    if (saved[v] >= classes) throw ContractError("weighted_nll: label out of range");
    const double pv = std::max(p[v * classes + saved[v]], clamp);
    total += weights[saved[v]] * -std::log(pv);
  }
  const double inv_rows = 1.0 / static_cast<double>(rows);
  return tape_of(probs).record(
      Tensor::scalar(total * inv_rows), {probs},
      [probs, classes, inv_rows, clamp, saved = std::move(saved), weights = std::move(weights)](
          Tape& t, const Tensor& g) {
        const Tensor& p = probs.value();
        Tensor& gp = t.grad_buffer(probs.id());
        for (std::size_t v = 0; v < saved.size(); ++v) {
          const std::size_t idx = v * classes + saved[v];
          if (p[idx] >= clamp) gp[idx] -= g[0] * inv_rows * weights[saved[v]] / p[idx];
        }
      });
}

}  // namespace vxseg::ops
