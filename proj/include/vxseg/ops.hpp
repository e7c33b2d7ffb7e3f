#pragma once

#include <cstdint>
#include <span>

#include "vxseg/tape.hpp"

// Differentiable operations. Each records its result on the tape of its
// inputs (all inputs must share one tape).
namespace vxseg::ops {

Var matmul(Var a, Var b);
/// matmul with order-independent accumulation (see vxseg::matmul_sorted).
Var matmul_sorted(Var a, Var b);
/// a * b^T
Var matmul_nt(Var a, Var b);
Var transpose(Var a);

Var add(Var a, Var b);
Var sub(Var a, Var b);
/// Elementwise product.
Var mul(Var a, Var b);
Var scale(Var a, double s);
/// x[..., j] + bias[j]
Var add_bias(Var x, Var bias);

/// Subgradient at 0 is 0.
Var relu(Var x);
Var softmax_lastdim(Var x);
Var layernorm(Var x, Var gamma, Var beta, double eps);

Var concat_lastdim(std::span<const Var> parts);
Var mean_axis(Var x, std::size_t axis);
Var reshape(Var x, Shape shape);
/// Row `row` of a matrix as a [1 x cols] matrix.
Var select_row(Var x, std::size_t row);

Var sum(Var x);
Var mean(Var x);

/// Class-weighted negative log-likelihood over rows of a probability matrix
/// [V x L]:  (1/V) * sum_v weight[label_v] * -ln(max(p[v, label_v], clamp)).
/// Entries below the clamp contribute no gradient.
Var weighted_nll(Var probs, std::span<const std::uint8_t> labels,
                 std::span<const double> class_weights, double clamp = 1e-12);

}  // namespace vxseg::ops
