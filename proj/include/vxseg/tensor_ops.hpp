#pragma once

#include <span>

#include "vxseg/tensor.hpp"

// Forward-only tensor arithmetic. The differentiable versions in ops.hpp
// delegate to these.
namespace vxseg {

/// [m x p] * [p x q]. Throws DimensionError naming both shapes.
Tensor matmul(const Tensor& a, const Tensor& b);
/// [m x p] * [q x p]^T
Tensor matmul_nt(const Tensor& a, const Tensor& b);
/// Same product, accumulated over the shared axis in an order fixed by the
/// contents of b's rows (ties broken by a), so permuting the shared axis
/// leaves the result bit-identical.
Tensor matmul_sorted(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor relu(const Tensor& x);

/// Stable softmax over the last axis; permuting the columns permutes the
/// output exactly. Throws NumericError on non-finite input.
Tensor softmax_lastdim(const Tensor& x);

/// Normalizes each last-axis slice to zero mean and unit variance, then
/// applies gamma * xhat + beta. eps < 0 is a ConfigError; eps == 0 on a
/// constant slice is a NumericError.
Tensor layernorm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps);

Tensor concat_lastdim(std::span<const Tensor> parts);

/// Averages over `axis`, removing it. A rank-1 input yields shape {1}.
Tensor mean_axis(const Tensor& x, std::size_t axis);

}  // namespace vxseg
