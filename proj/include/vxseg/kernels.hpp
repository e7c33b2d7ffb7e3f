#pragma once

#include <cstddef>
#include <span>

// Dense GEMM kernels behind the tensor engine. Every kernel accumulates into
// C (C += ...); callers zero C for a plain product.
//
// The default kernels split output rows across OpenMP threads. Each output
// element is computed by one thread with a fixed summation order, so results
// do not depend on the thread count. The `reference` namespace keeps naive
// serial triple loops for testing and benchmarking.
namespace vxseg::kernels {

/// Sets the OpenMP thread count used by the kernels and block loops (>= 1).
void set_threads(int n);
int threads();

/// C[m x q] += A[m x p] * B[p x q]
void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t p, std::size_t q);
/// C[m x q] += A[m x p] * B[q x p]^T
void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t p, std::size_t q);
/// C[m x q] += A[p x m]^T * B[p x q]
void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t p, std::size_t q);

namespace reference {
void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t p, std::size_t q);
void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t p, std::size_t q);
void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t p, std::size_t q);
}  // namespace reference

}  // namespace vxseg::kernels
