#include "vxseg/kernels.hpp"

#include <omp.h>

#include <algorithm>

#include "vxseg/errors.hpp"

namespace vxseg::kernels {

namespace {
// Below this many multiply-adds a parallel region costs more than it saves.
constexpr std::size_t kParallelWork = 1u << 15;

int g_threads = 1;

bool go_parallel(std::size_t m, std::size_t p, std::size_t q) {
  return g_threads > 1 && m > 1 && m * p * q >= kParallelWork;
}
}  // namespace

void set_threads(int n) {
  if (n < 1) throw ConfigError("thread count must be >= 1");
  g_threads = n;
  omp_set_num_threads(g_threads);
}

int threads() { return g_threads; }

void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t p, std::size_t q) {
  const double* A = a.data();
  const double* B = b.data();
  double* C = c.data();
  const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static) if (go_parallel(m, p, q))
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    double* crow = C + i * q;
    const double* arow = A + i * p;
    for (std::size_t k = 0; k < p; ++k) {
      const double aik = arow[k];
      if (aik == 0.0) continue;
      const double* brow = B + k * q;
      for (std::size_t j = 0; j < q; ++j) crow[j] += aik * brow[j];
    }
  }
}

void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t p, std::size_t q) {
  const double* A = a.data();
  const double* B = b.data();
  double* C = c.data();
  const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static) if (go_parallel(m, p, q))
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    const double* arow = A + i * p;
    for (std::size_t j = 0; j < q; ++j) {
      const double* brow = B + j * p;
      // four partial sums so the loop pipelines without -ffast-math
      double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
      std::size_t k = 0;
      for (; k + 4 <= p; k += 4) {
        s0 += arow[k] * brow[k];
        s1 += arow[k + 1] * brow[k + 1];
        s2 += arow[k + 2] * brow[k + 2];
        s3 += arow[k + 3] * brow[k + 3];
      }
      for (; k < p; ++k) s0 += arow[k] * brow[k];
      C[i * q + j] += (s0 + s1) + (s2 + s3);
    }
  }
}

void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t p, std::size_t q) {
  const double* A = a.data();
  const double* B = b.data();
  double* C = c.data();
  const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static) if (go_parallel(m, p, q))
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    double* crow = C + i * q;
    for (std::size_t k = 0; k < p; ++k) {
      const double aki = A[k * m + i];
      if (aki == 0.0) continue;
      const double* brow = B + k * q;
      for (std::size_t j = 0; j < q; ++j) crow[j] += aki * brow[j];
    }
  }
}

namespace reference {

void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t p, std::size_t q) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < q; ++j) {
      double s = 0;
      for (std::size_t k = 0; k < p; ++k) s += a[i * p + k] * b[k * q + j];
      c[i * q + j] += s;
    }
}

void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t p, std::size_t q) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < q; ++j) {
      double s = 0;
      for (std::size_t k = 0; k < p; ++k) s += a[i * p + k] * b[j * p + k];
      c[i * q + j] += s;
    }
}

void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t p, std::size_t q) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < q; ++j) {
      double s = 0;
      for (std::size_t k = 0; k < p; ++k) s += a[k * m + i] * b[k * q + j];
      c[i * q + j] += s;
    }
}

}  // namespace reference

}  // namespace vxseg::kernels
