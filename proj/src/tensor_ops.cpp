#include "vxseg/tensor_ops.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "vxseg/errors.hpp"
#include "vxseg/kernels.hpp"

namespace vxseg {

namespace {
void require_matrix(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected a matrix, got " + shape_string(t.shape()));
  }
}
}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  if (a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: inner extents disagree for " + shape_string(a.shape()) +
                         " and " + shape_string(b.shape()));
  }
  Tensor c({a.dim(0), b.dim(1)});
  kernels::gemm_nn(a.data(), b.data(), c.data(), a.dim(0), a.dim(1), b.dim(1));
  return c;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul_nt");
  require_matrix(b, "matmul_nt");
  if (a.dim(1) != b.dim(1)) {
    throw DimensionError("matmul_nt: inner extents disagree for " + shape_string(a.shape()) +
                         " and " + shape_string(b.shape()) + "^T");
  }
  Tensor c({a.dim(0), b.dim(0)});
  kernels::gemm_nt(a.data(), b.data(), c.data(), a.dim(0), a.dim(1), b.dim(0));
  return c;
}

Tensor matmul_sorted(const Tensor& a, const Tensor& b) {
  Tensor c = matmul(a, b);  // validates shapes
  const std::size_t m = a.dim(0), p = a.dim(1), q = b.dim(1);
  const double* rows = b.data().data();
  const auto row_less = [&](std::size_t k1, std::size_t k2) {
    return std::lexicographical_compare(rows + k1 * q, rows + (k1 + 1) * q, rows + k2 * q, rows + (k2 + 1) * q);
  };
  // Visit k in lexicographic order of b's rows. Equal rows form groups whose
  // members are further ordered by a[i, k] per output row.
  std::vector<std::size_t> order(p);
  for (std::size_t k = 0; k < p; ++k) order[k] = k;
  std::sort(order.begin(), order.end(), row_less);
  std::vector<std::size_t> group_end(p);
  for (std::size_t s = 0; s < p;) {
    std::size_t e = s + 1;
    while (e < p && !row_less(order[s], order[e])) ++e;
    for (std::size_t k = s; k < e; ++k) group_end[k] = e;
    s = e;
  }
  std::vector<std::size_t> row_order(p);
  for (std::size_t i = 0; i < m; ++i) {
    row_order = order;
    for (std::size_t s = 0; s < p; s = group_end[s]) {
      if (group_end[s] - s > 1) {
        std::sort(row_order.begin() + s, row_order.begin() + group_end[s],
                  [&](std::size_t k1, std::size_t k2) { return a.at(i, k1) < a.at(i, k2); });
      }
    }
    for (std::size_t j = 0; j < q; ++j) {
      double acc = 0.0;
      for (std::size_t k : row_order) acc += a.at(i, k) * b.at(k, j);
      c.at(i, j) = acc;
    }
  }
  return c;
}

Tensor transpose(const Tensor& a) {
  require_matrix(a, "transpose");
  const std::size_t m = a.dim(0), n = a.dim(1);
  Tensor t({n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) t.at(j, i) = a.at(i, j);
  return t;
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("add: shapes " + shape_string(a.shape()) + " and " +
                         shape_string(b.shape()) + " differ");
  }
  Tensor c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c[i] += b[i];
  return c;
}

Tensor relu(const Tensor& x) {
  Tensor y = x;
  for (auto& v : y.data()) v = v > 0.0 ? v : 0.0;
  return y;
}

Tensor softmax_lastdim(const Tensor& x) {
  if (!x.all_finite()) throw NumericError("softmax: non-finite input");
  Tensor y(x.shape());
  const std::size_t n = x.cols();
  const std::size_t rows = x.rows();
  std::vector<double> sorted;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = x.data().data() + r * n;
    double* out = y.data().data() + r * n;
    const double mx = *std::max_element(in, in + n);
    for (std::size_t j = 0; j < n; ++j) out[j] = std::exp(in[j] - mx);
    // sorted summation: the normalizer does not depend on the column order
    sorted.assign(out, out + n);
    std::sort(sorted.begin(), sorted.end());
    double total = 0.0;
    for (double e : sorted) total += e;
    for (std::size_t j = 0; j < n; ++j) out[j] /= total;
  }
  return y;
}

Tensor layernorm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  if (!(eps >= 0.0)) throw ConfigError("layernorm: eps must be >= 0");
  const std::size_t n = x.cols();
  if (gamma.size() != n || beta.size() != n) {
    throw DimensionError("layernorm: gamma/beta " + shape_string(gamma.shape()) + "/" +
                         shape_string(beta.shape()) + " do not match last extent of " +
                         shape_string(x.shape()));
  }
  Tensor y(x.shape());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const double* in = x.data().data() + r * n;
    double* out = y.data().data() + r * n;
    double mean = 0.0;
    for (std::size_t j = 0; j < n; ++j) mean += in[j];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (in[j] - mean) * (in[j] - mean);
    var /= static_cast<double>(n);
    const double denom = std::sqrt(var + eps);
    if (denom == 0.0) throw NumericError("layernorm: zero variance slice with eps == 0");
    for (std::size_t j = 0; j < n; ++j) out[j] = gamma[j] * ((in[j] - mean) / denom) + beta[j];
  }
  return y;
}

Tensor concat_lastdim(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat_lastdim: no inputs");
  const std::size_t rows = parts.front().rows();
  Shape shape = parts.front().shape();
  std::size_t total = 0;
  for (const auto& p : parts) {
    Shape lead(p.shape().begin(), p.shape().end() - 1);
    Shape lead0(shape.begin(), shape.end() - 1);
    if (lead != lead0) {
      throw DimensionError("concat_lastdim: leading extents differ: " +
                           shape_string(parts.front().shape()) + " vs " + shape_string(p.shape()));
    }
    total += p.cols();
  }
  shape.back() = total;
  Tensor out(shape);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t c = p.cols();
    for (std::size_t r = 0; r < rows; ++r)
      std::copy_n(p.data().data() + r * c, c, out.data().data() + r * total + offset);
    offset += c;
  }
  return out;
}

Tensor mean_axis(const Tensor& x, std::size_t axis) {
  if (axis >= x.rank()) {
    throw DimensionError("mean_axis: axis " + std::to_string(axis) + " out of range for " +
                         shape_string(x.shape()));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= x.dim(i);
  for (std::size_t i = axis + 1; i < x.rank(); ++i) inner *= x.dim(i);
  const std::size_t len = x.dim(axis);
  Shape shape;
  for (std::size_t i = 0; i < x.rank(); ++i)
    if (i != axis) shape.push_back(x.dim(i));
  if (shape.empty()) shape.push_back(1);
  Tensor y(shape);
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t a = 0; a < len; ++a)
      for (std::size_t i = 0; i < inner; ++i) y[o * inner + i] += x[(o * len + a) * inner + i];
  const double inv = 1.0 / static_cast<double>(len);
  for (auto& v : y.data()) v *= inv;
  return y;
}

}  // namespace vxseg
