#ifndef ESCORT_CSR_HPP
#define ESCORT_CSR_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "escort/tensor.hpp"

namespace escort {

/// Padded input extents a stretched matrix was built for.
struct StretchDims {
  std::size_t h_pad = 0;
  std::size_t w_pad = 0;
  friend bool operator==(const StretchDims&, const StretchDims&) = default;
};

/// Compressed sparse row weight matrix, one row per filter.
///
/// Unstretched: colidx is the kernel-space index (c*R + r)*S + s and
/// cols == kernel_cols == C*R*S.
/// Stretched: colidx is the offset of (c, r, s) inside a padded CHW input
/// stack, layout_f(c, r, s, h_pad, w_pad), and cols == C*h_pad*w_pad.
///
/// kernel_cols is the logical C*R*S width used for sparsity; it is 0 when
/// unknown (a stretched matrix loaded from disk without its layer shape).
struct CsrMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t kernel_cols = 0;
  std::vector<std::size_t> rowptr{0};
  std::vector<std::uint32_t> colidx;
  std::vector<float> value;
  std::optional<StretchDims> stretch;

  std::size_t nnz() const { return value.size(); }
  bool stretched() const { return stretch.has_value(); }

  friend bool operator==(const CsrMatrix&, const CsrMatrix&) = default;
};

/// Returns an empty string when every structural invariant holds, otherwise
/// a description of the first violation found.
inline std::string csr_violation(const CsrMatrix& a) {
  if (a.rowptr.size() != a.rows + 1) return "rowptr length must be rows + 1";
  if (a.rowptr.front() != 0) return "rowptr[0] must be 0";
  if (a.colidx.size() != a.value.size()) return "colidx and value lengths differ";
  if (a.rowptr.back() != a.nnz()) return "rowptr[rows] must equal nnz";
  for (std::size_t i = 0; i < a.rows; ++i) {
    if (a.rowptr[i + 1] < a.rowptr[i])
      return "rowptr must be non-decreasing (row " + std::to_string(i) + ")";
  }
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t j = a.rowptr[i]; j < a.rowptr[i + 1]; ++j) {
      if (a.colidx[j] >= a.cols)
        return "colidx out of range at entry " + std::to_string(j);
      if (j > a.rowptr[i] && a.colidx[j] <= a.colidx[j - 1])
        return "colidx must be strictly increasing within row " + std::to_string(i);
      if (a.value[j] == 0.0f) return "stored value is zero at entry " + std::to_string(j);
    }
  }
  return {};
}

inline void validate_csr(const CsrMatrix& a) {
  if (auto why = csr_violation(a); !why.empty())
    throw std::invalid_argument("invalid CSR matrix: " + why);
}

/// Row i holds filter i flattened in (c, r, s) order; exact zeros are dropped.
inline CsrMatrix dense_to_csr(const Tensor4D& weights) {
  const auto [m, c, r, s] = weights.dims();
  const std::size_t k = c * r * s;
  CsrMatrix out;
  out.rows = m;
  out.cols = k;
  out.kernel_cols = k;
  out.rowptr.assign(m + 1, 0);
  const float* w = weights.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t col = 0; col < k; ++col) {
      const float v = w[i * k + col];
      if (v != 0.0f) {
        out.colidx.push_back(static_cast<std::uint32_t>(col));
        out.value.push_back(v);
      }
    }
    out.rowptr[i + 1] = out.value.size();
  }
  return out;
}

/// Inverse of dense_to_csr for an unstretched matrix.
inline Tensor4D csr_to_dense(const CsrMatrix& a, const Tensor4D::Dims& weight_dims) {
  if (a.stretched()) throw std::invalid_argument("csr_to_dense expects an unstretched matrix");
  const std::size_t k = weight_dims[1] * weight_dims[2] * weight_dims[3];
  if (weight_dims[0] != a.rows || k != a.cols)
    throw std::invalid_argument("weight dims do not match the CSR extents");
  Tensor4D out(weight_dims);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = a.rowptr[i]; j < a.rowptr[i + 1]; ++j)
      out.data()[i * k + a.colidx[j]] = a.value[j];
  return out;
}

/// Number of elements magnitude pruning removes for a given target.
/// Rounds up so the achieved sparsity is never below the target.
inline std::size_t prune_count(std::size_t total, double target_sparsity) {
  if (!(target_sparsity >= 0.0 && target_sparsity < 1.0))
    throw std::invalid_argument("target sparsity must lie in [0, 1)");
  const double exact = target_sparsity * static_cast<double>(total);
  auto k = static_cast<std::size_t>(std::ceil(exact - 1e-9));
  return std::min(k, total);
}

/// Zeroes the prune_count() smallest-magnitude elements. Ties at the cutoff
/// magnitude go to the smaller flat index first.
inline Tensor4D prune_by_magnitude(const Tensor4D& weights, double target_sparsity) {
  const std::size_t total = weights.size();
  const std::size_t k = prune_count(total, target_sparsity);
  Tensor4D out = weights;
  if (k == 0) return out;
  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const float* w = weights.data();
  auto smaller = [w](std::size_t a, std::size_t b) {
    const float ma = std::fabs(w[a]), mb = std::fabs(w[b]);
    return ma < mb || (ma == mb && a < b);
  };
  std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k - 1), order.end(),
                   smaller);
  // nth_element leaves the k smallest (under the strict total order) in front.
  for (std::size_t i = 0; i < k; ++i) out.data()[order[i]] = 0.0f;
  return out;
}

/// Fraction of zero entries in the logical M x CRS kernel matrix.
inline double sparsity(const CsrMatrix& a) {
  if (a.kernel_cols == 0)
    throw std::logic_error("sparsity needs the kernel width; matrix was loaded without a shape");
  return 1.0 - static_cast<double>(a.nnz()) / static_cast<double>(a.rows * a.kernel_cols);
}

/// Storage model with 4-byte value, colidx and rowptr entries.
constexpr std::size_t csr_footprint_bytes(std::size_t nnz, std::size_t rows) {
  return (2 * nnz + rows + 1) * 4;
}
inline std::size_t csr_footprint_bytes(const CsrMatrix& a) {
  return csr_footprint_bytes(a.nnz(), a.rows);
}

/// Rewrites kernel-space column indices into offsets of the padded input
/// stack so the inner loop of the direct engine is a single addition.
/// rowptr and value are untouched; per-row order is preserved because the
/// map is monotone in (c, r, s).
inline CsrMatrix stretch_weights(const CsrMatrix& a, const ConvShape& shape) {
  if (a.stretched()) throw std::invalid_argument("weights are already stretched");
  if (a.cols != shape.kernel_cols() || a.rows != shape.m())
    throw std::invalid_argument("CSR extents do not match the layer shape");
  const std::size_t hp = shape.h_pad(), wp = shape.w_pad();
  const std::size_t rs = shape.r() * shape.s();
  if (shape.c() * hp * wp > UINT32_MAX)
    throw std::invalid_argument("padded input too large for 32-bit column indices");
  CsrMatrix out = a;
  for (auto& col : out.colidx) {
    const std::size_t ch = col / rs;
    const std::size_t rr = (col % rs) / shape.s();
    const std::size_t ss = col % shape.s();
    col = static_cast<std::uint32_t>(layout_f(ch, rr, ss, hp, wp));
  }
  out.cols = shape.c() * hp * wp;
  out.kernel_cols = shape.kernel_cols();
  out.stretch = StretchDims{hp, wp};
  return out;
}

}  // namespace escort

#endif  // ESCORT_CSR_HPP
