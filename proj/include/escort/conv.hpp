#ifndef ESCORT_CONV_HPP
#define ESCORT_CONV_HPP

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "escort/csr.hpp"
#include "escort/tensor.hpp"

namespace escort {

/// Row-major dense matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, float fill = 0.0f) : rows(r), cols(c), data(r * c, fill) {}
  Matrix(std::size_t r, std::size_t c, std::vector<float> values)
      : rows(r), cols(c), data(std::move(values)) {
    if (data.size() != r * c) throw std::invalid_argument("matrix data length mismatch");
  }

  float& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  float operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

struct ConvResult {
  Tensor4D output;
  std::size_t macs = 0;      // multiply-accumulates executed
  std::size_t flops = 0;     // 2 * macs
  double elapsed = 0.0;      // seconds
};

namespace detail {

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

/// Runs body(i) for every i in [0, count) on `workers` threads. Indices are
/// handed out dynamically; callers must keep iterations independent.
template <typename Body>
void parallel_for(std::size_t count, std::size_t workers, Body&& body) {
  if (workers == 0) throw std::invalid_argument("worker count must be >= 1");
  workers = std::min(workers, count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  auto loop = [&] {
    for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) body(i);
  };
  std::vector<std::jthread> pool;
  pool.reserve(workers - 1);
  for (std::size_t t = 1; t < workers; ++t) pool.emplace_back(loop);
  loop();
}

inline void check_dims(const char* what, const Tensor4D::Dims& got, const Tensor4D::Dims& want) {
  if (got != want) {
    auto fmt = [](const Tensor4D::Dims& d) {
      return std::to_string(d[0]) + "x" + std::to_string(d[1]) + "x" + std::to_string(d[2]) +
             "x" + std::to_string(d[3]);
    };
    throw std::invalid_argument(std::string(what) + " dims " + fmt(got) + " do not match " +
                                fmt(want));
  }
}

inline ConvResult finish(Tensor4D out, std::size_t macs, Clock::time_point t0) {
  ConvResult res;
  res.output = std::move(out);
  res.macs = macs;
  res.flops = 2 * macs;
  res.elapsed = seconds_since(t0);
  return res;
}

}  // namespace detail

/// Reference seven-loop convolution. The input is zero-padded first and the
/// loop nest (n, m, c, h, w, r, s) runs over the padded tensor, so every
/// output element accumulates its C*R*S products in ascending (c, r, s).
/// Work is split over (n, m) output channels when workers > 1.
inline ConvResult conv_dense_direct(const Tensor4D& input, const Tensor4D& weights,
                                    const ConvShape& shape, std::size_t workers = 1) {
  detail::check_dims("input", input.dims(), shape.input_dims());
  detail::check_dims("weights", weights.dims(), shape.weight_dims());
  const auto t0 = detail::Clock::now();

  const Tensor4D in = pad_input(input, shape.pad());
  Tensor4D out(shape.output_dims());
  const std::size_t C = shape.c(), R = shape.r(), S = shape.s(), E = shape.e(), F = shape.f();
  const std::size_t wp = shape.w_pad(), st = shape.stride();
  const std::size_t M = shape.m();

  std::vector<std::size_t> macs(shape.n() * M, 0);
  detail::parallel_for(shape.n() * M, workers, [&](std::size_t nm) {
    const std::size_t n = nm / M, m = nm % M;
    float* o = out.data() + out.offset(n, m, 0, 0);
    std::size_t count = 0;
    for (std::size_t c = 0; c < C; ++c) {
      const float* plane = in.data() + in.offset(n, c, 0, 0);
      const float* wk = weights.data() + weights.offset(m, c, 0, 0);
      for (std::size_t h = 0; h < E; ++h) {
        for (std::size_t w = 0; w < F; ++w) {
          float acc = o[h * F + w];
          for (std::size_t r = 0; r < R; ++r)
            for (std::size_t s = 0; s < S; ++s)
              acc += plane[(h * st + r) * wp + (w * st + s)] * wk[r * S + s];
          o[h * F + w] = acc;
          count += R * S;
        }
      }
    }
    macs[nm] = count;
  });

  std::size_t total = 0;
  for (auto v : macs) total += v;
  return detail::finish(std::move(out), total, t0);
}

/// Lowers one batch sample into a (C*R*S) x (E*F) matrix. Entry
/// ((c*R + r)*S + s, h*F + w) holds input[sample][c][h*stride + r - pad]
/// [w*stride + s - pad], or zero when that position falls in the padding.
inline Matrix im2col(const Tensor4D& input, const ConvShape& shape, std::size_t sample) {
  detail::check_dims("input", input.dims(), shape.input_dims());
  if (sample >= shape.n()) throw std::out_of_range("sample index out of range");
  const std::size_t C = shape.c(), R = shape.r(), S = shape.s(), E = shape.e(), F = shape.f();
  const std::size_t H = shape.h(), W = shape.w(), st = shape.stride();
  const auto pad = static_cast<std::ptrdiff_t>(shape.pad());
  Matrix lowered(C * R * S, E * F);
  for (std::size_t c = 0; c < C; ++c) {
    const float* plane = input.data() + input.offset(sample, c, 0, 0);
    for (std::size_t r = 0; r < R; ++r)
      for (std::size_t s = 0; s < S; ++s) {
        float* row = lowered.data.data() + ((c * R + r) * S + s) * E * F;
        for (std::size_t h = 0; h < E; ++h) {
          const auto y = static_cast<std::ptrdiff_t>(h * st + r) - pad;
          if (y < 0 || y >= static_cast<std::ptrdiff_t>(H)) continue;
          for (std::size_t w = 0; w < F; ++w) {
            const auto x = static_cast<std::ptrdiff_t>(w * st + s) - pad;
            if (x < 0 || x >= static_cast<std::ptrdiff_t>(W)) continue;
            row[h * F + w] = plane[static_cast<std::size_t>(y) * W + static_cast<std::size_t>(x)];
          }
        }
      }
  }
  return lowered;
}

/// Dense product; each output element sums over k in ascending order.
inline Matrix gemm(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows)
    throw std::invalid_argument("gemm inner dimensions differ: " + std::to_string(a.cols) +
                                " vs " + std::to_string(b.rows));
  Matrix c(a.rows, b.cols);
  const std::size_t N = b.cols;
  for (std::size_t i = 0; i < a.rows; ++i) {
    float* ci = c.data.data() + i * N;
    for (std::size_t k = 0; k < a.cols; ++k) {
      const float aik = a(i, k);
      const float* bk = b.data.data() + k * N;
      for (std::size_t j = 0; j < N; ++j) ci[j] += aik * bk[j];
    }
  }
  return c;
}

/// Sparse x dense product over an unstretched CSR; each output element
/// sums its terms in ascending colidx order.
inline Matrix csrmm(const CsrMatrix& a, const Matrix& b) {
  if (a.stretched()) throw std::invalid_argument("csrmm expects an unstretched matrix");
  if (a.cols != b.rows)
    throw std::invalid_argument("csrmm inner dimensions differ: " + std::to_string(a.cols) +
                                " vs " + std::to_string(b.rows));
  Matrix c(a.rows, b.cols);
  const std::size_t N = b.cols;
  for (std::size_t i = 0; i < a.rows; ++i) {
    float* ci = c.data.data() + i * N;
    for (std::size_t j = a.rowptr[i]; j < a.rowptr[i + 1]; ++j) {
      const float v = a.value[j];
      const float* bk = b.data.data() + static_cast<std::size_t>(a.colidx[j]) * N;
      for (std::size_t col = 0; col < N; ++col) ci[col] += v * bk[col];
    }
  }
  return c;
}

/// im2col + gemm, one sample at a time. Samples run in parallel when
/// workers > 1.
inline ConvResult conv_lowered_dense(const Tensor4D& input, const Tensor4D& weights,
                                     const ConvShape& shape, std::size_t workers = 1) {
  detail::check_dims("input", input.dims(), shape.input_dims());
  detail::check_dims("weights", weights.dims(), shape.weight_dims());
  const auto t0 = detail::Clock::now();
  const Matrix kernel(shape.m(), shape.kernel_cols(), weights.values());
  Tensor4D out(shape.output_dims());
  const std::size_t plane = shape.m() * shape.e() * shape.f();
  detail::parallel_for(shape.n(), workers, [&](std::size_t n) {
    const Matrix prod = gemm(kernel, im2col(input, shape, n));
    std::copy(prod.data.begin(), prod.data.end(), out.data() + n * plane);
  });
  return detail::finish(std::move(out), shape.dense_macs(), t0);
}

/// im2col + csrmm, one sample at a time.
inline ConvResult conv_lowered_sparse(const Tensor4D& input, const CsrMatrix& weights,
                                      const ConvShape& shape, std::size_t workers = 1) {
  detail::check_dims("input", input.dims(), shape.input_dims());
  if (weights.stretched())
    throw std::invalid_argument("lowered sparse convolution needs unstretched weights");
  if (weights.rows != shape.m() || weights.cols != shape.kernel_cols())
    throw std::invalid_argument("CSR extents do not match the layer shape");
  const auto t0 = detail::Clock::now();
  Tensor4D out(shape.output_dims());
  const std::size_t plane = shape.m() * shape.e() * shape.f();
  detail::parallel_for(shape.n(), workers, [&](std::size_t n) {
    const Matrix prod = csrmm(weights, im2col(input, shape, n));
    std::copy(prod.data.begin(), prod.data.end(), out.data() + n * plane);
  });
  return detail::finish(std::move(out), shape.n() * weights.nnz() * shape.e() * shape.f(), t0);
}

namespace detail {

inline void check_sparse_direct_args(const Tensor4D& padded, const CsrMatrix& w,
                                     const ConvShape& shape) {
  if (!w.stretched())
    throw std::invalid_argument("direct sparse convolution needs stretched weights");
  if (*w.stretch != StretchDims{shape.h_pad(), shape.w_pad()})
    throw std::invalid_argument("weights were stretched for a different padded input");
  if (w.rows != shape.m()) throw std::invalid_argument("CSR rows do not match filter count");
  if (padded.dims() != shape.padded_input_dims())
    throw std::invalid_argument("direct sparse convolution expects a padded input (run pad_input)");
  // Largest offset touched from a base colidx; every read must stay in the
  // sample's padded channel stack.
  const std::size_t reach =
      (shape.e() - 1) * shape.stride() * shape.w_pad() + (shape.f() - 1) * shape.stride();
  const std::size_t stack = shape.c() * shape.h_pad() * shape.w_pad();
  for (std::size_t j = 0; j < w.nnz(); ++j)
    if (w.colidx[j] + reach >= stack)
      throw std::invalid_argument("stretched colidx " + std::to_string(w.colidx[j]) +
                                  " reads past the padded input");
}

/// One (n, m) output channel of the direct sparse loop nest.
inline std::size_t sparse_direct_channel(const float* in, const CsrMatrix& w, std::size_t m,
                                         const ConvShape& shape, float* out) {
  const std::size_t E = shape.e(), F = shape.f(), st = shape.stride(), wp = shape.w_pad();
  const std::size_t row_step = st * wp;
  for (std::size_t j = w.rowptr[m]; j < w.rowptr[m + 1]; ++j) {
    const float val = w.value[j];
    const float* base = in + w.colidx[j];
    for (std::size_t h = 0; h < E; ++h) {
      const float* src = base + h * row_step;
      float* dst = out + h * F;
      if (st == 1) {
        for (std::size_t x = 0; x < F; ++x) dst[x] += val * src[x];
      } else {
        for (std::size_t x = 0; x < F; ++x) dst[x] += val * src[x * st];
      }
    }
  }
  return (w.rowptr[m + 1] - w.rowptr[m]) * E * F;
}

}  // namespace detail

/// Direct sparse convolution over a pre-padded input and stretched weights.
/// For each sample and filter, every stored weight scales a strided window
/// of the input starting at its stretched offset:
///   out[n][m][h][w] += value[j] * in[n][colidx[j] + h*stride*w_pad + w*stride]
/// with j ascending, so accumulation order matches the dense reference.
inline ConvResult conv_sparse_direct(const Tensor4D& padded_input, const CsrMatrix& weights,
                                     const ConvShape& shape) {
  detail::check_sparse_direct_args(padded_input, weights, shape);
  const auto t0 = detail::Clock::now();
  Tensor4D out(shape.output_dims());
  const std::size_t E = shape.e(), F = shape.f(), st = shape.stride(), wp = shape.w_pad();
  const std::size_t sample_stride = shape.c() * shape.h_pad() * wp;
  std::size_t macs = 0;
  for (std::size_t n = 0; n < shape.n(); ++n) {
    const float* in = padded_input.data() + n * sample_stride;
    for (std::size_t m = 0; m < shape.m(); ++m) {
      float* o = out.data() + out.offset(n, m, 0, 0);
      for (std::size_t j = weights.rowptr[m]; j < weights.rowptr[m + 1]; ++j) {
        const std::size_t off = weights.colidx[j];
        const float val = weights.value[j];
        for (std::size_t h = 0; h < E; ++h)
          for (std::size_t w = 0; w < F; ++w)
            o[h * F + w] += val * in[off + h * st * wp + w * st];
        macs += E * F;
      }
    }
  }
  return detail::finish(std::move(out), macs, t0);
}

/// Same computation as conv_sparse_direct with (n, m) output channels
/// distributed over `workers` threads. Each channel has exactly one writer
/// and keeps the ascending-j order, so the result is bitwise identical to
/// the sequential engine for any worker count.
inline ConvResult conv_sparse_direct_parallel(const Tensor4D& padded_input,
                                              const CsrMatrix& weights, const ConvShape& shape,
                                              std::size_t workers) {
  if (workers == 0) throw std::invalid_argument("worker count must be >= 1");
  detail::check_sparse_direct_args(padded_input, weights, shape);
  const auto t0 = detail::Clock::now();
  Tensor4D out(shape.output_dims());
  const std::size_t M = shape.m();
  const std::size_t sample_stride = shape.c() * shape.h_pad() * shape.w_pad();
  std::vector<std::size_t> macs(shape.n() * M, 0);
  detail::parallel_for(shape.n() * M, workers, [&](std::size_t nm) {
    const std::size_t n = nm / M, m = nm % M;
    macs[nm] = detail::sparse_direct_channel(padded_input.data() + n * sample_stride, weights, m,
                                             shape, out.data() + out.offset(n, m, 0, 0));
  });
  std::size_t total = 0;
  for (auto v : macs) total += v;
  return detail::finish(std::move(out), total, t0);
}

/// Largest elementwise deviation of `got` from `ref`.
struct ErrorReport {
  double max_abs = 0.0;
  double max_rel = 0.0;         // |got - ref| / |ref| at the worst element
  std::size_t worst_index = 0;  // flat index of the element with the largest excess
  bool within = true;
};

/// An element passes when |got - ref| <= abs_tol + rel_tol * |ref|.
inline ErrorReport compare_outputs(const Tensor4D& got, const Tensor4D& ref,
                                   double rel_tol = 1e-5, double abs_tol = 1e-6) {
  if (got.dims() != ref.dims()) throw std::invalid_argument("compared tensors differ in shape");
  ErrorReport rep;
  double worst_excess = -1.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const double g = got.data()[i], r = ref.data()[i];
    const double diff = std::fabs(g - r);
    const double allowed = abs_tol + rel_tol * std::fabs(r);
    if (diff > allowed || std::isnan(diff)) rep.within = false;
    rep.max_abs = std::max(rep.max_abs, diff);
    const double excess = std::isnan(diff) ? INFINITY : diff - allowed;
    if (excess > worst_excess) {
      worst_excess = excess;
      rep.worst_index = i;
      rep.max_rel = r != 0.0 ? diff / std::fabs(r) : diff;
    }
  }
  return rep;
}

}  // namespace escort

#endif  // ESCORT_CONV_HPP
