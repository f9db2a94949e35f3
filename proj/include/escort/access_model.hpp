#ifndef ESCORT_ACCESS_MODEL_HPP
#define ESCORT_ACCESS_MODEL_HPP

#include <algorithm>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string_view>

#include "escort/csr.hpp"
#include "escort/tensor.hpp"

namespace escort {

/// Modeled SIMD group issuing memory requests together.
struct WarpModel {
  std::size_t lanes = 32;
  std::size_t txn_bytes = 32;
  std::size_t elem_bytes = 4;

  void validate() const {
    if (lanes == 0) throw std::invalid_argument("warp model needs at least one lane");
    if (elem_bytes == 0) throw std::invalid_argument("element size must be positive");
    if (txn_bytes == 0 || txn_bytes % elem_bytes != 0)
      throw std::invalid_argument("transaction size must be a positive multiple of the element size");
  }
};

struct AccessMetrics {
  std::size_t warp_reads = 0;  // warp-wide requests issued (reads or writes)
  std::size_t transactions = 0;
  std::size_t ideal_transactions = 0;
  std::size_t divergent_warp_reads = 0;  // requests needing more than one transaction
  std::size_t requested_bytes = 0;
  std::size_t transferred_bytes = 0;

  /// ideal / actual; 1.0 for an empty stream.
  double coalescing_efficiency() const {
    return transactions == 0 ? 1.0
                             : static_cast<double>(ideal_transactions) /
                                   static_cast<double>(transactions);
  }
  /// Requested bytes over transferred bytes. Unlike the ratio above this
  /// charges a lone lane for the unused part of its segment.
  double byte_efficiency() const {
    return transactions == 0 ? 1.0
                             : static_cast<double>(requested_bytes) /
                                   static_cast<double>(transferred_bytes);
  }
  double transactions_per_request() const {
    return warp_reads == 0 ? 0.0
                           : static_cast<double>(transactions) / static_cast<double>(warp_reads);
  }
};

namespace detail {

inline std::size_t ceil_div(std::size_t a, std::size_t b) { return a == 0 ? 0 : (a - 1) / b + 1; }

/// Accounts one warp request touching `count` elements at element offsets
/// base, base + step, ... (step >= 1). Addresses are increasing, so when
/// consecutive addresses are at most one segment apart every segment
/// between the first and last is touched; otherwise each address lands in
/// its own segment.
inline void account_request(AccessMetrics& acc, std::size_t base, std::size_t step,
                            std::size_t count, const WarpModel& model) {
  const std::size_t first = base * model.elem_bytes;
  const std::size_t last = (base + (count - 1) * step) * model.elem_bytes;
  const std::size_t step_bytes = step * model.elem_bytes;
  const std::size_t txns = step_bytes <= model.txn_bytes
                               ? last / model.txn_bytes - first / model.txn_bytes + 1
                               : count;
  acc.warp_reads += 1;
  acc.transactions += txns;
  acc.requested_bytes += count * model.elem_bytes;
  acc.transferred_bytes += txns * model.txn_bytes;
  acc.ideal_transactions += ceil_div(count * model.elem_bytes, model.txn_bytes);
  if (txns > 1) acc.divergent_warp_reads += 1;
}

}  // namespace detail

/// Input reads of the direct sparse engine under the one-output-per-lane
/// mapping: for every stored weight, each output row is covered by warps
/// of `lanes` consecutive positions (the last warp of a row may be
/// partial; warps never wrap across rows). Lane w of a warp reads input
/// element colidx + h*stride*w_pad + w*stride of its sample.
inline AccessMetrics simulate_read_coalescing(const CsrMatrix& weights, const ConvShape& shape,
                                              const WarpModel& model = {}) {
  model.validate();
  if (!weights.stretched() ||
      *weights.stretch != StretchDims{shape.h_pad(), shape.w_pad()})
    throw std::invalid_argument("read coalescing needs weights stretched for this shape");
  AccessMetrics acc;
  const std::size_t E = shape.e(), F = shape.f(), st = shape.stride(), wp = shape.w_pad();
  const std::size_t sample_stride = shape.c() * shape.h_pad() * wp;
  for (std::size_t n = 0; n < shape.n(); ++n)
    for (std::size_t j = 0; j < weights.nnz(); ++j) {
      const std::size_t off = n * sample_stride + weights.colidx[j];
      for (std::size_t h = 0; h < E; ++h)
        for (std::size_t w0 = 0; w0 < F; w0 += model.lanes) {
          const std::size_t active = std::min(model.lanes, F - w0);
          detail::account_request(acc, off + h * st * wp + w0 * st, st, active, model);
        }
    }
  return acc;
}

/// Output writes under the same mapping: consecutive lanes store
/// consecutive positions of one output row.
inline AccessMetrics simulate_write_coalescing(const ConvShape& shape,
                                               const WarpModel& model = {}) {
  model.validate();
  AccessMetrics acc;
  const std::size_t E = shape.e(), F = shape.f();
  for (std::size_t plane = 0; plane < shape.n() * shape.m(); ++plane)
    for (std::size_t h = 0; h < E; ++h)
      for (std::size_t w0 = 0; w0 < F; w0 += model.lanes) {
        const std::size_t active = std::min(model.lanes, F - w0);
        detail::account_request(acc, (plane * E + h) * F + w0, 1, active, model);
      }
  return acc;
}

/// Off-chip words of one layer execution, no-cache model.
struct WordCounts {
  std::size_t in = 0;
  std::size_t w = 0;
  std::size_t out = 0;
  std::size_t total() const { return in + w + out; }
};

struct ReuseStats {
  std::size_t weight_reuse = 0;        // uses of each stored weight per sample (E*F)
  std::size_t weight_reuse_batch = 0;  // n * E * F
  std::size_t lowered_entries = 0;     // C*R*S*E*F per sample
  std::size_t direct_footprint = 0;    // C*h_pad*w_pad per sample
  WordCounts words_direct;
  WordCounts words_lowered;
};

inline ReuseStats reuse_stats(const ConvShape& shape, std::size_t nnz) {
  ReuseStats st;
  const std::size_t ef = shape.e() * shape.f();
  st.weight_reuse = ef;
  st.weight_reuse_batch = shape.n() * ef;
  st.lowered_entries = shape.kernel_cols() * ef;
  st.direct_footprint = shape.c() * shape.h_pad() * shape.w_pad();
  const std::size_t w_words = 2 * nnz + shape.m() + 1;
  const std::size_t out_words = shape.n() * shape.m() * ef;
  st.words_direct = {shape.n() * st.direct_footprint, w_words, out_words};
  st.words_lowered = {shape.n() * st.lowered_entries, w_words, out_words};
  return st;
}

enum class ConvPath { Direct, Lowered };

/// Executed flops (2 per stored-weight MAC) per byte of modeled traffic.
inline double arithmetic_intensity(const ConvShape& shape, std::size_t nnz, ConvPath path,
                                   std::size_t elem_bytes = 4) {
  const ReuseStats st = reuse_stats(shape, nnz);
  const WordCounts& words = path == ConvPath::Direct ? st.words_direct : st.words_lowered;
  const double flops = 2.0 * static_cast<double>(shape.n() * nnz * shape.e() * shape.f());
  return flops / static_cast<double>(elem_bytes * words.total());
}

enum class Dataflow { WeightStationary, OutputStationary, InputStationary };

inline std::string_view dataflow_name(Dataflow d) {
  switch (d) {
    case Dataflow::WeightStationary: return "weight-stationary";
    case Dataflow::OutputStationary: return "output-stationary";
    case Dataflow::InputStationary: return "input-stationary";
  }
  return "?";
}

inline constexpr std::size_t kUnboundedBuffer = std::numeric_limits<std::size_t>::max();

struct TrafficEstimate {
  Dataflow scheme = Dataflow::WeightStationary;
  std::size_t buffer_words = 0;
  std::size_t in_words = 0;
  std::size_t w_words = 0;
  std::size_t out_words = 0;
  std::size_t total_words = 0;
};

/// Off-chip traffic of the direct sparse loop nest when a buffer of
/// `buffer_words` words holds one operand class resident.
///
///   weight-stationary: as many filter rows as fit stay resident; the
///     input is re-streamed once per group of resident rows.
///   output-stationary: the n*E*F output positions of a filter are split
///     into resident accumulator tiles of `buffer_words`; the weights are
///     re-streamed once per tile.
///   input-stationary: input tiles stay resident; the weights are
///     re-streamed once per tile.
///
/// Compulsory traffic (each word moved once) is reached by every scheme
/// once the buffer holds its working set.
inline TrafficEstimate dataflow_traffic(const ConvShape& shape, std::size_t nnz, Dataflow scheme,
                                        std::size_t buffer_words) {
  if (buffer_words == 0) throw std::invalid_argument("buffer must hold at least one word");
  const std::size_t in_once = shape.n() * shape.c() * shape.h_pad() * shape.w_pad();
  const std::size_t w_once = 2 * nnz;
  const std::size_t outputs = shape.n() * shape.m() * shape.e() * shape.f();

  TrafficEstimate t;
  t.scheme = scheme;
  t.buffer_words = buffer_words;
  t.in_words = in_once;
  t.w_words = w_once;
  t.out_words = outputs;
  switch (scheme) {
    case Dataflow::WeightStationary: {
      const std::size_t per_row = std::max<std::size_t>(1, w_once / shape.m());
      const std::size_t resident_rows = std::max<std::size_t>(1, buffer_words / per_row);
      t.in_words = in_once * detail::ceil_div(shape.m(), resident_rows);
      break;
    }
    case Dataflow::OutputStationary:
      t.w_words = w_once * detail::ceil_div(shape.n() * shape.e() * shape.f(), buffer_words);
      break;
    case Dataflow::InputStationary:
      t.w_words = w_once * detail::ceil_div(in_once, buffer_words);
      break;
  }
  t.total_words = t.in_words + t.w_words + t.out_words;
  return t;
}

}  // namespace escort

#endif  // ESCORT_ACCESS_MODEL_HPP
