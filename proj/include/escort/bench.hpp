#ifndef ESCORT_BENCH_HPP
#define ESCORT_BENCH_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "escort/access_model.hpp"
#include "escort/config.hpp"
#include "escort/conv.hpp"
#include "escort/engine.hpp"
#include "escort/weight_io.hpp"

namespace escort {

namespace detail {

inline std::string fmt_double(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

inline std::string fmt_fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

inline double checksum(const Tensor4D& t) {
  double sum = 0.0;
  for (float v : t.values()) sum += v;
  return sum;
}

/// Shifts the first stored weight of the matrix to a neighbouring kernel
/// position. Used to check that verification catches a bad stretch.
inline void corrupt_first_colidx(CsrMatrix& a, const ConvShape& shape) {
  if (a.nnz() == 0) return;
  const std::size_t wp = shape.w_pad(), plane = shape.h_pad() * wp;
  std::uint32_t& col = a.colidx[0];
  const std::size_t ch = col / plane, rr = (col % plane) / wp, ss = col % wp;
  if (shape.s() > 1) {
    col = static_cast<std::uint32_t>(layout_f(ch, rr, ss + 1 < shape.s() ? ss + 1 : ss - 1, shape.h_pad(), wp));
  } else if (shape.r() > 1) {
    col = static_cast<std::uint32_t>(layout_f(ch, rr + 1 < shape.r() ? rr + 1 : rr - 1, ss, shape.h_pad(), wp));
  } else if (shape.c() > 1) {
    col = static_cast<std::uint32_t>(layout_f(ch + 1 < shape.c() ? ch + 1 : ch - 1, rr, ss, shape.h_pad(), wp));
  } else {
    a.value[0] = -a.value[0];
  }
}

}  // namespace detail

/// One layer run at one sparsity.
struct LayerCase {
  LayerConfig config;
  double target_sparsity = 0.0;
  std::uint64_t seed = 0;
};

/// Expands configs into cases. An explicit sparsity list replaces each
/// layer's own sparsity; an explicit seed replaces each layer's seed.
inline std::vector<LayerCase> expand_cases(const std::vector<LayerConfig>& configs,
                                           const std::vector<double>& sparsities,
                                           std::optional<std::uint64_t> seed) {
  std::vector<LayerCase> out;
  for (const auto& cfg : configs) {
    const std::uint64_t s = seed.value_or(cfg.seed);
    if (sparsities.empty()) {
      out.push_back({cfg, cfg.sparsity, s});
    } else {
      for (double sp : sparsities) out.push_back({cfg, sp, s});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// verify

struct VerifyOptions {
  std::vector<EngineKind> engines{kConcreteEngines.begin(), kConcreteEngines.end()};
  std::size_t trials = 1;
  std::size_t workers = 1;
  double rel_tol = 1e-5;
  double abs_tol = 1e-6;
  bool inject_fault = false;
};

struct VerifyRow {
  std::string layer;
  double target_sparsity = 0.0;
  double measured_sparsity = 0.0;
  std::uint64_t seed = 0;
  EngineKind engine = EngineKind::DenseDirect;
  EngineKind resolved = EngineKind::DenseDirect;
  ErrorReport error;
  Tensor4D::Dims worst{};  // (n, m, h, w) of the worst element
};

/// Runs every engine against the seven-loop reference. Trial t uses seed
/// base + t.
inline std::vector<VerifyRow> run_verify(const std::vector<LayerCase>& cases,
                                         const VerifyOptions& opt) {
  std::vector<VerifyRow> rows;
  for (const auto& lc : cases) {
    for (std::size_t t = 0; t < opt.trials; ++t) {
      PreparedLayer layer = prepare_layer(lc.config.shape, lc.target_sparsity, lc.seed + t);
      if (opt.inject_fault) detail::corrupt_first_colidx(layer.csr_stretched, layer.shape);
      const Tensor4D ref = conv_dense_direct(layer.input, layer.weights, layer.shape, opt.workers).output;
      for (EngineKind kind : opt.engines) {
        VerifyRow row;
        row.layer = lc.config.name;
        row.target_sparsity = lc.target_sparsity;
        row.measured_sparsity = layer.measured_sparsity();
        row.seed = lc.seed + t;
        row.engine = kind;
        row.resolved = resolve_engine(kind, layer);
        const ConvResult res = run_engine(kind, layer, opt.workers);
        row.error = compare_outputs(res.output, ref, opt.rel_tol, opt.abs_tol);
        row.worst = ref.unflatten(row.error.worst_index);
        rows.push_back(std::move(row));
      }
    }
  }
  return rows;
}

inline bool all_pass(const std::vector<VerifyRow>& rows) {
  for (const auto& r : rows)
    if (!r.error.within) return false;
  return true;
}

inline std::string engine_label(EngineKind kind, EngineKind resolved) {
  std::string s(engine_name(kind));
  if (kind == EngineKind::Auto) s += ":" + std::string(engine_name(resolved));
  return s;
}

inline void print_verify(std::ostream& os, const std::vector<VerifyRow>& rows) {
  for (const auto& r : rows) {
    os << (r.error.within ? "PASS " : "FAIL ") << r.layer << " sparsity=" << detail::fmt_fixed(r.target_sparsity, 3)
       << " seed=" << r.seed << " engine=" << engine_label(r.engine, r.resolved)
       << " max_abs=" << detail::fmt_double(r.error.max_abs, 3)
       << " max_rel=" << detail::fmt_double(r.error.max_rel, 3);
    if (!r.error.within)
      os << " worst_at=(n=" << r.worst[0] << ",m=" << r.worst[1] << ",h=" << r.worst[2]
         << ",w=" << r.worst[3] << ")";
    os << '\n';
  }
}

// ---------------------------------------------------------------------------
// bench

struct BenchOptions {
  std::vector<EngineKind> engines{kConcreteEngines.begin(), kConcreteEngines.end()};
  std::size_t repeats = 10;
  std::size_t warmup = 2;
  std::size_t workers = 1;
};

struct BenchRecord {
  std::string layer;
  std::string engine;
  EngineKind resolved = EngineKind::DenseDirect;
  double sparsity_measured = 0.0;
  std::size_t nnz = 0;
  std::size_t repeats = 0;
  double time_ms_mean = 0.0;
  double time_ms_std = 0.0;
  double gflops_effective = 0.0;
  std::size_t traffic_words_est = 0;
  double checksum = 0.0;
};

inline constexpr const char* kBenchCsvHeader =
    "layer,engine,sparsity_measured,nnz,repeats,time_ms_mean,time_ms_std,gflops_effective,"
    "traffic_words_est,checksum";

/// Modeled off-chip words for one engine (no-cache model). Dense paths move
/// the full M x CRS weight matrix, sparse paths the CSR arrays.
inline std::size_t engine_traffic_words(EngineKind kind, const ConvShape& shape, std::size_t nnz) {
  const ReuseStats st = reuse_stats(shape, nnz);
  const std::size_t dense_w = shape.m() * shape.kernel_cols();
  switch (kind) {
    case EngineKind::DenseDirect: return st.words_direct.in + dense_w + st.words_direct.out;
    case EngineKind::LoweredDense: return st.words_lowered.in + dense_w + st.words_lowered.out;
    case EngineKind::LoweredSparse: return st.words_lowered.total();
    case EngineKind::SparseDirect: return st.words_direct.total();
    case EngineKind::Auto: break;
  }
  throw std::logic_error("unresolved engine kind");
}

/// Mean and sample standard deviation; std is 0 for a single sample.
inline std::pair<double, double> mean_std(const std::vector<double>& xs) {
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
}

/// Warmup runs are discarded, then `repeats` timed runs per engine.
/// gflops_effective counts the dense-equivalent work (2*N*M*C*R*S*E*F)
/// over the mean time, so sparse engines are credited for skipped zeros.
inline std::vector<BenchRecord> run_bench(const std::vector<LayerCase>& cases,
                                          const BenchOptions& opt) {
  if (opt.repeats == 0) throw std::invalid_argument("repeats must be >= 1");
  std::vector<BenchRecord> out;
  for (const auto& lc : cases) {
    const PreparedLayer layer = prepare_layer(lc.config.shape, lc.target_sparsity, lc.seed);
    for (EngineKind kind : opt.engines) {
      const EngineKind resolved = resolve_engine(kind, layer);
      for (std::size_t i = 0; i < opt.warmup; ++i) (void)run_engine(resolved, layer, opt.workers);
      std::vector<double> ms;
      double sum = 0.0;
      for (std::size_t i = 0; i < opt.repeats; ++i) {
        const ConvResult res = run_engine(resolved, layer, opt.workers);
        ms.push_back(res.elapsed * 1e3);
        if (i == 0) sum = detail::checksum(res.output);
      }
      const auto [mean, sd] = mean_std(ms);
      BenchRecord rec;
      rec.layer = lc.config.name;
      rec.engine = engine_label(kind, resolved);
      rec.resolved = resolved;
      rec.sparsity_measured = layer.measured_sparsity();
      rec.nnz = layer.csr.nnz();
      rec.repeats = opt.repeats;
      rec.time_ms_mean = mean;
      rec.time_ms_std = sd;
      rec.gflops_effective =
          mean > 0.0 ? 2.0 * static_cast<double>(layer.shape.dense_macs()) / (mean * 1e6) : 0.0;
      rec.traffic_words_est = engine_traffic_words(resolved, layer.shape, rec.nnz);
      rec.checksum = sum;
      out.push_back(std::move(rec));
    }
  }
  return out;
}

inline void write_bench_csv(std::ostream& os, const std::vector<BenchRecord>& recs) {
  os << kBenchCsvHeader << '\n';
  for (const auto& r : recs) {
    os << r.layer << ',' << r.engine << ',' << detail::fmt_fixed(r.sparsity_measured, 6) << ','
       << r.nnz << ',' << r.repeats << ',' << detail::fmt_fixed(r.time_ms_mean, 4) << ','
       << detail::fmt_fixed(r.time_ms_std, 4) << ',' << detail::fmt_fixed(r.gflops_effective, 4)
       << ',' << r.traffic_words_est << ',' << detail::fmt_double(r.checksum, 17) << '\n';
  }
}

/// Speedup of each record over the lowered-dense record of the same layer
/// run (consecutive records sharing layer name and nnz).
inline void print_speedups(std::ostream& os, const std::vector<BenchRecord>& recs) {
  for (std::size_t i = 0; i < recs.size();) {
    std::size_t j = i;
    while (j < recs.size() && recs[j].layer == recs[i].layer && recs[j].nnz == recs[i].nnz) ++j;
    const BenchRecord* base = nullptr;
    for (std::size_t k = i; k < j; ++k)
      if (recs[k].resolved == EngineKind::LoweredDense) base = &recs[k];
    os << recs[i].layer << " (sparsity " << detail::fmt_fixed(recs[i].sparsity_measured, 3) << "):";
    if (!base) {
      os << " no lowered-dense baseline in engine set\n";
    } else {
      for (std::size_t k = i; k < j; ++k)
        os << ' ' << recs[k].engine << "="
           << detail::fmt_fixed(base->time_ms_mean / std::max(recs[k].time_ms_mean, 1e-9), 2) << 'x';
      os << '\n';
    }
    i = j;
  }
}

// ---------------------------------------------------------------------------
// analyze

struct AnalyzeRow {
  std::string layer;
  double sparsity = 0.0;
  std::size_t nnz = 0;
  AccessMetrics reads;
  AccessMetrics writes;
  ReuseStats reuse;
  double ai_direct = 0.0;
  double ai_lowered = 0.0;
  std::size_t buffer_words = 0;
  TrafficEstimate ws, os, is;
};

inline std::vector<AnalyzeRow> run_analyze(const std::vector<LayerCase>& cases, const WarpModel& model,
                                           const std::vector<std::size_t>& buffers) {
  model.validate();
  for (auto b : buffers)
    if (b == 0) throw std::invalid_argument("buffer sizes must be >= 1 word");
  std::vector<AnalyzeRow> out;
  for (const auto& lc : cases) {
    const PreparedLayer layer = prepare_layer(lc.config.shape, lc.target_sparsity, lc.seed);
    AnalyzeRow base;
    base.layer = lc.config.name;
    base.sparsity = layer.measured_sparsity();
    base.nnz = layer.csr.nnz();
    base.reads = simulate_read_coalescing(layer.csr_stretched, layer.shape, model);
    base.writes = simulate_write_coalescing(layer.shape, model);
    base.reuse = reuse_stats(layer.shape, base.nnz);
    base.ai_direct = arithmetic_intensity(layer.shape, base.nnz, ConvPath::Direct, model.elem_bytes);
    base.ai_lowered = arithmetic_intensity(layer.shape, base.nnz, ConvPath::Lowered, model.elem_bytes);
    for (std::size_t b : buffers) {
      AnalyzeRow row = base;
      row.buffer_words = b;
      row.ws = dataflow_traffic(layer.shape, base.nnz, Dataflow::WeightStationary, b);
      row.os = dataflow_traffic(layer.shape, base.nnz, Dataflow::OutputStationary, b);
      row.is = dataflow_traffic(layer.shape, base.nnz, Dataflow::InputStationary, b);
      out.push_back(std::move(row));
    }
  }
  return out;
}

inline constexpr const char* kAnalyzeCsvHeader =
    "layer,sparsity,nnz,read_requests,read_transactions,read_ideal,read_efficiency,"
    "write_requests,write_transactions,write_ideal,write_efficiency,weight_reuse,"
    "lowered_entries,direct_footprint,ai_direct,ai_lowered,buffer_words,"
    "ws_in,ws_w,ws_out,ws_total,os_in,os_w,os_out,os_total,is_in,is_w,is_out,is_total";

inline void write_analyze_csv(std::ostream& os, const std::vector<AnalyzeRow>& rows) {
  os << kAnalyzeCsvHeader << '\n';
  auto traffic = [&os](const TrafficEstimate& t) {
    os << ',' << t.in_words << ',' << t.w_words << ',' << t.out_words << ',' << t.total_words;
  };
  for (const auto& r : rows) {
    os << r.layer << ',' << detail::fmt_fixed(r.sparsity, 6) << ',' << r.nnz << ','
       << r.reads.warp_reads << ',' << r.reads.transactions << ',' << r.reads.ideal_transactions
       << ',' << detail::fmt_fixed(r.reads.coalescing_efficiency(), 6) << ','
       << r.writes.warp_reads << ',' << r.writes.transactions << ',' << r.writes.ideal_transactions
       << ',' << detail::fmt_fixed(r.writes.coalescing_efficiency(), 6) << ','
       << r.reuse.weight_reuse << ',' << r.reuse.lowered_entries << ',' << r.reuse.direct_footprint
       << ',' << detail::fmt_double(r.ai_direct, 8) << ',' << detail::fmt_double(r.ai_lowered, 8)
       << ',' << (r.buffer_words == kUnboundedBuffer ? std::string("inf") : std::to_string(r.buffer_words));
    traffic(r.ws);
    traffic(r.os);
    traffic(r.is);
    os << '\n';
  }
}

// ---------------------------------------------------------------------------
// prune

struct PruneReport {
  std::size_t rows = 0;
  std::size_t kernel_cols = 0;
  std::size_t nnz = 0;
  double achieved_sparsity = 0.0;
  std::size_t footprint_bytes = 0;
  std::size_t dense_bytes = 0;
  bool stretched = false;
  bool round_trip_ok = false;
};

/// Prunes dense weights, converts to CSR (optionally stretched for the
/// layer's padded input), writes the weight file and reloads it to confirm
/// a bitwise round trip.
inline PruneReport run_prune(const Tensor4D& dense, const ConvShape& shape, double target,
                             bool stretch, const std::string& out_path) {
  CsrMatrix csr = dense_to_csr(prune_by_magnitude(dense, target));
  PruneReport rep;
  rep.rows = csr.rows;
  rep.kernel_cols = csr.kernel_cols;
  rep.nnz = csr.nnz();
  rep.achieved_sparsity = sparsity(csr);
  rep.footprint_bytes = csr_footprint_bytes(csr);
  rep.dense_bytes = 4 * csr.rows * csr.kernel_cols;
  if (stretch) csr = stretch_weights(csr, shape);
  rep.stretched = stretch;
  write_weights(csr, out_path);
  rep.round_trip_ok = read_weights(out_path, shape) == csr;
  return rep;
}

}  // namespace escort

#endif  // ESCORT_BENCH_HPP
