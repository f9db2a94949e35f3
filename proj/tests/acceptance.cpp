// Acceptance suite: one PASS/FAIL line per criterion, exit status 0 only if
// all pass. Timing output for the speed criterion goes to
// acceptance_timing.csv in the working directory.
#include <chrono>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "escort/bench.hpp"
#include "escort/cli.hpp"
#include "escort/escort.hpp"
#include "oracles.hpp"

using namespace escort;

namespace {

constexpr double kSweep[] = {0.0, 0.5, 0.8, 0.9, 0.95};

bool bitwise_equal(const Tensor4D& a, const Tensor4D& b) {
  return a.dims() == b.dims() && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

std::string describe(const ConvShape& s) {
  std::ostringstream os;
  os << "n" << s.n() << " m" << s.m() << " c" << s.c() << " " << s.h() << "x" << s.w() << " k"
     << s.r() << "x" << s.s() << " st" << s.stride() << " p" << s.pad();
  return os.str();
}

double seconds(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// 1. Every engine matches the seven-loop reference on random layers.
std::string engines_agree() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng64 rng(1001);
  constexpr int kInstances = 200;
  for (int i = 0; i < kInstances; ++i) {
    const ConvShape sh = oracle::random_shape(rng);
    const double sp = kSweep[i % 5];
    const PreparedLayer layer = prepare_layer(sh, sp, rng.next());
    const Tensor4D ref = conv_dense_direct(layer.input, layer.weights, sh).output;
    for (EngineKind k : kConcreteEngines) {
      const ErrorReport e = compare_outputs(run_engine(k, layer).output, ref, 1e-5, 1e-6);
      if (!e.within)
        return std::string(engine_name(k)) + " off on " + describe(sh) + " max_abs " + std::to_string(e.max_abs);
    }
    // The reference itself against the textbook definition in double.
    const auto brute = oracle::brute_force_conv(layer.input, layer.weights, sh);
    for (std::size_t j = 0; j < brute.size(); ++j)
      if (std::abs(ref.data()[j] - brute[j]) > 1e-4 + 1e-5 * std::abs(brute[j]))
        return "reference disagrees with definition on " + describe(sh);
  }
  if (seconds(t0) > 120.0) return "took " + std::to_string(seconds(t0)) + " s (limit 120)";
  return {};
}

// 2. The parallel direct sparse engine is deterministic across worker counts.
std::string parallel_bitwise() {
  Rng64 rng(2002);
  for (int i = 0; i < 20; ++i) {
    const ConvShape sh = oracle::random_shape(rng);
    const PreparedLayer layer = prepare_layer(sh, kSweep[i % 5], rng.next());
    const Tensor4D padded = pad_input(layer.input, sh.pad());
    const Tensor4D seq = conv_sparse_direct(padded, layer.csr_stretched, sh).output;
    for (std::size_t w : {1u, 2u, 4u, 8u})
      if (!bitwise_equal(conv_sparse_direct_parallel(padded, layer.csr_stretched, sh, w).output, seq))
        return "workers=" + std::to_string(w) + " differs on " + describe(sh);
  }
  return {};
}

// 3. Stretched column indices address the right padded-input element.
std::string stretch_addresses() {
  Rng64 rng(3003);
  for (int i = 0; i < 50; ++i) {
    const ConvShape sh = oracle::random_shape(rng);
    const PreparedLayer layer = prepare_layer(sh, 0.7, rng.next());
    const Tensor4D padded = pad_input(layer.input, sh.pad());
    const CsrMatrix& a = layer.csr;
    const CsrMatrix& b = layer.csr_stretched;
    if (a.rowptr != b.rowptr || a.value != b.value) return "structure changed on " + describe(sh);
    const std::size_t rs = sh.r() * sh.s();
    for (std::size_t j = 0; j < a.nnz(); ++j) {
      const std::size_t c = a.colidx[j] / rs, r = (a.colidx[j] % rs) / sh.s(), s = a.colidx[j] % sh.s();
      if (b.colidx[j] != (c * sh.h_pad() + r) * sh.w_pad() + s) return "colidx wrong on " + describe(sh);
      const std::size_t h = rng.below(sh.e()), w = rng.below(sh.f());
      const std::size_t flat = b.colidx[j] + h * sh.stride() * sh.w_pad() + w * sh.stride();
      if (padded.data()[flat] != padded(0, c, h * sh.stride() + r, w * sh.stride() + s))
        return "input address wrong on " + describe(sh);
    }
    const Tensor4D ref = conv_dense_direct(layer.input, layer.weights, sh).output;
    if (!compare_outputs(conv_sparse_direct(padded, b, sh).output, ref, 1e-5, 1e-6).within)
      return "stretched engine differs from the reference on " + describe(sh);
  }
  return {};
}

// 4. CSR footprint formula and its size relative to dense storage.
std::string footprint() {
  Rng64 rng(4004);
  for (int i = 0; i < 50; ++i) {
    const Tensor4D::Dims d{1 + rng.below(64), 1 + rng.below(16), 3, 3};
    const CsrMatrix a = dense_to_csr(prune_by_magnitude(random_tensor(d, rng.next()), kSweep[i % 5]));
    const std::size_t payload = 4 * (a.value.size() + a.colidx.size() + a.rowptr.size());
    if (csr_footprint_bytes(a) != payload || payload != 4 * (2 * a.nnz() + a.rows + 1))
      return "footprint mismatch";
  }
  for (const auto& cfg : parse_config(kDefaultConfig))
    for (double sp : {0.81, 0.85, 0.9, 0.95}) {
      const PreparedLayer layer = prepare_layer(cfg.shape, sp, cfg.seed);
      const double dense = 4.0 * static_cast<double>(cfg.shape.m() * cfg.shape.kernel_cols());
      if (static_cast<double>(csr_footprint_bytes(layer.csr)) >= 0.4 * dense)
        return cfg.name + " at " + std::to_string(sp) + " is not below 40% of dense";
    }
  return {};
}

// 5. The direct sparse engine executes exactly one MAC per stored weight
//    per output position.
std::string mac_count() {
  Rng64 rng(5005);
  for (int i = 0; i < 20; ++i) {
    const ConvShape sh = oracle::random_shape(rng, 10);
    const PreparedLayer layer = prepare_layer(sh, kSweep[i % 5], rng.next());
    const Tensor4D padded = pad_input(layer.input, sh.pad());
    const auto tally = oracle::instrumented_sparse_direct(padded, layer.csr_stretched, sh);
    const std::size_t want = sh.n() * layer.csr.nnz() * sh.e() * sh.f();
    if (tally.macs != want || conv_sparse_direct(padded, layer.csr_stretched, sh).macs != want)
      return "MAC count off on " + describe(sh);
  }
  const ConvShape sh(2, 32, 32, 16, 16, 3, 3, 1, 1);
  const PreparedLayer layer = prepare_layer(sh, 0.8, 9);
  const auto res = run_engine(EngineKind::SparseDirect, layer);
  const double ratio = static_cast<double>(res.macs) / static_cast<double>(sh.dense_macs());
  if (ratio > 0.2) return "80% sparse layer ran " + std::to_string(ratio) + " of dense MACs";
  return {};
}

// 6. Coalescing model: closed-form cases and address enumeration.
std::string coalescing() {
  const WarpModel w8{8, 32, 4};
  auto single_tap = [](const ConvShape& sh) {
    Tensor4D w(sh.weight_dims());
    for (std::size_t m = 0; m < sh.m(); ++m) w(m, 0, 0, 0) = 1.0f;
    return stretch_weights(dense_to_csr(w), sh);
  };
  const ConvShape s1(1, 2, 1, 16, 16, 1, 1);
  if (simulate_read_coalescing(single_tap(s1), s1, w8).coalescing_efficiency() != 1.0)
    return "aligned stride-1 reads are not fully coalesced";
  const ConvShape s2(1, 1, 1, 16, 16, 1, 1, 2, 0);
  if (simulate_read_coalescing(single_tap(s2), s2, w8).transactions_per_request() != 2.0)
    return "stride-2 reads do not take two transactions";
  if (simulate_write_coalescing(s1, w8).coalescing_efficiency() != 1.0)
    return "aligned writes are not fully coalesced";
  Rng64 rng(6006);
  for (int i = 0; i < 20; ++i) {
    const ConvShape sh = oracle::random_shape(rng);
    const WarpModel model{1 + rng.below(32), 4 * (1 + rng.below(16)), 4};
    const AccessMetrics got = simulate_write_coalescing(sh, model);
    const auto want = oracle::enumerate_writes(sh, model);
    if (got.warp_reads != want.requests || got.transactions != want.transactions ||
        got.ideal_transactions != want.ideal)
      return "write model differs from enumeration on " + describe(sh);
    const ConvShape small = oracle::random_shape(rng, 8);
    const PreparedLayer layer = prepare_layer(small, 0.8, rng.next());
    const AccessMetrics rgot = simulate_read_coalescing(layer.csr_stretched, small, model);
    const auto rwant = oracle::enumerate_reads(layer.csr_stretched, small, model);
    if (rgot.transactions != rwant.transactions || rgot.ideal_transactions != rwant.ideal)
      return "read model differs from enumeration on " + describe(small);
  }
  return {};
}

// 7. Dataflow traffic: compulsory bound and monotonicity in buffer size.
std::string dataflow() {
  Rng64 rng(7007);
  for (int i = 0; i < 20; ++i) {
    const ConvShape sh = oracle::random_shape(rng);
    const std::size_t nnz = rng.below(sh.m() * sh.kernel_cols() + 1);
    const std::size_t compulsory =
        sh.n() * sh.c() * sh.h_pad() * sh.w_pad() + 2 * nnz + sh.n() * sh.m() * sh.e() * sh.f();
    for (Dataflow d : {Dataflow::WeightStationary, Dataflow::OutputStationary, Dataflow::InputStationary}) {
      if (dataflow_traffic(sh, nnz, d, kUnboundedBuffer).total_words != compulsory)
        return std::string(dataflow_name(d)) + " misses the compulsory bound on " + describe(sh);
      std::size_t prev = SIZE_MAX;
      for (std::size_t b = 1; b <= (std::size_t{1} << 26); b *= 2) {
        const std::size_t t = dataflow_traffic(sh, nnz, d, b).total_words;
        if (t > prev || t < compulsory)
          return std::string(dataflow_name(d)) + " not monotone on " + describe(sh);
        prev = t;
      }
    }
  }
  return {};
}

// 8. Arithmetic intensity of the direct path is never below the lowered
//    path on the shipped layers.
std::string intensity() {
  for (const auto& cfg : parse_config(kDefaultConfig)) {
    const PreparedLayer layer = prepare_layer(cfg.shape, cfg.sparsity, cfg.seed);
    const double d = arithmetic_intensity(cfg.shape, layer.csr.nnz(), ConvPath::Direct);
    const double l = arithmetic_intensity(cfg.shape, layer.csr.nnz(), ConvPath::Lowered);
    if (d < l) return cfg.name + ": direct " + std::to_string(d) + " < lowered " + std::to_string(l);
    if (cfg.shape.r() * cfg.shape.s() == 1 && d != l) return cfg.name + ": 1x1 intensities differ";
  }
  return {};
}

// 9. On a 90%-sparse 3x3 layer the direct sparse engine beats both the
//    lowered sparse engine and the dense direct engine.
std::string speed() {
  const auto t0 = std::chrono::steady_clock::now();
  LayerConfig cfg{"resnet_3x3_c64", ConvShape(8, 64, 64, 32, 32, 3, 3, 1, 1), 0.9, 42};
  BenchOptions opt;
  opt.engines = {EngineKind::SparseDirect, EngineKind::LoweredSparse, EngineKind::DenseDirect};
  opt.repeats = 3;
  opt.warmup = 1;
  opt.workers = 4;
  const auto recs = run_bench(expand_cases({cfg}, {}, std::nullopt), opt);
  std::ofstream csv("acceptance_timing.csv");
  write_bench_csv(csv, recs);
  const double sd = recs[0].time_ms_mean, ls = recs[1].time_ms_mean, dd = recs[2].time_ms_mean;
  std::printf("    sparse-direct %.2f ms: %.2fx over lowered-sparse, %.2fx over dense-direct\n", sd,
              ls / sd, dd / sd);
  std::ostringstream why;
  if (!(sd < ls && sd < dd))
    why << "sparse-direct " << sd << " ms, lowered-sparse " << ls << " ms, dense-direct " << dd << " ms";
  if (seconds(t0) > 60.0) why << " took " << seconds(t0) << " s (limit 60)";
  return why.str();
}

int cli_code(std::vector<std::string> args) {
  args.insert(args.begin(), "escort");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  return cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
}

// 10. Weight files round-trip bitwise; malformed inputs map to their exit codes.
std::string io_and_exit_codes() {
  const auto dir = std::filesystem::temp_directory_path() / "escort_acceptance";
  std::filesystem::create_directories(dir);
  Rng64 rng(1010);
  for (int i = 0; i < 20; ++i) {
    const ConvShape sh = oracle::random_shape(rng);
    const PreparedLayer layer = prepare_layer(sh, kSweep[i % 5], rng.next());
    const std::string p = (dir / "w.bin").string();
    write_weights(layer.csr, p);
    if (!(read_weights(p) == layer.csr)) return "plain round trip differs";
    write_weights(layer.csr_stretched, p);
    if (!(read_weights(p, sh) == layer.csr_stretched)) return "stretched round trip differs";
  }
  std::vector<std::uint8_t> bytes = encode_weights(prepare_layer(ConvShape(1, 4, 2, 5, 5, 3, 3), 0.5, 1).csr);
  bytes[0] = 'Z';
  try {
    decode_weights(bytes);
    return "bad magic accepted";
  } catch (const WeightFormatError&) {
  }
  const std::string body = "m = 2\nc = 2\nh = 5\nw = 5\nr = 3\ns = 3\n";
  const std::pair<const char*, std::string> error_classes[] = {
      {"unknown key", "layer x\nm = 2\nwidth = 3\n"},
      {"duplicate key", "layer x\n" + body + "m = 3\n"},
      {"duplicate layer", "layer x\n" + body + "\nlayer x\n" + body},
      {"invalid value", "layer x\nm = two\n"},
      {"out-of-range sparsity", "layer x\n" + body + "sparsity = 1.2\n"},
      {"key outside a record", "m = 2\n"},
      {"missing required key", "layer x\nm = 2\nc = 2\n"},
      {"malformed line", "layer x\nm 2\n"},
  };
  for (const auto& [label, text] : error_classes) {
    const std::string p = (dir / "bad.cfg").string();
    std::ofstream(p) << text;
    if (const int got = cli_code({"verify", "--config", p}); got != 2)
      return std::string(label) + " exited " + std::to_string(got) + ", want 2";
  }
  const std::string good_cfg = (dir / "good.cfg").string();
  std::ofstream(good_cfg) << "layer x\nm = 2\nc = 2\nh = 5\nw = 5\nr = 3\ns = 3\nsparsity = 0.5\n";
  const std::string corrupt = (dir / "corrupt.bin").string();
  std::ofstream(corrupt, std::ios::binary).write(reinterpret_cast<const char*>(bytes.data()),
                                                 static_cast<std::streamsize>(bytes.size()));

  const std::pair<std::vector<std::string>, int> cases[] = {
      {{"verify", "--config", good_cfg}, 0},
      {{"verify", "--config", good_cfg, "--engine", "warp-drive"}, 1},
      {{"verify", "--config", good_cfg, "--inject-fault"}, 3},
      {{"verify", "--config", (dir / "missing.cfg").string()}, 4},
      {{"prune", "--config", good_cfg, "--dense", corrupt, "--out", (dir / "o.bin").string()}, 4},
  };
  for (const auto& [args, want] : cases)
    if (const int got = cli_code(args); got != want)
      return args[0] + " " + args.back() + " exited " + std::to_string(got) + ", want " + std::to_string(want);
  std::filesystem::remove_all(dir);
  return {};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<std::string()>>> criteria = {
      {"engines agree with the reference on 200 random layers", engines_agree},
      {"parallel direct sparse output is bitwise stable for 1/2/4/8 workers", parallel_bitwise},
      {"stretched indices address the correct padded input", stretch_addresses},
      {"CSR footprint formula and < 40% of dense above 80% sparsity", footprint},
      {"direct sparse MAC count equals n*nnz*E*F", mac_count},
      {"coalescing model closed forms and enumeration", coalescing},
      {"dataflow traffic bound and monotonicity", dataflow},
      {"direct arithmetic intensity >= lowered on shipped layers", intensity},
      {"direct sparse is fastest on a 90%-sparse 3x3 layer", speed},
      {"weight file round trip and CLI exit codes", io_and_exit_codes},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    std::string why;
    try {
      why = criteria[i].second();
    } catch (const std::exception& e) {
      why = std::string("exception: ") + e.what();
    }
    char timing[32];
    std::snprintf(timing, sizeof timing, "%.2f s", seconds(t0));
    if (why.empty()) {
      std::cout << "PASS [" << i + 1 << "] " << criteria[i].first << " (" << timing << ")\n";
    } else {
      ++failed;
      std::cout << "FAIL [" << i + 1 << "] " << criteria[i].first << ": " << why << " (" << timing << ")\n";
    }
    std::cout.flush();
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed\n";
  return failed == 0 ? 0 : 1;
}
